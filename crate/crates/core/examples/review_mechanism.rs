// The review mechanism's pool bookkeeping over 20 iterations: the active
// pool shrinks by the selection ratio, demoted examples never return, and
// a fixed fraction of the demoted pool is reviewed each time.
//
//     cargo run --example review_mechanism

use dynsample::config::{DecaySimConfig, ExperimentSection, LearnerConfig, OutputSection};
use dynsample::samplers::{review_count, selection_count};
use dynsample::{Experiment, ExperimentConfig, SamplerConfig, Strategy};

fn main() {
    let config = ExperimentConfig {
        experiment: ExperimentSection {
            name: "rm-bookkeeping".into(),
            total_iterations: 20,
            corpus_size: 1000,
            noise_fraction: 0.2,
            seed: 3,
            checkpoint_every: 0,
        },
        sampler: SamplerConfig::new(Strategy::ReviewMechanism),
        learner: LearnerConfig::DecaySim(DecaySimConfig::default()),
        output: OutputSection::default(),
    };
    let ratio = config.sampler.selection_ratio;
    let lambda = config.sampler.review_fraction;
    let mut exp = Experiment::new(config).unwrap();

    println!("iter  active  d_low  review  selected  noise%");
    let mut expected_active = 1000;
    while !exp.is_finished() {
        let row = exp.step().unwrap().clone();
        if row.sampling_event {
            expected_active = selection_count(ratio, expected_active);
            assert_eq!(row.active_count, expected_active);
            assert_eq!(row.review_count, review_count(lambda, row.dlow_count));
        }
        println!(
            "{:>4} {:>7} {:>6} {:>7} {:>9} {:>7.1}",
            row.iteration,
            row.active_count,
            row.dlow_count,
            row.review_count,
            row.selected_count,
            100.0 * row.noise_fraction_in_selected,
        );
    }
    println!("\nplan log tail:");
    for line in exp.plan_log().iter().rev().take(3).rev() {
        println!("  {line}");
    }
}
