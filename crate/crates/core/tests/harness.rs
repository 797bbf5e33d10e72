use dynsample::config::{
    DecaySimConfig, ExperimentSection, LearnerConfig, OutputSection, SoftmaxSeqConfig,
};
use dynsample::harness::{compare_strategies, run_experiment, run_noise_experiment};
use dynsample::{Error, Experiment, ExperimentConfig, Group, SamplerConfig, Strategy};

fn decay(strategy: Strategy, n: usize, iterations: u32, noise: f64) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentSection {
            name: strategy.to_string(),
            total_iterations: iterations,
            corpus_size: n,
            noise_fraction: noise,
            seed: 11,
            checkpoint_every: 0,
        },
        sampler: SamplerConfig::new(strategy),
        learner: LearnerConfig::DecaySim(DecaySimConfig::default()),
        output: OutputSection::default(),
    }
}

fn cumulative(exp: &Experiment) -> u64 {
    exp.rows().last().unwrap().cumulative_examples_trained
}

#[test]
fn full_trains_everything_every_iteration() {
    let exp = run_experiment(&decay(Strategy::Full, 100, 10, 0.0)).unwrap();
    assert_eq!(cumulative(&exp), 1000);
    assert_eq!(exp.rows().len(), 10);
}

#[test]
fn ws_trains_eighty_percent_after_warmup() {
    let exp = run_experiment(&decay(Strategy::WeightedSampling, 100, 10, 0.0)).unwrap();
    assert_eq!(cumulative(&exp), 100 * 2 + 80 * 8);
    let sampled: Vec<bool> = exp.rows().iter().map(|r| r.sampling_event).collect();
    assert_eq!(&sampled[..3], &[false, false, true]);
}

#[test]
fn epochs_multiply_examples_trained() {
    let mut c = decay(Strategy::Full, 50, 4, 0.0);
    c.sampler.epochs_per_iteration = 3;
    assert_eq!(cumulative(&run_experiment(&c).unwrap()), 50 * 4 * 3);
}

#[test]
fn rm_pool_sizes_follow_recurrence() {
    let exp = run_experiment(&decay(Strategy::ReviewMechanism, 100, 5, 0.0)).unwrap();
    let got: Vec<(usize, usize, usize)> = exp
        .rows()
        .iter()
        .map(|r| (r.active_count, r.dlow_count, r.review_count))
        .collect();
    assert_eq!(
        got,
        vec![
            (100, 0, 0),
            (100, 0, 0),
            (80, 20, 2),
            (64, 36, 4),
            (51, 49, 5)
        ]
    );
    let selected: Vec<usize> = exp.rows().iter().map(|r| r.selected_count).collect();
    assert_eq!(selected, vec![100, 100, 82, 68, 56]);
}

#[test]
fn metrics_rows_are_monotone() {
    for s in Strategy::ALL {
        let exp = run_experiment(&decay(s, 200, 8, 0.1)).unwrap();
        for w in exp.rows().windows(2) {
            assert_eq!(w[1].iteration, w[0].iteration + 1);
            assert!(
                w[1].cumulative_examples_trained > w[0].cumulative_examples_trained,
                "{s}"
            );
        }
    }
}

#[test]
fn ws_round_one_underweights_noise() {
    let t = run_noise_experiment(&decay(Strategy::WeightedSampling, 1000, 4, 0.2)).unwrap();
    assert!(t.rounds[0].fraction < 0.2, "{:?}", t.rounds);
}

#[test]
fn rm_demotes_every_noise_example_by_round_two() {
    let exp = run_experiment(&decay(Strategy::ReviewMechanism, 1000, 4, 0.2)).unwrap();
    let noisy: Vec<_> = exp
        .ledger()
        .records()
        .iter()
        .filter(|r| r.is_noise)
        .collect();
    assert_eq!(noisy.len(), 200);
    assert!(noisy.iter().all(|r| r.group == Group::LowCriterion));
}

#[test]
fn zero_noise_gives_zero_trajectory() {
    let t = run_noise_experiment(&decay(Strategy::WeightedSampling, 300, 6, 0.0)).unwrap();
    assert_eq!(t.rounds.len(), 4);
    assert!(t.rounds.iter().all(|r| r.fraction == 0.0));
}

#[test]
fn comparison_is_deterministic_and_adds_calibration() {
    let configs = [
        decay(Strategy::WeightedSampling, 300, 20, 0.0),
        decay(Strategy::ReviewMechanism, 300, 20, 0.0),
    ];
    let a = compare_strategies(&configs).unwrap();
    let b = compare_strategies(&configs).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.run(Strategy::Full).is_some());
    assert!(a.threshold < a.initial_dev_cost);
}

#[test]
fn comparison_rejects_mismatched_corpora() {
    let a = decay(Strategy::WeightedSampling, 300, 20, 0.0);
    let b = decay(Strategy::ReviewMechanism, 400, 20, 0.0);
    assert!(matches!(
        compare_strategies(&[a.clone(), b]),
        Err(Error::InvalidComparison(_))
    ));
    let mut c = decay(Strategy::Full, 300, 20, 0.0);
    c.learner = LearnerConfig::SoftmaxSeq(SoftmaxSeqConfig::default());
    assert!(matches!(
        compare_strategies(&[a, c]),
        Err(Error::InvalidComparison(_))
    ));
}

#[test]
fn hard_removal_only_ever_shrinks() {
    let exp = run_experiment(&decay(Strategy::HardRemoval, 200, 6, 0.0)).unwrap();
    let active: Vec<usize> = exp.rows().iter().map(|r| r.active_count).collect();
    assert_eq!(active, vec![200, 160, 128, 102, 82, 66]);
    assert!(exp
        .ledger()
        .records()
        .iter()
        .all(|r| r.group != Group::LowCriterion));
}
