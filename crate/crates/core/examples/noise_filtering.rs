// Softmax next-token model on a corpus with 20% misaligned sequences.
// Prints the noise share of each sampling round and how far dev cost
// drifts up after its best point.
//
//     cargo run --release --example noise_filtering

use dynsample::harness::{run_experiment, NoiseTrajectory};
use dynsample::ExperimentConfig;

fn main() {
    let seed: u64 = std::env::var("SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    for name in ["noise_full", "noise_ws", "noise_rm", "noise_hard_removal"] {
        let path = format!(
            "{}/examples/configs/{name}.toml",
            env!("CARGO_MANIFEST_DIR")
        );
        let config =
            ExperimentConfig::load(path.as_ref(), &[format!("experiment.seed={seed}")]).unwrap();
        let exp = run_experiment(&config).unwrap();

        let rows = exp.rows();
        let best = rows
            .iter()
            .map(|r| r.dev_cost)
            .fold(f64::INFINITY, f64::min);
        let last = rows.last().unwrap().dev_cost;
        let trajectory = NoiseTrajectory::from_rows(config.experiment.noise_fraction, rows);
        let shares: Vec<String> = trajectory
            .rounds
            .iter()
            .take(4)
            .map(|r| format!("{:.1}%", 100.0 * r.fraction))
            .collect();

        println!(
            "{:<13} dev {:.3} -> best {:.3}, final {:.3} (+{:.2}%)",
            config.sampler.strategy.as_str(),
            exp.initial_dev_cost(),
            best,
            last,
            100.0 * (last - best) / best
        );
        if !shares.is_empty() {
            println!(
                "              noise in selection: 20.0% -> {}",
                shares.join(" -> ")
            );
        }
    }
}
