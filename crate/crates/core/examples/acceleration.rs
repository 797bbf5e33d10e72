// Examples needed to reach a calibrated dev-cost threshold, per strategy,
// on the decay simulator with mixed learnabilities. Uses the shipped
// configs in examples/configs.
//
//     cargo run --release --example acceleration
//     SEEDS=5 cargo run --release --example acceleration

use dynsample::harness::compare_strategies;
use dynsample::ExperimentConfig;

fn config(name: &str, seed: u64) -> ExperimentConfig {
    let path = format!(
        "{}/examples/configs/{name}.toml",
        env!("CARGO_MANIFEST_DIR")
    );
    ExperimentConfig::load(path.as_ref(), &[format!("experiment.seed={seed}")]).unwrap()
}

fn main() {
    let seeds: u64 = std::env::var("SEEDS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let names = ["full", "ws", "rm", "uniform", "hard_removal"];
    let mut totals = vec![0.0; names.len()];

    for seed in 0..seeds {
        let configs: Vec<_> = names.iter().map(|n| config(n, seed)).collect();
        let report = compare_strategies(&configs).unwrap();
        println!(
            "seed {seed}: initial dev {:.4}, best full {:.4}, threshold {:.4}",
            report.initial_dev_cost, report.calibration_best_dev_cost, report.threshold
        );
        for (run, total) in report.runs.iter().zip(&mut totals) {
            let reached = run.examples_to_threshold;
            *total += reached.unwrap_or(f64::NAN);
            println!(
                "  {:<13} threshold after {:>9} examples, best {:.4}, final {:.4}",
                run.strategy.as_str(),
                reached.map_or("(never)".into(), |x| format!("{x:.0}")),
                run.best_dev_cost,
                run.final_dev_cost,
            );
        }
    }

    let full = totals[0];
    println!("\nmean savings vs full over {seeds} seed(s):");
    for (name, total) in names.iter().zip(&totals).skip(1) {
        let saving = 1.0 - total / full;
        if saving.is_nan() {
            println!("  {name:<13}    n/a (threshold not reached)");
        } else {
            println!("  {name:<13} {:>6.1}%", 100.0 * saving);
        }
    }
}
