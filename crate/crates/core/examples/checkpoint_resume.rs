// Interrupt a run, serialize it, restore it and finish: the metrics match
// an uninterrupted run byte for byte.
//
//     cargo run --example checkpoint_resume

use dynsample::{Experiment, ExperimentConfig};

fn main() {
    let path = format!("{}/examples/configs/quick.toml", env!("CARGO_MANIFEST_DIR"));
    let config = ExperimentConfig::load(path.as_ref(), &[]).unwrap();

    let mut straight = Experiment::new(config.clone()).unwrap();
    straight.run(|_| {}).unwrap();

    let mut first = Experiment::new(config).unwrap();
    for _ in 0..5 {
        first.step().unwrap();
    }
    let saved = first.checkpoint();
    drop(first);
    println!("checkpoint after iteration 5: {} bytes", saved.len());

    let mut resumed = Experiment::restore(&saved).unwrap();
    resumed
        .run(|row| {
            println!(
                "  resumed iteration {:>2}: dev {:.5}",
                row.iteration, row.dev_cost
            )
        })
        .unwrap();

    assert_eq!(straight.metrics_csv(), resumed.metrics_csv());
    assert_eq!(straight.plan_log_text(), resumed.plan_log_text());
    println!(
        "metrics.csv identical ({} bytes)",
        resumed.metrics_csv().len()
    );
}
