// Analytic gradient of the softmax next-token model against central
// finite differences, before and after some training.
//
//     cargo run --example gradient_check

use dynsample::config::SoftmaxSeqConfig;
use dynsample::samplers::sample_full;
use dynsample::{CorpusLedger, Learner, SoftmaxSeqLearner};

fn main() {
    let config = SoftmaxSeqConfig {
        vocab_size: 6,
        sources: 2,
        easy_sources: 1,
        seq_len: 8,
        learning_rate: 0.5,
        ..Default::default()
    };
    let mut learner = SoftmaxSeqLearner::generate(&config, 5, 0.2, 1).unwrap();
    println!(
        "zero weights:    max relative error {:.2e}",
        learner.gradient_check()
    );

    let plan = sample_full(&CorpusLedger::new(learner.len(), 0).unwrap());
    for _ in 0..10 {
        learner.train_iteration(&plan, 1).unwrap();
    }
    println!(
        "after training:  max relative error {:.2e}",
        learner.gradient_check()
    );
    println!(
        "dev cost per sequence {:.4} (uniform model: {:.4})",
        learner.dev_cost(),
        (config.seq_len - 1) as f64 * (config.vocab_size as f64).ln()
    );
}
