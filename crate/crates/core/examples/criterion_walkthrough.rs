// Two iterations on a five-example decay corpus: raw costs, relative
// decreases, and the normalized criteria, checked against the closed form.
//
//     cargo run --example criterion_walkthrough

use dynsample::criterion::{compute_dif, compute_weights, normalize_criteria};
use dynsample::learners::DecayParams;
use dynsample::{CorpusLedger, DecaySimLearner, Learner};

fn main() {
    let params = vec![
        DecayParams {
            initial: 2.0,
            rate: 2.5,
            floor: 1.0,
        }, // learned almost at once
        DecayParams {
            initial: 2.0,
            rate: 0.2,
            floor: 1.0,
        }, // still improving
        DecayParams {
            initial: 3.0,
            rate: 0.05,
            floor: 1.5,
        }, // slow
        DecayParams {
            initial: 1.0,
            rate: 0.0,
            floor: 2.0,
        }, // never improves
        DecayParams {
            initial: 2.5,
            rate: 0.6,
            floor: 0.5,
        },
    ];
    let mut learner = DecaySimLearner::new(params.clone(), vec![(2.0, 1.0)]).unwrap();
    let mut ledger = CorpusLedger::new(params.len(), 0).unwrap();

    for _ in 0..2 {
        let plan = dynsample::samplers::sample_full(&ledger);
        let costs = learner.train_iteration(&plan, 1).unwrap();
        ledger.record_costs(&costs).unwrap();
    }
    let report = normalize_criteria(&mut ledger).unwrap();
    let weights = compute_weights(&ledger).unwrap();

    println!(
        "dif range [{:.4}, {:.4}] over {} examples",
        report.dif_min, report.dif_max, report.eligible_count
    );
    println!(" id   prev    curr     dif   oracle  criterion  weight");
    for (r, p) in ledger.records().iter().zip(&params) {
        // Trained once before, once in the latest iteration.
        let decayed = p.initial * (-p.rate).exp();
        let oracle = (1.0 - (-p.rate).exp()) * decayed / (p.floor + decayed);
        let dif = compute_dif(r).unwrap();
        assert!((dif - oracle).abs() < 1e-12);
        println!(
            "{:>3} {:>6.3} {:>7.3} {:>7.4} {:>8.4} {:>10.4} {:>7.4}",
            r.id,
            r.prev_cost.unwrap(),
            r.curr_cost.unwrap(),
            dif,
            oracle,
            r.criterion.unwrap(),
            weights[&r.id],
        );
    }
    let total: f64 = weights.values().sum();
    println!("weights sum to {total}");
}
