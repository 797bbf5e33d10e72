//! Cost-delta criterion and sampling weights.
//!
//! For an example trained in two iterations with costs `prev` and `curr`, the
//! dif is `(prev - curr) / prev`. Difs of the examples trained in the latest
//! iteration are min-max normalized into a criterion in `[0, 1]`, and the
//! weights of the active pool are the criteria divided by their sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ledger::{CorpusLedger, Group, SentenceId, SentenceRecord};
use crate::{Error, Result};

/// Criterion assigned to examples that have never been scored, and to every
/// eligible example when all difs are equal.
pub const UNSCORED_CRITERION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub dif_min: f64,
    pub dif_max: f64,
    /// Records that were trained in the latest iteration and have a defined dif.
    pub eligible_count: usize,
    pub degenerate: bool,
    /// Freshly trained records whose previous cost was zero.
    pub guarded_count: usize,
}

/// Relative cost decrease between the two most recent trainings of `record`.
///
/// Absent when either cost is missing or the previous cost is not positive.
pub fn compute_dif(record: &SentenceRecord) -> Option<f64> {
    match (record.prev_cost, record.curr_cost) {
        (Some(prev), Some(curr)) if prev > 0.0 => Some((prev - curr) / prev),
        _ => None,
    }
}

/// Min-max normalization of `values`; all ones when the values are all equal.
///
/// Returns the normalized values with the observed minimum and maximum.
pub fn min_max_normalize(values: &[f64]) -> (Vec<f64>, f64, f64) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let normalized = if span > 0.0 {
        values
            .iter()
            .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![UNSCORED_CRITERION; values.len()]
    };
    (normalized, lo, hi)
}

/// Recomputes criteria for the examples trained in the latest completed
/// iteration.
///
/// Extrema are taken over those examples only; every other record keeps its
/// criterion, or receives [`UNSCORED_CRITERION`] if it never had one.
pub fn normalize_criteria(ledger: &mut CorpusLedger) -> Result<CriterionReport> {
    let latest = ledger.iteration();
    let mut eligible = Vec::new();
    let mut difs = Vec::new();
    let mut guarded = Vec::new();
    if latest > 0 {
        for r in ledger.records() {
            if r.last_trained_iteration != Some(latest) {
                continue;
            }
            match compute_dif(r) {
                Some(d) => {
                    eligible.push(r.id);
                    difs.push(d);
                }
                None if r.prev_cost == Some(0.0) => guarded.push(r.id),
                None => {}
            }
        }
    }
    if eligible.is_empty() {
        return Err(Error::NotReady(format!(
            "no example trained in iteration {latest} has two recorded costs"
        )));
    }

    let (criteria, dif_min, dif_max) = min_max_normalize(&difs);
    let records = ledger.records_mut();
    for id in guarded.iter() {
        records[id.0].dif = None;
        records[id.0].cost_guarded = true;
    }
    for ((id, dif), criterion) in eligible.iter().zip(&difs).zip(&criteria) {
        let r = &mut records[id.0];
        r.dif = Some(*dif);
        r.criterion = Some(*criterion);
        r.cost_guarded = false;
    }
    for r in records.iter_mut() {
        if r.criterion.is_none() {
            r.criterion = Some(UNSCORED_CRITERION);
        }
    }

    Ok(CriterionReport {
        dif_min,
        dif_max,
        eligible_count: eligible.len(),
        degenerate: dif_max == dif_min,
        guarded_count: guarded.len(),
    })
}

/// Sampling weights of the active pool: each criterion over the pool's total.
///
/// Falls back to uniform weights when the total criterion mass is zero.
pub fn compute_weights(ledger: &CorpusLedger) -> Result<BTreeMap<SentenceId, f64>> {
    let mut active = Vec::new();
    for r in ledger.records().iter().filter(|r| r.group == Group::Active) {
        let c = r
            .criterion
            .ok_or_else(|| Error::NotReady(format!("active sentence {} has no criterion", r.id)))?;
        active.push((r.id, c));
    }
    if active.is_empty() {
        return Err(Error::NotReady("active pool is empty".into()));
    }
    let total: f64 = active.iter().map(|(_, c)| c).sum();
    let weights = if total > 0.0 {
        active.into_iter().map(|(id, c)| (id, c / total)).collect()
    } else {
        let uniform = 1.0 / active.len() as f64;
        active.into_iter().map(|(id, _)| (id, uniform)).collect()
    };
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(prev: Option<f64>, curr: Option<f64>) -> SentenceRecord {
        let mut l = CorpusLedger::new(1, 0).unwrap();
        let r = &mut l.records_mut()[0];
        r.prev_cost = prev;
        r.curr_cost = curr;
        r.clone()
    }

    /// Two full iterations with the given cost pairs.
    fn ledger_with(pairs: &[(f64, f64)]) -> CorpusLedger {
        let mut l = CorpusLedger::new(pairs.len(), 0).unwrap();
        for pick in [0usize, 1] {
            let map = pairs
                .iter()
                .enumerate()
                .map(|(i, p)| (SentenceId(i), if pick == 0 { p.0 } else { p.1 }))
                .collect();
            l.record_costs(&map).unwrap();
        }
        l
    }

    #[test]
    fn dif_examples() {
        assert_eq!(compute_dif(&record(Some(4.0), Some(2.0))), Some(0.5));
        assert_eq!(compute_dif(&record(Some(2.0), Some(3.0))), Some(-0.5));
        assert_eq!(compute_dif(&record(None, Some(3.0))), None);
        assert_eq!(compute_dif(&record(Some(0.0), Some(3.0))), None);
    }

    #[test]
    fn normalizes_extrema_and_midpoint() {
        let mut l = ledger_with(&[(4.0, 2.0), (3.0, 3.0), (2.0, 3.0)]);
        let report = normalize_criteria(&mut l).unwrap();
        let c: Vec<_> = l.records().iter().map(|r| r.criterion.unwrap()).collect();
        assert_eq!(c, vec![1.0, 0.5, 0.0]);
        assert_eq!((report.dif_min, report.dif_max), (-0.5, 0.5));
        assert_eq!(report.eligible_count, 3);
        assert!(!report.degenerate);
    }

    #[test]
    fn degenerate_gives_all_ones() {
        let mut l = ledger_with(&[(4.0, 2.0), (2.0, 1.0), (8.0, 4.0)]);
        let report = normalize_criteria(&mut l).unwrap();
        assert!(report.degenerate);
        assert!(l.records().iter().all(|r| r.criterion == Some(1.0)));
    }

    #[test]
    fn stale_criterion_carries_forward() {
        // ids 0,1 trained twice; id 2 trained once long ago with a stale criterion.
        let mut l = CorpusLedger::new(3, 0).unwrap();
        let m = |v: &[(usize, f64)]| v.iter().map(|&(i, c)| (SentenceId(i), c)).collect();
        l.record_costs(&m(&[(0, 10.0), (1, 10.0), (2, 5.0)]))
            .unwrap();
        l.records_mut()[2].criterion = Some(0.3);
        l.record_costs(&m(&[(0, 8.0), (1, 2.0)])).unwrap();
        normalize_criteria(&mut l).unwrap();
        let c: Vec<_> = l.records().iter().map(|r| r.criterion.unwrap()).collect();
        assert_eq!(c, vec![0.0, 1.0, 0.3]);
        assert_eq!(l.records()[2].dif, None);
    }

    #[test]
    fn never_scored_records_default_to_one() {
        let mut l = CorpusLedger::new(3, 0).unwrap();
        let m = |v: &[(usize, f64)]| v.iter().map(|&(i, c)| (SentenceId(i), c)).collect();
        l.record_costs(&m(&[(0, 10.0), (1, 10.0)])).unwrap();
        l.record_costs(&m(&[(0, 8.0), (1, 2.0)])).unwrap();
        normalize_criteria(&mut l).unwrap();
        assert_eq!(l.records()[2].criterion, Some(1.0));
    }

    #[test]
    fn not_ready_before_two_costs() {
        let mut l = CorpusLedger::new(2, 0).unwrap();
        assert!(matches!(
            normalize_criteria(&mut l),
            Err(Error::NotReady(_))
        ));
        l.record_costs(&[(SentenceId(0), 1.0)].into_iter().collect())
            .unwrap();
        assert!(matches!(
            normalize_criteria(&mut l),
            Err(Error::NotReady(_))
        ));
        assert!(l.records().iter().all(|r| r.criterion.is_none()));
    }

    #[test]
    fn zero_previous_cost_is_guarded() {
        let mut l = ledger_with(&[(0.0, 1.0), (4.0, 2.0), (4.0, 1.0)]);
        let report = normalize_criteria(&mut l).unwrap();
        assert_eq!(report.guarded_count, 1);
        assert!(l.records()[0].cost_guarded);
        assert_eq!(l.records()[0].dif, None);
        assert_eq!(l.records()[0].criterion, Some(UNSCORED_CRITERION));
    }

    #[test]
    fn weight_examples() {
        let mut l = CorpusLedger::new(3, 0).unwrap();
        for (r, c) in l.records_mut().iter_mut().zip([1.0, 0.5, 0.5]) {
            r.criterion = Some(c);
        }
        let w: Vec<_> = compute_weights(&l).unwrap().into_values().collect();
        assert_eq!(w, vec![0.5, 0.25, 0.25]);

        for r in l.records_mut() {
            r.criterion = Some(0.0);
        }
        let w: Vec<_> = compute_weights(&l).unwrap().into_values().collect();
        assert_eq!(w, vec![1.0 / 3.0; 3]);

        let mut single = CorpusLedger::new(1, 0).unwrap();
        single.records_mut()[0].criterion = Some(1.0);
        assert_eq!(compute_weights(&single).unwrap()[&SentenceId(0)], 1.0);
    }

    #[test]
    fn weights_need_criteria_and_skip_demoted() {
        let mut l = CorpusLedger::new(3, 0).unwrap();
        assert!(matches!(compute_weights(&l), Err(Error::NotReady(_))));
        l.records_mut()[0].criterion = Some(0.2);
        l.records_mut()[1].criterion = Some(0.2);
        l.records_mut()[2].group = Group::LowCriterion;
        let w = compute_weights(&l).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[&SentenceId(0)], 0.5);
    }

    proptest! {
        #[test]
        fn affine_invariance(
            difs in proptest::collection::vec(-5.0f64..5.0, 2..50),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let (base, lo, hi) = min_max_normalize(&difs);
            prop_assume!(hi - lo > 1e-6);
            let moved: Vec<f64> = difs.iter().map(|d| a * d + b).collect();
            let (shifted, _, _) = min_max_normalize(&moved);
            for (x, y) in base.iter().zip(&shifted) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn extrema_map_to_zero_and_one(difs in proptest::collection::vec(-5.0f64..5.0, 2..50)) {
            let (c, lo, hi) = min_max_normalize(&difs);
            prop_assume!(hi > lo);
            for (d, c) in difs.iter().zip(&c) {
                prop_assert!((0.0..=1.0).contains(c));
                if *d == lo { prop_assert_eq!(*c, 0.0); }
                if *d == hi { prop_assert_eq!(*c, 1.0); }
            }
        }

        #[test]
        fn weights_sum_to_one(criteria in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let mut l = CorpusLedger::new(criteria.len(), 0).unwrap();
            for (r, c) in l.records_mut().iter_mut().zip(&criteria) {
                r.criterion = Some(*c);
            }
            let w = compute_weights(&l).unwrap();
            let sum: f64 = w.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9);
            prop_assert!(w.values().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn normalization_is_idempotent(pairs in proptest::collection::vec((0.1f64..10.0, 0.0f64..10.0), 1..40)) {
            let mut l = ledger_with(&pairs);
            let first = normalize_criteria(&mut l).unwrap();
            let snap = l.clone();
            let second = normalize_criteria(&mut l).unwrap();
            prop_assert_eq!(first, second);
            prop_assert_eq!(l, snap);
        }
    }
}
