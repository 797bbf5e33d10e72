//! Dynamic per-example sampling for iterative training.
//!
//! After every training iteration each example's cost is compared with its
//! cost from the previous iteration. The relative decrease is min-max
//! normalized into a criterion in `[0, 1]`, and the next iteration's
//! training set is drawn from those criteria: either by weighted sampling
//! without replacement ([`Strategy::WeightedSampling`]) or by keeping the
//! top-ranked examples and reviewing a small slice of the demoted pool
//! ([`Strategy::ReviewMechanism`]).
//!
//! The scheduler is trainer-agnostic: anything implementing [`Learner`] can
//! be driven by the [`harness`]. Two learners ship with the crate: a
//! closed-form decay simulator and a softmax next-token predictor trained
//! with plain SGD.
//!
//! ```
//! use dynsample::{criterion, samplers, CorpusLedger, SamplerConfig, SentenceId, Strategy};
//! use std::collections::BTreeMap;
//!
//! let mut ledger = CorpusLedger::new(5, 7).unwrap();
//! for costs in [[4.0, 3.0, 2.0, 5.0, 1.0], [2.0, 2.9, 1.0, 5.5, 0.9]] {
//!     let costs: BTreeMap<_, _> = costs
//!         .iter()
//!         .enumerate()
//!         .map(|(i, &c)| (SentenceId(i), c))
//!         .collect();
//!     ledger.record_costs(&costs).unwrap();
//! }
//! criterion::normalize_criteria(&mut ledger).unwrap();
//!
//! let config = SamplerConfig::new(Strategy::WeightedSampling);
//! let plan = samplers::plan_next(&mut ledger, &config).unwrap();
//! assert_eq!(plan.selected.len(), 4);
//! ```

pub mod cli;
pub mod config;
pub mod criterion;
mod error;
pub mod harness;
pub mod learners;
pub mod ledger;
pub mod samplers;

pub use config::ExperimentConfig;
pub use criterion::CriterionReport;
pub use error::{Error, Result};
pub use harness::{Experiment, MetricsRow};
pub use learners::{DecaySimLearner, Learner, SoftmaxSeqLearner};

pub use ledger::{CorpusLedger, Group, SentenceId, SentenceRecord};
pub use samplers::{IterationPlan, SamplerConfig, Strategy};

/// Round half away from zero.
pub(crate) fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}
