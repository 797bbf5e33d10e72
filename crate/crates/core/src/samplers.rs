//! Next-iteration training-set selection.

use std::cmp::Ordering;
use std::fmt;

use rand::distributions::Open01;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::criterion::compute_weights;
use crate::ledger::{CorpusLedger, Group, SentenceId};
use crate::{round_count, Error, Result};

/// Number of completed iterations after which WS and RM start sampling.
pub const WARMUP_ITERATIONS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Train every active example each iteration.
    #[serde(rename = "full")]
    Full,
    /// Weighted sampling without replacement, weights from normalized criteria.
    #[serde(rename = "ws")]
    WeightedSampling,
    /// Keep the top-ranked criteria, demote the rest, review a slice of the demoted pool.
    #[serde(rename = "rm")]
    ReviewMechanism,
    /// Baseline: permanently drop the lowest raw-cost examples.
    #[serde(rename = "hard_removal")]
    HardRemoval,
    /// Baseline: uniform sampling without replacement.
    #[serde(rename = "uniform")]
    UniformRandom,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Full,
        Strategy::WeightedSampling,
        Strategy::ReviewMechanism,
        Strategy::HardRemoval,
        Strategy::UniformRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Full => "full",
            Strategy::WeightedSampling => "ws",
            Strategy::ReviewMechanism => "rm",
            Strategy::HardRemoval => "hard_removal",
            Strategy::UniformRandom => "uniform",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "sampler.strategy",
                    format!("unknown strategy {s:?}; expected one of full, ws, rm, hard_removal, uniform"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    /// Fraction of the active pool kept per sampling event.
    #[serde(default = "default_selection_ratio")]
    pub selection_ratio: f64,
    /// Fraction of the demoted pool reviewed per iteration (RM only).
    #[serde(default = "default_review_fraction")]
    pub review_fraction: f64,
    #[serde(default = "default_epochs")]
    pub epochs_per_iteration: u32,
}

fn default_selection_ratio() -> f64 {
    0.8
}
fn default_review_fraction() -> f64 {
    0.1
}
fn default_epochs() -> u32 {
    1
}

impl SamplerConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            selection_ratio: default_selection_ratio(),
            review_fraction: default_review_fraction(),
            epochs_per_iteration: default_epochs(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.selection_ratio > 0.0 && self.selection_ratio <= 1.0) {
            return Err(Error::config(
                "sampler.selection_ratio",
                format!("must be in (0, 1], got {}", self.selection_ratio),
            ));
        }
        if !(self.review_fraction >= 0.0 && self.review_fraction < 1.0) {
            return Err(Error::config(
                "sampler.review_fraction",
                format!("must be in [0, 1), got {}", self.review_fraction),
            ));
        }
        if self.epochs_per_iteration == 0 {
            return Err(Error::config(
                "sampler.epochs_per_iteration",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// The set of examples to train in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationPlan {
    /// 1-based index of the iteration this plan trains.
    pub iteration: u32,
    pub strategy: Strategy,
    /// Sorted, duplicate-free.
    pub selected: Vec<SentenceId>,
    /// Review draws from the demoted pool; a subset of `selected`.
    pub from_review: Vec<SentenceId>,
    /// Examples demoted while building this plan.
    pub demoted: Vec<SentenceId>,
    /// Why full sampling was used instead of the configured strategy.
    pub fallback: Option<String>,
    pub warnings: Vec<String>,
}

impl IterationPlan {
    fn new(ledger: &CorpusLedger, strategy: Strategy) -> Self {
        Self {
            iteration: ledger.iteration() + 1,
            strategy,
            selected: Vec::new(),
            from_review: Vec::new(),
            demoted: Vec::new(),
            fallback: None,
            warnings: Vec::new(),
        }
    }

    /// True when the configured strategy actually chose a subset.
    pub fn is_sampling_event(&self) -> bool {
        self.fallback.is_none() && self.strategy != Strategy::Full
    }

    /// Stable 64-bit digest of the selected set, hex encoded.
    pub fn selection_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for id in &self.selected {
            hasher.update((id.0 as u64).to_le_bytes());
        }
        hasher.finalize()[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// One-line record for the plan log.
    pub fn log_line(&self) -> String {
        let mut line = format!(
            "iteration={} strategy={} selected={} review={} demoted={} hash={}",
            self.iteration,
            self.strategy,
            self.selected.len(),
            self.from_review.len(),
            self.demoted.len(),
            self.selection_hash()
        );
        if let Some(reason) = &self.fallback {
            line.push_str(&format!(" fallback=\"{reason}\""));
        }
        line
    }
}

/// Size of a kept subset: `ratio * pool` rounded half away from zero, at least
/// one when the pool is nonempty.
pub fn selection_count(ratio: f64, pool: usize) -> usize {
    if pool == 0 {
        return 0;
    }
    round_count(ratio * pool as f64).clamp(1, pool)
}

/// Size of the review draw: `fraction * pool` rounded, with no floor.
pub fn review_count(fraction: f64, pool: usize) -> usize {
    round_count(fraction * pool as f64).min(pool)
}

/// Builds the next plan according to `config.strategy`, mutating the ledger's
/// RNG and (for RM and hard removal) its group labels.
pub fn plan_next(ledger: &mut CorpusLedger, config: &SamplerConfig) -> Result<IterationPlan> {
    match config.strategy {
        Strategy::Full => Ok(sample_full(ledger)),
        Strategy::WeightedSampling => sample_ws(ledger, config),
        Strategy::ReviewMechanism => sample_rm(ledger, config),
        Strategy::HardRemoval => sample_hard_removal(ledger, config),
        Strategy::UniformRandom => Ok(sample_uniform(ledger, config)),
    }
}

pub fn sample_full(ledger: &CorpusLedger) -> IterationPlan {
    let mut plan = IterationPlan::new(ledger, Strategy::Full);
    plan.selected = ledger.ids_in(Group::Active);
    let demoted = ledger.count_in(Group::LowCriterion);
    if demoted > 0 {
        plan.warnings.push(format!(
            "full sampling ignores {demoted} examples in the low-criterion pool"
        ));
    }
    plan
}

fn fallback_full(ledger: &CorpusLedger, strategy: Strategy, reason: String) -> IterationPlan {
    let mut plan = sample_full(ledger);
    plan.strategy = strategy;
    plan.fallback = Some(reason);
    plan
}

/// Weighted sampling of `k` distinct indices without replacement.
///
/// Each item with weight `w > 0` gets the key `ln(u) / w`, `u ~ U(0, 1)`,
/// which orders items like `u^(1/w)`; the `k` largest keys win. This has the
/// same distribution as `k` sequential draws, each proportional to weight
/// among the items not yet drawn. Zero-weight items rank below every
/// positive-weight item, in uniformly random order. Indices come back in
/// key order, best first.
pub fn weighted_sample<R: Rng + ?Sized>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(bool, f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.sample(Open01);
            if w > 0.0 {
                (true, u.ln() / w, i)
            } else {
                (false, u, i)
            }
        })
        .collect();
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| b.1.total_cmp(&a.1)));
    keyed.truncate(k);
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Weighted sampling without replacement over the active pool; see
/// [`weighted_sample`].
pub fn sample_ws(ledger: &mut CorpusLedger, config: &SamplerConfig) -> Result<IterationPlan> {
    let strategy = Strategy::WeightedSampling;
    if ledger.iteration() < WARMUP_ITERATIONS {
        return Ok(fallback_full(ledger, strategy, "warm-up iteration".into()));
    }
    let weights = match compute_weights(ledger) {
        Ok(w) => w,
        Err(Error::NotReady(reason)) => return Ok(fallback_full(ledger, strategy, reason)),
        Err(e) => return Err(e),
    };
    let mut plan = IterationPlan::new(ledger, strategy);
    let (ids, w): (Vec<SentenceId>, Vec<f64>) = weights.into_iter().unzip();
    let k = selection_count(config.selection_ratio, ids.len());
    plan.selected = weighted_sample(&w, k, ledger.rng_mut())
        .into_iter()
        .map(|i| ids[i])
        .collect();
    plan.selected.sort_unstable();
    Ok(plan)
}

fn rank_desc(a: (f64, SentenceId), b: (f64, SentenceId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Review mechanism: top-ranked criteria stay active, the rest move to the
/// low-criterion pool for good, and a uniform slice of that pool is reviewed.
pub fn sample_rm(ledger: &mut CorpusLedger, config: &SamplerConfig) -> Result<IterationPlan> {
    let strategy = Strategy::ReviewMechanism;
    if ledger.iteration() < WARMUP_ITERATIONS {
        return Ok(fallback_full(ledger, strategy, "warm-up iteration".into()));
    }
    let mut ranked = Vec::new();
    for r in ledger.records().iter().filter(|r| r.group == Group::Active) {
        match r.criterion {
            Some(c) => ranked.push((c, r.id)),
            None => {
                let reason = format!("active sentence {} has no criterion", r.id);
                return Ok(fallback_full(ledger, strategy, reason));
            }
        }
    }
    let mut plan = IterationPlan::new(ledger, strategy);
    ranked.sort_by(|&a, &b| rank_desc(a, b));
    let k = selection_count(config.selection_ratio, ranked.len());
    let records = ledger.records_mut();
    for &(_, id) in &ranked[k..] {
        records[id.0].group = Group::LowCriterion;
        plan.demoted.push(id);
    }
    plan.demoted.sort_unstable();

    let low = ledger.ids_in(Group::LowCriterion);
    let n_review = review_count(config.review_fraction, low.len());
    let mut review: Vec<SentenceId> = index::sample(ledger.rng_mut(), low.len(), n_review)
        .into_iter()
        .map(|i| low[i])
        .collect();
    review.sort_unstable();

    plan.selected = ranked[..k].iter().map(|&(_, id)| id).collect();
    plan.selected.extend_from_slice(&review);
    plan.selected.sort_unstable();
    plan.from_review = review;
    Ok(plan)
}

/// Baseline that keeps the highest raw-cost examples and discards the rest permanently.
pub fn sample_hard_removal(
    ledger: &mut CorpusLedger,
    config: &SamplerConfig,
) -> Result<IterationPlan> {
    let strategy = Strategy::HardRemoval;
    if ledger.iteration() < 1 {
        return Ok(fallback_full(ledger, strategy, "warm-up iteration".into()));
    }
    let mut ranked = Vec::new();
    for r in ledger.records().iter().filter(|r| r.group == Group::Active) {
        let cost = r
            .curr_cost
            .ok_or_else(|| Error::NotReady(format!("active sentence {} has no cost", r.id)))?;
        ranked.push((cost, r.id));
    }
    let mut plan = IterationPlan::new(ledger, strategy);
    ranked.sort_by(|&a, &b| rank_desc(a, b));
    let k = selection_count(config.selection_ratio, ranked.len());
    let records = ledger.records_mut();
    for &(_, id) in &ranked[k..] {
        records[id.0].group = Group::Removed;
        plan.demoted.push(id);
    }
    plan.demoted.sort_unstable();
    plan.selected = ranked[..k].iter().map(|&(_, id)| id).collect();
    plan.selected.sort_unstable();
    Ok(plan)
}

/// Baseline: uniform draw without replacement from the active pool.
pub fn sample_uniform(ledger: &mut CorpusLedger, config: &SamplerConfig) -> IterationPlan {
    let mut plan = IterationPlan::new(ledger, Strategy::UniformRandom);
    let active = ledger.ids_in(Group::Active);
    let k = selection_count(config.selection_ratio, active.len());
    plan.selected = index::sample(ledger.rng_mut(), active.len(), k)
        .into_iter()
        .map(|i| active[i])
        .collect();
    plan.selected.sort_unstable();
    plan
}
