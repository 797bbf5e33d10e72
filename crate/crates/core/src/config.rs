//! Experiment configuration: a TOML document with one section per module.
//!
//! ```toml
//! [experiment]
//! name = "ws-decay"
//! total_iterations = 30
//! corpus_size = 2000
//! seed = 7
//!
//! [sampler]
//! strategy = "ws"
//!
//! [learner]
//! kind = "decay_sim"
//! ```
//!
//! Any key can be overridden with a dotted path, e.g. `sampler.selection_ratio=0.7`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::samplers::SamplerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub sampler: SamplerConfig,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub total_iterations: u32,
    pub corpus_size: usize,
    #[serde(default)]
    pub noise_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    /// Write `checkpoint-NNNN.json` every this many iterations; 0 disables.
    #[serde(default)]
    pub checkpoint_every: u32,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; relative paths resolve against the output root.
    pub dir: Option<String>,
    /// Append a wall-time column to metrics.csv. Breaks byte-identical reruns.
    #[serde(default)]
    pub wall_time_column: bool,
}

/// How a cost is reported when one iteration spans several epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostAggregation {
    /// Cost measured after the iteration's final epoch.
    #[default]
    LastEpoch,
    /// Mean of the costs measured after each epoch of the iteration.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerConfig {
    DecaySim(DecaySimConfig),
    SoftmaxSeq(SoftmaxSeqConfig),
}

impl LearnerConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnerConfig::DecaySim(_) => "decay_sim",
            LearnerConfig::SoftmaxSeq(_) => "softmax_seq",
        }
    }
}

/// Mixture of fast, medium and slow learners for the decay simulator.
/// Ranges are `[low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySimConfig {
    pub fast_fraction: f64,
    pub medium_fraction: f64,
    pub fast_rate: [f64; 2],
    pub medium_rate: [f64; 2],
    pub slow_rate: [f64; 2],
    pub initial_cost: [f64; 2],
    pub floor: [f64; 2],
    pub holdout_size: usize,
    pub cost_aggregation: CostAggregation,
}

impl Default for DecaySimConfig {
    fn default() -> Self {
        Self {
            fast_fraction: 0.3,
            medium_fraction: 0.5,
            fast_rate: [2.0, 3.0],
            medium_rate: [0.01, 0.03],
            slow_rate: [0.0, 0.002],
            initial_cost: [1.0, 3.0],
            floor: [1.0, 2.0],
            holdout_size: 200,
            cost_aggregation: CostAggregation::LastEpoch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoftmaxSeqConfig {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub learning_rate: f64,
    pub sources: usize,
    pub easy_sources: usize,
    /// Share of examples drawn from the rare, hard sources.
    pub hard_share: f64,
    pub easy_peak: f64,
    pub hard_peak: f64,
    pub dev_size: usize,
    pub per_token_cost: bool,
    pub cost_aggregation: CostAggregation,
}

impl Default for SoftmaxSeqConfig {
    fn default() -> Self {
        Self {
            vocab_size: 16,
            seq_len: 12,
            learning_rate: 0.002,
            sources: 4,
            easy_sources: 2,
            hard_share: 0.2,
            easy_peak: 0.9,
            hard_peak: 0.6,
            dev_size: 200,
            per_token_cost: false,
            cost_aggregation: CostAggregation::LastEpoch,
        }
    }
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn check_range(field: &str, [lo, hi]: [f64; 2], min: f64) -> Result<()> {
    check(
        lo.is_finite() && hi.is_finite() && lo >= min && hi >= lo,
        field,
        format!("expected [low, high] with {min} <= low <= high, got [{lo}, {hi}]"),
    )
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        check(
            e.total_iterations >= 3,
            "experiment.total_iterations",
            format!("must be at least 3, got {}", e.total_iterations),
        )?;
        check(
            e.corpus_size >= 1,
            "experiment.corpus_size",
            "must be at least 1",
        )?;
        check(
            (0.0..1.0).contains(&e.noise_fraction),
            "experiment.noise_fraction",
            format!("must be in [0, 1), got {}", e.noise_fraction),
        )?;
        self.sampler.validate()?;
        match &self.learner {
            LearnerConfig::DecaySim(d) => {
                check(
                    d.fast_fraction >= 0.0
                        && d.medium_fraction >= 0.0
                        && d.fast_fraction + d.medium_fraction <= 1.0,
                    "learner.fast_fraction",
                    "fast_fraction and medium_fraction must be non-negative and sum to at most 1",
                )?;
                check_range("learner.fast_rate", d.fast_rate, 0.0)?;
                check_range("learner.medium_rate", d.medium_rate, 0.0)?;
                check_range("learner.slow_rate", d.slow_rate, 0.0)?;
                check_range("learner.floor", d.floor, 0.0)?;
                check(
                    d.initial_cost[0] > 0.0
                        && d.initial_cost[1] >= d.initial_cost[0]
                        && d.initial_cost[1].is_finite(),
                    "learner.initial_cost",
                    "expected [low, high] with 0 < low <= high",
                )?;
            }
            LearnerConfig::SoftmaxSeq(s) => {
                check(s.sources >= 1, "learner.sources", "must be at least 1")?;
                check(
                    s.easy_sources <= s.sources,
                    "learner.easy_sources",
                    "cannot exceed sources",
                )?;
                check(
                    s.vocab_size >= 2 * s.sources,
                    "learner.vocab_size",
                    format!(
                        "needs at least two tokens per source ({} sources)",
                        s.sources
                    ),
                )?;
                check(s.seq_len >= 2, "learner.seq_len", "must be at least 2")?;
                check(
                    s.learning_rate > 0.0 && s.learning_rate.is_finite(),
                    "learner.learning_rate",
                    "must be positive",
                )?;
                let hard_ok = if s.easy_sources == s.sources {
                    s.hard_share == 0.0
                } else if s.easy_sources == 0 {
                    s.hard_share == 1.0
                } else {
                    s.hard_share > 0.0 && s.hard_share < 1.0
                };
                check(hard_ok, "learner.hard_share", "must be in (0, 1) when both easy and hard sources exist, 0 with no hard sources, 1 with no easy sources")?;
                check(
                    (0.0..=1.0).contains(&s.easy_peak),
                    "learner.easy_peak",
                    "must be in [0, 1]",
                )?;
                check(
                    (0.0..=1.0).contains(&s.hard_peak),
                    "learner.hard_peak",
                    "must be in [0, 1]",
                )?;
            }
        }
        Ok(())
    }
}

/// Applies one `dotted.key=value` override. The value is parsed as a TOML
/// value when possible and taken as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like section.key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::config(key, "empty key"))?;
    let mut node = table;
    for part in parts {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{part} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
