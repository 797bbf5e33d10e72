//! The iteration loop (plan, train, record costs, renormalize), metrics
//! collection, checkpointing, and the strategy comparison experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::criterion::normalize_criteria;
use crate::learners::{AnyLearner, Learner};
use crate::ledger::{self, CorpusLedger, Group, FORMAT_VERSION};
use crate::samplers::{self, Strategy};
use crate::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const PLAN_LOG_FILE: &str = "plan.log";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CONFIG_ECHO_FILE: &str = "config.toml";
pub const NOISE_FILE: &str = "noise.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u32,
    /// Example-epochs trained so far; the efficiency axis.
    pub cumulative_examples_trained: u64,
    pub dev_cost: f64,
    pub active_count: usize,
    /// Examples outside the active pool (demoted or removed).
    pub dlow_count: usize,
    pub selected_count: usize,
    pub review_count: usize,
    /// Whether this iteration's plan came from the configured strategy
    /// rather than a warm-up or fallback full pass.
    pub sampling_event: bool,
    pub noise_fraction_in_selected: f64,
    pub wall_time_secs: f64,
}

/// Formats like C's `%.6g`.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        if fixed.contains('.') {
            fixed
                .trim_end_matches('0')
                .trim_end_matches('.')
                .to_string()
        } else {
            fixed
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn metrics_csv(rows: &[MetricsRow], wall_time_column: bool) -> String {
    let mut out = String::from(
        "iteration,cumulative_examples_trained,dev_cost,active_count,dlow_count,\
         selected_count,review_count,sampling_event,noise_fraction_in_selected",
    );
    if wall_time_column {
        out.push_str(",wall_time");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.cumulative_examples_trained,
            format_sig6(r.dev_cost),
            r.active_count,
            r.dlow_count,
            r.selected_count,
            r.review_count,
            r.sampling_event as u8,
            format_sig6(r.noise_fraction_in_selected),
        );
        if wall_time_column {
            let _ = write!(out, ",{}", format_sig6(r.wall_time_secs));
        }
        out.push('\n');
    }
    out
}

/// A resumable run: configuration, ledger, learner and metrics history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    config: ExperimentConfig,
    ledger: CorpusLedger,
    learner: AnyLearner,
    initial_dev_cost: f64,
    cumulative: u64,
    rows: Vec<MetricsRow>,
    plan_log: Vec<String>,
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format_version: &'a str,
    iteration: u32,
    #[serde(flatten)]
    experiment: &'a Experiment,
}

#[derive(Deserialize)]
struct CheckpointDoc {
    iteration: u32,
    #[serde(flatten)]
    experiment: Experiment,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.experiment.seed;
        let n = config.experiment.corpus_size;
        let learner =
            AnyLearner::from_config(&config.learner, n, config.experiment.noise_fraction, seed)?;
        let mut ledger = CorpusLedger::new(learner.len(), seed)?;
        ledger.set_noise_flags(&learner.noise_flags())?;
        Ok(Self {
            initial_dev_cost: learner.dev_cost(),
            config,
            ledger,
            learner,
            cumulative: 0,
            rows: Vec::new(),
            plan_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn ledger(&self) -> &CorpusLedger {
        &self.ledger
    }

    pub fn learner(&self) -> &AnyLearner {
        &self.learner
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn plan_log(&self) -> &[String] {
        &self.plan_log
    }

    /// Dev cost before any training.
    pub fn initial_dev_cost(&self) -> f64 {
        self.initial_dev_cost
    }

    pub fn is_finished(&self) -> bool {
        self.ledger.iteration() >= self.config.experiment.total_iterations
    }

    /// Runs one iteration and returns its metrics row.
    pub fn step(&mut self) -> Result<&MetricsRow> {
        let started = Instant::now();
        let sampler = &self.config.sampler;
        let plan = samplers::plan_next(&mut self.ledger, sampler)?;
        let costs = self
            .learner
            .train_iteration(&plan, sampler.epochs_per_iteration)?;
        self.ledger.record_costs(&costs)?;
        match normalize_criteria(&mut self.ledger) {
            Ok(_) | Err(Error::NotReady(_)) => {}
            Err(e) => return Err(e),
        }

        let records = self.ledger.records();
        let noisy = plan
            .selected
            .iter()
            .filter(|id| records[id.0].is_noise)
            .count();
        let active = self.ledger.count_in(Group::Active);
        self.cumulative += plan.selected.len() as u64 * u64::from(sampler.epochs_per_iteration);
        self.rows.push(MetricsRow {
            iteration: self.ledger.iteration(),
            cumulative_examples_trained: self.cumulative,
            dev_cost: self.learner.dev_cost(),
            active_count: active,
            dlow_count: self.ledger.len() - active,
            selected_count: plan.selected.len(),
            review_count: plan.from_review.len(),
            sampling_event: plan.is_sampling_event(),
            noise_fraction_in_selected: noisy as f64 / plan.selected.len() as f64,
            wall_time_secs: started.elapsed().as_secs_f64(),
        });
        self.plan_log.push(plan.log_line());
        Ok(self.rows.last().expect("row just pushed"))
    }

    /// Steps until `total_iterations`, calling `on_row` after each iteration.
    pub fn run(&mut self, mut on_row: impl FnMut(&MetricsRow)) -> Result<()> {
        while !self.is_finished() {
            on_row(self.step()?);
        }
        Ok(())
    }

    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.rows, self.config.output.wall_time_column)
    }

    pub fn plan_log_text(&self) -> String {
        self.plan_log.iter().map(|l| format!("{l}\n")).collect()
    }

    /// Full run state as a JSON document.
    pub fn checkpoint(&self) -> String {
        let doc = CheckpointRef {
            format_version: FORMAT_VERSION,
            iteration: self.ledger.iteration(),
            experiment: self,
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serialization is infallible")
    }

    pub fn restore(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        ledger::check_format_version(&value)?;
        // Parse from text: `Value` cannot carry the RNG's u128 stream position.
        let doc: CheckpointDoc =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let exp = doc.experiment;
        ledger::validate(&exp.ledger)?;
        if doc.iteration != exp.ledger.iteration()
            || exp.rows.len() != exp.ledger.iteration() as usize
            || exp.learner.len() != exp.ledger.len()
        {
            return Err(Error::CorruptCheckpoint(
                "inconsistent iteration state".into(),
            ));
        }
        exp.config.validate()?;
        Ok(exp)
    }
}

/// Resolves the output directory for `config` under `root`.
pub fn output_dir(config: &ExperimentConfig, root: &Path) -> PathBuf {
    match &config.output.dir {
        Some(dir) => root.join(dir),
        None => root.join(&config.experiment.name),
    }
}

fn write_outputs(exp: &Experiment, dir: &Path) -> Result<()> {
    fs::write(dir.join(METRICS_FILE), exp.metrics_csv())?;
    fs::write(dir.join(PLAN_LOG_FILE), exp.plan_log_text())?;
    if exp.config.experiment.noise_fraction > 0.0 {
        let noise = NoiseTrajectory::from_rows(exp.config.experiment.noise_fraction, &exp.rows);
        fs::write(dir.join(NOISE_FILE), noise.to_csv())?;
    }
    Ok(())
}

/// Runs (or continues) `exp`, writing the fixed output layout into `dir`:
/// `metrics.csv`, `plan.log`, `config.toml`, `checkpoint.json`, and
/// `checkpoint-NNNN.json` at the configured cadence. `stop_after` halts after
/// that iteration, leaving a resumable `checkpoint.json`. Metrics collected so
/// far are written before an error is returned.
pub fn run_in_dir(
    exp: &mut Experiment,
    dir: &Path,
    stop_after: Option<u32>,
    mut on_row: impl FnMut(&MetricsRow),
) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_ECHO_FILE), exp.config.to_toml_string())?;
    let every = exp.config.experiment.checkpoint_every;
    while !exp.is_finished() && stop_after.is_none_or(|s| exp.ledger.iteration() < s) {
        match exp.step() {
            Ok(row) => on_row(row),
            Err(e) => {
                write_outputs(exp, dir)?;
                return Err(e);
            }
        }
        let iteration = exp.ledger.iteration();
        if every > 0 && iteration.is_multiple_of(every) {
            fs::write(
                dir.join(format!("checkpoint-{iteration:04}.json")),
                exp.checkpoint(),
            )?;
        }
    }
    write_outputs(exp, dir)?;
    fs::write(dir.join(CHECKPOINT_FILE), exp.checkpoint())?;
    Ok(())
}

/// Runs a configuration to completion in memory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    let mut exp = Experiment::new(config.clone())?;
    exp.run(|_| {})?;
    Ok(exp)
}

// ---------------------------------------------------------------------------
// Noise filtering

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRound {
    /// 1-based count of sampling events.
    pub round: usize,
    pub iteration: u32,
    pub fraction: f64,
}

/// Noise share of the selected set at each sampling event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTrajectory {
    pub corpus_fraction: f64,
    pub rounds: Vec<NoiseRound>,
}

impl NoiseTrajectory {
    pub fn from_rows(corpus_fraction: f64, rows: &[MetricsRow]) -> Self {
        let rounds = rows
            .iter()
            .filter(|r| r.sampling_event)
            .enumerate()
            .map(|(i, r)| NoiseRound {
                round: i + 1,
                iteration: r.iteration,
                fraction: r.noise_fraction_in_selected,
            })
            .collect();
        Self {
            corpus_fraction,
            rounds,
        }
    }

    /// Whether the noise share falls strictly from the corpus level through
    /// each of the first `rounds` sampling events.
    pub fn strictly_decreasing(&self, rounds: usize) -> bool {
        if self.rounds.len() < rounds {
            return false;
        }
        let mut prev = self.corpus_fraction;
        for r in &self.rounds[..rounds] {
            if r.fraction >= prev {
                return false;
            }
            prev = r.fraction;
        }
        true
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "round,iteration,noise_fraction_in_selected\n0,0,{}\n",
            format_sig6(self.corpus_fraction)
        );
        for r in &self.rounds {
            let _ = writeln!(
                out,
                "{},{},{}",
                r.round,
                r.iteration,
                format_sig6(r.fraction)
            );
        }
        out
    }
}

/// Runs `config` and reports the noise share of each sampling round.
pub fn run_noise_experiment(config: &ExperimentConfig) -> Result<NoiseTrajectory> {
    let exp = run_experiment(config)?;
    Ok(NoiseTrajectory::from_rows(
        config.experiment.noise_fraction,
        exp.rows(),
    ))
}

// ---------------------------------------------------------------------------
// Strategy comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub name: String,
    pub strategy: Strategy,
    /// Interpolated cumulative examples at which dev cost first reaches the threshold.
    pub examples_to_threshold: Option<f64>,
    pub best_dev_cost: f64,
    pub best_iteration: u32,
    pub final_dev_cost: f64,
    /// `(final - best) / best`.
    pub post_best_regression: f64,
    pub total_examples_trained: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub initial_dev_cost: f64,
    pub calibration_best_dev_cost: f64,
    /// Midpoint between the initial dev cost and the best full-data dev cost.
    pub threshold: f64,
    pub runs: Vec<StrategySummary>,
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn run(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }
}

/// First point where the dev-cost curve reaches `threshold`, linearly
/// interpolated on the cumulative-examples axis. The curve starts at
/// `(0, initial)`.
pub fn examples_to_threshold(initial: f64, rows: &[MetricsRow], threshold: f64) -> Option<f64> {
    if initial <= threshold {
        return Some(0.0);
    }
    let mut prev = (0.0, initial);
    for r in rows {
        let point = (r.cumulative_examples_trained as f64, r.dev_cost);
        if point.1 <= threshold {
            let frac = (prev.1 - threshold) / (prev.1 - point.1);
            return Some(prev.0 + frac * (point.0 - prev.0));
        }
        prev = point;
    }
    None
}

fn summarize(
    name: &str,
    strategy: Strategy,
    initial: f64,
    rows: &[MetricsRow],
    threshold: f64,
) -> StrategySummary {
    let (best_iteration, best_dev_cost) =
        rows.iter()
            .map(|r| (r.iteration, r.dev_cost))
            .fold(
                (0, initial),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
    let final_dev_cost = rows.last().map_or(initial, |r| r.dev_cost);
    StrategySummary {
        name: name.to_string(),
        strategy,
        examples_to_threshold: examples_to_threshold(initial, rows, threshold),
        best_dev_cost,
        best_iteration,
        final_dev_cost,
        post_best_regression: (final_dev_cost - best_dev_cost) / best_dev_cost,
        total_examples_trained: rows.last().map_or(0, |r| r.cumulative_examples_trained),
    }
}

fn comparable(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<()> {
    let (ea, eb) = (&a.experiment, &b.experiment);
    let mismatch = if a.learner != b.learner {
        Some("learner")
    } else if ea.corpus_size != eb.corpus_size {
        Some("experiment.corpus_size")
    } else if ea.seed != eb.seed {
        Some("experiment.seed")
    } else if ea.noise_fraction != eb.noise_fraction {
        Some("experiment.noise_fraction")
    } else if ea.total_iterations != eb.total_iterations {
        Some("experiment.total_iterations")
    } else if a.sampler.epochs_per_iteration != b.sampler.epochs_per_iteration {
        Some("sampler.epochs_per_iteration")
    } else {
        None
    };
    match mismatch {
        Some(field) => Err(Error::InvalidComparison(format!(
            "{} and {} differ in {field}",
            ea.name, eb.name
        ))),
        None => Ok(()),
    }
}

/// Runs every config (concurrently) plus, if none of them is a full-data run,
/// a full-data calibration run, and summarizes each against the calibrated
/// dev-cost threshold.
pub fn compare_strategies(configs: &[ExperimentConfig]) -> Result<ComparisonReport> {
    if configs.len() < 2 {
        return Err(Error::InvalidComparison(
            "need at least two configurations".into(),
        ));
    }
    for c in &configs[1..] {
        comparable(&configs[0], c)?;
    }
    for c in configs {
        c.validate()?;
    }

    let mut jobs: Vec<ExperimentConfig> = configs.to_vec();
    let calibration = match configs
        .iter()
        .position(|c| c.sampler.strategy == Strategy::Full)
    {
        Some(i) => i,
        None => {
            let mut full = configs[0].clone();
            full.sampler.strategy = Strategy::Full;
            full.experiment.name = "calibration-full".into();
            jobs.push(full);
            jobs.len() - 1
        }
    };

    let results: Vec<Result<Experiment>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|c| scope.spawn(move || run_experiment(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let initial = runs[calibration].initial_dev_cost();
    let best_full = runs[calibration]
        .rows()
        .iter()
        .map(|r| r.dev_cost)
        .fold(initial, f64::min);
    let threshold = 0.5 * (initial + best_full);

    let summaries = jobs
        .iter()
        .zip(&runs)
        .map(|(c, exp)| {
            summarize(
                &c.experiment.name,
                c.sampler.strategy,
                exp.initial_dev_cost(),
                exp.rows(),
                threshold,
            )
        })
        .collect();
    Ok(ComparisonReport {
        seed: configs[0].experiment.seed,
        initial_dev_cost: initial,
        calibration_best_dev_cost: best_full,
        threshold,
        runs: summaries,
    })
}
