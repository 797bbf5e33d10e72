//! Command-line front end. The `dynsample` binary is a thin wrapper around
//! [`run`].
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.
//! Human-oriented progress goes to stdout; everything machine-readable is
//! written to files.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::harness::{self, Experiment, MetricsRow, NoiseTrajectory};
use crate::learners::AnyLearner;
use crate::learners::Learner;
use crate::Result;

/// Default output root when `--out` is not given.
pub const OUTPUT_ROOT_ENV: &str = "DYNSAMPLE_OUT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(
    name = "dynsample",
    version,
    about = "Dynamic sentence sampling experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config file.
    Run(RunArgs),
    /// Continue an experiment from a checkpoint file.
    Resume(ResumeArgs),
    /// Run several configs on the same corpus and write a comparison report.
    Compare(CompareArgs),
    /// Write the generated training corpus as plain text.
    DumpDataset(DumpArgs),
    /// Check config files without running anything.
    ValidateConfig(ValidateArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config value, e.g. `--set sampler.selection_ratio=0.7`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set experiment.seed=N`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("experiment.seed={seed}"));
        }
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Run directory. Defaults to `$DYNSAMPLE_OUT/<name>` (or `runs/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop once this many iterations have completed and leave a checkpoint.
    #[arg(long)]
    stop_after: Option<u32>,
}

#[derive(Debug, Args)]
struct ResumeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run directory. Defaults to the checkpoint's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stop_after: Option<u32>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// One config per strategy; repeat the flag.
    #[arg(long = "config", short, required = true)]
    configs: Vec<PathBuf>,
    /// Applied to every config.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path. Defaults to `$DYNSAMPLE_OUT/comparison.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(required = true)]
    configs: Vec<PathBuf>,
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

/// Parses `args` (including the program name) and executes the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Resume(a) => cmd_resume(a),
        Command::Compare(a) => cmd_compare(a),
        Command::DumpDataset(a) => cmd_dump(a),
        Command::ValidateConfig(a) => cmd_validate(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn summary_line(row: &MetricsRow, total: u32) -> String {
    format!(
        "iter {:>3}/{total} dev={} selected={} review={} active={} dlow={} examples={} noise={}",
        row.iteration,
        harness::format_sig6(row.dev_cost),
        row.selected_count,
        row.review_count,
        row.active_count,
        row.dlow_count,
        row.cumulative_examples_trained,
        harness::format_sig6(row.noise_fraction_in_selected),
    )
}

fn drive(exp: &mut Experiment, dir: &Path, stop_after: Option<u32>) -> Result<()> {
    let total = exp.config().experiment.total_iterations;
    harness::run_in_dir(exp, dir, stop_after, |row| {
        println!("{}", summary_line(row, total))
    })?;
    if exp.is_finished() {
        let noise = exp.config().experiment.noise_fraction;
        if noise > 0.0 {
            let t = NoiseTrajectory::from_rows(noise, exp.rows());
            let shown: Vec<String> = t
                .rounds
                .iter()
                .take(5)
                .map(|r| harness::format_sig6(r.fraction))
                .collect();
            println!(
                "noise share by sampling round: corpus {noise} -> [{}]",
                shown.join(", ")
            );
        }
        println!("finished; outputs in {}", dir.display());
    } else {
        println!(
            "stopped after iteration {}; resume with --checkpoint {}",
            exp.ledger().iteration(),
            dir.join(harness::CHECKPOINT_FILE).display()
        );
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = args.config.load()?;
    let dir = args
        .out
        .unwrap_or_else(|| harness::output_dir(&config, &output_root()));
    let mut exp = Experiment::new(config)?;
    drive(&mut exp, &dir, args.stop_after)
}

fn cmd_resume(args: ResumeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.checkpoint)?;
    let mut exp = Experiment::restore(&text)?;
    let dir = match args.out {
        Some(dir) => dir,
        None => args
            .checkpoint
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    println!("resuming at iteration {}", exp.ledger().iteration());
    drive(&mut exp, &dir, args.stop_after)
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let mut overrides = args.overrides.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    let configs = args
        .configs
        .iter()
        .map(|p| ExperimentConfig::load(p, &overrides))
        .collect::<Result<Vec<_>>>()?;
    let report = harness::compare_strategies(&configs)?;
    let out = args
        .out
        .unwrap_or_else(|| output_root().join("comparison.json"));
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&out, report.to_json())?;

    println!(
        "initial dev {}  threshold {}",
        harness::format_sig6(report.initial_dev_cost),
        harness::format_sig6(report.threshold)
    );
    for r in &report.runs {
        let reached = r
            .examples_to_threshold
            .map(|x| format!("{x:.0}"))
            .unwrap_or_else(|| "never".into());
        println!(
            "{:<20} {:<13} to-threshold={:<10} best={} final={} regression={}",
            r.name,
            r.strategy.as_str(),
            reached,
            harness::format_sig6(r.best_dev_cost),
            harness::format_sig6(r.final_dev_cost),
            harness::format_sig6(r.post_best_regression),
        );
    }
    println!("report written to {}", out.display());
    Ok(())
}

fn cmd_dump(args: DumpArgs) -> Result<()> {
    let config = args.config.load()?;
    let learner = AnyLearner::from_config(
        &config.learner,
        config.experiment.corpus_size,
        config.experiment.noise_fraction,
        config.experiment.seed,
    )?;
    let mut text = learner.dataset_lines().join("\n");
    text.push('\n');
    if let Some(parent) = args.out.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&args.out, text)?;
    println!(
        "{} examples written to {}",
        learner.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let mut first_error = None;
    for path in &args.configs {
        match ExperimentConfig::load(path, &args.overrides) {
            Ok(c) => println!(
                "ok       {} ({}, {})",
                path.display(),
                c.sampler.strategy,
                c.learner.kind()
            ),
            Err(e) => {
                println!("invalid  {}: {e}", path.display());
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        None => Ok(()),
        Some(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_repeated_overrides() {
        let cli = Cli::try_parse_from([
            "dynsample",
            "run",
            "--config",
            "a.toml",
            "--set",
            "sampler.strategy=rm",
            "--set",
            "experiment.seed=3",
            "--seed",
            "7",
        ])
        .unwrap();
        let Command::Run(args) = cli.command else {
            panic!("expected run")
        };
        assert_eq!(args.config.overrides.len(), 2);
        assert_eq!(args.config.seed, Some(7));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["dynsample", "frobnicate"]), 2);
        assert_eq!(run(["dynsample", "run"]), 2);
    }

    #[test]
    fn missing_config_is_a_config_error() {
        assert_eq!(
            run(["dynsample", "validate-config", "/nonexistent/x.toml"]),
            2
        );
    }
}
