use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ltl_cli::certify;
use ltl_cli::config::{defaults, Environment, ExperimentConfig, GridSpec, RatingsMode, RawConfig};
use ltl_cli::runner::run_experiment;

#[derive(Debug, Parser)]
#[command(name = "ltl", version, about = "Online learning-to-learn experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthetic regression environment (absolute loss).
    SynthReg(Common),
    /// Synthetic classification environment (hinge loss).
    SynthCls(Common),
    /// Per-person ratings data from a long-form CSV.
    Ratings {
        /// CSV with header `task_id,x1,...,xd,rating`.
        #[arg(long)]
        ratings: Option<PathBuf>,
        /// Regression on the rating, or classification of rating > threshold.
        #[arg(long, value_enum)]
        ratings_mode: Option<ModeArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the certificate suite on random instances and prints pass/fail.
    Certify {
        #[arg(long, default_value_t = defaults::SEED)]
        seed: u64,
        /// Multiplier on the number of random instances per check.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Regression,
    Classification,
}

#[derive(Debug, Args)]
struct Common {
    /// Flat TOML config; an emitted manifest.toml also works. Flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Independent repetitions [default: 10 synthetic, 30 ratings].
    #[arg(long)]
    runs: Option<usize>,
    /// Training tasks [default: 200 synthetic, 100 ratings].
    #[arg(long)]
    t_train: Option<usize>,
    /// Validation tasks [default: 50 synthetic, 40 ratings].
    #[arg(long)]
    t_val: Option<usize>,
    /// Test tasks [default: 200 synthetic, 40 ratings].
    #[arg(long)]
    t_test: Option<usize>,
    /// Comma-separated subset of ITL-SGD, ITL-ERM, MEAN-SGD, MEAN-ERM,
    /// LTL-SGD-SGD, LTL-ERM-SGD, LTL-ERM-ERM [default: all applicable].
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Log-spaced lambda candidates `lo:hi:count` [default: 1e-6:1e3:10
    /// synthetic, 1e-3:1e3:30 ratings].
    #[arg(long)]
    lambda_grid: Option<GridSpec>,
    /// Log-spaced gamma candidates, same format and defaults.
    #[arg(long)]
    gamma_grid: Option<GridSpec>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores [default: 0]. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Evaluate every k-th training task [default: 5 if t_train > 100, else 1].
    #[arg(long)]
    eval_every: Option<usize>,
}

impl Common {
    fn into_raw(self) -> anyhow::Result<RawConfig> {
        let file = match &self.config {
            Some(p) => RawConfig::from_path(p)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            seed: self.seed,
            runs: self.runs,
            t_train: self.t_train,
            t_val: self.t_val,
            t_test: self.t_test,
            methods: self.methods,
            lambda_grid: self.lambda_grid.map(|g| g.to_string()),
            gamma_grid: self.gamma_grid.map(|g| g.to_string()),
            output_dir: self.out,
            threads: self.threads,
            eval_every: self.eval_every,
            ..Default::default()
        };
        Ok(file.overlay(flags))
    }
}

fn experiment(raw: RawConfig, env: Environment) -> anyhow::Result<ExitCode> {
    let cfg = ExperimentConfig::resolve(raw, env)?;
    let out = run_experiment(&cfg).context("running experiment")?;
    for (curve, file) in out.curves.iter().zip(&out.files) {
        match curve.points.last() {
            Some(p) => println!(
                "{:<12} t={:<4} error {:.4} ± {:.4}  -> {}",
                curve.method,
                p.t,
                p.mean_error,
                p.std_error,
                file.display()
            ),
            None => println!("{:<12} (empty) -> {}", curve.method, file.display()),
        }
    }
    println!("manifest -> {}", out.manifest.display());
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::SynthReg(c) => experiment(c.into_raw()?, Environment::SynthReg),
        Command::SynthCls(c) => experiment(c.into_raw()?, Environment::SynthCls),
        Command::Ratings {
            ratings,
            ratings_mode,
            common,
        } => {
            let mut raw = common.into_raw()?;
            raw.ratings_path = ratings.or(raw.ratings_path);
            if let Some(m) = ratings_mode {
                raw.ratings_mode = Some(match m {
                    ModeArg::Regression => RatingsMode::Regression,
                    ModeArg::Classification => RatingsMode::Classification,
                });
            }
            experiment(raw, Environment::Ratings)
        }
        Command::Certify { seed, scale } => {
            anyhow::ensure!(scale > 0.0 && scale.is_finite(), "--scale must be positive");
            let outcomes = certify::run_all(seed, scale);
            for o in &outcomes {
                println!("{o}");
            }
            Ok(if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
