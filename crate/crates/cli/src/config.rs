//! Experiment configuration: a flat TOML file, overridden by command-line
//! flags, resolved against per-environment defaults.
//!
//! Every key is optional in the file. Unknown keys are rejected. A run
//! manifest is itself a valid config file: its extra `[manifest]` table is
//! accepted and ignored.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ltl_core::environments::{EnvironmentSpec, TaskMode};
use ltl_core::evaluation::{BiasChoice, HyperGrid, Metric, Solver};
use ltl_core::meta_learner::GradientMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Syntax { path: String, message: String },
    #[error("`{field}`: {message}")]
    Field {
        field: &'static str,
        message: String,
    },
}

fn field(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Environment {
    SynthReg,
    SynthCls,
    Ratings,
}

impl Environment {
    pub fn name(self) -> &'static str {
        match self {
            Environment::SynthReg => "synth-reg",
            Environment::SynthCls => "synth-cls",
            Environment::Ratings => "ratings",
        }
    }

    pub fn is_synthetic(self) -> bool {
        self != Environment::Ratings
    }
}

/// An experiment method: bias source, then (for LTL) meta-gradient source,
/// then within-task solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ITL-SGD")]
    ItlSgd,
    #[serde(rename = "ITL-ERM")]
    ItlErm,
    #[serde(rename = "MEAN-SGD")]
    MeanSgd,
    #[serde(rename = "MEAN-ERM")]
    MeanErm,
    #[serde(rename = "LTL-SGD-SGD")]
    LtlSgdSgd,
    #[serde(rename = "LTL-ERM-SGD")]
    LtlErmSgd,
    #[serde(rename = "LTL-ERM-ERM")]
    LtlErmErm,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::ItlSgd,
        Method::ItlErm,
        Method::MeanSgd,
        Method::MeanErm,
        Method::LtlSgdSgd,
        Method::LtlErmSgd,
        Method::LtlErmErm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ItlSgd => "ITL-SGD",
            Method::ItlErm => "ITL-ERM",
            Method::MeanSgd => "MEAN-SGD",
            Method::MeanErm => "MEAN-ERM",
            Method::LtlSgdSgd => "LTL-SGD-SGD",
            Method::LtlErmSgd => "LTL-ERM-SGD",
            Method::LtlErmErm => "LTL-ERM-ERM",
        }
    }

    pub fn solver(self) -> Solver {
        match self {
            Method::ItlSgd | Method::MeanSgd | Method::LtlSgdSgd | Method::LtlErmSgd => Solver::Sgd,
            Method::ItlErm | Method::MeanErm | Method::LtlErmErm => Solver::Erm,
        }
    }

    /// Meta-gradient source, for LTL methods.
    pub fn meta_mode(self) -> Option<GradientMode> {
        match self {
            Method::LtlSgdSgd => Some(GradientMode::ApproxSgd),
            Method::LtlErmSgd | Method::LtlErmErm => Some(GradientMode::ExactErm),
            _ => None,
        }
    }

    pub fn needs_oracle(self) -> bool {
        matches!(self, Method::MeanSgd | Method::MeanErm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!(
                    "unknown method `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

/// `lo:hi:count`, log-spaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn values(&self) -> ltl_core::Result<Vec<f64>> {
        HyperGrid::log_spaced(self.lo, self.hi, self.count)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}:{:e}:{}", self.lo, self.hi, self.count)
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let bad = || format!("grid `{s}` is not of the form lo:hi:count");
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let count: usize = parts[2].parse().map_err(|_| bad())?;
        if !(lo > 0.0 && hi >= lo && hi.is_finite() && count >= 1) {
            return Err(format!("grid `{s}` needs 0 < lo <= hi and count >= 1"));
        }
        Ok(Self { lo, hi, count })
    }
}

/// Raw file contents; every key optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub environment: Option<Environment>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub t_train: Option<usize>,
    pub t_val: Option<usize>,
    pub t_test: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub lambda_grid: Option<String>,
    pub gamma_grid: Option<String>,
    pub eval_every: Option<usize>,
    pub metric: Option<Metric>,
    pub bias_choice: Option<BiasChoice>,
    pub fista_max_iters: Option<usize>,
    pub fista_tolerance: Option<f64>,
    pub accept_unconverged: Option<bool>,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub d: Option<usize>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub task_mean: Option<f64>,
    pub task_std: Option<f64>,
    pub snr: Option<f64>,
    pub margin_threshold: Option<f64>,
    pub logistic_scale: Option<f64>,
    pub ratings_path: Option<PathBuf>,
    pub ratings_mode: Option<RatingsMode>,
    pub rating_threshold: Option<f64>,
    /// Present in emitted manifests; ignored on input.
    pub manifest: Option<toml::Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatingsMode {
    Regression,
    Classification,
}

impl RatingsMode {
    pub fn task_mode(self) -> TaskMode {
        match self {
            RatingsMode::Regression => TaskMode::RegressionAbsolute,
            RatingsMode::Classification => TaskMode::ClassificationHinge,
        }
    }
}

impl RawConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Keys set in `other` win.
    pub fn overlay(self, other: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: other.$f.or(self.$f),)* } };
        }
        pick!(
            environment,
            seed,
            runs,
            t_train,
            t_val,
            t_test,
            methods,
            lambda_grid,
            gamma_grid,
            eval_every,
            metric,
            bias_choice,
            fista_max_iters,
            fista_tolerance,
            accept_unconverged,
            threads,
            output_dir,
            d,
            n_train,
            n_test,
            task_mean,
            task_std,
            snr,
            margin_threshold,
            logistic_scale,
            ratings_path,
            ratings_mode,
            rating_threshold,
            manifest
        )
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: Environment,
    pub seed: u64,
    pub runs: usize,
    pub t_train: usize,
    pub t_val: usize,
    pub t_test: usize,
    pub methods: Vec<Method>,
    pub lambda_grid: GridSpec,
    pub gamma_grid: GridSpec,
    pub eval_every: usize,
    pub metric: Metric,
    pub bias_choice: BiasChoice,
    pub fista_max_iters: usize,
    pub fista_tolerance: f64,
    pub accept_unconverged: bool,
    /// 0 lets rayon choose. Does not affect results.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub d: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub task_mean: f64,
    pub task_std: f64,
    pub snr: f64,
    pub margin_threshold: f64,
    pub logistic_scale: f64,
    pub ratings_path: Option<PathBuf>,
    pub ratings_mode: RatingsMode,
    pub rating_threshold: f64,
}

/// Default values, shown in `--help`.
pub mod defaults {
    pub const SEED: u64 = 0;
    pub const RUNS_SYNTHETIC: usize = 10;
    pub const RUNS_RATINGS: usize = 30;
    pub const SPLITS_SYNTHETIC: (usize, usize, usize) = (200, 50, 200);
    pub const SPLITS_RATINGS: (usize, usize, usize) = (100, 40, 40);
    pub const GRID_SYNTHETIC: &str = "1e-6:1e3:10";
    pub const GRID_RATINGS: &str = "1e-3:1e3:30";
    pub const FISTA_MAX_ITERS: usize = 2000;
    pub const FISTA_TOLERANCE: f64 = 1e-6;
    pub const D: usize = 30;
    pub const N_TRAIN_SYNTHETIC: usize = 10;
    pub const N_TRAIN_RATINGS: usize = 8;
    pub const N_TEST: usize = 100;
    pub const TASK_MEAN: f64 = 4.0;
    pub const TASK_STD: f64 = 1.0;
    pub const SNR: f64 = 10.0;
    pub const MARGIN: f64 = 0.5;
    pub const LOGISTIC_SCALE: f64 = 10.0;
    pub const RATING_THRESHOLD: f64 = 5.0;
    pub const OUTPUT_DIR: &str = "out";
}

fn positive(name: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field(
            name,
            format!("must be a positive finite number, got {v}"),
        ))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(field(
            name,
            format!("must be a non-negative finite number, got {v}"),
        ))
    }
}

fn at_least_one(name: &'static str, v: usize) -> Result<usize, ConfigError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(field(name, "must be at least 1"))
    }
}

fn grid(name: &'static str, raw: Option<String>, default: &str) -> Result<GridSpec, ConfigError> {
    raw.as_deref()
        .unwrap_or(default)
        .parse()
        .map_err(|m| field(name, m))
}

impl ExperimentConfig {
    /// Applies defaults for `environment` (the subcommand) and validates.
    pub fn resolve(raw: RawConfig, environment: Environment) -> Result<Self, ConfigError> {
        if let Some(e) = raw.environment {
            if e != environment {
                return Err(field(
                    "environment",
                    format!("config is for `{}`, not `{}`", e.name(), environment.name()),
                ));
            }
        }
        let synthetic = environment.is_synthetic();
        let (tr, va, te) = if synthetic {
            defaults::SPLITS_SYNTHETIC
        } else {
            defaults::SPLITS_RATINGS
        };
        let grid_default = if synthetic {
            defaults::GRID_SYNTHETIC
        } else {
            defaults::GRID_RATINGS
        };
        let t_train = raw.t_train.unwrap_or(tr);
        let methods = match raw.methods {
            None => Method::ALL
                .iter()
                .copied()
                .filter(|m| synthetic || !m.needs_oracle())
                .collect(),
            Some(list) => {
                let mut ms = Vec::new();
                for s in &list {
                    let m: Method = s.parse().map_err(|e| field("methods", e))?;
                    if !ms.contains(&m) {
                        ms.push(m);
                    }
                }
                if ms.is_empty() {
                    return Err(field("methods", "at least one method is required"));
                }
                ms
            }
        };
        if !synthetic {
            if let Some(m) = methods.iter().find(|m| m.needs_oracle()) {
                return Err(field(
                    "methods",
                    format!("{m} needs the true task mean, which only synthetic environments have"),
                ));
            }
        }
        let ratings_path = raw.ratings_path;
        if environment == Environment::Ratings && ratings_path.is_none() {
            return Err(field(
                "ratings_path",
                "required for the ratings environment",
            ));
        }
        let cfg = Self {
            environment,
            seed: match raw.seed.unwrap_or(defaults::SEED) {
                s if s <= i64::MAX as u64 => s,
                s => return Err(field("seed", format!("must be at most 2^63 - 1, got {s}"))),
            },
            runs: at_least_one(
                "runs",
                raw.runs.unwrap_or(if synthetic {
                    defaults::RUNS_SYNTHETIC
                } else {
                    defaults::RUNS_RATINGS
                }),
            )?,
            t_train: at_least_one("t_train", t_train)?,
            t_val: at_least_one("t_val", raw.t_val.unwrap_or(va))?,
            t_test: at_least_one("t_test", raw.t_test.unwrap_or(te))?,
            methods,
            lambda_grid: grid("lambda_grid", raw.lambda_grid, grid_default)?,
            gamma_grid: grid("gamma_grid", raw.gamma_grid, grid_default)?,
            eval_every: at_least_one(
                "eval_every",
                raw.eval_every.unwrap_or(if t_train > 100 { 5 } else { 1 }),
            )?,
            metric: raw.metric.unwrap_or(Metric::Loss),
            bias_choice: raw.bias_choice.unwrap_or(BiasChoice::Average),
            fista_max_iters: at_least_one(
                "fista_max_iters",
                raw.fista_max_iters.unwrap_or(defaults::FISTA_MAX_ITERS),
            )?,
            fista_tolerance: positive(
                "fista_tolerance",
                raw.fista_tolerance.unwrap_or(defaults::FISTA_TOLERANCE),
            )?,
            accept_unconverged: raw.accept_unconverged.unwrap_or(true),
            threads: raw.threads.unwrap_or(0),
            output_dir: raw
                .output_dir
                .unwrap_or_else(|| PathBuf::from(defaults::OUTPUT_DIR)),
            d: at_least_one("d", raw.d.unwrap_or(defaults::D))?,
            n_train: at_least_one(
                "n_train",
                raw.n_train.unwrap_or(if synthetic {
                    defaults::N_TRAIN_SYNTHETIC
                } else {
                    defaults::N_TRAIN_RATINGS
                }),
            )?,
            n_test: at_least_one("n_test", raw.n_test.unwrap_or(defaults::N_TEST))?,
            task_mean: {
                let v = raw.task_mean.unwrap_or(defaults::TASK_MEAN);
                if !v.is_finite() {
                    return Err(field("task_mean", "must be finite"));
                }
                v
            },
            task_std: non_negative("task_std", raw.task_std.unwrap_or(defaults::TASK_STD))?,
            snr: positive("snr", raw.snr.unwrap_or(defaults::SNR))?,
            margin_threshold: non_negative(
                "margin_threshold",
                raw.margin_threshold.unwrap_or(defaults::MARGIN),
            )?,
            logistic_scale: positive(
                "logistic_scale",
                raw.logistic_scale.unwrap_or(defaults::LOGISTIC_SCALE),
            )?,
            ratings_path,
            ratings_mode: raw.ratings_mode.unwrap_or(RatingsMode::Regression),
            rating_threshold: {
                let v = raw.rating_threshold.unwrap_or(defaults::RATING_THRESHOLD);
                if !v.is_finite() {
                    return Err(field("rating_threshold", "must be finite"));
                }
                v
            },
        };
        cfg.lambda_grid
            .values()
            .map_err(|e| field("lambda_grid", e.to_string()))?;
        cfg.gamma_grid
            .values()
            .map_err(|e| field("gamma_grid", e.to_string()))?;
        Ok(cfg)
    }

    /// Environment of run `r` with its derived seed.
    pub fn environment_spec(&self, seed: u64) -> EnvironmentSpec {
        let mode = match self.environment {
            Environment::SynthCls => TaskMode::ClassificationHinge,
            _ => TaskMode::RegressionAbsolute,
        };
        EnvironmentSpec {
            d: self.d,
            n_train: self.n_train,
            n_test: self.n_test,
            task_mean: vec![self.task_mean; self.d],
            task_std: self.task_std,
            mode,
            snr: self.snr,
            margin_threshold: self.margin_threshold,
            logistic_scale: self.logistic_scale,
            seed,
        }
    }

    pub fn grid(&self) -> ltl_core::Result<HyperGrid> {
        HyperGrid::new(self.lambda_grid.values()?, self.gamma_grid.values()?)
    }

    pub fn total_tasks(&self) -> usize {
        self.t_train + self.t_val + self.t_test
    }

    /// Every setting that affects results, as a flat config file.
    /// `threads` and `output_dir` are left out.
    pub fn to_raw(&self) -> RawConfig {
        let synthetic = self.environment.is_synthetic();
        RawConfig {
            environment: Some(self.environment),
            seed: Some(self.seed),
            runs: Some(self.runs),
            t_train: Some(self.t_train),
            t_val: Some(self.t_val),
            t_test: Some(self.t_test),
            methods: Some(self.methods.iter().map(|m| m.name().to_string()).collect()),
            lambda_grid: Some(self.lambda_grid.to_string()),
            gamma_grid: Some(self.gamma_grid.to_string()),
            eval_every: Some(self.eval_every),
            metric: Some(self.metric),
            bias_choice: Some(self.bias_choice),
            fista_max_iters: Some(self.fista_max_iters),
            fista_tolerance: Some(self.fista_tolerance),
            accept_unconverged: Some(self.accept_unconverged),
            threads: None,
            output_dir: None,
            d: synthetic.then_some(self.d),
            n_train: Some(self.n_train),
            n_test: synthetic.then_some(self.n_test),
            task_mean: synthetic.then_some(self.task_mean),
            task_std: synthetic.then_some(self.task_std),
            snr: synthetic.then_some(self.snr),
            margin_threshold: synthetic.then_some(self.margin_threshold),
            logistic_scale: synthetic.then_some(self.logistic_scale),
            ratings_path: self.ratings_path.clone(),
            ratings_mode: (!synthetic).then_some(self.ratings_mode),
            rating_threshold: (!synthetic).then_some(self.rating_threshold),
            manifest: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_uses_defaults() {
        let raw = RawConfig::from_toml("", "inline").unwrap();
        let cfg = ExperimentConfig::resolve(raw, Environment::SynthReg).unwrap();
        assert_eq!(
            (cfg.t_train, cfg.t_val, cfg.t_test, cfg.runs),
            (200, 50, 200, 10)
        );
        assert_eq!(cfg.eval_every, 5);
        assert_eq!(cfg.methods.len(), 7);
        assert_eq!(cfg.grid().unwrap().cells(), 100);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RawConfig::from_toml("lamda = 1.0", "inline").unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = RawConfig::from_toml("seed = 3\nruns = 4", "inline").unwrap();
        let flags = RawConfig {
            runs: Some(2),
            ..Default::default()
        };
        let cfg = ExperimentConfig::resolve(file.overlay(flags), Environment::SynthReg).unwrap();
        assert_eq!((cfg.seed, cfg.runs), (3, 2));
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (text, key) in [
            ("t_train = 0", "t_train"),
            ("runs = 0", "runs"),
            ("snr = -1.0", "snr"),
            ("lambda_grid = \"1:0.5:3\"", "lambda_grid"),
            ("methods = [\"LTL-FOO\"]", "methods"),
        ] {
            let raw = RawConfig::from_toml(text, "inline").unwrap();
            let err = ExperimentConfig::resolve(raw, Environment::SynthReg).unwrap_err();
            assert!(err.to_string().contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn ratings_rules() {
        let raw = RawConfig::from_toml("", "inline").unwrap();
        assert!(ExperimentConfig::resolve(raw, Environment::Ratings).is_err());
        let raw = RawConfig::from_toml("ratings_path = \"x.csv\"\nmethods = [\"MEAN-SGD\"]", "i")
            .unwrap();
        let err = ExperimentConfig::resolve(raw, Environment::Ratings).unwrap_err();
        assert!(err.to_string().contains("methods"));
        let raw = RawConfig::from_toml("ratings_path = \"x.csv\"", "i").unwrap();
        let cfg = ExperimentConfig::resolve(raw, Environment::Ratings).unwrap();
        assert_eq!(
            (cfg.t_train, cfg.t_val, cfg.t_test, cfg.runs, cfg.n_train),
            (100, 40, 40, 30, 8)
        );
        assert_eq!(cfg.grid().unwrap().cells(), 900);
        assert!(cfg.methods.iter().all(|m| !m.needs_oracle()) && cfg.methods.len() == 5);
    }

    #[test]
    fn environment_mismatch() {
        let raw = RawConfig::from_toml("environment = \"synth-cls\"", "i").unwrap();
        assert!(ExperimentConfig::resolve(raw, Environment::SynthReg).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let raw = RawConfig::from_toml(
            "seed = 9\nmethods = [\"ITL-SGD\", \"LTL-SGD-SGD\"]\nlambda_grid = \"0.001:10:4\"\ntask_std = 0.3",
            "i",
        )
        .unwrap();
        let cfg = ExperimentConfig::resolve(raw, Environment::SynthCls).unwrap();
        let text = toml::to_string(&cfg.to_raw()).unwrap();
        let back = ExperimentConfig::resolve(
            RawConfig::from_toml(&text, "echo").unwrap(),
            Environment::SynthCls,
        )
        .unwrap();
        assert_eq!(
            ExperimentConfig {
                output_dir: cfg.output_dir.clone(),
                ..back
            },
            cfg
        );
    }

    #[test]
    fn grid_spec_parsing() {
        let g: GridSpec = "1e-6:1e3:10".parse().unwrap();
        assert_eq!((g.lo, g.hi, g.count), (1e-6, 1e3, 10));
        assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
        assert!("1:2".parse::<GridSpec>().is_err());
        assert!("0:2:3".parse::<GridSpec>().is_err());
    }
}
