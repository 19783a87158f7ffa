//! Runs an experiment: one task stream per repetition, every requested
//! method on it, curves averaged across repetitions, CSVs plus a manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ltl_core::environments::{
    gen_tasks, load_rating_tasks, mix_seed, split_collection, RatingOptions, TaskCollection,
};
use ltl_core::erm_oracle::FistaOptions;
use ltl_core::evaluation::{
    baseline_curve, evaluation_horizons, mean_std, online_model_selection, CurvePoint, EvalOptions,
    LearningCurve, SelectionOptions,
};
use ltl_core::BiasVector;
use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Environment, ExperimentConfig, Method, RawConfig};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Curves of one repetition, in `cfg.methods` order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub curves: Vec<LearningCurve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Aggregated across runs, in `cfg.methods` order.
    pub curves: Vec<LearningCurve>,
    pub runs: Vec<RunResult>,
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

#[derive(Debug, Serialize)]
struct ManifestTable {
    version: String,
    run_seeds: Vec<String>,
    files: Vec<String>,
}

pub fn run_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    mix_seed(cfg.seed, r as u64)
}

/// Task stream of repetition `r`: `[train, validation, test]`.
pub fn build_streams(cfg: &ExperimentConfig, seed: u64) -> anyhow::Result<[TaskCollection; 3]> {
    let all = match cfg.environment {
        Environment::SynthReg | Environment::SynthCls => {
            gen_tasks(&cfg.environment_spec(seed), cfg.total_tasks())?
        }
        Environment::Ratings => {
            let path = cfg
                .ratings_path
                .as_deref()
                .context("ratings_path is not set")?;
            let opts = RatingOptions {
                mode: cfg.ratings_mode.task_mode(),
                threshold: cfg.rating_threshold,
                n_train: cfg.n_train,
                seed,
            };
            load_rating_tasks(path, opts)
                .with_context(|| format!("loading ratings from {}", path.display()))?
        }
    };
    Ok(split_collection(
        &all,
        cfg.t_train,
        cfg.t_val,
        cfg.t_test,
        seed,
    )?)
}

fn eval_options(cfg: &ExperimentConfig, method: Method) -> EvalOptions {
    EvalOptions {
        solver: method.solver(),
        metric: cfg.metric,
        fista: FistaOptions {
            max_iters: cfg.fista_max_iters,
            gap_tolerance: cfg.fista_tolerance,
        },
    }
}

/// One method on one repetition's streams.
pub fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    streams: &[TaskCollection; 3],
) -> anyhow::Result<LearningCurve> {
    let [train, val, test] = streams;
    let grid = cfg.grid()?;
    let eval = eval_options(cfg, method);
    let horizons = evaluation_horizons(cfg.t_train, cfg.eval_every)?;
    let curve = match method.meta_mode() {
        Some(mode) => {
            let opts = SelectionOptions {
                mode,
                eval,
                accept_unconverged: cfg.accept_unconverged,
                eval_every: cfg.eval_every,
                bias_choice: cfg.bias_choice,
            };
            online_model_selection(method.name(), train, val, test, &grid, &opts)?.curve
        }
        None => {
            let d = train.dim().context("empty training stream")?;
            let bias = if method.needs_oracle() {
                if !cfg.environment.is_synthetic() {
                    bail!("{method} needs a synthetic environment");
                }
                BiasVector::new(Array1::from_elem(d, cfg.task_mean))?
            } else {
                BiasVector::zeros(d)
            };
            baseline_curve(
                method.name(),
                &bias,
                grid.lambdas(),
                val,
                test,
                &horizons,
                &eval,
            )?
        }
    };
    Ok(curve)
}

pub fn run_once(cfg: &ExperimentConfig, r: usize) -> anyhow::Result<RunResult> {
    let seed = run_seed(cfg, r);
    let streams =
        build_streams(cfg, seed).with_context(|| format!("building tasks for run {r}"))?;
    let curves = cfg
        .methods
        .iter()
        .map(|&m| run_method(cfg, m, &streams).with_context(|| format!("{m}, run {r}")))
        .collect::<anyhow::Result<_>>()?;
    Ok(RunResult { seed, curves })
}

/// Most frequent value; ties go to the smallest.
fn mode_of(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let mut best: Option<(usize, f64)> = None;
    for (bits, c) in counts {
        let v = f64::from_bits(bits);
        best = match best {
            Some((bc, bv)) if bc > c || (bc == c && bv <= v) => Some((bc, bv)),
            _ => Some((c, v)),
        };
    }
    best.map(|(_, v)| v).unwrap_or(f64::NAN)
}

/// Pointwise mean and population std across runs of each run's mean error;
/// `lambda` and `gamma` report the most frequently selected values.
pub fn aggregate(curves: &[&LearningCurve]) -> anyhow::Result<LearningCurve> {
    let first = curves.first().context("no curves to aggregate")?;
    let mut points = Vec::with_capacity(first.points.len());
    for (k, p) in first.points.iter().enumerate() {
        let mut means = Vec::with_capacity(curves.len());
        let mut lambdas = Vec::with_capacity(curves.len());
        let mut gammas = Vec::with_capacity(curves.len());
        for c in curves {
            let q = c
                .points
                .get(k)
                .filter(|q| q.t == p.t)
                .context("curves have different horizons")?;
            means.push(q.mean_error);
            lambdas.push(q.lambda);
            gammas.extend(q.gamma);
        }
        let (mean_error, std_error) = mean_std(&means);
        points.push(CurvePoint {
            t: p.t,
            mean_error,
            std_error,
            lambda: mode_of(&lambdas),
            gamma: (!gammas.is_empty()).then(|| mode_of(&gammas)),
        });
    }
    Ok(LearningCurve::new(first.method.clone(), points)?)
}

/// Runs all repetitions in memory without writing anything.
pub fn compute(cfg: &ExperimentConfig) -> anyhow::Result<(Vec<LearningCurve>, Vec<RunResult>)> {
    let work = || -> anyhow::Result<Vec<RunResult>> {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_once(cfg, r))
            .collect()
    };
    let runs = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .context("building thread pool")?
            .install(work)?
    } else {
        work()?
    };
    let curves = (0..cfg.methods.len())
        .map(|i| aggregate(&runs.iter().map(|r| &r.curves[i]).collect::<Vec<_>>()))
        .collect::<anyhow::Result<_>>()?;
    Ok((curves, runs))
}

pub fn curve_file(method: Method) -> String {
    format!("{}.csv", method.name())
}

/// The emitted manifest: the resolved config plus a `[manifest]` table.
pub fn manifest_text(cfg: &ExperimentConfig, runs: &[RunResult]) -> anyhow::Result<String> {
    let mut doc = toml::Table::try_from(cfg.to_raw()).context("serializing config")?;
    let table = ManifestTable {
        version: env!("CARGO_PKG_VERSION").to_string(),
        run_seeds: runs.iter().map(|r| format!("{:#018x}", r.seed)).collect(),
        files: cfg.methods.iter().map(|&m| curve_file(m)).collect(),
    };
    doc.insert("manifest".into(), toml::Value::try_from(table)?);
    Ok(toml::to_string(&doc)?)
}

/// Computes the experiment and writes one CSV per method plus the manifest
/// into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let (curves, runs) = compute(cfg)?;
    write_outputs(cfg, curves, runs)
}

fn write_outputs(
    cfg: &ExperimentConfig,
    curves: Vec<LearningCurve>,
    runs: Vec<RunResult>,
) -> anyhow::Result<ExperimentOutput> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::with_capacity(curves.len());
    for (m, c) in cfg.methods.iter().zip(&curves) {
        let path = dir.join(curve_file(*m));
        fs::write(&path, c.to_csv_string()?)
            .with_context(|| format!("writing {}", path.display()))?;
        files.push(path);
    }
    let manifest = dir.join(MANIFEST_FILE);
    fs::write(&manifest, manifest_text(cfg, &runs)?)
        .with_context(|| format!("writing {}", manifest.display()))?;
    Ok(ExperimentOutput {
        curves,
        runs,
        files,
        manifest,
    })
}

/// Re-runs the experiment recorded in `manifest`, writing into `output_dir`.
pub fn rerun_manifest(manifest: &Path, output_dir: &Path) -> anyhow::Result<ExperimentOutput> {
    let raw = RawConfig::from_path(manifest)?;
    let env = raw
        .environment
        .context("manifest has no `environment` key")?;
    let mut cfg = ExperimentConfig::resolve(raw, env)?;
    cfg.output_dir = output_dir.to_path_buf();
    run_experiment(&cfg)
}
