//! Transfer-risk estimates on held-out tasks, online hyperparameter
//! selection over a `(lambda, gamma)` grid, and fixed-bias baselines.

use std::io::Write;

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{environment_variance, TaskCollection};
use crate::erm_oracle::{fista_solve, FistaOptions};
use crate::error::{Error, Result};
use crate::meta_learner::{theoretical_gamma, GradientMode, MetaConfig, OnlineMetaLearner};
use crate::task_data::{
    check_lambda, empirical_risk, misclassification_rate, BiasVector, TaskDataset,
};
use crate::within_task::sgd_inner;

/// Within-task algorithm used to deploy a model from a bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Averaged iterate of one SGD pass.
    Sgd,
    /// FISTA solution of the biased ERM problem.
    Erm,
}

/// Error measured on the test split of each task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// The task's own training loss.
    Loss,
    /// Misclassification rate; only meaningful for classification tasks.
    ZeroOne,
}

/// Which bias a meta-learning cell deploys at horizon `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasChoice {
    /// `(1/t) sum_{s<=t} h^(s)`.
    Average,
    /// `h^(t+1)`.
    Last,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    lambdas: Vec<f64>,
    gammas: Vec<f64>,
}

impl HyperGrid {
    /// Lambdas must be positive, gammas non-negative (`gamma = 0` freezes the
    /// bias); both nonempty and strictly increasing.
    pub fn new(lambdas: Vec<f64>, gammas: Vec<f64>) -> Result<Self> {
        check_axis("lambda", &lambdas, false)?;
        check_axis("gamma", &gammas, true)?;
        Ok(Self { lambdas, gammas })
    }

    /// `count` log-spaced values from `lo` to `hi` inclusive.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
        if !(lo > 0.0 && lo.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "grid lower end",
                value: lo,
            });
        }
        if !(hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "grid upper end",
                value: hi,
            });
        }
        match count {
            0 => Err(Error::InvalidParameter {
                name: "grid count",
                value: 0.0,
            }),
            1 => Ok(vec![lo]),
            _ => {
                let (a, b) = (lo.log10(), hi.log10());
                let step = (b - a) / (count - 1) as f64;
                Ok((0..count)
                    .map(|i| {
                        if i + 1 == count {
                            hi
                        } else {
                            10f64.powf(a + step * i as f64)
                        }
                    })
                    .collect())
            }
        }
    }

    /// 10 log-spaced values in `[1e-6, 1e3]` on both axes.
    pub fn synthetic_default() -> Self {
        let v = Self::log_spaced(1e-6, 1e3, 10).expect("static grid");
        Self::new(v.clone(), v).expect("static grid")
    }

    /// 30 log-spaced values in `[1e-3, 1e3]` on both axes.
    pub fn real_default() -> Self {
        let v = Self::log_spaced(1e-3, 1e3, 30).expect("static grid");
        Self::new(v.clone(), v).expect("static grid")
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn cells(&self) -> usize {
        self.lambdas.len() * self.gammas.len()
    }

    /// `(lambda, gamma)` of cell `c`, lambda-major.
    pub fn cell(&self, c: usize) -> (f64, f64) {
        let r = self.gammas.len();
        (self.lambdas[c / r], self.gammas[c % r])
    }
}

fn check_axis(name: &'static str, values: &[f64], allow_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Parse(format!("{name} grid is empty")));
    }
    for &v in values {
        let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
        if !ok {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse(format!(
            "{name} grid is not strictly increasing"
        )));
    }
    Ok(())
}

/// How a model is trained and scored on each held-out task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub solver: Solver,
    pub metric: Metric,
    pub fista: FistaOptions,
}

impl EvalOptions {
    pub fn new(solver: Solver) -> Self {
        Self {
            solver,
            metric: Metric::Loss,
            fista: FistaOptions::default(),
        }
    }
}

/// Mean and spread of per-task test errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    /// `NaN` when every task was skipped.
    pub mean: f64,
    /// Population standard deviation across the evaluated tasks.
    pub std: f64,
    pub evaluated: usize,
    /// Tasks whose solver returned an error.
    pub skipped: usize,
    /// ERM deployments whose FISTA run stopped at the iteration cap; their
    /// last iterate is still used.
    pub unconverged: usize,
}

/// Population mean and standard deviation; `(NaN, NaN)` for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains on `train` with `(lambda, h)` and returns the deployed weights and
/// whether the solver met its own stopping rule.
pub fn deploy(
    train: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    solver: Solver,
    fista: FistaOptions,
) -> Result<(Array1<f64>, bool)> {
    match solver {
        Solver::Sgd => Ok((sgd_inner(train, lambda, h)?.averaged, true)),
        Solver::Erm => {
            let sol = fista_solve(train, lambda, h, fista)?;
            Ok((sol.w, sol.converged))
        }
    }
}

fn score(data: &TaskDataset, w: ArrayView1<f64>, metric: Metric) -> Result<f64> {
    match metric {
        Metric::Loss => empirical_risk(data, w),
        Metric::ZeroOne => misclassification_rate(data, w),
    }
}

/// Average test-split error of models trained with `(lambda, bias)` on each
/// task's training split.
pub fn test_error(
    bias: ArrayView1<f64>,
    lambda: f64,
    tasks: &TaskCollection,
    opts: &EvalOptions,
) -> Result<ErrorSummary> {
    check_lambda(lambda)?;
    if let Some(d) = tasks.dim() {
        if d != bias.len() {
            return Err(Error::DimensionMismatch {
                context: "evaluation bias",
                expected: d,
                found: bias.len(),
            });
        }
    }
    let outcomes: Vec<Result<(f64, bool)>> = tasks
        .splits()
        .par_iter()
        .map(|s| {
            let (w, ok) = deploy(&s.train, lambda, bias, opts.solver, opts.fista)?;
            Ok((score(&s.test, w.view(), opts.metric)?, ok))
        })
        .collect();
    let mut errors = Vec::with_capacity(outcomes.len());
    let (mut skipped, mut unconverged) = (0, 0);
    for o in outcomes {
        match o {
            Ok((e, ok)) if e.is_finite() => {
                errors.push(e);
                unconverged += usize::from(!ok);
            }
            _ => skipped += 1,
        }
    }
    let (mean, std) = mean_std(&errors);
    Ok(ErrorSummary {
        mean,
        std,
        evaluated: errors.len(),
        skipped,
        unconverged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub lambda: f64,
    /// `None` for fixed-bias baselines.
    pub gamma: Option<f64>,
}

/// Test error against the number of training tasks seen.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub method: String,
    pub points: Vec<CurvePoint>,
}

pub const CURVE_HEADER: [&str; 6] = ["method", "t", "mean_error", "std_error", "lambda", "gamma"];

impl LearningCurve {
    pub fn new(method: impl Into<String>, points: Vec<CurvePoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].t >= w[1].t) {
            return Err(Error::Parse(
                "curve horizons must be strictly increasing".into(),
            ));
        }
        if points.iter().any(|p| p.std_error < 0.0) {
            return Err(Error::Parse("negative std_error in curve".into()));
        }
        Ok(Self {
            method: method.into(),
            points,
        })
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_error).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CURVE_HEADER)?;
        for p in &self.points {
            w.write_record([
                self.method.clone(),
                p.t.to_string(),
                p.mean_error.to_string(),
                p.std_error.to_string(),
                p.lambda.to_string(),
                p.gamma.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != CURVE_HEADER {
            return Err(Error::Parse(format!("unexpected curve header {header:?}")));
        }
        let mut method = String::new();
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            method = rec[0].to_string();
            let num = |i: usize| -> Result<f64> {
                rec[i].parse().map_err(|_| {
                    Error::Parse(format!("bad `{}` value `{}`", CURVE_HEADER[i], &rec[i]))
                })
            };
            points.push(CurvePoint {
                t: rec[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad `t` value `{}`", &rec[1])))?,
                mean_error: num(2)?,
                std_error: num(3)?,
                lambda: num(4)?,
                gamma: if rec[5].is_empty() {
                    None
                } else {
                    Some(num(5)?)
                },
            });
        }
        Self::new(method, points)
    }

    /// Trailing moving average of the mean errors over `window` points.
    pub fn smoothed_means(&self, window: usize) -> Vec<f64> {
        smooth(&self.means(), window)
    }
}

/// `out[i] = mean(values[i+1-window ..= i])`, truncated at the start.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let s = &values[lo..=i];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}

/// `k, 2k, ...` up to `total`, always ending at `total`.
pub fn evaluation_horizons(total: usize, every: usize) -> Result<Vec<usize>> {
    if every == 0 {
        return Err(Error::InvalidParameter {
            name: "eval_every",
            value: 0.0,
        });
    }
    let mut hs: Vec<usize> = (every..=total).step_by(every).collect();
    if total > 0 && hs.last() != Some(&total) {
        hs.push(total);
    }
    Ok(hs)
}

/// Configuration of one online model-selection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOptions {
    pub mode: GradientMode,
    /// Deployment on validation and test tasks.
    pub eval: EvalOptions,
    /// Forwarded to `MetaConfig` in `ExactErm` mode.
    pub accept_unconverged: bool,
    pub eval_every: usize,
    pub bias_choice: BiasChoice,
}

impl SelectionOptions {
    pub fn new(mode: GradientMode, solver: Solver) -> Self {
        Self {
            mode,
            eval: EvalOptions::new(solver),
            accept_unconverged: false,
            eval_every: 1,
            bias_choice: BiasChoice::Average,
        }
    }
}

/// Validation errors of every grid cell at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRecord {
    pub t: usize,
    /// Lambda-major `p x r` matrix; `+inf` marks a disqualified cell.
    pub errors: Vec<f64>,
    pub selected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub curve: LearningCurve,
    pub validation: Vec<ValidationRecord>,
    /// Cells that failed during meta-training, with the error message.
    pub disqualified: Vec<(usize, String)>,
}

fn check_streams(streams: &[&TaskCollection]) -> Result<()> {
    let mut key = None;
    for s in streams.iter().filter(|s| !s.is_empty()) {
        let k = (s.dim(), s.loss());
        match key {
            None => key = Some(k),
            Some(prev) if prev != k => {
                return Err(Error::InconsistentTasks(
                    "train, validation and test streams differ in dimension or loss".into(),
                ))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Biases a cell deploys at each horizon, or the error that stopped it.
fn cell_biases(
    train: &TaskCollection,
    cfg: MetaConfig,
    horizons: &[usize],
    choice: BiasChoice,
) -> Result<Vec<Array1<f64>>> {
    let d = train.dim().ok_or(Error::EmptyDataset)?;
    let mut learner = OnlineMetaLearner::new(d, cfg);
    let mut out = Vec::with_capacity(horizons.len());
    let mut next = horizons.iter().peekable();
    for (i, task) in train.train_sets().enumerate() {
        learner.observe(task)?;
        if next.peek() == Some(&&(i + 1)) {
            next.next();
            out.push(match choice {
                BiasChoice::Average => learner.average(),
                BiasChoice::Last => learner.current().to_owned(),
            });
        }
    }
    Ok(out)
}

/// Runs one meta-learner per grid cell over `train`, and at each horizon picks
/// the cell with the lowest validation error (each cell validated with its
/// own lambda), recording the winner's test error.
///
/// Ties go to the first cell in lambda-major order. A cell whose
/// meta-training fails is disqualified rather than aborting the run.
pub fn online_model_selection(
    method: &str,
    train: &TaskCollection,
    val: &TaskCollection,
    test: &TaskCollection,
    grid: &HyperGrid,
    opts: &SelectionOptions,
) -> Result<SelectionResult> {
    check_streams(&[train, val, test])?;
    if train.is_empty() || val.is_empty() || test.is_empty() {
        return Err(Error::InsufficientTasks {
            requested: 1,
            available: 0,
        });
    }
    let horizons = evaluation_horizons(train.len(), opts.eval_every)?;
    let trained: Vec<Result<Vec<Array1<f64>>>> = (0..grid.cells())
        .into_par_iter()
        .map(|c| {
            let (lambda, gamma) = grid.cell(c);
            let cfg = MetaConfig::new(lambda, gamma, opts.mode)?
                .with_fista(opts.eval.fista, opts.accept_unconverged);
            cell_biases(train, cfg, &horizons, opts.bias_choice)
        })
        .collect();

    let mut disqualified = Vec::new();
    let mut first_err = None;
    for (c, r) in trained.iter().enumerate() {
        if let Err(e) = r {
            disqualified.push((c, e.to_string()));
            first_err.get_or_insert(c);
        }
    }
    if disqualified.len() == grid.cells() {
        let c = first_err.unwrap_or(0);
        return Err(Error::InconsistentTasks(format!(
            "every grid cell failed; first: {}",
            disqualified[c].1
        )));
    }

    let mut points = Vec::with_capacity(horizons.len());
    let mut validation = Vec::with_capacity(horizons.len());
    for (k, &t) in horizons.iter().enumerate() {
        let errors: Vec<f64> = (0..grid.cells())
            .into_par_iter()
            .map(|c| match &trained[c] {
                Ok(biases) => {
                    let (lambda, _) = grid.cell(c);
                    match test_error(biases[k].view(), lambda, val, &opts.eval) {
                        Ok(s) if s.mean.is_finite() => s.mean,
                        _ => f64::INFINITY,
                    }
                }
                Err(_) => f64::INFINITY,
            })
            .collect();
        let selected = argmin(&errors);
        let (lambda, gamma) = grid.cell(selected);
        let bias = &trained[selected].as_ref().expect("selected cell trained")[k];
        let s = test_error(bias.view(), lambda, test, &opts.eval)?;
        points.push(CurvePoint {
            t,
            mean_error: s.mean,
            std_error: s.std,
            lambda,
            gamma: Some(gamma),
        });
        validation.push(ValidationRecord {
            t,
            errors,
            selected,
        });
    }
    Ok(SelectionResult {
        curve: LearningCurve::new(method, points)?,
        validation,
        disqualified,
    })
}

/// First index of the smallest value; `NaN`s never win.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Fixed-bias baseline: lambda chosen on `val`, flat test error at every horizon.
pub fn baseline_curve(
    method: &str,
    fixed_bias: &BiasVector,
    lambdas: &[f64],
    val: &TaskCollection,
    test: &TaskCollection,
    horizons: &[usize],
    eval: &EvalOptions,
) -> Result<LearningCurve> {
    check_axis("lambda", lambdas, false)?;
    check_streams(&[val, test])?;
    let errors: Vec<f64> = lambdas
        .par_iter()
        .map(|&l| match test_error(fixed_bias.view(), l, val, eval) {
            Ok(s) if s.mean.is_finite() => s.mean,
            _ => f64::INFINITY,
        })
        .collect();
    let lambda = lambdas[argmin(&errors)];
    let s = test_error(fixed_bias.view(), lambda, test, eval)?;
    let points = horizons
        .iter()
        .map(|&t| CurvePoint {
            t,
            mean_error: s.mean,
            std_error: s.std,
            lambda,
            gamma: None,
        })
        .collect();
    LearningCurve::new(method, points)
}

/// Oracle quantities of a synthetic environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleStats {
    /// `Var_m`, the spread of task weights around their mean.
    pub variance: f64,
    /// `|m|`.
    pub mean_norm: f64,
    pub radius: f64,
    pub lipschitz: f64,
}

impl OracleStats {
    /// Estimates from the true task weights of a collection, using their
    /// empirical mean as `m`.
    pub fn from_collection(tasks: &TaskCollection, radius: f64, lipschitz: f64) -> Result<Self> {
        let m = tasks.mean_true_weight()?;
        let variance = environment_variance(tasks, &BiasVector::new(m.clone())?)?;
        Ok(Self {
            variance,
            mean_norm: m.dot(&m).sqrt(),
            radius,
            lipschitz,
        })
    }
}

/// `lambda = (R L / Var) sqrt(2 (log n + 1) / n)` and the meta step size
/// `gamma = (sqrt(2) |m| / (L R)) / sqrt(T (1 + 4 (log n + 1) / n))`.
pub fn theoretical_rates(stats: &OracleStats, n: usize, tasks: usize) -> Result<(f64, f64)> {
    if !(stats.variance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "variance",
            value: stats.variance,
        });
    }
    if n == 0 || tasks == 0 {
        return Err(Error::InvalidParameter {
            name: "n or T",
            value: 0.0,
        });
    }
    let log_term = (n as f64).ln() + 1.0;
    let lambda =
        stats.radius * stats.lipschitz / stats.variance * (2.0 * log_term / n as f64).sqrt();
    let gamma = theoretical_gamma(stats.mean_norm, stats.radius, stats.lipschitz, n, tasks);
    Ok((lambda, gamma))
}
