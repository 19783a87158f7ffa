//! Online estimation of the bias: SGD over the task stream on the
//! meta-objective `L_Z(h) = min_w Phi_h(w)`.
//!
//! Starting from `h^(1) = 0`, each incoming task produces a meta-gradient at
//! the current bias, either the cheap `-lambda (w^(n+1) - h)` from one SGD pass
//! or the exact `-lambda (w_h - h)` from the ERM oracle, followed by
//! `h^(t+1) = h^(t) - gamma * gradient`. The deployed bias is the running
//! average of `h^(1..T)`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::erm_oracle::{fista_solve, gradient_from_solution, FistaOptions};
use crate::error::{Error, Result};
use crate::losses::LossKind;
use crate::task_data::{check_lambda, TaskDataset};
use crate::within_task::{approx_meta_gradient, sgd_inner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    /// Last SGD iterate.
    ApproxSgd,
    /// FISTA solution of the biased ERM problem.
    ExactErm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub mode: GradientMode,
    pub fista: FistaOptions,
    /// In `ExactErm` mode, use the FISTA output even when the gap tolerance
    /// was not met within `fista.max_iters`.
    pub accept_unconverged: bool,
}

impl MetaConfig {
    pub fn new(lambda: f64, gamma: f64, mode: GradientMode) -> Result<Self> {
        check_lambda(lambda)?;
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: gamma,
            });
        }
        Ok(Self {
            lambda,
            gamma,
            mode,
            fista: FistaOptions::default(),
            accept_unconverged: false,
        })
    }

    pub fn with_fista(mut self, fista: FistaOptions, accept_unconverged: bool) -> Self {
        self.fista = fista;
        self.accept_unconverged = accept_unconverged;
        self
    }
}

/// Meta-gradient at `h` for one task under the configured mode.
pub fn meta_gradient(
    h: ArrayView1<f64>,
    task: &TaskDataset,
    cfg: &MetaConfig,
) -> Result<Array1<f64>> {
    match cfg.mode {
        GradientMode::ApproxSgd => {
            let run = sgd_inner(task, cfg.lambda, h)?;
            approx_meta_gradient(&run, cfg.lambda, h)
        }
        GradientMode::ExactErm => {
            let mut sol = fista_solve(task, cfg.lambda, h, cfg.fista)?;
            if !cfg.accept_unconverged {
                sol = sol.require_converged(cfg.fista.gap_tolerance)?;
            }
            Ok(gradient_from_solution(&sol))
        }
    }
}

/// One update; returns `(h^(t+1), gradient)`.
pub fn meta_step(
    h: ArrayView1<f64>,
    task: &TaskDataset,
    cfg: &MetaConfig,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let grad = meta_gradient(h, task, cfg)?;
    let mut next = h.to_owned();
    next.scaled_add(-cfg.gamma, &grad);
    Ok((next, grad))
}

/// Streaming state of the meta-algorithm, for callers that interleave
/// updates with evaluation.
#[derive(Debug, Clone)]
pub struct OnlineMetaLearner {
    cfg: MetaConfig,
    current: Array1<f64>,
    sum: Array1<f64>,
    seen: usize,
    loss: Option<LossKind>,
}

impl OnlineMetaLearner {
    pub fn new(dim: usize, cfg: MetaConfig) -> Self {
        Self {
            cfg,
            current: Array1::zeros(dim),
            sum: Array1::zeros(dim),
            seen: 0,
            loss: None,
        }
    }

    pub fn config(&self) -> &MetaConfig {
        &self.cfg
    }

    /// Number of tasks processed so far.
    pub fn tasks_seen(&self) -> usize {
        self.seen
    }

    /// The next bias iterate `h^(t+1)`.
    pub fn current(&self) -> ArrayView1<'_, f64> {
        self.current.view()
    }

    /// `(1/t) sum_{s<=t} h^(s)`; equals `h^(1) = 0` before any task.
    pub fn average(&self) -> Array1<f64> {
        if self.seen == 0 {
            self.current.clone()
        } else {
            &self.sum / self.seen as f64
        }
    }

    /// Processes one task and returns the meta-gradient used.
    pub fn observe(&mut self, task: &TaskDataset) -> Result<Array1<f64>> {
        if task.dim() != self.current.len() {
            return Err(Error::InconsistentTasks(format!(
                "task has dimension {}, stream has {}",
                task.dim(),
                self.current.len()
            )));
        }
        match self.loss {
            Some(kind) if kind != task.loss() => {
                return Err(Error::InconsistentTasks(format!(
                    "task uses the {} loss, stream uses {}",
                    task.loss(),
                    kind
                )))
            }
            _ => self.loss = Some(task.loss()),
        }
        let (next, grad) = meta_step(self.current.view(), task, &self.cfg)?;
        self.sum += &self.current;
        self.current = next;
        self.seen += 1;
        Ok(grad)
    }
}

/// Full trajectory of a meta-training run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaRun {
    /// `h^(1..T+1)`.
    pub bias_iterates: Vec<Array1<f64>>,
    /// `(1/T) sum_{t=1..T} h^(t)`.
    pub averaged_bias: Array1<f64>,
    pub meta_gradients: Vec<Array1<f64>>,
    /// `h_bar_t` for `t = 1..T`, when requested.
    pub running_averages: Option<Vec<Array1<f64>>>,
}

pub fn meta_train<'a, I>(tasks: I, cfg: &MetaConfig, keep_prefix_averages: bool) -> Result<MetaRun>
where
    I: IntoIterator<Item = &'a TaskDataset>,
{
    let mut tasks = tasks.into_iter().peekable();
    let dim = tasks
        .peek()
        .map(|t| t.dim())
        .ok_or_else(|| Error::InconsistentTasks("empty task stream".into()))?;
    let mut learner = OnlineMetaLearner::new(dim, *cfg);
    let mut bias_iterates = vec![learner.current().to_owned()];
    let mut meta_gradients = Vec::new();
    let mut running = keep_prefix_averages.then(Vec::new);
    for task in tasks {
        let g = learner.observe(task)?;
        meta_gradients.push(g);
        bias_iterates.push(learner.current().to_owned());
        if let Some(r) = running.as_mut() {
            r.push(learner.average());
        }
    }
    Ok(MetaRun {
        averaged_bias: learner.average(),
        bias_iterates,
        meta_gradients,
        running_averages: running,
    })
}

/// Step size `gamma` that balances the meta-level terms of the excess
/// transfer risk bound of the averaged bias, given the norm of the task mean.
pub fn theoretical_gamma(
    mean_norm: f64,
    radius: f64,
    lipschitz: f64,
    n: usize,
    tasks: usize,
) -> f64 {
    let log_term = (n as f64).ln() + 1.0;
    let denom = tasks as f64 * (1.0 + 4.0 * log_term / n as f64);
    std::f64::consts::SQRT_2 * mean_norm / (lipschitz * radius) * (1.0 / denom).sqrt()
}

/// `(lambda, gamma)` for the averaged-bias bound:
/// `lambda = (2 R L / Var_m) sqrt((log n + 1) / n)` and [`theoretical_gamma`].
pub fn theoretical_step_sizes(
    mean_norm: f64,
    variance: f64,
    radius: f64,
    lipschitz: f64,
    n: usize,
    tasks: usize,
) -> (f64, f64) {
    let log_term = (n as f64).ln() + 1.0;
    let lambda = 2.0 * radius * lipschitz / variance * (log_term / n as f64).sqrt();
    (
        lambda,
        theoretical_gamma(mean_norm, radius, lipschitz, n, tasks),
    )
}
