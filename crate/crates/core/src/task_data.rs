//! Per-task datasets and the primal/dual objectives of biased regularized
//! empirical risk minimization.
//!
//! For a dataset `(X, y)` with `n` rows, regularization `lambda` and bias `h`:
//!
//! ```text
//! primal  Phi_h(w) = (1/n) sum_k loss(<x_k, w>, y_k) + (lambda/2) |w - h|^2
//! dual    Psi_h(u) = (1/n) sum_k loss*(n u_k, y_k) + |X^T u|^2 / (2 lambda) - <X h, u>
//! ```
//!
//! with `min Phi_h = -min Psi_h` and the KKT map `w = h - X^T u / lambda`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{loss_conjugate, loss_value, LossKind};

/// Relative slack when deciding whether `n * u_k` sits on the conjugate domain
/// boundary; values this close are snapped onto the boundary.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// One task's labeled examples.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    inputs: Array2<f64>,
    labels: Array1<f64>,
    loss: LossKind,
    radius: f64,
}

impl TaskDataset {
    /// Builds a dataset whose radius bound is the largest row norm.
    pub fn new(inputs: Array2<f64>, labels: Array1<f64>, loss: LossKind) -> Result<Self> {
        let radius = Self::validate(&inputs, &labels, loss)?;
        Ok(Self {
            inputs,
            labels,
            loss,
            radius,
        })
    }

    /// Builds a dataset with an explicit radius bound; every row must fit inside it.
    pub fn with_radius_bound(
        inputs: Array2<f64>,
        labels: Array1<f64>,
        loss: LossKind,
        bound: f64,
    ) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius_bound",
                value: bound,
            });
        }
        Self::validate(&inputs, &labels, loss)?;
        for (row, x) in inputs.rows().into_iter().enumerate() {
            let norm = x.dot(&x).sqrt();
            if norm > bound * (1.0 + 1e-12) {
                return Err(Error::RadiusBound { row, norm, bound });
            }
        }
        Ok(Self {
            inputs,
            labels,
            loss,
            radius: bound,
        })
    }

    fn validate(inputs: &Array2<f64>, labels: &Array1<f64>, loss: LossKind) -> Result<f64> {
        let (n, d) = inputs.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: n,
                found: labels.len(),
            });
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inputs"));
        }
        for &y in labels {
            loss.validate_label(y)?;
        }
        Ok(inputs
            .rows()
            .into_iter()
            .map(|x| x.dot(&x).sqrt())
            .fold(0.0, f64::max))
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    /// Radius `R` with `|x_k| <= R` for all rows.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn inputs(&self) -> ArrayView2<'_, f64> {
        self.inputs.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, f64> {
        self.labels.view()
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(k)
    }

    pub fn label(&self, k: usize) -> f64 {
        self.labels[k]
    }

    pub(crate) fn check_dim(&self, context: &'static str, found: usize) -> Result<()> {
        if found == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected: self.dim(),
                found,
            })
        }
    }

    pub(crate) fn check_n(&self, context: &'static str, found: usize) -> Result<()> {
        if found == self.n() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context,
                expected: self.n(),
                found,
            })
        }
    }

    /// Predictions `X w`.
    pub fn predict(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim("weight vector", w.len())?;
        Ok(self.inputs.dot(&w))
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
        })
    }
}

/// A bias vector `h`, the center of the squared-distance regularizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Self(values.to_vec()))
        } else {
            Err(Error::NonFinite("bias vector"))
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.0[..])
    }

    pub fn to_array(&self) -> Array1<f64> {
        Array1::from(self.0.clone())
    }
}

/// Train/test split of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub train: TaskDataset,
    pub test: TaskDataset,
}

impl TaskSplit {
    pub fn new(train: TaskDataset, test: TaskDataset) -> Result<Self> {
        if train.dim() != test.dim() {
            return Err(Error::DimensionMismatch {
                context: "test split",
                expected: train.dim(),
                found: test.dim(),
            });
        }
        if train.loss() != test.loss() {
            return Err(Error::InconsistentTasks(
                "train and test splits use different losses".into(),
            ));
        }
        Ok(Self { train, test })
    }
}

/// `(1/n) sum_k loss(<x_k, w>, y_k)`.
pub fn empirical_risk(data: &TaskDataset, w: ArrayView1<f64>) -> Result<f64> {
    let preds = data.predict(w)?;
    let total: f64 = preds
        .iter()
        .zip(data.labels.iter())
        .map(|(&p, &y)| loss_value(data.loss, p, y))
        .sum();
    Ok(total / data.n() as f64)
}

/// Fraction of examples with `sign(<x_k, w>) != y_k`; a zero prediction counts
/// as a mistake.
pub fn misclassification_rate(data: &TaskDataset, w: ArrayView1<f64>) -> Result<f64> {
    let preds = data.predict(w)?;
    let wrong = preds
        .iter()
        .zip(data.labels.iter())
        .filter(|(&p, &y)| p * y <= 0.0)
        .count();
    Ok(wrong as f64 / data.n() as f64)
}

/// `Phi_h(w)`: empirical risk plus `(lambda/2) |w - h|^2`.
pub fn regularized_empirical_risk(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> Result<f64> {
    check_lambda(lambda)?;
    data.check_dim("bias", h.len())?;
    let risk = empirical_risk(data, w)?;
    let diff = &w - &h;
    Ok(risk + 0.5 * lambda * diff.dot(&diff))
}

/// `Psi_h(u)`; `+inf` when some `n u_k` lies outside the conjugate domain.
pub fn dual_objective(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    u: ArrayView1<f64>,
) -> Result<f64> {
    check_lambda(lambda)?;
    data.check_dim("bias", h.len())?;
    data.check_n("dual vector", u.len())?;
    let n = data.n() as f64;
    let mut conj = 0.0;
    for (&uk, &yk) in u.iter().zip(data.labels.iter()) {
        let v = snap_to_domain(data.loss, n * uk, yk);
        let c = loss_conjugate(data.loss, v, yk);
        if c.is_infinite() {
            return Ok(f64::INFINITY);
        }
        conj += c;
    }
    let xtu = data.inputs.t().dot(&u);
    let xh = data.inputs.dot(&h);
    Ok(conj / n + xtu.dot(&xtu) / (2.0 * lambda) - xh.dot(&u))
}

/// Snaps values within rounding distance of the conjugate domain onto it.
pub(crate) fn snap_to_domain(loss: LossKind, v: f64, y: f64) -> f64 {
    let (lo, hi) = loss.conjugate_domain(y);
    let slack = DOMAIN_SLACK * (1.0 + v.abs());
    if v < lo && v >= lo - slack {
        lo
    } else if v > hi && v <= hi + slack {
        hi
    } else {
        v
    }
}

/// KKT map `w = h - X^T u / lambda`.
pub fn primal_from_dual(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    u: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_lambda(lambda)?;
    data.check_dim("bias", h.len())?;
    data.check_n("dual vector", u.len())?;
    let xtu = data.inputs.t().dot(&u);
    Ok(&h - &(xtu / lambda))
}
