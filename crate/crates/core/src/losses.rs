//! Absolute and hinge losses: value, subdifferential, Fenchel conjugate and
//! proximity operators.
//!
//! Every function here works on scalars. A loss is always evaluated at a
//! prediction `yhat` for a label `y`; conjugates and proxes act on the
//! prediction argument with the label held fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which 1-Lipschitz loss a task uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `|yhat - y|`, any real label.
    Absolute,
    /// `max(0, 1 - y * yhat)`, labels in `{-1, +1}`.
    Hinge,
}

impl LossKind {
    /// Lipschitz constant in the prediction argument.
    pub const LIPSCHITZ: f64 = 1.0;

    pub fn lipschitz(self) -> f64 {
        Self::LIPSCHITZ
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Absolute => "absolute",
            LossKind::Hinge => "hinge",
        }
    }

    /// Checks that `y` is a legal label for this loss.
    pub fn validate_label(self, y: f64) -> Result<()> {
        let ok = match self {
            LossKind::Absolute => y.is_finite(),
            LossKind::Hinge => y == 1.0 || y == -1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::LabelDomain {
                loss: self,
                label: y,
            })
        }
    }

    /// Interval `[lo, hi]` that `u` must lie in for the conjugate to be finite.
    pub fn conjugate_domain(self, y: f64) -> (f64, f64) {
        match self {
            LossKind::Absolute => (-1.0, 1.0),
            // u / y in [-1, 0]
            LossKind::Hinge => {
                if y > 0.0 {
                    (-1.0, 0.0)
                } else {
                    (0.0, 1.0)
                }
            }
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" => Ok(LossKind::Absolute),
            "hinge" => Ok(LossKind::Hinge),
            other => Err(Error::Parse(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// A closed interval of subgradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgradientInterval {
    pub lo: f64,
    pub hi: f64,
}

impl SubgradientInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn singleton(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lo - slack && v <= self.hi + slack
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

pub fn loss_value(kind: LossKind, yhat: f64, y: f64) -> f64 {
    match kind {
        LossKind::Absolute => (yhat - y).abs(),
        LossKind::Hinge => (1.0 - y * yhat).max(0.0),
    }
}

/// Label-checked variant of [`loss_value`].
pub fn checked_loss_value(kind: LossKind, yhat: f64, y: f64) -> Result<f64> {
    kind.validate_label(y)?;
    Ok(loss_value(kind, yhat, y))
}

/// Full subdifferential of the loss at `yhat`.
pub fn loss_subgradient(kind: LossKind, yhat: f64, y: f64) -> SubgradientInterval {
    match kind {
        LossKind::Absolute => {
            let r = yhat - y;
            if r > 0.0 {
                SubgradientInterval::singleton(1.0)
            } else if r < 0.0 {
                SubgradientInterval::singleton(-1.0)
            } else {
                SubgradientInterval::new(-1.0, 1.0)
            }
        }
        LossKind::Hinge => {
            let margin = 1.0 - y * yhat;
            if margin > 0.0 {
                SubgradientInterval::singleton(-y)
            } else if margin < 0.0 {
                SubgradientInterval::singleton(0.0)
            } else if y > 0.0 {
                SubgradientInterval::new(-1.0, 0.0)
            } else {
                SubgradientInterval::new(0.0, 1.0)
            }
        }
    }
}

pub fn checked_loss_subgradient(kind: LossKind, yhat: f64, y: f64) -> Result<SubgradientInterval> {
    kind.validate_label(y)?;
    Ok(loss_subgradient(kind, yhat, y))
}

/// Deterministic member of a subdifferential: zero when admissible, otherwise
/// the endpoint closest to zero.
pub fn pick_subgradient(interval: SubgradientInterval) -> f64 {
    if interval.lo <= 0.0 && 0.0 <= interval.hi {
        0.0
    } else if interval.lo.abs() <= interval.hi.abs() {
        interval.lo
    } else {
        interval.hi
    }
}

/// Fenchel conjugate in the prediction argument. Returns `f64::INFINITY`
/// outside the conjugate's domain.
pub fn loss_conjugate(kind: LossKind, u: f64, y: f64) -> f64 {
    let (lo, hi) = kind.conjugate_domain(y);
    if !(lo..=hi).contains(&u) {
        return f64::INFINITY;
    }
    match kind {
        LossKind::Absolute => u * y,
        LossKind::Hinge => u / y,
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
        })
    }
}

/// `argmin_p (1/eta) * loss(p, y) + (p - a)^2 / 2`.
pub fn loss_prox(kind: LossKind, eta: f64, a: f64, y: f64) -> Result<f64> {
    check_eta(eta)?;
    Ok(prox_unchecked(kind, eta, a, y))
}

fn prox_unchecked(kind: LossKind, eta: f64, a: f64, y: f64) -> f64 {
    let t = 1.0 / eta;
    match kind {
        LossKind::Absolute => {
            let r = a - y;
            if r > t {
                a - t
            } else if r < -t {
                a + t
            } else {
                y
            }
        }
        LossKind::Hinge => {
            // y * y == 1 for valid labels.
            let ya = y * a;
            if ya > 1.0 {
                a
            } else if ya < 1.0 - y * y * t {
                a + y * t
            } else {
                1.0 / y
            }
        }
    }
}

/// `prox_{eta * loss*}(a)` through Moreau's identity
/// `prox_{eta f*}(a) = a - eta * prox_{f / eta}(a / eta)`.
///
/// The result is clamped onto the conjugate domain so that rounding in the
/// identity never produces an infinite conjugate value.
pub fn conjugate_prox(kind: LossKind, eta: f64, a: f64, y: f64) -> Result<f64> {
    check_eta(eta)?;
    let p = a - eta * prox_unchecked(kind, eta, a / eta, y);
    let (lo, hi) = kind.conjugate_domain(y);
    Ok(p.clamp(lo, hi))
}
