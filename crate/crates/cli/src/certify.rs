//! Runtime certificate suite on random instances: solver agreement, FISTA
//! duality gaps, meta-gradient checks, epsilon-subgradients, the inner regret
//! bound and the loss calculus identities.

use std::fmt;
use std::time::{Duration, Instant};

use ltl_core::erm_oracle::{exact_meta_gradient, fista_solve, meta_objective_value, FistaOptions};
use ltl_core::losses::{
    conjugate_prox, loss_conjugate, loss_prox, loss_subgradient, loss_value, pick_subgradient,
};
use ltl_core::within_task::{
    approx_meta_gradient, dual_coordinate_inner_with, epsilon_certificate, inner_regret_gap,
    regret_bound_for, sgd_inner, sgd_inner_with, InnerOptions,
};
use ltl_core::{LossKind, TaskDataset};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed margin, as text.
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<24} {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// Random dataset with `n <= 20`, `d <= 10` and rows of norm at most 1.
pub fn random_instance<R: Rng>(rng: &mut R, loss: LossKind) -> TaskDataset {
    let n = rng.random_range(1..=20);
    let d = rng.random_range(1..=10);
    let mut x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0f64));
    for mut row in x.rows_mut() {
        let norm = row.dot(&row).sqrt();
        let target = rng.random_range(0.1..1.0);
        if norm > 0.0 {
            row *= target / norm;
        }
    }
    let y = Array1::from_shape_fn(n, |_| match loss {
        LossKind::Absolute => rng.random_range(-3.0..3.0),
        LossKind::Hinge => {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }
    });
    TaskDataset::new(x, y, loss).expect("valid random instance")
}

fn random_loss<R: Rng>(rng: &mut R) -> LossKind {
    if rng.random_bool(0.5) {
        LossKind::Absolute
    } else {
        LossKind::Hinge
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

fn random_vec<R: Rng>(rng: &mut R, d: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(d, |_| rng.random_range(-scale..scale))
}

fn max_abs(a: &Array1<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn timed(name: &'static str, f: impl FnOnce() -> ltl_core::Result<(bool, String)>) -> CheckOutcome {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// SGD and its primal-dual form produce the same iterates.
pub fn solver_equivalence(seed: u64, count: usize) -> CheckOutcome {
    timed("solver-equivalence", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..count {
            let loss = random_loss(&mut rng);
            let data = random_instance(&mut rng, loss);
            let lambda = log_uniform(&mut rng, 1e-3, 1e2);
            let h = random_vec(&mut rng, data.dim(), 2.0);
            let opts = InnerOptions {
                keep_iterates: true,
            };
            let a = sgd_inner_with(&data, lambda, h.view(), opts)?;
            let b = dual_coordinate_inner_with(&data, lambda, h.view(), opts)?;
            for (wa, wb) in a.iterates.iter().flatten().zip(b.iterates.iter().flatten()) {
                let scale = max_abs(wa).max(1.0);
                worst = worst.max(max_abs(&(wa - wb)) / scale);
            }
        }
        Ok((worst <= 1e-10, format!("max relative error {worst:.3e}")))
    })
}

/// FISTA reaches the gap tolerance within the default iteration cap.
pub fn fista_certificate(seed: u64, count: usize) -> CheckOutcome {
    timed("fista-certificate", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FistaOptions::default();
        let (mut worst, mut lowest, mut ok) = (0.0f64, f64::INFINITY, true);
        for _ in 0..count {
            let loss = random_loss(&mut rng);
            let data = random_instance(&mut rng, loss);
            let lambda = log_uniform(&mut rng, 1e-1, 1e1);
            let h = random_vec(&mut rng, data.dim(), 2.0);
            let sol = fista_solve(&data, lambda, h.view(), opts)?;
            ok &= sol.converged && sol.gap < opts.gap_tolerance && sol.gap >= -1e-12;
            worst = worst.max(sol.gap);
            lowest = lowest.min(sol.gap);
        }
        Ok((ok, format!("gap in [{lowest:.3e}, {worst:.3e}]")))
    })
}

/// Exact meta-gradient against central differences of the meta-objective.
pub fn meta_gradient_check(seed: u64, count: usize) -> CheckOutcome {
    timed("meta-gradient", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FistaOptions {
            max_iters: 200_000,
            gap_tolerance: 1e-8,
        };
        let step = 1e-4;
        let mut worst = 0.0f64;
        for _ in 0..count {
            let loss = random_loss(&mut rng);
            let data = random_instance(&mut rng, loss);
            let lambda = log_uniform(&mut rng, 1e-1, 1.0);
            let h = random_vec(&mut rng, data.dim(), 2.0);
            let g = exact_meta_gradient(&data, lambda, h.view(), opts)?;
            for j in 0..data.dim() {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[j] += step;
                hm[j] -= step;
                let fd = (meta_objective_value(&data, lambda, hp.view(), opts)?
                    - meta_objective_value(&data, lambda, hm.view(), opts)?)
                    / (2.0 * step);
                worst = worst.max((fd - g[j]).abs());
            }
        }
        Ok((worst <= 1e-4, format!("max component error {worst:.3e}")))
    })
}

/// `L(h') >= L(h) + <g, h' - h> - eps` for the SGD meta-gradient.
pub fn epsilon_subgradient(seed: u64, count: usize) -> CheckOutcome {
    timed("epsilon-subgradient", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FistaOptions {
            max_iters: 100_000,
            gap_tolerance: 1e-9,
        };
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..count {
            let loss = random_loss(&mut rng);
            let data = random_instance(&mut rng, loss);
            let lambda = log_uniform(&mut rng, 1e-1, 1e1);
            let h = random_vec(&mut rng, data.dim(), 2.0);
            let h2 = random_vec(&mut rng, data.dim(), 2.0);
            let run = sgd_inner(&data, lambda, h.view())?;
            let g = approx_meta_gradient(&run, lambda, h.view())?;
            let erm = fista_solve(&data, lambda, h.view(), opts)?
                .require_converged(opts.gap_tolerance)?;
            let eps = epsilon_certificate(&run, &data, lambda, h.view(), &erm)?;
            let lhs = meta_objective_value(&data, lambda, h2.view(), opts)?;
            let rhs = erm.primal_value + g.dot(&(&h2 - &h)) - eps;
            worst = worst.max(rhs - lhs);
        }
        Ok((worst <= 1e-6, format!("max violation {worst:.3e}")))
    })
}

/// Average regret of one SGD pass against the regret bound.
pub fn regret_bound_check(seed: u64, count: usize) -> CheckOutcome {
    timed("inner-regret", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = FistaOptions {
            max_iters: 100_000,
            gap_tolerance: 1e-9,
        };
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..count {
            let loss = random_loss(&mut rng);
            let data = random_instance(&mut rng, loss);
            let lambda = log_uniform(&mut rng, 1e-1, 1e1);
            let h = random_vec(&mut rng, data.dim(), 2.0);
            let run = sgd_inner(&data, lambda, h.view())?;
            let erm = fista_solve(&data, lambda, h.view(), opts)?
                .require_converged(opts.gap_tolerance)?;
            let gap = inner_regret_gap(&run, &data, lambda, h.view(), &erm)?;
            worst = worst.max(gap - regret_bound_for(&data, lambda));
        }
        Ok((worst <= 1e-6, format!("max excess over bound {worst:.3e}")))
    })
}

/// Fenchel-Young, prox optimality and the Moreau identity on random inputs.
pub fn loss_calculus(seed: u64, count: usize) -> CheckOutcome {
    timed("loss-calculus", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut ok = true;
        for _ in 0..count {
            let kind = random_loss(&mut rng);
            let y = match kind {
                LossKind::Absolute => rng.random_range(-5.0..5.0),
                LossKind::Hinge => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let yhat = rng.random_range(-4.0..4.0);
            // Fenchel-Young at a subgradient: equality
            let u = pick_subgradient(loss_subgradient(kind, yhat, y));
            let fy = loss_value(kind, yhat, y) + loss_conjugate(kind, u, y) - u * yhat;
            ok &= fy.abs() <= 1e-10;
            worst = worst.max(fy.abs());
            // prox optimality: eta (a - p) in the subdifferential at p
            let eta = log_uniform(&mut rng, 1e-2, 5e1);
            let a = rng.random_range(-10.0..10.0);
            let p = loss_prox(kind, eta, a, y)?;
            ok &= loss_subgradient(kind, p, y).contains(eta * (a - p), 1e-9 * eta);
            // Moreau identity
            let c = conjugate_prox(kind, eta, a, y)?;
            let moreau = (c + eta * loss_prox(kind, eta, a / eta, y)? - a).abs();
            ok &= moreau <= 1e-10 * (1.0 + a.abs());
            worst = worst.max(moreau);
        }
        Ok((ok, format!("max identity residual {worst:.3e}")))
    })
}

/// Every check with its default instance count.
pub fn run_all(seed: u64, scale: f64) -> Vec<CheckOutcome> {
    let k = |n: usize| ((n as f64 * scale).ceil() as usize).max(1);
    vec![
        solver_equivalence(seed, k(200)),
        fista_certificate(seed.wrapping_add(1), k(100)),
        meta_gradient_check(seed.wrapping_add(2), k(50)),
        epsilon_subgradient(seed.wrapping_add(3), k(100)),
        regret_bound_check(seed.wrapping_add(4), k(100)),
        loss_calculus(seed.wrapping_add(5), k(1000)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for outcome in run_all(7, 0.05) {
            assert!(outcome.passed, "{outcome}");
        }
    }

    #[test]
    fn random_instances_respect_unit_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let data = random_instance(&mut rng, LossKind::Hinge);
            assert!(data.radius() <= 1.0 && data.n() <= 20 && data.dim() <= 10);
        }
    }
}
