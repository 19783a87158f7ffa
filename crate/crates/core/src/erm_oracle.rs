//! Biased ERM through accelerated proximal gradient (FISTA) on the dual.
//!
//! The dual objective splits into a smooth part
//! `F_h(u) = |X^T u|^2 / (2 lambda) - <X h, u>` with gradient
//! `X X^T u / lambda - X h` and Lipschitz constant at most `n R^2 / lambda`,
//! and a separable part `G(u) = (1/n) sum_i loss*(n u_i)` whose prox is
//! `(prox_{c G}(u))_i = prox_{n c loss*}(n u_i) / n`. The primal point is
//! recovered through `w = h - X^T u / lambda`, and the duality gap
//! `Phi_h(w) + Psi_h(u)` is the stopping test.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::losses::conjugate_prox;
use crate::task_data::{
    check_lambda, dual_objective, regularized_empirical_risk, snap_to_domain, TaskDataset,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FistaOptions {
    pub max_iters: usize,
    pub gap_tolerance: f64,
}

impl Default for FistaOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            gap_tolerance: 1e-6,
        }
    }
}

/// Approximate minimizer of the biased regularized empirical risk together
/// with the dual point certifying it.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmSolution {
    pub lambda: f64,
    pub bias: Array1<f64>,
    /// Primal point `w_h`.
    pub w: Array1<f64>,
    /// Dual point `u_h`.
    pub u: Array1<f64>,
    /// `Phi_h(w) + Psi_h(u)` at exit.
    pub gap: f64,
    pub iters: usize,
    pub converged: bool,
    /// `Phi_h(w)`.
    pub primal_value: f64,
}

impl ErmSolution {
    /// `Ok(self)` when the gap tolerance was met, `NotConverged` otherwise.
    pub fn require_converged(self, tolerance: f64) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                gap: self.gap,
                tolerance,
                iters: self.iters,
            })
        }
    }
}

pub fn fista_solve(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    opts: FistaOptions,
) -> Result<ErmSolution> {
    check_lambda(lambda)?;
    data.check_dim("bias", h.len())?;
    if !(opts.gap_tolerance > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gap_tolerance",
            value: opts.gap_tolerance,
        });
    }
    let n = data.n();
    let nf = n as f64;
    let loss = data.loss();
    let x = data.inputs();
    let labels = data.labels();
    let r2 = data.radius() * data.radius();
    // with all-zero inputs F_h vanishes and any step works
    let step = if r2 > 0.0 {
        lambda / (nf * r2)
    } else {
        lambda / nf
    };

    let gram: Array2<f64> = x.dot(&x.t());
    let xh = x.dot(&h);

    let mut u_prev = Array1::<f64>::zeros(n);
    let mut p = u_prev.clone();
    let mut t = 1.0f64;

    let mut u = u_prev.clone();
    let mut w = h.to_owned();
    let mut gap = f64::INFINITY;
    let mut primal_value = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;

    for k in 1..=opts.max_iters {
        iters = k;
        let grad = gram.dot(&p) / lambda - &xh;
        let v = &p - &(grad * step);
        for i in 0..n {
            let q = conjugate_prox(loss, nf * step, nf * v[i], labels[i])?;
            u[i] = snap_to_domain(loss, q, labels[i]) / nf;
        }
        w = &h - &(x.t().dot(&u) / lambda);

        primal_value = regularized_empirical_risk(data, lambda, h, w.view())?;
        gap = primal_value + dual_objective(data, lambda, h, u.view())?;
        if gap < opts.gap_tolerance {
            converged = true;
            break;
        }

        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        p = &u + &((&u - &u_prev) * momentum);
        u_prev.assign(&u);
        t = t_next;
    }

    Ok(ErmSolution {
        lambda,
        bias: h.to_owned(),
        w,
        u,
        gap,
        iters,
        converged,
        primal_value,
    })
}

/// `L(h) = min_w Phi_h(w)`, accurate to the gap tolerance.
pub fn meta_objective_value(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    opts: FistaOptions,
) -> Result<f64> {
    let sol = fista_solve(data, lambda, h, opts)?.require_converged(opts.gap_tolerance)?;
    Ok(sol.primal_value)
}

/// `grad L(h) = -lambda (w_h - h)`.
pub fn exact_meta_gradient(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    opts: FistaOptions,
) -> Result<Array1<f64>> {
    let sol = fista_solve(data, lambda, h, opts)?.require_converged(opts.gap_tolerance)?;
    Ok(gradient_from_solution(&sol))
}

/// `-lambda (w - h)` for an already computed solution.
pub fn gradient_from_solution(sol: &ErmSolution) -> Array1<f64> {
    (&sol.w - &sol.bias) * (-sol.lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;
    use crate::task_data::empirical_risk;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(
        rng: &mut ChaCha8Rng,
        loss: LossKind,
        max_n: usize,
        max_d: usize,
    ) -> TaskDataset {
        let n = rng.random_range(1..=max_n);
        let d = rng.random_range(1..=max_d);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |_| match loss {
            LossKind::Absolute => rng.random_range(-2.0..2.0),
            LossKind::Hinge => {
                if rng.random_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        TaskDataset::new(x, y, loss).unwrap()
    }

    fn tight() -> FistaOptions {
        FistaOptions {
            max_iters: 200_000,
            gap_tolerance: 1e-8,
        }
    }

    #[test]
    fn exact_fit_converges_immediately() {
        let x = array![[0.6, 0.8], [1.0, 0.0]];
        let h = array![2.0, -1.0];
        let y = x.dot(&h);
        let data = TaskDataset::new(x, y, LossKind::Absolute).unwrap();
        let sol = fista_solve(&data, 0.1, h.view(), FistaOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iters, 1);
        assert_eq!(sol.u, array![0.0, 0.0]);
        assert_eq!(sol.w, h);
        assert!(sol.gap.abs() < 1e-12);
        assert_eq!(
            meta_objective_value(&data, 0.1, h.view(), FistaOptions::default()).unwrap(),
            0.0
        );
        assert_eq!(
            exact_meta_gradient(&data, 0.1, h.view(), FistaOptions::default()).unwrap(),
            array![0.0, 0.0]
        );
    }

    #[test]
    fn one_dimensional_absolute_matches_grid() {
        // Phi(w) = |w - 2| + w^2 / 2
        let data = TaskDataset::new(array![[1.0]], array![2.0], LossKind::Absolute).unwrap();
        let h = array![0.0];
        let sol = fista_solve(&data, 1.0, h.view(), FistaOptions::default()).unwrap();
        let (mut best_w, mut best) = (0.0, f64::INFINITY);
        for i in 0..=400_000 {
            let w = -2.0 + i as f64 * 1e-5;
            let v = (w - 2.0f64).abs() + 0.5 * w * w;
            if v < best {
                best = v;
                best_w = w;
            }
        }
        assert!(sol.converged);
        assert!(sol.gap < 1e-6);
        assert!((sol.w[0] - best_w).abs() < 1e-3);
        assert!((sol.primal_value - best).abs() < 1e-6);
    }

    #[test]
    fn random_instances_reach_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for i in 0..100 {
            let loss = if i % 2 == 0 {
                LossKind::Absolute
            } else {
                LossKind::Hinge
            };
            let data = random_instance(&mut rng, loss, 8, 5);
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let h = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-2.0..2.0));
            let sol = fista_solve(&data, lambda, h.view(), FistaOptions::default()).unwrap();
            assert!(
                sol.converged,
                "instance {i}: gap {} after {} iters",
                sol.gap, sol.iters
            );
            assert!(sol.gap >= -1e-12);
            let value = sol.primal_value;
            assert!(value <= empirical_risk(&data, h.view()).unwrap() + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let opts = tight();
        for i in 0..20 {
            let loss = if i % 2 == 0 {
                LossKind::Absolute
            } else {
                LossKind::Hinge
            };
            let data = random_instance(&mut rng, loss, 5, 3);
            let lambda = 10f64.powf(rng.random_range(-1.0..0.0));
            let h = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-2.0..2.0));
            let g = exact_meta_gradient(&data, lambda, h.view(), opts).unwrap();
            for j in 0..data.dim() {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[j] += 1e-4;
                hm[j] -= 1e-4;
                let fp = meta_objective_value(&data, lambda, hp.view(), opts).unwrap();
                let fm = meta_objective_value(&data, lambda, hm.view(), opts).unwrap();
                let fd = (fp - fm) / 2e-4;
                assert!(
                    (fd - g[j]).abs() <= 1e-4,
                    "component {j}: fd {fd} vs {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn smoothness_lipschitz_and_convexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let opts = tight();
        for i in 0..30 {
            let loss = if i % 2 == 0 {
                LossKind::Absolute
            } else {
                LossKind::Hinge
            };
            let data = random_instance(&mut rng, loss, 6, 3);
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let h1 = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-3.0..3.0f64));
            let h2 = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-3.0..3.0f64));
            let mid = (&h1 + &h2) / 2.0;
            let dist: f64 = (&h1 - &h2).dot(&(&h1 - &h2)).sqrt();
            let s1 = fista_solve(&data, lambda, h1.view(), opts).unwrap();
            let s2 = fista_solve(&data, lambda, h2.view(), opts).unwrap();
            let sm = fista_solve(&data, lambda, mid.view(), opts).unwrap();
            let g1 = gradient_from_solution(&s1);
            let g2 = gradient_from_solution(&s2);
            let gd: f64 = (&g1 - &g2).dot(&(&g1 - &g2)).sqrt();
            assert!(gd <= lambda * dist + 1e-6);
            let lip = data.radius() * loss.lipschitz();
            assert!((s1.primal_value - s2.primal_value).abs() <= lip * dist + 1e-8);
            assert!(sm.primal_value <= 0.5 * (s1.primal_value + s2.primal_value) + 1e-8);
        }
    }

    /// Concave 1-D maximization by golden section.
    fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..120 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) >= f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        f((a + b) / 2.0)
    }

    #[test]
    fn conjugate_spot_check() {
        // L*(alpha) >= <alpha, h> - L(h) for every h, and
        // L*(alpha) - alpha^2 / (2 lambda) does not depend on lambda.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let opts = tight();
        for _ in 0..4 {
            let x = Array2::from_shape_fn((4, 1), |_| rng.random_range(0.2..1.0));
            let y = Array1::from_shape_fn(4, |_| rng.random_range(-2.0..2.0));
            let data = TaskDataset::new(x.clone(), y, LossKind::Absolute).unwrap();
            let reach = x.sum() / 4.0;
            let alpha = rng.random_range(-0.5..0.5) * reach;
            let value = |lambda: f64, h: f64| {
                meta_objective_value(&data, lambda, array![h].view(), opts).unwrap()
            };
            let mut shifted = Vec::new();
            for lambda in [0.5, 2.0] {
                let sup = golden_max(|h| alpha * h - value(lambda, h), -60.0, 60.0);
                for _ in 0..5 {
                    let h = rng.random_range(-5.0..5.0);
                    assert!(sup >= alpha * h - value(lambda, h) - 1e-8);
                }
                shifted.push(sup - alpha * alpha / (2.0 * lambda));
            }
            assert!((shifted[0] - shifted[1]).abs() < 1e-5, "{shifted:?}");
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let data = random_instance(&mut rng, LossKind::Absolute, 8, 2);
        let h = Array1::zeros(data.dim());
        let opts = FistaOptions {
            max_iters: 1,
            gap_tolerance: 1e-14,
        };
        let sol = fista_solve(&data, 1e-4, h.view(), opts).unwrap();
        assert!(!sol.converged);
        assert!(matches!(
            meta_objective_value(&data, 1e-4, h.view(), opts),
            Err(Error::NotConverged { .. })
        ));
        assert!(fista_solve(&data, -1.0, h.view(), opts).is_err());
    }
}
