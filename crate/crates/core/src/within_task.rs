//! Within-task learning: one pass of SGD on the biased regularized risk, its
//! primal-dual twin, and the certificates derived from the run.
//!
//! Both solvers process the examples in stored order, starting at `w = h`,
//! with step `1 / (k lambda)` at step `k`. The primal-dual variant keeps the
//! growing dual vector `u~` of picked loss subgradients and recovers the
//! primal iterate through `w = h - X_k^T u~ / (k lambda)`; both produce the
//! same iterates up to rounding.

use ndarray::{Array1, ArrayView1};

use crate::erm_oracle::ErmSolution;
use crate::error::{Error, Result};
use crate::losses::{loss_subgradient, loss_value, pick_subgradient};
use crate::task_data::{check_lambda, dual_objective, regularized_empirical_risk, TaskDataset};

/// Output of a within-task run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRun {
    pub lambda: f64,
    /// `w^(1)`, always the bias.
    pub first: Array1<f64>,
    /// Mean of `w^(1..n)`; the deployed model.
    pub averaged: Array1<f64>,
    /// `w^(n+1)`.
    pub last: Array1<f64>,
    /// `loss_k(<x_k, w^(k)>) + (lambda/2)|w^(k) - h|^2` for `k = 1..n`.
    pub step_losses: Vec<f64>,
    /// Picked loss subgradients `u~^(n+1)`.
    pub dual_iterate: Option<Array1<f64>>,
    /// All `n + 1` iterates, kept only when requested.
    pub iterates: Option<Vec<Array1<f64>>>,
    /// `max_k lambda |w^(k) - h|` over `k = 1..n+1`.
    pub max_deviation: f64,
}

impl InnerRun {
    pub fn n(&self) -> usize {
        self.step_losses.len()
    }

    pub fn mean_step_loss(&self) -> f64 {
        self.step_losses.iter().sum::<f64>() / self.n() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InnerOptions {
    /// Retain every iterate in [`InnerRun::iterates`].
    pub keep_iterates: bool,
}

/// `2 R^2 L^2 (log n + 1) / (lambda n)`.
pub fn regret_bound(radius: f64, lipschitz: f64, n: usize, lambda: f64) -> f64 {
    let n = n as f64;
    2.0 * radius * radius * lipschitz * lipschitz * (n.ln() + 1.0) / (lambda * n)
}

/// Same bound for the dataset's own radius and loss.
pub fn regret_bound_for(data: &TaskDataset, lambda: f64) -> f64 {
    regret_bound(data.radius(), data.loss().lipschitz(), data.n(), lambda)
}

fn check_inputs(data: &TaskDataset, lambda: f64, h: ArrayView1<f64>) -> Result<()> {
    check_lambda(lambda)?;
    data.check_dim("bias", h.len())
}

/// Single-pass SGD with step `1/(k lambda)` on the biased regularized risk.
pub fn sgd_inner(data: &TaskDataset, lambda: f64, h: ArrayView1<f64>) -> Result<InnerRun> {
    sgd_inner_with(data, lambda, h, InnerOptions::default())
}

pub fn sgd_inner_with(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    opts: InnerOptions,
) -> Result<InnerRun> {
    check_inputs(data, lambda, h)?;
    let n = data.n();
    let loss = data.loss();
    let mut w = h.to_owned();
    let mut sum = Array1::<f64>::zeros(data.dim());
    let mut step_losses = Vec::with_capacity(n);
    let mut dual = Array1::<f64>::zeros(n);
    let mut iterates = opts.keep_iterates.then(|| Vec::with_capacity(n + 1));
    let mut max_deviation = 0.0f64;

    for k in 0..n {
        let x = data.row(k);
        let y = data.label(k);
        let pred = x.dot(&w);
        let diff = &w - &h;
        let sq = diff.dot(&diff);
        step_losses.push(loss_value(loss, pred, y) + 0.5 * lambda * sq);
        max_deviation = max_deviation.max(lambda * sq.sqrt());

        let u = pick_subgradient(loss_subgradient(loss, pred, y));
        dual[k] = u;
        let step = 1.0 / ((k + 1) as f64 * lambda);
        // s_k = x_k u + lambda (w - h)
        let s = &x * u + &diff * lambda;

        sum += &w;
        if let Some(it) = iterates.as_mut() {
            it.push(w.clone());
        }
        w.scaled_add(-step, &s);
    }
    let tail = &w - &h;
    max_deviation = max_deviation.max(lambda * tail.dot(&tail).sqrt());
    if let Some(it) = iterates.as_mut() {
        it.push(w.clone());
    }

    Ok(InnerRun {
        lambda,
        first: h.to_owned(),
        averaged: sum / n as f64,
        last: w,
        step_losses,
        dual_iterate: Some(dual),
        iterates,
        max_deviation,
    })
}

/// Primal-dual form: each step appends the picked subgradient to the dual
/// vector and maps back through the KKT condition of the prefix problem.
pub fn dual_coordinate_inner(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
) -> Result<InnerRun> {
    dual_coordinate_inner_with(data, lambda, h, InnerOptions::default())
}

pub fn dual_coordinate_inner_with(
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    opts: InnerOptions,
) -> Result<InnerRun> {
    check_inputs(data, lambda, h)?;
    let n = data.n();
    let loss = data.loss();
    let mut dual = Array1::<f64>::zeros(n);
    // X_k^T u~^(k+1)
    let mut xtu = Array1::<f64>::zeros(data.dim());
    let mut w = h.to_owned();
    let mut sum = Array1::<f64>::zeros(data.dim());
    let mut step_losses = Vec::with_capacity(n);
    let mut iterates = opts.keep_iterates.then(|| Vec::with_capacity(n + 1));
    let mut max_deviation = 0.0f64;

    for k in 0..n {
        let x = data.row(k);
        let y = data.label(k);
        let pred = x.dot(&w);
        let diff = &w - &h;
        let sq = diff.dot(&diff);
        step_losses.push(loss_value(loss, pred, y) + 0.5 * lambda * sq);
        max_deviation = max_deviation.max(lambda * sq.sqrt());
        sum += &w;
        if let Some(it) = iterates.as_mut() {
            it.push(w.clone());
        }

        let u = pick_subgradient(loss_subgradient(loss, pred, y));
        dual[k] = u;
        xtu.scaled_add(u, &x);
        w = &h - &(&xtu / ((k + 1) as f64 * lambda));
    }
    let tail = &w - &h;
    max_deviation = max_deviation.max(lambda * tail.dot(&tail).sqrt());
    if let Some(it) = iterates.as_mut() {
        it.push(w.clone());
    }

    Ok(InnerRun {
        lambda,
        first: h.to_owned(),
        averaged: sum / n as f64,
        last: w,
        step_losses,
        dual_iterate: Some(dual),
        iterates,
        max_deviation,
    })
}

fn check_run(run: &InnerRun, lambda: f64, h: ArrayView1<f64>) -> Result<()> {
    if run.lambda != lambda {
        return Err(Error::Mismatch("inner run used a different lambda"));
    }
    if run.first.len() != h.len() {
        return Err(Error::DimensionMismatch {
            context: "bias",
            expected: run.first.len(),
            found: h.len(),
        });
    }
    if run.first.view() != h {
        return Err(Error::Mismatch("inner run used a different bias"));
    }
    Ok(())
}

/// `-lambda (w^(n+1) - h)`, an epsilon-subgradient of the meta-objective at `h`.
pub fn approx_meta_gradient(
    run: &InnerRun,
    lambda: f64,
    h: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_run(run, lambda, h)?;
    Ok((&run.last - &h) * (-lambda))
}

fn check_erm(data: &TaskDataset, lambda: f64, h: ArrayView1<f64>, erm: &ErmSolution) -> Result<()> {
    if erm.lambda != lambda {
        return Err(Error::Mismatch("ERM solution used a different lambda"));
    }
    if erm.w.len() != data.dim() || erm.u.len() != data.n() || erm.bias.view() != h {
        return Err(Error::Mismatch("ERM solution belongs to another problem"));
    }
    Ok(())
}

/// Dual suboptimality certificate of the scaled last dual iterate:
/// `Psi_h(u~/n) + Phi_h(w_erm)`.
///
/// Since `Phi_h(w_erm) >= min Phi_h = -min Psi_h`, this upper-bounds the
/// exact dual suboptimality, so `approx_meta_gradient` is an
/// epsilon-subgradient of the meta-objective with this epsilon.
pub fn epsilon_certificate(
    run: &InnerRun,
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    erm: &ErmSolution,
) -> Result<f64> {
    check_inputs(data, lambda, h)?;
    check_run(run, lambda, h)?;
    check_erm(data, lambda, h, erm)?;
    let dual = run
        .dual_iterate
        .as_ref()
        .ok_or(Error::Mismatch("inner run has no dual iterate"))?;
    data.check_n("dual iterate", dual.len())?;
    let scaled = dual / data.n() as f64;
    let psi = dual_objective(data, lambda, h, scaled.view())?;
    let phi = regularized_empirical_risk(data, lambda, h, erm.w.view())?;
    Ok(psi + phi)
}

/// Average regret of the run against the ERM solution:
/// `(1/n) sum_k step_losses[k] - Phi_h(w_erm)`.
pub fn inner_regret_gap(
    run: &InnerRun,
    data: &TaskDataset,
    lambda: f64,
    h: ArrayView1<f64>,
    erm: &ErmSolution,
) -> Result<f64> {
    check_inputs(data, lambda, h)?;
    check_run(run, lambda, h)?;
    check_erm(data, lambda, h, erm)?;
    if run.n() != data.n() {
        return Err(Error::Mismatch("inner run was computed on another dataset"));
    }
    let phi = regularized_empirical_risk(data, lambda, h, erm.w.view())?;
    Ok(run.mean_step_loss() - phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::erm_oracle::{fista_solve, FistaOptions};
    use crate::losses::LossKind;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e1_task(y: f64) -> TaskDataset {
        TaskDataset::new(array![[1.0]], array![y], LossKind::Absolute).unwrap()
    }

    fn random_instance(rng: &mut ChaCha8Rng, loss: LossKind) -> TaskDataset {
        let n = rng.random_range(1..=5);
        let d = rng.random_range(1..=3);
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

    #[test]
    fn stationary_at_kink() {
        let data = e1_task(0.0);
        let run = sgd_inner(&data, 1.0, array![0.0].view()).unwrap();
        assert_eq!(run.first, array![0.0]);
        assert_eq!(run.last, array![0.0]);
        assert_eq!(run.dual_iterate.unwrap(), array![0.0]);
    }

    #[test]
    fn one_step_hand_simulation() {
        let data = e1_task(2.0);
        let h = array![0.0];
        let run = sgd_inner_with(
            &data,
            1.0,
            h.view(),
            InnerOptions {
                keep_iterates: true,
            },
        )
        .unwrap();
        assert_eq!(run.last, array![1.0]);
        assert_eq!(run.iterates.as_ref().unwrap().len(), 2);
        assert_eq!(run.averaged, array![0.0]);
        assert_eq!(run.step_losses, vec![2.0]);

        let dual = dual_coordinate_inner(&data, 1.0, h.view()).unwrap();
        assert_eq!(dual.dual_iterate.as_ref().unwrap(), &array![-1.0]);
        assert_eq!(dual.last, array![1.0]);

        let g = approx_meta_gradient(&run, 1.0, h.view()).unwrap();
        assert_eq!(g, array![-1.0]);
    }

    #[test]
    fn exact_fit_is_fixed_point() {
        let x = array![[0.6, 0.8], [1.0, 0.0], [0.0, -1.0]];
        let h = array![0.5, -1.5];
        let y = x.dot(&h);
        let data = TaskDataset::new(x, y, LossKind::Absolute).unwrap();
        for run in [
            sgd_inner_with(
                &data,
                0.3,
                h.view(),
                InnerOptions {
                    keep_iterates: true,
                },
            )
            .unwrap(),
            dual_coordinate_inner_with(
                &data,
                0.3,
                h.view(),
                InnerOptions {
                    keep_iterates: true,
                },
            )
            .unwrap(),
        ] {
            assert!(run.iterates.as_ref().unwrap().iter().all(|w| *w == h));
            assert_eq!(run.dual_iterate.as_ref().unwrap(), &Array1::<f64>::zeros(3));
            assert_eq!(
                approx_meta_gradient(&run, 0.3, h.view()).unwrap(),
                array![0.0, 0.0]
            );
        }
    }

    #[test]
    fn averaged_is_mean_of_first_n_iterates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = random_instance(&mut rng, LossKind::Hinge);
        let h = array![0.1, 0.2, 0.3];
        let h = h.slice(ndarray::s![..data.dim()]).to_owned();
        let run = sgd_inner_with(
            &data,
            0.5,
            h.view(),
            InnerOptions {
                keep_iterates: true,
            },
        )
        .unwrap();
        let its = run.iterates.as_ref().unwrap();
        assert_eq!(its.len(), data.n() + 1);
        assert_eq!(its[0], h);
        let mean = its[..data.n()]
            .iter()
            .fold(Array1::<f64>::zeros(data.dim()), |a, w| a + w)
            / data.n() as f64;
        assert!((&mean - &run.averaged).iter().all(|v| v.abs() < 1e-14));
        assert_eq!(its[data.n()], run.last);
    }

    #[test]
    fn trajectories_agree_and_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..200 {
            let loss = if i % 2 == 0 {
                LossKind::Absolute
            } else {
                LossKind::Hinge
            };
            let data = random_instance(&mut rng, loss);
            let lambda = 10f64.powf(rng.random_range(-3.0..2.0));
            let h = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-2.0..2.0));
            let opts = InnerOptions {
                keep_iterates: true,
            };
            let a = sgd_inner_with(&data, lambda, h.view(), opts).unwrap();
            let b = dual_coordinate_inner_with(&data, lambda, h.view(), opts).unwrap();
            for (wa, wb) in a
                .iterates
                .as_ref()
                .unwrap()
                .iter()
                .zip(b.iterates.as_ref().unwrap())
            {
                let err = (wa - wb).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let scale = wa.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-10 * scale);
            }
            let bound = data.radius() * loss.lipschitz();
            assert!(a.max_deviation <= bound * (1.0 + 1e-12));
            // -lambda (w^(n+1) - h) == X^T u~ / n
            let g = approx_meta_gradient(&a, lambda, h.view()).unwrap();
            let via_dual =
                data.inputs().t().dot(a.dual_iterate.as_ref().unwrap()) / data.n() as f64;
            let err = (&g - &via_dual).dot(&(&g - &via_dual)).sqrt();
            assert!(err <= 1e-10, "dual identity off by {err}");
        }
    }

    #[test]
    fn certificates_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let opts = FistaOptions::default();
        for i in 0..100 {
            let loss = if i % 2 == 0 {
                LossKind::Absolute
            } else {
                LossKind::Hinge
            };
            let data = random_instance(&mut rng, loss);
            let lambda = 10f64.powf(rng.random_range(-1.0..1.0));
            let h = Array1::from_shape_fn(data.dim(), |_| rng.random_range(-1.0..1.0));
            let run = sgd_inner(&data, lambda, h.view()).unwrap();
            let erm = fista_solve(&data, lambda, h.view(), opts).unwrap();
            assert!(erm.converged);
            let eps = epsilon_certificate(&run, &data, lambda, h.view(), &erm).unwrap();
            let regret = inner_regret_gap(&run, &data, lambda, h.view(), &erm).unwrap();
            let bound = regret_bound_for(&data, lambda);
            assert!(eps >= -1e-8);
            assert!(regret <= bound + opts.gap_tolerance);
            assert!(regret >= -opts.gap_tolerance);
            // eps <= -(regret) + bound, up to rounding
            assert!(
                eps <= -regret + bound + 1e-9,
                "eps {eps}, regret {regret}, bound {bound}"
            );
        }
    }

    #[test]
    fn certificate_of_exact_dual_is_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_instance(&mut rng, LossKind::Absolute);
        let h = Array1::zeros(data.dim());
        let erm = fista_solve(&data, 0.5, h.view(), FistaOptions::default()).unwrap();
        let mut run = sgd_inner(&data, 0.5, h.view()).unwrap();
        run.dual_iterate = Some(&erm.u * data.n() as f64);
        let eps = epsilon_certificate(&run, &data, 0.5, h.view(), &erm).unwrap();
        assert!(eps <= FistaOptions::default().gap_tolerance);
        assert!(eps >= -1e-12);
    }

    #[test]
    fn mismatches_are_rejected() {
        let data = e1_task(2.0);
        let h = array![0.0];
        let run = sgd_inner(&data, 1.0, h.view()).unwrap();
        assert!(matches!(
            approx_meta_gradient(&run, 2.0, h.view()),
            Err(Error::Mismatch(_))
        ));
        assert!(matches!(
            approx_meta_gradient(&run, 1.0, array![1.0].view()),
            Err(Error::Mismatch(_))
        ));
        let erm = fista_solve(&data, 2.0, h.view(), FistaOptions::default()).unwrap();
        assert!(epsilon_certificate(&run, &data, 1.0, h.view(), &erm).is_err());
        assert!(sgd_inner(&data, 0.0, h.view()).is_err());
        assert!(sgd_inner(&data, 1.0, array![0.0, 1.0].view()).is_err());
    }
}
