//! Independent reference oracles.
//!
//! Everything here is deliberately brute force — dense eigensolves, grid
//! searches, central differences — and shares nothing with the solvers it
//! checks beyond basic vector arithmetic. The test suite trusts these first;
//! [`self_check`] runs the same battery behind the CLI's `self-check`
//! command.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{DenseSymOp, SymOp};
use crate::problem;

/// Reference-versus-candidate comparison at a stated tolerance.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub reference: f64,
    pub candidate: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn relative(reference: f64, candidate: f64, tolerance: f64) -> Self {
        let abs_gap = (reference - candidate).abs();
        let rel_gap = abs_gap / reference.abs().max(1e-12);
        Self {
            reference,
            candidate,
            abs_gap,
            rel_gap,
            tolerance,
            pass: rel_gap <= tolerance,
        }
    }
}

/// Grid minimization of the quadratic model along `−g` over
/// `α ∈ [0, Δ/‖g‖]`. Returns `(α*, decrease)`.
pub fn brute_force_tr_1d(
    g: &DVector<f64>,
    op: &dyn SymOp,
    delta: f64,
    grid: usize,
) -> (f64, f64) {
    assert!(grid >= 2);
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return (0.0, 0.0);
    }
    let bg = op.apply(g);
    let gbg = g.dot(&bg);
    let alpha_max = delta / g_norm;
    let mut best = (0.0, 0.0);
    for k in 0..=grid {
        let alpha = alpha_max * k as f64 / grid as f64;
        // m(−αg) = −α‖g‖² + ½α²⟨g,Bg⟩; decrease is its negation.
        let dec = alpha * g_norm * g_norm - 0.5 * alpha * alpha * gbg;
        if dec > best.1 {
            best = (alpha, dec);
        }
    }
    best
}

/// Grid minimization of the cubic model along `−g`, searched over the step
/// lengths allowed by the cubic step bound
/// `‖s‖ ≤ (11/4)·max{‖B‖/σ, sqrt(‖g‖/σ)}`. Returns `(α*, decrease)`.
pub fn brute_force_cubic_1d(
    g: &DVector<f64>,
    op: &dyn SymOp,
    b_norm: f64,
    sigma: f64,
    grid: usize,
) -> (f64, f64) {
    assert!(grid >= 2);
    assert!(sigma > 0.0);
    let g_norm = g.norm();
    if g_norm == 0.0 {
        return (0.0, 0.0);
    }
    let bg = op.apply(g);
    let gbg = g.dot(&bg);
    let step_bound = 2.75 * (b_norm / sigma).max((g_norm / sigma).sqrt());
    let alpha_max = step_bound / g_norm;
    let mut best = (0.0, 0.0);
    for k in 0..=grid {
        let alpha = alpha_max * k as f64 / grid as f64;
        let dec = alpha * g_norm * g_norm
            - 0.5 * alpha * alpha * gbg
            - sigma / 3.0 * (alpha * g_norm).powi(3);
        if dec > best.1 {
            best = (alpha, dec);
        }
    }
    best
}

/// Central-difference check of an analytic gradient at several points.
/// Returns the worst per-point report; `pass` requires every point to meet
/// the relative tolerance (coordinates near zero are judged absolutely).
pub fn finite_diff_check<F, G>(
    f: F,
    grad: G,
    points: &[DVector<f64>],
    step: f64,
    tolerance: f64,
) -> OracleReport
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    assert!((1e-8..=1e-4).contains(&step), "step outside sane range");
    let mut worst = OracleReport {
        reference: 0.0,
        candidate: 0.0,
        abs_gap: 0.0,
        rel_gap: 0.0,
        tolerance,
        pass: true,
    };
    for x in points {
        let analytic = grad(x);
        let numeric = central_diff_grad(&f, x, step);
        let denom = analytic.norm().max(1.0);
        let gap = (&analytic - &numeric).norm();
        let rel = gap / denom;
        if rel >= worst.rel_gap {
            worst = OracleReport {
                reference: numeric.norm(),
                candidate: analytic.norm(),
                abs_gap: gap,
                rel_gap: rel,
                tolerance,
                pass: worst.pass && rel <= tolerance,
            };
        }
        if rel > tolerance {
            worst.pass = false;
        }
    }
    worst
}

/// Central-difference gradient of a scalar function.
pub fn central_diff_grad<F>(f: &F, x: &DVector<f64>, step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let d = x.len();
    let mut g = DVector::zeros(d);
    let mut xp = x.clone();
    for j in 0..d {
        let orig = x[j];
        xp[j] = orig + step;
        let fp = f(&xp);
        xp[j] = orig - step;
        let fm = f(&xp);
        xp[j] = orig;
        g[j] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Finite-difference Hessian columns from an analytic gradient:
/// column `j` is `(∇f(x+he_j) − ∇f(x−he_j)) / 2h`.
pub fn central_diff_hessian<G>(grad: &G, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let d = x.len();
    let mut h = DMatrix::zeros(d, d);
    let mut xp = x.clone();
    for j in 0..d {
        let orig = x[j];
        xp[j] = orig + step;
        let gp = grad(&xp);
        xp[j] = orig - step;
        let gm = grad(&xp);
        xp[j] = orig;
        h.set_column(j, &((gp - gm) / (2.0 * step)));
    }
    h
}

/// Smallest eigenpair of a dense symmetric matrix (full decomposition).
/// Panics above 512 dimensions; the oracle is for desk-scale checks.
pub fn dense_min_eig(b: &DMatrix<f64>) -> (f64, DVector<f64>) {
    assert!(b.nrows() == b.ncols(), "matrix must be square");
    assert!(b.nrows() <= 512, "dense oracle capped at 512");
    let eig = b.clone().symmetric_eigen();
    let mut arg = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[arg] {
            arg = i;
        }
    }
    (eig.eigenvalues[arg], eig.eigenvectors.column(arg).into())
}

/// Spectral norm of a dense symmetric matrix via full eigendecomposition.
pub fn spectral_norm_dense(b: &DMatrix<f64>) -> f64 {
    let eig = b.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
}

/// One named check of the battery.
#[derive(Debug, Clone)]
pub struct SelfCheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

/// Runs the desk-scale oracle battery: finite differences against the
/// shipped problems, grid searches against both Cauchy steps, Lanczos
/// against the dense eigensolver, and the sample-size hand values.
pub fn self_check() -> Vec<SelfCheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);

    // Gradients of the quadratic problem.
    {
        let p = crate::problem::QuadraticProblem::new(vec![
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
            DVector::from_vec(vec![2.0, -1.0, 0.5]),
        ])
        .unwrap();
        let points: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(3, |_, _| rng.gen_range(-2.0f64..2.0)))
            .collect();
        let rep = finite_diff_check(
            |x| problem::full_value(&p, x).unwrap(),
            |x| problem::full_grad(&p, x).unwrap(),
            &points,
            1e-6,
            1e-5,
        );
        out.push(SelfCheckResult {
            name: "finite-diff gradient (quadratic)",
            pass: rep.pass,
            detail: format!("max relative gap {:.3e}", rep.rel_gap),
        });
    }

    // Gradients and HVPs of the logistic NLLS on a synthetic set.
    {
        let ds = crate::data::synthetic_dataset(60, 8, 3, 7);
        let p = crate::problem::NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let points: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(8, |_, _| rng.gen_range(-1.0f64..1.0)))
            .collect();
        let rep = finite_diff_check(
            |x| problem::full_value(&p, x).unwrap(),
            |x| problem::full_grad(&p, x).unwrap(),
            &points,
            1e-6,
            1e-5,
        );
        out.push(SelfCheckResult {
            name: "finite-diff gradient (logistic NLLS)",
            pass: rep.pass,
            detail: format!("max relative gap {:.3e}", rep.rel_gap),
        });

        let x = &points[0];
        let fd_hess = central_diff_hessian(
            &|y: &DVector<f64>| problem::full_grad(&p, y).unwrap(),
            x,
            1e-6,
        );
        let mut worst = 0.0f64;
        for j in 0..8 {
            let e_j = DVector::from_fn(8, |i, _| if i == j { 1.0 } else { 0.0 });
            let col = problem::full_hvp(&p, x, &e_j).unwrap();
            let gap = (&col - fd_hess.column(j)).norm() / col.norm().max(1.0);
            worst = worst.max(gap);
        }
        out.push(SelfCheckResult {
            name: "HVP columns vs finite-diff Hessian",
            pass: worst <= 1e-4,
            detail: format!("max relative gap {worst:.3e}"),
        });
    }

    // Trust-region Cauchy point against the 1-D grid.
    {
        let mut pass = true;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let d = rng.gen_range(2..=10);
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0f64..1.0));
            let m = (&a + a.transpose()) * 0.5;
            let op = DenseSymOp(m);
            let g = DVector::from_fn(d, |_, _| rng.gen_range(-2.0f64..2.0));
            let delta = rng.gen_range(0.1..4.0);
            let sol = crate::solvers::cauchy_point_tr(&g, &op, delta);
            let (_, grid_dec) = brute_force_tr_1d(&g, &op, delta, 100_000);
            let slack = 1e-6 * grid_dec.max(1.0);
            if sol.predicted_decrease < grid_dec - slack {
                pass = false;
            }
            worst = worst.max(grid_dec - sol.predicted_decrease);
        }
        out.push(SelfCheckResult {
            name: "TR Cauchy point vs grid search",
            pass,
            detail: format!("max shortfall {worst:.3e}"),
        });
    }

    // Cubic Cauchy step against the 1-D grid.
    {
        let mut pass = true;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let d = rng.gen_range(2..=10);
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0f64..1.0));
            let m = (&a + a.transpose()) * 0.5;
            let b_norm = spectral_norm_dense(&m);
            let op = DenseSymOp(m);
            let g = DVector::from_fn(d, |_, _| rng.gen_range(-2.0f64..2.0));
            let sigma = rng.gen_range(0.05..4.0);
            let sol = crate::solvers::cauchy_step_arc(&g, &op, b_norm, sigma);
            let (_, grid_dec) = brute_force_cubic_1d(&g, &op, b_norm, sigma, 100_000);
            // The explicit α is a guaranteed-fraction step, not the grid
            // optimum; it must reach the Lemma-style fraction of it.
            let floor = g.norm() / 10.0 * (g.norm() / b_norm).min((g.norm() / sigma).sqrt());
            if sol.predicted_decrease < floor - 1e-10 || grid_dec < floor - 1e-10 {
                pass = false;
            }
            worst = worst.max(floor - sol.predicted_decrease);
        }
        out.push(SelfCheckResult {
            name: "cubic Cauchy step decrease floor",
            pass,
            detail: format!("max shortfall {worst:.3e}"),
        });
    }

    // Lanczos vs dense eigensolver.
    {
        let mut pass = true;
        let mut worst = 0.0f64;
        for _ in 0..10 {
            let d = 30;
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0f64..1.0));
            let m = (&a + a.transpose()) * 0.5;
            let (lam, _) = dense_min_eig(&m);
            let op = DenseSymOp(m);
            let est = crate::solvers::lanczos_min_eig(&op, 1e-8, 2 * d, &mut rng);
            let gap = (est.value - lam).abs();
            if gap > 1e-6 || !est.converged {
                pass = false;
            }
            worst = worst.max(gap);
        }
        out.push(SelfCheckResult {
            name: "Lanczos vs dense eigensolver",
            pass,
            detail: format!("max eigenvalue gap {worst:.3e}"),
        });
    }

    // Sample-size hand values.
    {
        let a = crate::sampling::gradient_sample_size(2, 0.2, 1.0, 0.5);
        let delta0 = 2.0 / std::f64::consts::E.powi(2);
        let b = crate::sampling::function_sample_size(1, delta0, 1.0, 1.0, 1.0);
        let pass = a.as_ref().is_ok_and(|&v| v == 192) && b.as_ref().is_ok_and(|&v| v == 32);
        out.push(SelfCheckResult {
            name: "sample-size hand values (192, 32)",
            pass,
            detail: format!("got {a:?}, {b:?}"),
        });
    }

    out
}
