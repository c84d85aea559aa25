//! Index-set sampling, sample-size formulas, and inexactness budgets.
//!
//! Three uniform without-replacement subsets of `[n]` drive one iteration:
//! `S_h` (function values), `S_g` (gradients), and `S_B` (Hessian-vector
//! products). Their sizes come either from a fixed fraction of `n`, from the
//! concentration formulas below, or from the variance rule
//! `|S_h| = min{n, max{H₁/ε_g, H₂/ε_B}}`.

use nalgebra::DVector;
use rand::Rng;

use crate::problem::{self, FiniteSumProblem};
use crate::props::SetSizes;
use crate::{Error, Result};

/// The three index collections of one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSets {
    pub s_h: Vec<usize>,
    pub s_g: Vec<usize>,
    pub s_b: Vec<usize>,
    /// True when the `S_h = S_g` coupling was applied.
    pub coupled: bool,
}

impl SampleSets {
    pub fn sizes(&self) -> SetSizes {
        SetSizes {
            h: self.s_h.len(),
            g: self.s_g.len(),
            b: self.s_b.len(),
        }
    }
}

/// Inexactness tolerances and the optimality targets they must stay below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InexactnessBudget {
    /// Gradient error bound `ε_g`.
    pub eps_g: f64,
    /// Hessian error bound `ε_B`.
    pub eps_b: f64,
    /// Function error coefficient `ε_h` (error is `ε_h‖s‖²`).
    pub eps_h: f64,
    /// Hessian error scale constant in `(0, 1]`.
    pub v0: f64,
    /// Overall failure probability over a whole run.
    pub delta: f64,
    /// Gradient-norm optimality target `ε_∇f` (must exceed `ε_g`).
    pub eps_grad_target: f64,
    /// Curvature optimality target `ε_H` (must exceed `ε_B`).
    pub eps_hess_target: f64,
}

impl InexactnessBudget {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_g", self.eps_g),
            ("eps_b", self.eps_b),
            ("eps_h", self.eps_h),
            ("eps_grad_target", self.eps_grad_target),
            ("eps_hess_target", self.eps_hess_target),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.v0 > 0.0 && self.v0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "v0 must be in (0, 1], got {}",
                self.v0
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if self.eps_grad_target <= self.eps_g {
            return Err(Error::InvalidParameter(format!(
                "eps_grad_target {} must exceed eps_g {}",
                self.eps_grad_target, self.eps_g
            )));
        }
        if self.eps_hess_target <= self.eps_b {
            return Err(Error::InvalidParameter(format!(
                "eps_hess_target {} must exceed eps_b {}",
                self.eps_hess_target, self.eps_b
            )));
        }
        Ok(())
    }
}

/// Per-iteration failure probability `δ₀ = 1 − (1−δ)^{1/T}`, so that `T`
/// independent successes compound to probability `1 − δ`.
pub fn per_iteration_delta(delta: f64, iterations: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("iteration budget must be >= 1".into()));
    }
    Ok(1.0 - (1.0 - delta).powf(1.0 / iterations as f64))
}

fn ceil_count(x: f64) -> usize {
    if !x.is_finite() {
        return usize::MAX;
    }
    let c = x.ceil();
    if c <= 0.0 {
        0
    } else if c >= usize::MAX as f64 {
        usize::MAX
    } else {
        c as usize
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Gradient sample size `⌈16·ln(2d/δ₀)·L²/ε_g²⌉`. Callers cap at `n`.
pub fn gradient_sample_size(
    d: usize,
    delta0: f64,
    lip_grad_bound: f64,
    eps_g: f64,
) -> Result<usize> {
    check_positive("delta0", delta0)?;
    check_positive("lip_grad_bound", lip_grad_bound)?;
    check_positive("eps_g", eps_g)?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let log_term = (2.0 * d as f64 / delta0).ln();
    Ok(ceil_count(
        16.0 * log_term * lip_grad_bound * lip_grad_bound / (eps_g * eps_g),
    ))
}

/// Hessian sample size `⌈16·L_B²·ln(2d/δ₀)/(v₀²·ε_B²)⌉`. Callers cap at `n`.
pub fn hessian_sample_size(
    d: usize,
    delta0: f64,
    lip_hess_bound: f64,
    eps_b: f64,
    v0: f64,
) -> Result<usize> {
    check_positive("delta0", delta0)?;
    check_positive("lip_hess_bound", lip_hess_bound)?;
    check_positive("eps_b", eps_b)?;
    check_positive("v0", v0)?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let log_term = (2.0 * d as f64 / delta0).ln();
    Ok(ceil_count(
        16.0 * lip_hess_bound * lip_hess_bound * log_term / (v0 * v0 * eps_b * eps_b),
    ))
}

/// The constant `Δ_c = sqrt(max{Δ_max², (1/σ_min)²})` entering the
/// function-value sample size.
pub fn composite_radius(delta_max: f64, sigma_min: f64) -> f64 {
    let a = delta_max * delta_max;
    let b = (1.0 / sigma_min) * (1.0 / sigma_min);
    a.max(b).sqrt()
}

/// Function-value sample size `⌈16·κ_f²·ln(2d/δ₀)/(ε_h²·Δ_c⁴)⌉`.
pub fn function_sample_size(
    d: usize,
    delta0: f64,
    kappa_f: f64,
    eps_h: f64,
    delta_c: f64,
) -> Result<usize> {
    check_positive("delta0", delta0)?;
    check_positive("kappa_f", kappa_f)?;
    check_positive("eps_h", eps_h)?;
    check_positive("delta_c", delta_c)?;
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    let log_term = (2.0 * d as f64 / delta0).ln();
    Ok(ceil_count(
        16.0 * kappa_f * kappa_f * log_term / (eps_h * eps_h * delta_c.powi(4)),
    ))
}

/// Variance-rule function sample size `min{n, ⌈max{H₁/ε_g, H₂/ε_B}⌉}`.
///
/// The ratio of a variance bound to a tolerance is dimensionally odd as a
/// count, but it is reproduced verbatim; the concentration sizes above are
/// the alternative.
pub fn theorem_sample_size(h1: f64, h2: f64, eps_g: f64, eps_b: f64, n: usize) -> Result<usize> {
    check_positive("eps_g", eps_g)?;
    check_positive("eps_b", eps_b)?;
    if h1 < 0.0 || h2 < 0.0 {
        return Err(Error::InvalidParameter("variance bounds must be >= 0".into()));
    }
    let raw = (h1 / eps_g).max(h2 / eps_b);
    Ok(ceil_count(raw).clamp(1, n))
}

/// Uniform without-replacement subset of `[0, n)`, returned in ascending
/// order. `size == n` returns the full index set without consuming
/// randomness.
pub fn draw_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, size: usize) -> Result<Vec<usize>> {
    if size == 0 {
        return Err(Error::InvalidParameter("subset size must be >= 1".into()));
    }
    if size > n {
        return Err(Error::SampleTooLarge { size, n });
    }
    if size == n {
        return Ok((0..n).collect());
    }
    let mut idx = rand::seq::index::sample(rng, n, size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Draws the three sets in the order `S_g`, `S_B`, `S_h`; under the coupling
/// trigger `S_h` is a copy of `S_g` and consumes no randomness.
pub fn draw_sets<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    sizes: SetSizes,
    coupling_trigger: bool,
) -> Result<SampleSets> {
    let s_g = draw_subset(rng, n, sizes.g)?;
    let s_b = draw_subset(rng, n, sizes.b)?;
    let s_h = if coupling_trigger {
        s_g.clone()
    } else {
        draw_subset(rng, n, sizes.h)?
    };
    Ok(SampleSets {
        s_h,
        s_g,
        s_b,
        coupled: coupling_trigger,
    })
}

/// Empirical variance bounds `H₁` (gradients) and `H₂` (Hessians), maximized
/// over the probe points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBounds {
    pub h1: f64,
    pub h2: f64,
    /// `H₂` came from operator probes rather than dense spectral norms.
    pub h2_is_estimate: bool,
}

/// Computes `H₁² = max_x (1/n)Σ‖∇f_i−∇f‖²` exactly and `H₂²` analogously
/// with spectral norms. Dense per-sample Hessians are used when available;
/// otherwise each deviation norm is lower-bounded through seeded random HVP
/// probes and flagged as an estimate.
pub fn estimate_variance_bounds<P: FiniteSumProblem + ?Sized>(
    p: &P,
    probe_points: &[DVector<f64>],
) -> Result<VarianceBounds> {
    if probe_points.is_empty() {
        return Err(Error::InvalidParameter("at least one probe point".into()));
    }
    let n = p.num_samples();
    let d = p.dim();
    let mut h1_sq: f64 = 0.0;
    let mut h2_sq: f64 = 0.0;
    let dense = d <= 512 && p.sample_hess(0, &probe_points[0]).is_some();
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for x in probe_points {
        let full_g = problem::full_grad(p, x)?;
        let mut grad_sq = 0.0;
        for i in 0..n {
            grad_sq += (p.sample_grad(i, x) - &full_g).norm_squared();
        }
        h1_sq = h1_sq.max(grad_sq / n as f64);

        let mut hess_sq = 0.0;
        if dense {
            let mut mean = p.sample_hess(0, x).expect("dense path");
            for i in 1..n {
                mean += p.sample_hess(i, x).expect("dense path");
            }
            mean /= n as f64;
            for i in 0..n {
                let dev = p.sample_hess(i, x).expect("dense path") - &mean;
                hess_sq += crate::oracle::spectral_norm_dense(&dev).powi(2);
            }
        } else {
            const PROBES: usize = 8;
            let probes: Vec<DVector<f64>> = (0..PROBES)
                .map(|_| {
                    let mut v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0f64..1.0));
                    let norm = v.norm();
                    if norm > 0.0 {
                        v /= norm;
                    } else {
                        v[0] = 1.0;
                    }
                    v
                })
                .collect();
            let full_applied: Vec<DVector<f64>> = probes
                .iter()
                .map(|v| problem::full_hvp(p, x, v))
                .collect::<Result<_>>()?;
            for i in 0..n {
                let mut best = 0.0f64;
                for (v, fv) in probes.iter().zip(&full_applied) {
                    let dev = p.sample_hvp(i, x, v) - fv;
                    best = best.max(dev.norm());
                }
                hess_sq += best * best;
            }
        }
        h2_sq = h2_sq.max(hess_sq / n as f64);
    }
    Ok(VarianceBounds {
        h1: h1_sq.sqrt(),
        h2: h2_sq.sqrt(),
        h2_is_estimate: !dense,
    })
}

/// `κ_f` estimate: largest per-sample magnitude at the start point, doubled
/// as a safety margin.
pub fn estimate_kappa_f<P: FiniteSumProblem + ?Sized>(p: &P, x0: &DVector<f64>) -> Result<f64> {
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x0.len(),
        });
    }
    let mut worst = 0.0f64;
    for i in 0..p.num_samples() {
        worst = worst.max(p.sample_value(i, x0).abs());
    }
    Ok(2.0 * worst)
}

/// Tolerances `(ε_g, ε_B, ε_h)` consistent with the trust-region radius
/// bound: `ε_g = c·ε_∇f/(1+c)` with `c = (1−η)/16`, and
/// `ε_h = ε_B = c'·ε_H/(1+c')` with `c' = (1−η)/10`.
pub fn lemma_tolerances_tr(
    eps_grad_target: f64,
    eps_hess_target: f64,
    eta: f64,
) -> (f64, f64, f64) {
    let c = (1.0 - eta) / 16.0;
    let cp = (1.0 - eta) / 10.0;
    let eps_g = c * eps_grad_target / (1.0 + c);
    let eps_b = cp * eps_hess_target / (1.0 + cp);
    (eps_g, eps_b, eps_b)
}

/// Tolerances consistent with the cubic penalty bound: `c = (1−η)/220` for
/// the gradient and `c' = (1−η)/36` for the Hessian and function terms.
pub fn lemma_tolerances_arc(
    eps_grad_target: f64,
    eps_hess_target: f64,
    eta: f64,
) -> (f64, f64, f64) {
    let c = (1.0 - eta) / 220.0;
    let cp = (1.0 - eta) / 36.0;
    let eps_g = c * eps_grad_target / (1.0 + c);
    let eps_b = cp * eps_hess_target / (1.0 + cp);
    (eps_g, eps_b, eps_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_zero_identity_at_one_iteration() {
        assert_eq!(per_iteration_delta(0.5, 1).unwrap(), 0.5);
    }

    #[test]
    fn delta_zero_closed_form() {
        let d0 = per_iteration_delta(0.1, 10).unwrap();
        assert_relative_eq!(d0, 1.0 - 0.9f64.powf(0.1), epsilon = 1e-12);
        assert_relative_eq!(d0, 0.0104807, epsilon = 1e-7);
    }

    #[test]
    fn delta_zero_inverts_exactly() {
        for &(delta, t) in &[(0.1, 10usize), (0.5, 3), (0.9, 100), (0.01, 7)] {
            let d0 = per_iteration_delta(delta, t).unwrap();
            assert!(d0 > 0.0 && d0 <= delta);
            assert_relative_eq!((1.0 - d0).powi(t as i32), 1.0 - delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_size_hand_value() {
        // d=2, δ₀=0.2, L=1, ε_g=0.5: ceil(64·ln 20) = 192.
        assert_eq!(gradient_sample_size(2, 0.2, 1.0, 0.5).unwrap(), 192);
    }

    #[test]
    fn gradient_size_quarter_scaling() {
        let base = 16.0 * (2.0 * 2.0 / 0.2f64).ln() / 0.25;
        let doubled = 16.0 * (2.0 * 2.0 / 0.2f64).ln() / 1.0;
        assert_relative_eq!(base / 4.0, doubled);
        assert_eq!(
            gradient_sample_size(2, 0.2, 1.0, 1.0).unwrap(),
            doubled.ceil() as usize
        );
    }

    #[test]
    fn hessian_size_same_shape_at_unit_v0() {
        let g = gradient_sample_size(5, 0.1, 2.0, 0.3).unwrap();
        let h = hessian_sample_size(5, 0.1, 2.0, 0.3, 1.0).unwrap();
        assert_eq!(g, h);
        // v0 < 1 inflates the size.
        assert!(hessian_sample_size(5, 0.1, 2.0, 0.3, 0.5).unwrap() > h);
    }

    #[test]
    fn function_size_hand_value() {
        // κ_f=1, ε_h=1, Δ_c=1, d=1, δ₀=2/e²: ln(2d/δ₀)=2, so 32.
        let delta0 = 2.0 / (1.0f64.exp() * 1.0f64.exp());
        assert_eq!(function_sample_size(1, delta0, 1.0, 1.0, 1.0).unwrap(), 32);
    }

    #[test]
    fn function_size_sixteenth_scaling() {
        // Doubling Δ_c divides the pre-ceiling size by 16.
        let raw = 16.0 * (2.0 * 3.0 / 0.05f64).ln();
        let s1 = function_sample_size(3, 0.05, 1.0, 1.0, 1.0).unwrap();
        let s2 = function_sample_size(3, 0.05, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(s1, raw.ceil() as usize);
        assert_eq!(s2, (raw / 16.0).ceil() as usize);
    }

    #[test]
    fn composite_radius_picks_larger() {
        assert_eq!(composite_radius(8.0, 1.0), 8.0);
        assert_eq!(composite_radius(0.5, 0.25), 4.0);
    }

    #[test]
    fn theorem_rule_caps_at_n() {
        assert_eq!(theorem_sample_size(10.0, 1.0, 0.001, 1.0, 500).unwrap(), 500);
        assert_eq!(theorem_sample_size(1.0, 3.0, 1.0, 1.0, 500).unwrap(), 3);
        assert_eq!(theorem_sample_size(0.0, 0.0, 1.0, 1.0, 500).unwrap(), 1);
    }

    #[test]
    fn sizes_are_monotone_over_grid() {
        let epses = [0.1, 0.2, 0.5, 1.0, 2.0];
        let log_args = [(1usize, 0.5f64), (4, 0.5), (4, 0.1), (64, 0.01)];
        // Nonincreasing in ε.
        for &(d, d0) in &log_args {
            for w in epses.windows(2) {
                assert!(
                    gradient_sample_size(d, d0, 1.0, w[0]).unwrap()
                        >= gradient_sample_size(d, d0, 1.0, w[1]).unwrap()
                );
                assert!(
                    hessian_sample_size(d, d0, 1.0, w[0], 1.0).unwrap()
                        >= hessian_sample_size(d, d0, 1.0, w[1], 1.0).unwrap()
                );
                assert!(
                    function_sample_size(d, d0, 1.0, w[0], 1.0).unwrap()
                        >= function_sample_size(d, d0, 1.0, w[1], 1.0).unwrap()
                );
            }
        }
        // Nondecreasing in ln(2d/δ₀): larger d, smaller δ₀.
        for w in log_args.windows(2) {
            let (d_a, del_a) = w[0];
            let (d_b, del_b) = w[1];
            assert!(
                gradient_sample_size(d_a, del_a, 1.0, 0.5).unwrap()
                    <= gradient_sample_size(d_b, del_b, 1.0, 0.5).unwrap()
            );
        }
    }

    #[test]
    fn draw_full_set_is_ascending_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = draw_subset(&mut rng, 7, 7).unwrap();
        assert_eq!(s, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn draw_is_seed_deterministic() {
        let a = draw_sets(
            &mut ChaCha8Rng::seed_from_u64(9),
            100,
            SetSizes { h: 10, g: 20, b: 5 },
            false,
        )
        .unwrap();
        let b = draw_sets(
            &mut ChaCha8Rng::seed_from_u64(9),
            100,
            SetSizes { h: 10, g: 20, b: 5 },
            false,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.s_g.windows(2).all(|w| w[0] < w[1]));
        assert!(!a.coupled);
    }

    #[test]
    fn coupling_copies_gradient_set() {
        let s = draw_sets(
            &mut ChaCha8Rng::seed_from_u64(3),
            50,
            SetSizes { h: 10, g: 10, b: 4 },
            true,
        )
        .unwrap();
        assert_eq!(s.s_h, s.s_g);
        assert!(s.coupled);
    }

    #[test]
    fn oversized_draw_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            draw_subset(&mut rng, 3, 4),
            Err(Error::SampleTooLarge { size: 4, n: 3 })
        ));
    }

    #[test]
    fn variance_bounds_on_two_center_quadratic() {
        use crate::problem::QuadraticProblem;
        use nalgebra::DVector;
        let p = QuadraticProblem::new(vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
        ])
        .unwrap();
        let probes = vec![DVector::zeros(2), DVector::from_vec(vec![5.0, -1.0])];
        let b = estimate_variance_bounds(&p, &probes).unwrap();
        // Gradient deviations are ±(1,0) at every point: H₁ = 1.
        assert_relative_eq!(b.h1, 1.0, epsilon = 1e-12);
        // All per-sample Hessians equal the identity: H₂ = 0.
        assert_relative_eq!(b.h2, 0.0, epsilon = 1e-12);
        assert!(!b.h2_is_estimate);
    }

    #[test]
    fn variance_bounds_single_sample_are_zero() {
        use crate::problem::QuadraticProblem;
        let p = QuadraticProblem::new(vec![DVector::from_vec(vec![1.0, 2.0])]).unwrap();
        let b = estimate_variance_bounds(&p, &[DVector::zeros(2)]).unwrap();
        assert_eq!(b.h1, 0.0);
        assert_eq!(b.h2, 0.0);
    }

    #[test]
    fn variance_bounds_identical_samples_are_zero() {
        use crate::problem::QuadraticProblem;
        let c = DVector::from_vec(vec![3.0, -1.0]);
        let p = QuadraticProblem::new(vec![c.clone(), c.clone(), c]).unwrap();
        let b = estimate_variance_bounds(&p, &[DVector::from_vec(vec![0.5, 0.5])]).unwrap();
        assert_eq!(b.h1, 0.0);
        assert_eq!(b.h2, 0.0);
    }

    #[test]
    fn lemma_tolerances_satisfy_their_defining_fractions() {
        let eta = 0.1;
        let (eg, eb, eh) = lemma_tolerances_tr(1e-3, 1e-2, eta);
        assert_relative_eq!(eg, (1.0 - eta) / 16.0 * (1e-3 - eg), max_relative = 1e-12);
        assert_relative_eq!(eb, (1.0 - eta) / 10.0 * (1e-2 - eb), max_relative = 1e-12);
        assert_eq!(eb, eh);
        let (eg2, eb2, eh2) = lemma_tolerances_arc(1e-3, 1e-2, eta);
        assert_relative_eq!(eg2, (1.0 - eta) / 220.0 * (1e-3 - eg2), max_relative = 1e-12);
        assert_relative_eq!(eb2, (1.0 - eta) / 36.0 * (1e-2 - eb2), max_relative = 1e-12);
        assert_eq!(eb2, eh2);
        // All strictly inside the target so the budget validates.
        let budget = InexactnessBudget {
            eps_g: eg,
            eps_b: eb,
            eps_h: eh,
            v0: 1.0,
            delta: 0.1,
            eps_grad_target: 1e-3,
            eps_hess_target: 1e-2,
        };
        budget.validate().unwrap();
    }

    /// Subset means of zero-sum vectors contract like 1/A; full draws are
    /// exactly zero.
    #[test]
    fn subset_mean_variance_contraction() {
        let n = 40usize;
        let dim = 5usize;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        // Pairs (w, -w) sum to exactly zero in ascending-order accumulation.
        let mut vectors: Vec<DVector<f64>> = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            let w = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0f64..1.0));
            vectors.push(w.clone());
            vectors.push(-w);
        }
        let pop_second_moment: f64 =
            vectors.iter().map(|v| v.norm_squared()).sum::<f64>() / n as f64;

        const DRAWS: usize = 10_000;
        for &a in &[1usize, 4, 10, 40] {
            let mut acc = 0.0;
            for _ in 0..DRAWS {
                let idx = draw_subset(&mut rng, n, a).unwrap();
                let mut sum = DVector::zeros(dim);
                for &i in &idx {
                    sum += &vectors[i];
                }
                acc += (sum / a as f64).norm_squared();
            }
            let empirical = acc / DRAWS as f64;
            let indicator = if a < n { 1.0 } else { 0.0 };
            let bound = indicator / a as f64 * pop_second_moment
                * (1.0 + 5.0 / (DRAWS as f64).sqrt());
            if a == n {
                assert_eq!(empirical, 0.0, "full draw must cancel exactly");
            } else {
                assert!(
                    empirical <= bound,
                    "A={a}: empirical {empirical} exceeds bound {bound}"
                );
            }
        }
    }
}
