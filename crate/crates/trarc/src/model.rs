//! Local models and acceptance ratios.
//!
//! One iteration works with a quadratic model
//! `m(s) = h + ⟨g, s⟩ + ½⟨s, Bs⟩` built from the (possibly subsampled)
//! function value `h`, gradient `g`, and Hessian operator `B`, optionally
//! augmented with a cubic penalty `(σ/3)‖s‖³`. Acceptance compares the
//! subsampled decrease against the model decrease and subtracts a safety
//! correction for the function-value inexactness.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Symmetric linear operator applied as `v ↦ B·v`.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

/// Dense symmetric matrix as an operator.
pub struct DenseSymOp(pub DMatrix<f64>);

impl SymOp for DenseSymOp {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }
}

/// Spectral-norm estimate by power iteration on a random start.
///
/// The estimate converges to `‖B‖` from below; `inflation` (≥ 1) pads it so
/// downstream step-size formulas err on the short, safe side. Returns the
/// estimate and the number of operator applications spent.
pub fn estimate_operator_norm<R: Rng + ?Sized>(
    op: &dyn SymOp,
    iters: usize,
    inflation: f64,
    rng: &mut R,
) -> (f64, usize) {
    let d = op.dim();
    let mut v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    if v.norm() == 0.0 {
        v[0] = 1.0;
    }
    v /= v.norm();
    let mut est = 0.0;
    let mut applies = 0;
    for _ in 0..iters {
        let w = op.apply(&v);
        applies += 1;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, applies);
        }
        est = norm;
        v = w / norm;
    }
    (est * inflation, applies)
}

/// Trust-region radius or cubic penalty, tagging which algorithm the model
/// belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularization {
    /// Trust-region mode with radius `Δ`.
    TrustRadius(f64),
    /// Cubic mode with penalty `σ`.
    CubicPenalty(f64),
}

impl Regularization {
    pub fn value(self) -> f64 {
        match self {
            Regularization::TrustRadius(d) => d,
            Regularization::CubicPenalty(s) => s,
        }
    }

    fn sigma(self) -> f64 {
        match self {
            Regularization::TrustRadius(_) => 0.0,
            Regularization::CubicPenalty(s) => s,
        }
    }
}

/// Which correction is subtracted from the cubic-model ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CubicCorrection {
    /// `2ε_h/σ²` in the numerator (the update rule as printed).
    #[default]
    SigmaSquared,
    /// `2ε_h‖s‖²` in the numerator, mirroring the trust-region rule.
    StepNorm,
}

/// One iteration's model: subsampled value, gradient, Hessian operator, and
/// the current radius or penalty.
pub struct ModelState<'a> {
    /// Subsampled objective `h(x_k)`.
    pub value_at_x: f64,
    /// Subsampled gradient `g(x_k)`.
    pub grad: DVector<f64>,
    /// Hessian operator `B(x_k)`.
    pub hessian: &'a dyn SymOp,
    /// Spectral-norm estimate of the operator (cubic step sizing).
    pub hessian_norm: f64,
    pub reg: Regularization,
    /// Function-value inexactness `ε_h` used by the corrected ratio.
    pub value_tol: f64,
}

/// Relative floor below which a model decrease is treated as degenerate.
pub const DECREASE_FLOOR: f64 = 1e-14;

impl ModelState<'_> {
    /// `m(s) = h + ⟨g, s⟩ + ½⟨s, Bs⟩`.
    pub fn quadratic(&self, s: &DVector<f64>) -> f64 {
        let bs = self.hessian.apply(s);
        self.value_at_x + self.grad.dot(s) + 0.5 * s.dot(&bs)
    }

    /// `p(s) = m(s) + (σ/3)‖s‖³` (σ = 0 under a trust radius).
    pub fn cubic(&self, s: &DVector<f64>) -> f64 {
        self.quadratic(s) + self.reg.sigma() / 3.0 * s.norm().powi(3)
    }

    /// Model decrease `m(0) − m(s)` or `p(0) − p(s)` according to the mode.
    pub fn predicted_decrease(&self, s: &DVector<f64>) -> f64 {
        match self.reg {
            Regularization::TrustRadius(_) => self.value_at_x - self.quadratic(s),
            Regularization::CubicPenalty(_) => self.value_at_x - self.cubic(s),
        }
    }

    /// Ratio of subsampled decrease to trust-region model decrease, with the
    /// corrected variant `ρ̂ = ρ̃ − 2ε_h‖s‖²/(m(0)−m(s))`.
    pub fn ratio_trust_region(&self, h_x: f64, h_xs: f64, s: &DVector<f64>) -> RatioReport {
        debug_assert!(matches!(self.reg, Regularization::TrustRadius(_)));
        let decrease = self.value_at_x - self.quadratic(s);
        let correction = 2.0 * self.value_tol * s.norm_squared();
        RatioReport::new(decrease, h_x - h_xs, correction, h_x)
    }

    /// Ratio against the cubic model decrease. The corrected variant
    /// subtracts `2ε_h/σ²` (as printed) or `2ε_h‖s‖²` per `mode`.
    pub fn ratio_cubic(
        &self,
        h_x: f64,
        h_xs: f64,
        s: &DVector<f64>,
        mode: CubicCorrection,
    ) -> RatioReport {
        let sigma = match self.reg {
            Regularization::CubicPenalty(s) => s,
            Regularization::TrustRadius(_) => panic!("cubic ratio requires cubic mode"),
        };
        let decrease = self.value_at_x - self.cubic(s);
        let correction = match mode {
            CubicCorrection::SigmaSquared => 2.0 * self.value_tol / (sigma * sigma),
            CubicCorrection::StepNorm => 2.0 * self.value_tol * s.norm_squared(),
        };
        RatioReport::new(decrease, h_x - h_xs, correction, h_x)
    }
}

/// Acceptance ratios for one candidate step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioReport {
    /// `m(0) − m(s)` (or the cubic analogue).
    pub model_decrease: f64,
    /// `h(x) − h(x+s)`.
    pub actual_decrease: f64,
    /// Uncorrected ratio `ρ̃`.
    pub rho_tilde: f64,
    /// Corrected ratio `ρ̂ ≤ ρ̃`.
    pub rho_hat: f64,
    /// Model decrease at or below the floor: the iteration must be treated
    /// as unsuccessful regardless of the ratios.
    pub degenerate: bool,
}

impl RatioReport {
    /// Builds a report from an already-computed model decrease (as reported
    /// by a subproblem solver) and the correction numerator; `scale_ref`
    /// (typically `h(x_k)`) sets the degeneracy floor.
    pub fn from_parts(
        model_decrease: f64,
        actual_decrease: f64,
        correction: f64,
        scale_ref: f64,
    ) -> Self {
        Self::new(model_decrease, actual_decrease, correction, scale_ref)
    }

    fn new(model_decrease: f64, actual_decrease: f64, correction: f64, h_x: f64) -> Self {
        let floor = DECREASE_FLOOR * h_x.abs().max(1.0);
        if model_decrease <= floor {
            return Self {
                model_decrease,
                actual_decrease,
                rho_tilde: f64::NEG_INFINITY,
                rho_hat: f64::NEG_INFINITY,
                degenerate: true,
            };
        }
        let rho_tilde = actual_decrease / model_decrease;
        Self {
            model_decrease,
            actual_decrease,
            rho_tilde,
            rho_hat: rho_tilde - correction / model_decrease,
            degenerate: false,
        }
    }
}
