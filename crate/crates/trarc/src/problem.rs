//! Finite-sum objective oracles.
//!
//! A problem is `f(x) = (1/n) Σ_{i=1..n} f_i(x)` exposed through per-sample
//! value, gradient, and Hessian-vector-product oracles. Every reduction over
//! samples runs in ascending index order so that repeated evaluations are
//! bitwise identical.

use nalgebra::{DMatrix, DVector};

use crate::model::SymOp;
use crate::sparse::SparseRowMatrix;
use crate::{Error, Result};

/// Per-sample oracle contract for `f(x) = (1/n) Σ f_i(x)`.
///
/// `sample_value`, the gradient, and the HVP must be deterministic functions
/// of `(i, x)`; the HVP must be linear and symmetric in its vector argument.
pub trait FiniteSumProblem: Sync {
    /// Number of samples `n`.
    fn num_samples(&self) -> usize;

    /// Dimension `d` of the decision variable.
    fn dim(&self) -> usize;

    /// `f_i(x)`.
    fn sample_value(&self, i: usize, x: &DVector<f64>) -> f64;

    /// `acc += ∇f_i(x)`.
    fn add_sample_grad(&self, i: usize, x: &DVector<f64>, acc: &mut DVector<f64>);

    /// `acc += ∇²f_i(x)·v`.
    fn add_sample_hvp(&self, i: usize, x: &DVector<f64>, v: &DVector<f64>, acc: &mut DVector<f64>);

    /// Dense `∇²f_i(x)`, available on the small-dimension path only.
    fn sample_hess(&self, i: usize, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let _ = (i, x);
        None
    }

    /// `∇f_i(x)` as a fresh vector.
    fn sample_grad(&self, i: usize, x: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        self.add_sample_grad(i, x, &mut acc);
        acc
    }

    /// `∇²f_i(x)·v` as a fresh vector.
    fn sample_hvp(&self, i: usize, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        self.add_sample_hvp(i, x, v, &mut acc);
        acc
    }

    /// Mean-Hessian operator over an index subset, applied via HVPs.
    ///
    /// Implementations may override this to cache per-sample curvature at
    /// `x`; the default recomputes each HVP from scratch.
    fn subsampled_hessian<'a>(&'a self, x: &DVector<f64>, indices: &[usize]) -> Box<dyn SymOp + 'a>
    where
        Self: Sized,
    {
        Box::new(MeanHvpOp {
            problem: self,
            x: x.clone(),
            indices: indices.to_vec(),
        })
    }
}

fn check_dim(p: &(impl FiniteSumProblem + ?Sized), x: &DVector<f64>) -> Result<()> {
    if x.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

fn check_indices(n: usize, indices: &[usize]) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("empty index set".into()));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidParameter(format!(
            "sample index {bad} out of range for n={n}"
        )));
    }
    Ok(())
}

/// `(1/|S|) Σ_{i∈S} f_i(x)`, accumulated in slice order.
pub fn mean_value<P: FiniteSumProblem + ?Sized>(
    p: &P,
    indices: &[usize],
    x: &DVector<f64>,
) -> Result<f64> {
    check_dim(p, x)?;
    check_indices(p.num_samples(), indices)?;
    let mut acc = 0.0;
    for &i in indices {
        acc += p.sample_value(i, x);
    }
    Ok(acc / indices.len() as f64)
}

/// `(1/|S|) Σ_{i∈S} ∇f_i(x)`, accumulated in slice order.
pub fn mean_grad<P: FiniteSumProblem + ?Sized>(
    p: &P,
    indices: &[usize],
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    check_indices(p.num_samples(), indices)?;
    let mut acc = DVector::zeros(p.dim());
    for &i in indices {
        p.add_sample_grad(i, x, &mut acc);
    }
    Ok(acc / indices.len() as f64)
}

/// `(1/|S|) Σ_{i∈S} ∇²f_i(x)·v`, accumulated in slice order.
pub fn mean_hvp<P: FiniteSumProblem + ?Sized>(
    p: &P,
    indices: &[usize],
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    check_dim(p, v)?;
    check_indices(p.num_samples(), indices)?;
    let mut acc = DVector::zeros(p.dim());
    for &i in indices {
        p.add_sample_hvp(i, x, v, &mut acc);
    }
    Ok(acc / indices.len() as f64)
}

/// `f(x)`: mean of `f_i(x)` over all samples in ascending order.
pub fn full_value<P: FiniteSumProblem + ?Sized>(p: &P, x: &DVector<f64>) -> Result<f64> {
    check_dim(p, x)?;
    let n = p.num_samples();
    let mut acc = 0.0;
    for i in 0..n {
        acc += p.sample_value(i, x);
    }
    Ok(acc / n as f64)
}

/// `∇f(x)` over all samples in ascending order.
pub fn full_grad<P: FiniteSumProblem + ?Sized>(p: &P, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(p, x)?;
    let n = p.num_samples();
    let mut acc = DVector::zeros(p.dim());
    for i in 0..n {
        p.add_sample_grad(i, x, &mut acc);
    }
    Ok(acc / n as f64)
}

/// `∇²f(x)·v` over all samples in ascending order.
pub fn full_hvp<P: FiniteSumProblem + ?Sized>(
    p: &P,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let indices: Vec<usize> = (0..p.num_samples()).collect();
    mean_hvp(p, &indices, x, v)
}

/// Mean-Hessian operator computing `(1/|S|) Σ ∇²f_i(x)·v` on demand.
pub struct MeanHvpOp<'a, P: FiniteSumProblem> {
    problem: &'a P,
    x: DVector<f64>,
    indices: Vec<usize>,
}

impl<P: FiniteSumProblem> SymOp for MeanHvpOp<'_, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for &i in &self.indices {
            self.problem.add_sample_hvp(i, &self.x, v, &mut acc);
        }
        acc / self.indices.len() as f64
    }
}

// ---------------------------------------------------------------------------
// Synthetic quadratic: f_i(x) = ½‖x − c_i‖²
// ---------------------------------------------------------------------------

/// Sum of shifted quadratics: `f_i(x) = ½‖x − c_i‖²`, so every per-sample
/// Hessian is the identity and the global minimizer is the centroid.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    centers: Vec<DVector<f64>>,
    dim: usize,
}

impl QuadraticProblem {
    pub fn new(centers: Vec<DVector<f64>>) -> Result<Self> {
        let first = centers.first().ok_or(Error::EmptyProblem)?;
        let dim = first.len();
        if let Some(bad) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(Self { centers, dim })
    }

    /// The centroid of the centers, i.e. the global minimizer.
    pub fn centroid(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim);
        for c in &self.centers {
            acc += c;
        }
        acc / self.centers.len() as f64
    }
}

impl FiniteSumProblem for QuadraticProblem {
    fn num_samples(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.centers[i]).norm_squared()
    }

    fn add_sample_grad(&self, i: usize, x: &DVector<f64>, acc: &mut DVector<f64>) {
        *acc += x - &self.centers[i];
    }

    fn add_sample_hvp(&self, _i: usize, _x: &DVector<f64>, v: &DVector<f64>, acc: &mut DVector<f64>) {
        *acc += v;
    }

    fn sample_hess(&self, _i: usize, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (self.dim <= 512).then(|| DMatrix::identity(self.dim, self.dim))
    }
}

// ---------------------------------------------------------------------------
// Nonlinear least squares with a logistic link
// ---------------------------------------------------------------------------

/// `φ(z) = 1/(1+e^{-z})`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// First and second derivatives of the per-sample loss `ℓ(z) = (y − φ(z))²`.
#[inline]
fn squared_sigmoid_loss_derivs(z: f64, y: f64) -> (f64, f64) {
    let phi = sigmoid(z);
    let phi1 = phi * (1.0 - phi); // φ'
    let phi2 = phi1 * (1.0 - 2.0 * phi); // φ''
    let first = 2.0 * (phi - y) * phi1;
    let second = 2.0 * phi1 * phi1 + 2.0 * (phi - y) * phi2;
    (first, second)
}

/// Nonlinear least squares with a logistic link and an L2 term:
///
/// `f_i(x) = (y_i − φ(⟨a_i, x⟩))² + ½‖x‖²`
///
/// The regularizer is replicated inside every `f_i`, so every subsampled
/// mean of `f_i` (and of its derivatives) remains an unbiased estimator of
/// the regularized objective.
#[derive(Debug, Clone)]
pub struct NllsLogisticProblem {
    features: SparseRowMatrix,
    labels: Vec<f64>,
}

impl NllsLogisticProblem {
    /// Builds the problem; labels must lie in `{0, 1}` and match the number
    /// of feature rows.
    pub fn new(features: SparseRowMatrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyProblem);
        }
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                got: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} is not in {{0, 1}}"
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn features(&self) -> &SparseRowMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Fraction of samples misclassified by thresholding `φ(⟨a_i, x⟩)` at ½.
    pub fn misclassification_rate(&self, x: &DVector<f64>) -> f64 {
        let n = self.features.rows();
        let mut wrong = 0usize;
        for i in 0..n {
            let z = self.features.row_dot(i, x);
            let pred = if sigmoid(z) >= 0.5 { 1.0 } else { 0.0 };
            if pred != self.labels[i] {
                wrong += 1;
            }
        }
        wrong as f64 / n as f64
    }
}

impl FiniteSumProblem for NllsLogisticProblem {
    fn num_samples(&self) -> usize {
        self.features.rows()
    }

    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn sample_value(&self, i: usize, x: &DVector<f64>) -> f64 {
        let z = self.features.row_dot(i, x);
        let r = self.labels[i] - sigmoid(z);
        r * r + 0.5 * x.norm_squared()
    }

    fn add_sample_grad(&self, i: usize, x: &DVector<f64>, acc: &mut DVector<f64>) {
        let z = self.features.row_dot(i, x);
        let (first, _) = squared_sigmoid_loss_derivs(z, self.labels[i]);
        self.features.add_scaled_row(i, first, acc);
        *acc += x;
    }

    fn add_sample_hvp(&self, i: usize, x: &DVector<f64>, v: &DVector<f64>, acc: &mut DVector<f64>) {
        let z = self.features.row_dot(i, x);
        let (_, second) = squared_sigmoid_loss_derivs(z, self.labels[i]);
        let av = self.features.row_dot(i, v);
        self.features.add_scaled_row(i, second * av, acc);
        *acc += v;
    }

    fn sample_hess(&self, i: usize, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = self.dim();
        if d > 512 {
            return None;
        }
        let z = self.features.row_dot(i, x);
        let (_, second) = squared_sigmoid_loss_derivs(z, self.labels[i]);
        let mut h = DMatrix::identity(d, d);
        let (idx, val) = self.features.row(i);
        for (&j, &vj) in idx.iter().zip(val) {
            for (&k, &vk) in idx.iter().zip(val) {
                h[(j, k)] += second * vj * vk;
            }
        }
        Some(h)
    }

    fn subsampled_hessian<'a>(&'a self, x: &DVector<f64>, indices: &[usize]) -> Box<dyn SymOp + 'a> {
        // Cache the per-sample curvature ℓ''(⟨a_i,x⟩) once; each apply then
        // touches every row exactly once.
        let coeffs: Vec<f64> = indices
            .iter()
            .map(|&i| {
                let z = self.features.row_dot(i, x);
                squared_sigmoid_loss_derivs(z, self.labels[i]).1
            })
            .collect();
        Box::new(CachedCurvatureOp {
            features: &self.features,
            indices: indices.to_vec(),
            coeffs,
        })
    }
}

/// Subsampled Gauss/Newton-style operator `v ↦ (1/|S|) Σ c_i ⟨a_i,v⟩ a_i + v`
/// with the curvature coefficients `c_i` frozen at construction.
struct CachedCurvatureOp<'a> {
    features: &'a SparseRowMatrix,
    indices: Vec<usize>,
    coeffs: Vec<f64>,
}

impl SymOp for CachedCurvatureOp<'_> {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for (&i, &c) in self.indices.iter().zip(&self.coeffs) {
            let av = self.features.row_dot(i, v);
            self.features.add_scaled_row(i, c * av, &mut acc);
        }
        acc / self.indices.len() as f64 + v
    }
}
