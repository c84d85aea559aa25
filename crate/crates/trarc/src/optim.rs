//! Outer optimization loops.
//!
//! Both loops share one iteration skeleton: draw index sets, build the
//! subsampled gradient and Hessian operator, solve the inner subproblem,
//! evaluate the subsampled objective at the current and trial points,
//! accept or reject on the corrected ratio, and adapt the radius (trust
//! region) or penalty (cubic). When the subsampled gradient is already
//! small the loop switches to eigenvalue mode: a Lanczos probe either
//! certifies approximate second-order stationarity (termination) or hands
//! back a negative-curvature direction to step along.
//!
//! The four inexactness variants pin subsets of `{S_h, S_g, S_B}` to the
//! full index set. Whenever a set is full its estimator is exact, so the
//! corresponding tolerance is treated as zero for that iteration (coupling
//! trigger, ratio correction, and termination thresholds alike).

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{estimate_operator_norm, CubicCorrection, RatioReport};
use crate::problem::{mean_grad, mean_value, FiniteSumProblem};
use crate::props::{props_for_iteration, PropCounter, SetSizes};
use crate::sampling::{
    composite_radius, draw_subset, estimate_kappa_f, estimate_variance_bounds,
    function_sample_size, gradient_sample_size, hessian_sample_size, per_iteration_delta,
    theorem_sample_size, InexactnessBudget,
};
use crate::solvers::{
    cauchy_point_tr, cauchy_step_arc, lanczos_min_eig, negative_curvature_step_arc,
    negative_curvature_step_tr, refine_arc, steihaug_cg, steihaug_forcing_tol, SolutionKind,
    SubproblemSolution,
};
use crate::{Error, Result};

/// Outer loop family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Radius-constrained quadratic model.
    TrustRegion,
    /// Cubic-penalized model.
    CubicReg,
}

/// Which oracles are subsampled. `Full` computes everything exactly; each
/// later variant subsamples one more oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Exact function, gradient, Hessian.
    Full,
    /// Subsampled Hessian only.
    Sh,
    /// Subsampled Hessian and gradient.
    Shg,
    /// Subsampled Hessian, gradient, and function.
    Shgf,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "full" => Some(Variant::Full),
            "sh" => Some(Variant::Sh),
            "shg" => Some(Variant::Shg),
            "shgf" => Some(Variant::Shgf),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Sh => "sh",
            Variant::Shg => "shg",
            Variant::Shgf => "shgf",
        }
    }
}

/// How subsampled set sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRule {
    /// Fixed fraction of `n` for every subsampled set.
    Fraction,
    /// `|S_h| = min{n, max{H₁/ε_g, H₂/ε_B}}` from estimated variance
    /// bounds; `S_g`, `S_B` from the concentration formulas.
    Theorem,
    /// All three sizes from the concentration formulas.
    Bernstein,
}

/// Inner solver for the trust-region subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrSolver {
    Steihaug,
    CauchyPoint,
}

/// Full configuration of one run.
#[derive(Debug, Clone)]
pub struct VariantConfig {
    pub algorithm: Algorithm,
    pub variant: Variant,
    /// Acceptance threshold `η ∈ (0, 1)`.
    pub eta: f64,
    /// Contraction factor `r₁ ∈ (0, 1)`.
    pub shrink_factor: f64,
    /// Expansion factor `r₂ ≥ 1`.
    pub grow_factor: f64,
    /// Initial and maximal trust radius.
    pub delta0: f64,
    pub delta_max: f64,
    /// Initial and minimal cubic penalty.
    pub sigma0: f64,
    pub sigma_min: f64,
    pub budget: InexactnessBudget,
    pub max_iters: usize,
    pub seed: u64,
    /// Subsampled set size as a fraction of `n` (under `SizeRule::Fraction`).
    pub sample_fraction: f64,
    pub size_rule: SizeRule,
    pub cubic_correction: CubicCorrection,
    /// `κ_θ ∈ (0, 1)` for the cubic gradient condition.
    pub kappa_theta: f64,
    pub tr_solver: TrSolver,
    /// Cap on cubic refinement iterations.
    pub refine_max_iter: usize,
    /// Stop before an iteration would push cumulative propagations past
    /// this bound.
    pub max_props: Option<u64>,
}

impl VariantConfig {
    /// Defaults: `η = 0.1`, `r₁ = 0.5`, `r₂ = 2`, `Δ₀ = 8`, `σ₀ = 1`,
    /// sample fraction `0.05`.
    pub fn new(algorithm: Algorithm, variant: Variant) -> Self {
        Self {
            algorithm,
            variant,
            eta: 0.1,
            shrink_factor: 0.5,
            grow_factor: 2.0,
            delta0: 8.0,
            delta_max: 1e3,
            sigma0: 1.0,
            sigma_min: 1e-4,
            budget: InexactnessBudget {
                eps_g: 5e-5,
                eps_b: 5e-3,
                eps_h: 5e-3,
                v0: 1.0,
                delta: 0.1,
                eps_grad_target: 1e-4,
                eps_hess_target: 1e-2,
            },
            max_iters: 1000,
            seed: 0,
            sample_fraction: 0.05,
            size_rule: SizeRule::Fraction,
            cubic_correction: CubicCorrection::default(),
            kappa_theta: 0.5,
            tr_solver: TrSolver::Steihaug,
            refine_max_iter: 50,
            max_props: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be in (0,1), got {}",
                self.eta
            )));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "shrink factor must be in (0,1), got {}",
                self.shrink_factor
            )));
        }
        if self.grow_factor < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "grow factor must be >= 1, got {}",
                self.grow_factor
            )));
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < delta0 <= delta_max, got {} and {}",
                self.delta0, self.delta_max
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma0 >= self.sigma_min) {
            return Err(Error::InvalidParameter(format!(
                "need sigma0 >= sigma_min > 0, got {} and {}",
                self.sigma0, self.sigma_min
            )));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample fraction must be in (0,1], got {}",
                self.sample_fraction
            )));
        }
        if !(self.kappa_theta > 0.0 && self.kappa_theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa_theta must be in (0,1), got {}",
                self.kappa_theta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        self.budget.validate()
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Small subsampled gradient and no certified negative curvature.
    GradAndCurvature,
    MaxIters,
    /// Radius collapsed below `1e-16` or penalty exceeded `1e16`.
    Stalled,
    /// The propagation budget would have been exceeded.
    PropBudget,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::GradAndCurvature => "grad_and_curvature",
            Termination::MaxIters => "max_iters",
            Termination::Stalled => "stalled",
            Termination::PropBudget => "prop_budget",
        }
    }
}

/// Telemetry for one completed iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    pub rho_tilde: f64,
    pub rho_hat: f64,
    pub accepted: bool,
    /// `Δ_k` or `σ_k` in force while solving this iteration.
    pub reg_value: f64,
    pub step_norm: f64,
    /// Operator applications consumed by the inner solve.
    pub gamma: usize,
    pub sizes: SetSizes,
    /// Propagations charged to this iteration.
    pub props: u64,
    pub cum_props: u64,
    /// Norm of the subsampled gradient at `x_k`.
    pub grad_norm: f64,
    /// Model-gradient norm at the returned step (`‖∇m(s)‖` or `‖∇p(s)‖`).
    pub solver_residual: f64,
    /// The `S_h = S_g` coupling fired.
    pub coupled: bool,
    /// Cubic-mode condition certificate for the accepted solver output.
    pub conditions_met: Option<bool>,
    /// Iterate after the accept/reject decision.
    pub x_after: DVector<f64>,
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub final_x: DVector<f64>,
    pub termination: Termination,
}

/// Approximate second-order stationarity test on the subsampled quantities:
/// `‖g‖ ≤ ε_∇f + ε_g` and `λ_min(B) ≥ −(ε_H − ε_B)`. Via the approximation
/// bounds this certifies `‖∇f‖ ≤ ε_∇f + 2ε_g` and
/// `λ_min(∇²f) ≥ −ε_H − v₀ε_B`.
pub fn check_termination(g_norm: f64, lambda_min_est: f64, budget: &InexactnessBudget) -> bool {
    g_norm <= budget.eps_grad_target + budget.eps_g
        && lambda_min_est >= -(budget.eps_hess_target - budget.eps_b)
}

/// Runs the trust-region loop. `config.algorithm` must be
/// [`Algorithm::TrustRegion`].
pub fn run_trust_region<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
    config: &VariantConfig,
) -> Result<RunTrace> {
    if config.algorithm != Algorithm::TrustRegion {
        return Err(Error::InvalidParameter(
            "config.algorithm is not TrustRegion".into(),
        ));
    }
    run_inner(problem, x0, config)
}

/// Runs the cubic-regularization loop. `config.algorithm` must be
/// [`Algorithm::CubicReg`].
pub fn run_cubic_reg<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
    config: &VariantConfig,
) -> Result<RunTrace> {
    if config.algorithm != Algorithm::CubicReg {
        return Err(Error::InvalidParameter(
            "config.algorithm is not CubicReg".into(),
        ));
    }
    run_inner(problem, x0, config)
}

/// Dispatches on `config.algorithm`.
pub fn run<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
    config: &VariantConfig,
) -> Result<RunTrace> {
    match config.algorithm {
        Algorithm::TrustRegion => run_trust_region(problem, x0, config),
        Algorithm::CubicReg => run_cubic_reg(problem, x0, config),
    }
}

/// Target sizes for the three sets before variant pinning.
fn resolve_subsampled_sizes<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
    config: &VariantConfig,
) -> Result<SetSizes> {
    let n = problem.num_samples();
    let clamp = |s: usize| s.clamp(1, n);
    match config.size_rule {
        SizeRule::Fraction => {
            let s = clamp((config.sample_fraction * n as f64).ceil() as usize);
            Ok(SetSizes { h: s, g: s, b: s })
        }
        SizeRule::Theorem | SizeRule::Bernstein => {
            let d = problem.dim();
            let b = &config.budget;
            let delta0 = per_iteration_delta(b.delta, config.max_iters)?;
            let (kappa_grad, kappa_hess) = estimate_oracle_bounds(problem, x0)?;
            let g_size = gradient_sample_size(d, delta0, kappa_grad, b.eps_g)?;
            let b_size = hessian_sample_size(d, delta0, kappa_hess, b.eps_b, b.v0)?;
            let h_size = match config.size_rule {
                SizeRule::Theorem => {
                    let bounds = estimate_variance_bounds(problem, std::slice::from_ref(x0))?;
                    theorem_sample_size(bounds.h1, bounds.h2, b.eps_g, b.eps_b, n)?
                }
                _ => {
                    let kappa_f = estimate_kappa_f(problem, x0)?;
                    let delta_c = composite_radius(config.delta_max, config.sigma_min);
                    function_sample_size(d, delta0, kappa_f, b.eps_h, delta_c)?
                }
            };
            Ok(SetSizes {
                h: clamp(h_size),
                g: clamp(g_size),
                b: clamp(b_size),
            })
        }
    }
}

/// Crude per-sample bounds on gradient and Hessian norms at the start
/// point, doubled for safety (used only to feed the size formulas).
fn estimate_oracle_bounds<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
) -> Result<(f64, f64)> {
    let d = problem.dim();
    let mut grad_bound = 0.0f64;
    let mut hess_bound = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0);
    use rand::Rng;
    let probes: Vec<DVector<f64>> = (0..4)
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
    for i in 0..problem.num_samples() {
        grad_bound = grad_bound.max(problem.sample_grad(i, x0).norm());
        for v in &probes {
            hess_bound = hess_bound.max(problem.sample_hvp(i, x0, v).norm());
        }
    }
    Ok((2.0 * grad_bound, 2.0 * hess_bound.max(f64::MIN_POSITIVE)))
}

const STALL_RADIUS: f64 = 1e-16;
const STALL_SIGMA: f64 = 1e16;
const LANCZOS_TOL: f64 = 1e-8;

fn run_inner<P: FiniteSumProblem>(
    problem: &P,
    x0: &DVector<f64>,
    config: &VariantConfig,
) -> Result<RunTrace> {
    config.validate()?;
    let n = problem.num_samples();
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }

    let sub = resolve_subsampled_sizes(problem, x0, config)?;
    let target = match config.variant {
        Variant::Full => SetSizes { h: n, g: n, b: n },
        Variant::Sh => SetSizes { h: n, g: n, b: sub.b },
        Variant::Shg => SetSizes { h: n, g: sub.g, b: sub.b },
        Variant::Shgf => sub,
    };

    let budget = &config.budget;
    let eps_g_eff = if target.g == n { 0.0 } else { budget.eps_g };
    let eps_b_eff = if target.b == n { 0.0 } else { budget.eps_b };
    let eps_h_eff = if target.h == n { 0.0 } else { budget.eps_h };
    let grad_trigger = budget.eps_grad_target + eps_g_eff;
    let curvature_floor = -(budget.eps_hess_target - eps_b_eff);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = x0.clone();
    let mut reg = match config.algorithm {
        Algorithm::TrustRegion => config.delta0,
        Algorithm::CubicReg => config.sigma0,
    };
    let mut counter = PropCounter::new();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut termination = Termination::MaxIters;

    for iter in 1..=config.max_iters {
        match config.algorithm {
            Algorithm::TrustRegion if reg < STALL_RADIUS => {
                termination = Termination::Stalled;
                break;
            }
            Algorithm::CubicReg if reg > STALL_SIGMA => {
                termination = Termination::Stalled;
                break;
            }
            _ => {}
        }

        let s_g = draw_subset(&mut rng, n, target.g)?;
        let s_b = draw_subset(&mut rng, n, target.b)?;
        let grad = mean_grad(problem, &s_g, &x)?;
        let hess_op = problem.subsampled_hessian(&x, &s_b);
        let grad_norm = grad.norm();
        let mut gamma = 0usize;

        let small_grad = grad_norm <= grad_trigger;
        let solution: SubproblemSolution = if small_grad {
            // Eigenvalue mode: certify stationarity or step along negative
            // curvature.
            let eig = lanczos_min_eig(&*hess_op, LANCZOS_TOL, d, &mut rng);
            gamma += eig.hvp_count;
            if eig.value >= curvature_floor {
                termination = Termination::GradAndCurvature;
                break;
            }
            match config.algorithm {
                Algorithm::TrustRegion => {
                    let step = negative_curvature_step_tr(&eig.vector, reg, &grad);
                    let bs = hess_op.apply(&step);
                    let decrease = -grad.dot(&step) - 0.5 * step.dot(&bs);
                    let residual = (&grad + &bs).norm();
                    let sol = SubproblemSolution {
                        step,
                        hvp_count: 1,
                        kind: SolutionKind::NegativeCurvature,
                        predicted_decrease: decrease,
                        boundary_hit: true,
                        residual_norm: residual,
                        converged: true,
                        conditions_met: None,
                    };
                    gamma += sol.hvp_count;
                    sol
                }
                Algorithm::CubicReg => {
                    let (norm_est, applies) =
                        estimate_operator_norm(&*hess_op, 20, 1.1, &mut rng);
                    gamma += applies;
                    let sol = negative_curvature_step_arc(
                        &eig.vector,
                        reg,
                        &grad,
                        &*hess_op,
                        norm_est,
                        config.kappa_theta,
                        config.refine_max_iter,
                    );
                    gamma += sol.hvp_count;
                    sol
                }
            }
        } else {
            match config.algorithm {
                Algorithm::TrustRegion => {
                    let sol = match config.tr_solver {
                        TrSolver::Steihaug => steihaug_cg(
                            &grad,
                            &*hess_op,
                            reg,
                            steihaug_forcing_tol(grad_norm),
                            2 * d,
                        ),
                        TrSolver::CauchyPoint => cauchy_point_tr(&grad, &*hess_op, reg),
                    };
                    gamma += sol.hvp_count;
                    sol
                }
                Algorithm::CubicReg => {
                    let (norm_est, applies) =
                        estimate_operator_norm(&*hess_op, 20, 1.1, &mut rng);
                    gamma += applies;
                    let cauchy = cauchy_step_arc(&grad, &*hess_op, norm_est, reg);
                    gamma += cauchy.hvp_count;
                    let refined = refine_arc(
                        &grad,
                        &*hess_op,
                        reg,
                        &cauchy.step,
                        config.kappa_theta,
                        config.refine_max_iter,
                    );
                    gamma += refined.hvp_count;
                    refined
                }
            }
        };

        // Function estimates; the small-gradient trigger also couples the
        // function set to the gradient set.
        let coupled = small_grad;
        let s_h = if coupled {
            s_g.clone()
        } else {
            draw_subset(&mut rng, n, target.h)?
        };
        let actual_sizes = SetSizes {
            h: s_h.len(),
            g: s_g.len(),
            b: s_b.len(),
        };
        let props = props_for_iteration(actual_sizes, gamma);
        if let Some(max_props) = config.max_props {
            if counter.total() + props > max_props {
                termination = Termination::PropBudget;
                break;
            }
        }

        let h_x = mean_value(problem, &s_h, &x)?;
        let x_trial = &x + &solution.step;
        let h_xs = mean_value(problem, &s_h, &x_trial)?;

        let step_norm = solution.step.norm();
        let correction = match config.algorithm {
            Algorithm::TrustRegion => 2.0 * eps_h_eff * step_norm * step_norm,
            Algorithm::CubicReg => match config.cubic_correction {
                CubicCorrection::SigmaSquared => 2.0 * eps_h_eff / (reg * reg),
                CubicCorrection::StepNorm => 2.0 * eps_h_eff * step_norm * step_norm,
            },
        };
        let ratio = RatioReport::from_parts(
            solution.predicted_decrease,
            h_x - h_xs,
            correction,
            h_x,
        );

        let cum_props = counter.charge(actual_sizes, gamma);
        let accepted = !ratio.degenerate && ratio.rho_hat >= config.eta;
        if accepted {
            x = x_trial;
        }
        let reg_used = reg;
        let expand = !ratio.degenerate && ratio.rho_hat > config.eta;
        reg = match config.algorithm {
            Algorithm::TrustRegion => {
                if expand {
                    (config.grow_factor * reg).min(config.delta_max)
                } else {
                    config.shrink_factor * reg
                }
            }
            Algorithm::CubicReg => {
                if expand {
                    (config.shrink_factor * reg).max(config.sigma_min)
                } else {
                    config.grow_factor * reg
                }
            }
        };

        records.push(IterationRecord {
            iter,
            rho_tilde: ratio.rho_tilde,
            rho_hat: ratio.rho_hat,
            accepted,
            reg_value: reg_used,
            step_norm,
            gamma,
            sizes: actual_sizes,
            props,
            cum_props,
            grad_norm,
            solver_residual: solution.residual_norm,
            coupled,
            conditions_met: solution.conditions_met,
            x_after: x.clone(),
        });
    }

    Ok(RunTrace {
        records,
        final_x: x,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_dataset;
    use crate::problem::{full_grad, full_value, NllsLogisticProblem, QuadraticProblem};

    fn two_center_quadratic() -> QuadraticProblem {
        QuadraticProblem::new(vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
        ])
        .unwrap()
    }

    /// Exact-oracle config aimed at `‖∇f‖ ≤ 1e-8`.
    fn exact_config(algorithm: Algorithm) -> VariantConfig {
        let mut c = VariantConfig::new(algorithm, Variant::Full);
        c.delta0 = 1.0;
        c.delta_max = 100.0;
        c.max_iters = 50;
        c.budget.eps_grad_target = 1e-8;
        c.budget.eps_g = 1e-9;
        c.budget.eps_hess_target = 1e-2;
        c.budget.eps_b = 1e-3;
        c.budget.eps_h = 1e-3;
        c
    }

    #[test]
    fn full_tr_converges_to_centroid() {
        let p = two_center_quadratic();
        let x0 = DVector::from_vec(vec![5.0, 5.0]);
        let trace = run_trust_region(&p, &x0, &exact_config(Algorithm::TrustRegion)).unwrap();
        assert_eq!(trace.termination, Termination::GradAndCurvature);
        assert!(trace.records.len() <= 50);
        let g = full_grad(&p, &trace.final_x).unwrap();
        assert!(g.norm() <= 1e-8, "final gradient {}", g.norm());
        assert!((trace.final_x[0] - 1.0).abs() <= 1e-8);
        assert!(trace.final_x[1].abs() <= 1e-8);
        // Exact oracles make every accepted step a true decrease.
        let mut last = full_value(&p, &x0).unwrap();
        for r in &trace.records {
            let f = full_value(&p, &r.x_after).unwrap();
            if r.accepted {
                assert!(f <= last + 1e-14);
            } else {
                assert_eq!(f, last);
            }
            last = f;
        }
    }

    #[test]
    fn full_arc_converges_and_sigma_decays_on_success_tail() {
        let p = two_center_quadratic();
        let x0 = DVector::from_vec(vec![5.0, 5.0]);
        let trace = run_cubic_reg(&p, &x0, &exact_config(Algorithm::CubicReg)).unwrap();
        assert_eq!(trace.termination, Termination::GradAndCurvature);
        let g = full_grad(&p, &trace.final_x).unwrap();
        assert!(g.norm() <= 1e-8, "final gradient {}", g.norm());
        // On the accepted tail σ is non-increasing down to its floor.
        let tail: Vec<&IterationRecord> = trace
            .records
            .iter()
            .skip_while(|r| !r.accepted)
            .collect();
        for w in tail.windows(2) {
            if w[0].accepted && w[1].accepted {
                assert!(w[1].reg_value <= w[0].reg_value + 1e-12);
            }
        }
        for r in &trace.records {
            assert!(r.reg_value >= exact_config(Algorithm::CubicReg).sigma_min - 1e-15);
        }
    }

    #[test]
    fn rejected_iterations_keep_x_and_shrink_radius() {
        // Exact quadratic oracles never reject, so run the subsampled
        // variant on a synthetic classification set where rejections occur.
        let ds = synthetic_dataset(400, 12, 4, 3);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let mut c = VariantConfig::new(Algorithm::TrustRegion, Variant::Shgf);
        c.sample_fraction = 0.03;
        c.max_iters = 80;
        c.seed = 5;
        let x0 = DVector::from_element(12, 2.0);
        let trace = run_trust_region(&p, &x0, &c).unwrap();
        let mut saw_rejection = false;
        for k in 1..trace.records.len() {
            let prev = &trace.records[k - 1];
            let cur = &trace.records[k];
            if !prev.accepted {
                saw_rejection = true;
                assert_eq!(prev.x_after, trace.records[k - 1].x_after);
                // Next iteration must run with the shrunk radius.
                assert!(
                    (cur.reg_value - c.shrink_factor * prev.reg_value).abs() <= 1e-15,
                    "radius did not shrink by r1 after rejection"
                );
            }
            if !cur.accepted && k >= 1 {
                assert_eq!(cur.x_after, prev.x_after, "rejected step moved x");
            }
            assert!(cur.cum_props > prev.cum_props);
            assert!(cur.reg_value <= c.delta_max);
        }
        assert!(saw_rejection, "test instance produced no rejections");
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let ds = synthetic_dataset(300, 10, 4, 9);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        for algorithm in [Algorithm::TrustRegion, Algorithm::CubicReg] {
            let mut c = VariantConfig::new(algorithm, Variant::Shgf);
            c.max_iters = 40;
            c.seed = 11;
            let x0 = DVector::from_element(10, 1.0);
            let a = run(&p, &x0, &c).unwrap();
            let b = run(&p, &x0, &c).unwrap();
            assert_eq!(a.termination, b.termination);
            assert_eq!(a.final_x, b.final_x);
            assert_eq!(a.records.len(), b.records.len());
            for (ra, rb) in a.records.iter().zip(&b.records) {
                assert_eq!(ra.rho_hat.to_bits(), rb.rho_hat.to_bits());
                assert_eq!(ra.x_after, rb.x_after);
                assert_eq!(ra.cum_props, rb.cum_props);
            }
        }
    }

    #[test]
    fn coupling_fires_exactly_on_small_gradients() {
        let ds = synthetic_dataset(500, 8, 3, 21);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let mut c = VariantConfig::new(Algorithm::TrustRegion, Variant::Shgf);
        // Large targets so the trigger region is reached quickly but
        // curvature keeps the run alive (identity regularizer ⇒ λ ≥ ~1,
        // so entering the trigger region terminates immediately; instead
        // widen the trigger and check the recorded flags).
        c.budget.eps_grad_target = 0.5;
        c.budget.eps_g = 0.05;
        c.max_iters = 60;
        let x0 = DVector::from_element(8, 3.0);
        let trace = run_trust_region(&p, &x0, &c).unwrap();
        let trigger = c.budget.eps_grad_target + c.budget.eps_g;
        for r in &trace.records {
            assert_eq!(r.coupled, r.grad_norm <= trigger, "iter {}", r.iter);
            if r.coupled {
                assert_eq!(r.sizes.h, r.sizes.g);
            }
        }
    }

    #[test]
    fn prop_budget_truncates_run() {
        let ds = synthetic_dataset(200, 6, 3, 2);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let mut c = VariantConfig::new(Algorithm::TrustRegion, Variant::Shgf);
        c.max_iters = 1000;
        let x0 = DVector::from_element(6, 1.0);
        let unbounded = run_trust_region(&p, &x0, &c).unwrap();
        let total = unbounded.records.last().unwrap().cum_props;
        c.max_props = Some(total / 2);
        let bounded = run_trust_region(&p, &x0, &c).unwrap();
        assert_eq!(bounded.termination, Termination::PropBudget);
        let last = bounded.records.last().unwrap();
        assert!(last.cum_props <= total / 2);
        for w in bounded.records.windows(2) {
            assert!(w[1].cum_props >= w[0].cum_props);
        }
    }

    #[test]
    fn termination_check_examples() {
        let budget = InexactnessBudget {
            eps_g: 0.1,
            eps_b: 0.5,
            eps_h: 0.5,
            v0: 1.0,
            delta: 0.1,
            eps_grad_target: 1.0,
            eps_hess_target: 1.5,
        };
        // g = 0, λ_min(B) = 1 ≥ −(1.5 − 0.5).
        assert!(check_termination(0.0, 1.0, &budget));
        // Strict threshold on the gradient side.
        assert!(!check_termination(1.0 + 0.1 + 1e-9, 5.0, &budget));
        // Curvature failure: λ = −3 < −1.
        assert!(!check_termination(0.0, -3.0, &budget));
    }

    #[test]
    fn variant_set_sizes_are_pinned() {
        let ds = synthetic_dataset(100, 5, 2, 8);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let x0 = DVector::from_element(5, 1.0);
        for (variant, expect) in [
            (Variant::Full, (100, 100, 100)),
            (Variant::Sh, (100, 100, 5)),
            (Variant::Shg, (100, 5, 5)),
            (Variant::Shgf, (5, 5, 5)),
        ] {
            let mut c = VariantConfig::new(Algorithm::TrustRegion, variant);
            c.max_iters = 3;
            let trace = run_trust_region(&p, &x0, &c).unwrap();
            let r = &trace.records[0];
            assert!(!r.coupled);
            assert_eq!((r.sizes.h, r.sizes.g, r.sizes.b), expect);
            assert_eq!(
                r.props,
                props_for_iteration(r.sizes, r.gamma)
            );
        }
    }

    #[test]
    fn mismatched_algorithm_is_rejected() {
        let p = two_center_quadratic();
        let x0 = DVector::zeros(2);
        let c = VariantConfig::new(Algorithm::TrustRegion, Variant::Full);
        assert!(run_cubic_reg(&p, &x0, &c).is_err());
    }

    #[test]
    fn acceptance_flag_matches_threshold_and_sigma_grows_on_failure() {
        let ds = synthetic_dataset(300, 9, 3, 14);
        let p = NllsLogisticProblem::new(ds.features, ds.labels).unwrap();
        let mut c = VariantConfig::new(Algorithm::CubicReg, Variant::Shgf);
        c.max_iters = 60;
        let trace = run_cubic_reg(&p, &DVector::from_element(9, 1.5), &c).unwrap();
        let mut saw_failure = false;
        for r in &trace.records {
            assert_eq!(r.accepted, r.rho_hat >= c.eta);
        }
        for w in trace.records.windows(2) {
            if w[0].rho_hat <= c.eta {
                saw_failure = true;
                assert_eq!(w[1].reg_value, c.grow_factor * w[0].reg_value);
            }
        }
        assert!(saw_failure, "instance produced no unsuccessful iterations");
    }

    /// On a problem with a constant Hessian, a certified cubic step bounds
    /// the next gradient: `‖g(x_{k+1})‖ ≤ κ_s‖s_k‖²` with
    /// `κ_s = (2ε_B + (L_H + σ_k) + 2κ_θε_g + κ_θL_∇f)/(1 − θ_k)` and the
    /// measured `θ_k = ‖∇p(s_k)‖/‖g(x_k)‖`. Here `L_H = 0`, `L_∇f = 1`,
    /// and the exact variant zeroes `ε_g`, `ε_B`.
    #[test]
    fn certified_cubic_steps_bound_next_gradient() {
        let p = two_center_quadratic();
        let x0 = DVector::from_vec(vec![5.0, 5.0]);
        let c = exact_config(Algorithm::CubicReg);
        let trace = run_cubic_reg(&p, &x0, &c).unwrap();
        let eps_stop = c.budget.eps_grad_target - c.budget.eps_g;
        let mut checked = 0;
        for w in trace.records.windows(2) {
            let (k, next) = (&w[0], &w[1]);
            if !k.accepted || k.conditions_met != Some(true) || next.grad_norm < eps_stop {
                continue;
            }
            let theta = k.solver_residual / k.grad_norm;
            assert!(theta < 1.0);
            let kappa_s = (k.reg_value + c.kappa_theta) / (1.0 - theta);
            assert!(
                next.grad_norm <= kappa_s * k.step_norm * k.step_norm * (1.0 + 1e-9),
                "iter {}: ‖g_next‖ = {} exceeds κ_s‖s‖² = {}",
                k.iter,
                next.grad_norm,
                kappa_s * k.step_norm * k.step_norm
            );
            checked += 1;
        }
        assert!(checked >= 3, "too few certified steps to spot-check");
    }
}
