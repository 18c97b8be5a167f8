//! Solvers for the barycenter matrix equations: the gradient projection
//! method with Armijo or constant stepsize, Picard iteration of the
//! fixed-point maps from the existence arguments, closed-form special cases,
//! optimality residuals and invariant brackets.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::MeasureFamily;
use crate::objective::{
    self, convexity_gamma_max, lipschitz_bound, spectral_bounds, Evaluator, ProblemInstance,
    SpectralBounds,
};
use crate::quad::{bisect, bisect_with_expansion};
use crate::spd::{frobenius_inner, lowner_project, LownerInterval, SpdMatrix, SymMatrix};

/// Which iteration drives the solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolverKind {
    /// Gradient projection with Armijo backtracking along the feasible
    /// direction.
    GpmArmijo,
    /// Gradient projection with the constant stepsize `min(1, 1/L)` derived
    /// from the Lipschitz bound of the gradient.
    GpmConst,
    /// Picard iteration of the family's fixed-point map on its invariant
    /// bracket.
    FixedPoint,
}

/// Solver parameters. Defaults follow the experiment settings used
/// throughout: ξ = 0.5, σ = 0.1, Π = [1e-5 I, 1e5 I], tol = 1e-8,
/// max_iter = 100000, X⁰ = I.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Projection box Π = [α̂ I, β̂ I].
    pub projection_box: LownerInterval,
    /// Armijo mesh ratio, in (0, 1).
    pub xi: f64,
    /// Armijo sufficient-decrease fraction, in (0, 1).
    pub sigma: f64,
    /// Stop once ‖D⁽ᵏ⁾‖_F drops to this level.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial iterate; `None` means the identity.
    pub x0: Option<SpdMatrix>,
    /// Damping θ ∈ (0, 1] for the fixed-point iteration (1 = undamped).
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::GpmArmijo,
            projection_box: LownerInterval::new(1e-5, 1e5).expect("static interval"),
            xi: 0.5,
            sigma: 0.1,
            tol: 1e-8,
            max_iter: 100_000,
            x0: None,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn with_kind(kind: SolverKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Replaces the projection box by the instance's invariant bracket
    /// `[α* I, β* I]`, inside which the solution is known to lie.
    pub fn with_tight_bracket(mut self, inst: &ProblemInstance) -> Result<Self> {
        let (lo, hi) = bracket(inst)?;
        self.projection_box = LownerInterval::new(lo * (1.0 - 1e-12), hi * (1.0 + 1e-12))?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "xi must lie in (0,1), got {}",
                self.xi
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidInput(format!(
                "sigma must lie in (0,1), got {}",
                self.sigma
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "damping must lie in (0,1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Outcome of a solve: the final iterate plus the per-iteration trace.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x_final: SpdMatrix,
    /// Number of update steps taken.
    pub iterations: usize,
    /// Frobenius norm of the optimality-equation defect at `x_final`.
    pub residual_norm: f64,
    /// ‖D⁽ᵏ⁾‖_F per visited iterate.
    pub direction_norms: Vec<f64>,
    /// Objective value per visited iterate.
    pub objective_trace: Vec<f64>,
    /// Accepted stepsize per update.
    pub step_sizes: Vec<f64>,
    pub converged: bool,
    pub wall_time: Duration,
    /// Set when γ meets or exceeds the certified convexity threshold for a
    /// q > 1 instance: a stationary point is then not certified globally
    /// optimal.
    pub convexity_warning: bool,
}

fn penalty_coefficient(inst: &ProblemInstance, x: &SpdMatrix) -> f64 {
    match inst.family() {
        MeasureFamily::Gaussian => inst.gamma(),
        MeasureFamily::QGaussian { q } => {
            let c = inst
                .constants()
                .expect("q-Gaussian instance carries constants");
            inst.gamma() * c.m * (0.5 * (q - 1.0) * x.log_det()).exp()
        }
        MeasureFamily::PhiExponential => 0.0,
    }
}

/// Frobenius norm of the defect of the family's optimality matrix equation,
/// `‖X − c(X) I − Σᵢ λᵢ (X^{1/2} Aᵢ X^{1/2})^{1/2}‖_F`, where c(X) is γ for
/// Gaussians, `γ m (det X)^{(q−1)/2}` for q-Gaussians and 0 for the φ family.
pub fn residual(x: &SpdMatrix, inst: &ProblemInstance) -> Result<f64> {
    Ok(residual_matrix(x, inst)?.norm())
}

fn residual_matrix(x: &SpdMatrix, inst: &ProblemInstance) -> Result<SymMatrix> {
    if x.dim() != inst.dim() {
        return Err(Error::InvalidInput(format!(
            "X has dimension {}, instance has dimension {}",
            x.dim(),
            inst.dim()
        )));
    }
    let xh = x.sqrt();
    let roots = objective::weighted_root_sum(x, &xh, inst);
    let c = penalty_coefficient(inst, x);
    let d = x.dim();
    let m = x.as_matrix() - DMatrix::identity(d, d) * c - roots;
    Ok(SymMatrix::from_symmetric_unchecked(
        0.5 * (&m + m.transpose()),
    ))
}

/// One application of the family's fixed-point map
/// `X ↦ Σᵢ λᵢ (X^{1/2} Aᵢ X^{1/2})^{1/2} + c(X) I`; its fixed points are
/// exactly the zero-residual points.
pub fn fixed_point_map(x: &SpdMatrix, inst: &ProblemInstance) -> Result<SpdMatrix> {
    if x.dim() != inst.dim() {
        return Err(Error::InvalidInput(format!(
            "X has dimension {}, instance has dimension {}",
            x.dim(),
            inst.dim()
        )));
    }
    let xh = x.sqrt();
    let roots = objective::weighted_root_sum(x, &xh, inst);
    let c = penalty_coefficient(inst, x);
    let d = x.dim();
    let m = roots + DMatrix::identity(d, d) * c;
    SpdMatrix::clamped(SymMatrix::from_symmetric_unchecked(
        0.5 * (&m + m.transpose()),
    ))
}

/// Positive root of `t = √a √t + k`, i.e. `((√a + √(a + 4k))/2)²`.
fn sqrt_shift_root(a: f64, k: f64) -> f64 {
    let s = 0.5 * (a.sqrt() + (a + 4.0 * k).sqrt());
    s * s
}

/// Scalar bounds (α*, β*) making the fixed-point map a self-map of
/// `[α* I, β* I]`. Construction depends on the family:
///
/// - Gaussian (and φ, where γ = 0): the closed form `((√α₀ + √(α₀+4γ))/2)²`;
/// - q-Gaussian, q > 1: roots of the scalar equations obtained by dividing
///   the self-map identity by a power of t (bisection with bracket
///   expansion, case split at d(q−1) = 1);
/// - q-Gaussian, q < 1: the coupled two-variable system reduced to a single
///   scalar fixed-point equation and bisected over its invariant interval.
pub fn bracket(inst: &ProblemInstance) -> Result<(f64, f64)> {
    let b = spectral_bounds(inst);
    let (alpha0, beta0) = (b.alpha, b.beta);
    let gamma = inst.gamma();
    match inst.family() {
        MeasureFamily::Gaussian | MeasureFamily::PhiExponential => Ok((
            sqrt_shift_root(alpha0, gamma),
            sqrt_shift_root(beta0, gamma),
        )),
        MeasureFamily::QGaussian { q } => {
            let c = inst
                .constants()
                .expect("q-Gaussian instance carries constants");
            let gm = gamma * c.m;
            if gm == 0.0 {
                return Ok((alpha0, beta0));
            }
            let d = inst.dim() as f64;
            let e = d * (q - 1.0);
            if q > 1.0 {
                // Self-map identity t = √a √t + gm t^{e/2}; the rearranged
                // scalar functions below change sign between 0 and ∞.
                let root_for = |a: f64| -> Result<f64> {
                    let g = |t: f64| {
                        if e <= 1.0 {
                            t.powf(1.0 - 0.5 * e) - a.sqrt() * t.powf(0.5 * (1.0 - e)) - gm
                        } else {
                            t.sqrt() - a.sqrt() - gm * t.powf(0.5 * (e - 1.0))
                        }
                    };
                    bisect_with_expansion(g, 1e-12, 1e12, 1e-12)
                };
                let alpha_star = root_for(alpha0)?;
                let beta_star = root_for(beta0)?;
                check_bracket(alpha_star, beta_star)
            } else {
                // Coupled system α* = √α₀√α* + gm β*^{e/2},
                //                β* = √β₀√β* + gm α*^{e/2}, with e/2 < 0.
                // Substituting the first equation into the second leaves one
                // scalar fixed-point equation for β*.
                let g1 = |beta: f64| sqrt_shift_root(alpha0, gm * beta.powf(0.5 * e));
                let g2 = |alpha: f64| sqrt_shift_root(beta0, gm * alpha.powf(0.5 * e));
                let upper_seed = g2(alpha0);
                let f = |beta: f64| beta - g2(g1(beta));
                let beta_star = if f(beta0) >= 0.0 {
                    beta0
                } else {
                    bisect(f, beta0, upper_seed * (1.0 + 1e-9), 1e-12)?
                };
                let alpha_star = g1(beta_star);
                check_bracket(alpha_star, beta_star)
            }
        }
    }
}

fn check_bracket(alpha_star: f64, beta_star: f64) -> Result<(f64, f64)> {
    if !(alpha_star.is_finite() && beta_star.is_finite() && 0.0 < alpha_star)
        || alpha_star > beta_star * (1.0 + 1e-12)
    {
        return Err(Error::NumericalError(format!(
            "bracket computation produced an invalid interval [{alpha_star}, {beta_star}]"
        )));
    }
    Ok((alpha_star, beta_star.max(alpha_star)))
}

/// Dispatches on `cfg.kind`.
pub fn solve(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    match cfg.kind {
        SolverKind::GpmArmijo | SolverKind::GpmConst => solve_gpm(inst, cfg),
        SolverKind::FixedPoint => solve_fixed_point(inst, cfg),
    }
}

fn convexity_warning(inst: &ProblemInstance) -> bool {
    if let MeasureFamily::QGaussian { q } = inst.family() {
        if q > 1.0 && inst.gamma() > 0.0 {
            let b = spectral_bounds(inst);
            if let Ok(g0) = convexity_gamma_max(q, inst.dim(), &b) {
                return inst.gamma() >= g0;
            }
        }
    }
    false
}

fn initial_iterate(
    inst: &ProblemInstance,
    cfg: &SolverConfig,
    boxed: &LownerInterval,
) -> Result<SpdMatrix> {
    let x0 = match &cfg.x0 {
        Some(x) => {
            if x.dim() != inst.dim() {
                return Err(Error::InvalidInput(format!(
                    "x0 has dimension {}, instance has dimension {}",
                    x.dim(),
                    inst.dim()
                )));
            }
            x.clone()
        }
        None => SpdMatrix::identity(inst.dim()),
    };
    Ok(lowner_project(x0.as_sym(), boxed))
}

/// Gradient projection method.
///
/// Each iteration projects the unit gradient step onto the box,
/// `X̄ = [X − ∇ψ(X)]⁺`, and moves along `D = X̄ − X` with a stepsize chosen
/// by Armijo backtracking (`ψ(X + tD) ≤ ψ(X) + σ t ⟨∇ψ(X), D⟩`, the standard
/// sufficient-decrease test) or held constant at `min(1, 1/L)`. Iterates are
/// re-symmetrized and clipped to the SPD cone after every step. Terminates
/// once `‖D‖_F ≤ tol`; exhausting `max_iter` yields `converged = false`
/// rather than an error.
pub fn solve_gpm(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let eval = Evaluator::new(inst);
    let boxed = cfg.projection_box;
    let mut x = initial_iterate(inst, cfg, &boxed)?;

    let const_step = if cfg.kind == SolverKind::GpmConst {
        // Lipschitz bound over scalar bounds covering the inputs, the
        // invariant bracket and the initial iterate.
        let (a_star, b_star) = bracket(inst)?;
        let covering = spectral_bounds(inst)
            .merge(&SpectralBounds {
                alpha: a_star,
                beta: b_star,
            })
            .merge(&SpectralBounds {
                alpha: x.lambda_min(),
                beta: x.lambda_max(),
            });
        let l = lipschitz_bound(inst, &covering);
        Some((1.0 / l).min(1.0))
    } else {
        None
    };

    let mut direction_norms = Vec::new();
    let mut objective_trace = Vec::new();
    let mut step_sizes = Vec::new();
    let mut converged = false;

    // The Armijo test compares objective values evaluated through one code
    // path only (`value_sym`), carried across iterations; mixing routes would
    // inject relative roundoff (~1e-14) that dwarfs the certified decrease
    // σt‖D‖² once ‖D‖ nears the tolerance. The constant-stepsize variant
    // makes no comparisons and uses the gradient-route value for its trace.
    let armijo = const_step.is_none();
    let mut current_value = if armijo {
        eval.value_sym(x.as_sym())
    } else {
        0.0
    };

    for _ in 0..=cfg.max_iter {
        let (grad_route_value, grad) = eval.value_and_gradient(&x);
        let target = SymMatrix::from_symmetric_unchecked(x.as_matrix() - grad.as_matrix());
        let projected = lowner_project(&target, &boxed);
        let direction = projected.as_sym().sub(x.as_sym());
        let dnorm = direction.norm();
        direction_norms.push(dnorm);
        objective_trace.push(if armijo {
            current_value
        } else {
            grad_route_value
        });

        if dnorm <= cfg.tol {
            converged = true;
            break;
        }
        if step_sizes.len() >= cfg.max_iter {
            break;
        }

        let mut accepted_value = None;
        let step = match const_step {
            Some(t) => t,
            None => {
                let slope = frobenius_inner(&grad, &direction);
                // Near the tolerance the exact decrease σt⟨∇ψ,D⟩ ~ ‖D‖² drops
                // below the roundoff of the objective evaluation; the
                // allowance keeps the test meaningful there instead of
                // stalling on noise. Its scale is the size of the trace sums
                // the objective is built from, which dominate the roundoff
                // even when they almost cancel in the value.
                let noise = 64.0
                    * f64::EPSILON
                    * (eval.summand_scale(x.as_matrix().trace()) + current_value.abs() + 1.0);
                let mut t = 1.0;
                let mut accepted = None;
                for _ in 0..=60 {
                    let trial = SymMatrix::from_symmetric_unchecked(
                        x.as_matrix() + t * direction.as_matrix(),
                    );
                    let trial_value = eval.value_sym(&trial);
                    if trial_value <= current_value + cfg.sigma * t * slope + noise {
                        accepted = Some(t);
                        accepted_value = Some(trial_value);
                        break;
                    }
                    t *= cfg.xi;
                }
                accepted.ok_or_else(|| {
                    Error::StepsizeFailure(format!(
                        "Armijo backtracking found no acceptable step after 60 reductions (‖D‖ = {dnorm:e})"
                    ))
                })?
            }
        };
        step_sizes.push(step);
        let next =
            SymMatrix::from_symmetric_unchecked(x.as_matrix() + step * direction.as_matrix());
        if next.as_matrix() == x.as_matrix() {
            // The update fell below the resolution of the iterate: no further
            // progress is representable.
            step_sizes.pop();
            break;
        }
        let clipped = SpdMatrix::clamped(next.clone())?;
        if armijo {
            // The accepted trial value stays valid as long as clipping into
            // the cone did not alter the matrix (inside the box it never
            // does).
            current_value = match accepted_value {
                Some(v) if clipped.as_matrix() == next.as_matrix() => v,
                _ => eval.value_sym(clipped.as_sym()),
            };
        }
        x = clipped;
    }

    let residual_norm = residual(&x, inst)?;
    Ok(SolveReport {
        iterations: step_sizes.len(),
        x_final: x,
        residual_norm,
        direction_norms,
        objective_trace,
        step_sizes,
        converged,
        wall_time: start.elapsed(),
        convexity_warning: convexity_warning(inst),
    })
}

/// Picard iteration `X ← (1−θ) X + θ (Σᵢ λᵢ (X^{1/2} Aᵢ X^{1/2})^{1/2} + c(X) I)`
/// on the invariant bracket `[α* I, β* I]`; the initial iterate is projected
/// into the bracket and every iterate is projected back (the map is a
/// self-map there, so this only absorbs roundoff). Oscillation without
/// convergence within `max_iter` yields `converged = false`.
pub fn solve_fixed_point(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let eval = Evaluator::new(inst);
    let (a_star, b_star) = bracket(inst)?;
    let fp_box = LownerInterval::new(a_star * (1.0 - 1e-12), b_star * (1.0 + 1e-12))?;
    let mut x = initial_iterate(inst, cfg, &fp_box)?;

    let mut direction_norms = Vec::new();
    let mut objective_trace = Vec::new();
    let mut step_sizes = Vec::new();
    let mut converged = false;

    for _ in 0..=cfg.max_iter {
        let image = fixed_point_map(&x, inst)?;
        let direction = image.as_sym().sub(x.as_sym());
        let dnorm = direction.norm();
        direction_norms.push(dnorm);
        objective_trace.push(eval.value(&x));

        if dnorm <= cfg.tol {
            converged = true;
            break;
        }
        if step_sizes.len() >= cfg.max_iter {
            break;
        }
        step_sizes.push(cfg.damping);
        let next = if cfg.damping == 1.0 {
            image
        } else {
            SpdMatrix::clamped(SymMatrix::from_symmetric_unchecked(
                x.as_matrix() * (1.0 - cfg.damping) + image.as_matrix() * cfg.damping,
            ))?
        };
        x = lowner_project(next.as_sym(), &fp_box);
    }

    let residual_norm = residual(&x, inst)?;
    Ok(SolveReport {
        iterations: step_sizes.len(),
        x_final: x,
        residual_norm,
        direction_norms,
        objective_trace,
        step_sizes,
        converged,
        wall_time: start.elapsed(),
        convexity_warning: convexity_warning(inst),
    })
}

/// Scalar (d = 1) Gaussian solution
/// `X = ((Σᵢ λᵢ √aᵢ + √((Σᵢ λᵢ √aᵢ)² + 4γ)) / 2)²`, satisfying
/// `X − γ = √X Σᵢ λᵢ √aᵢ`.
pub fn closed_form_1d(inst: &ProblemInstance) -> Result<f64> {
    if inst.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "scalar closed form requires d = 1, got {}",
            inst.dim()
        )));
    }
    if inst.family() != MeasureFamily::Gaussian {
        return Err(Error::InvalidInput(
            "scalar closed form applies to the Gaussian family".into(),
        ));
    }
    let s: f64 = inst
        .matrices()
        .iter()
        .zip(inst.weights())
        .map(|(a, w)| w * a.as_matrix()[(0, 0)].sqrt())
        .sum();
    Ok(0.25 * (s + (s * s + 4.0 * inst.gamma()).sqrt()).powi(2))
}

/// Unpenalized two-measure barycenter
/// `X = λ₁² A₁ + λ₂² A₂ + λ₁λ₂ [(A₁A₂)^{1/2} + (A₂A₁)^{1/2}]`.
///
/// `(A₁A₂)^{1/2}` is the principal square root of the (non-symmetric but
/// similar-to-SPD) product, computed as
/// `A₁^{1/2} (A₁^{1/2} A₂ A₁^{1/2})^{1/2} A₁^{-1/2}`; the other root is its
/// transpose.
pub fn closed_form_two_measures(
    a1: &SpdMatrix,
    a2: &SpdMatrix,
    l1: f64,
    l2: f64,
) -> Result<SpdMatrix> {
    if a1.dim() != a2.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a1.dim(),
            a2.dim()
        )));
    }
    if !(l1 >= 0.0 && l2 >= 0.0) || (l1 + l2 - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "weights must be nonnegative and sum to 1, got ({l1}, {l2})"
        )));
    }
    let a1h = a1.sqrt();
    let a1ih = a1.inv_sqrt();
    let middle = SpdMatrix::clamped(SymMatrix::new(
        a1h.as_matrix() * a2.as_matrix() * a1h.as_matrix(),
    )?)?;
    let product_root = a1h.as_matrix() * middle.sqrt().as_matrix() * a1ih.as_matrix();
    let sym_pair = &product_root + product_root.transpose();
    let x = a1.as_matrix() * (l1 * l1) + a2.as_matrix() * (l2 * l2) + sym_pair * (l1 * l2);
    SpdMatrix::clamped(SymMatrix::new(x)?)
}
