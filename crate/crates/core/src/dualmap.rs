//! The inverse mean map `θ(x) = ∇f*(x)` and the entropic barrier
//! `f*(x) = sup_θ ⟨θ, x⟩ - f(θ)`.
//!
//! `θ(x)` minimizes the self-concordant function `g(θ) = f(θ) - ⟨θ, x⟩` whose
//! gradient is `x(θ) - x` and whose Hessian is `Σ(θ)`; damped Newton with step
//! `1/(1+λ)` while the decrement `λ > 1/4` converges from any start.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::{condition_number, spd_inverse, spd_solve};
use crate::logpartition::{self, mass_window, moments_with, Backend, MomentReport};
use crate::quadrature::composite;

pub const DEFAULT_MAX_ITERATIONS: usize = 200;
/// Hessians with a larger condition number are reported as near-singular.
pub const MAX_CONDITION: f64 = 1e12;
const FULL_STEP_DECREMENT: f64 = 0.25;

/// One Newton iterate and its decrement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonStep {
    pub theta: Vec<f64>,
    pub decrement: f64,
}

/// Solver controls for [`theta_of_x_with`].
#[derive(Debug, Clone)]
pub struct DualMapOptions {
    /// Residual tolerance `‖x(θ) - x‖`; defaults to `1e-8` times the diameter.
    pub tol: Option<f64>,
    pub max_iterations: usize,
    /// Starting tilt; `θ = 0` when absent.
    pub start: Option<DVector<f64>>,
}

impl Default for DualMapOptions {
    fn default() -> Self {
        DualMapOptions { tol: None, max_iterations: DEFAULT_MAX_ITERATIONS, start: None }
    }
}

/// Result of inverting the mean map.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub theta: DVector<f64>,
    pub newton_trace: Vec<NewtonStep>,
    /// `‖x(θ) - x‖`.
    pub residual: f64,
    /// Moments at the returned `θ`.
    pub report: MomentReport,
}

/// `f*`, its gradient and Hessian at `x`.
#[derive(Debug, Clone)]
pub struct BarrierEvaluation {
    pub x: DVector<f64>,
    /// `θ(x) = ∇f*(x)`.
    pub theta: DVector<f64>,
    /// `f*(x) = ⟨θ(x), x⟩ - f(θ(x))`.
    pub value: f64,
    /// `∇²f*(x) = Σ(θ(x))⁻¹`.
    pub hessian: DMatrix<f64>,
    pub newton_trace: Vec<NewtonStep>,
    pub residual: f64,
}

pub fn default_tolerance(body: &ConvexBody) -> f64 {
    1e-8 * body.diameter()
}

/// `θ(x)` by damped Newton from `θ = 0`.
pub fn theta_of_x(body: &ConvexBody, x: &DVector<f64>, backend: &Backend, tol: Option<f64>) -> Result<DualSolution> {
    theta_of_x_with(body, x, backend, &DualMapOptions { tol, ..Default::default() })
}

pub fn theta_of_x_with(
    body: &ConvexBody,
    x: &DVector<f64>,
    backend: &Backend,
    options: &DualMapOptions,
) -> Result<DualSolution> {
    body.check_dim(x)?;
    backend.check_applicable(body)?;
    let margin = body.margin_unchecked(x);
    if margin <= 0.0 {
        return Err(Error::NotInterior { distance: margin });
    }
    let tol = options.tol.unwrap_or_else(|| default_tolerance(body));
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut theta = match &options.start {
        Some(s) => {
            body.check_dim(s)?;
            s.clone()
        }
        None => DVector::zeros(body.dim()),
    };
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    for _ in 0..=options.max_iterations {
        let report = moments_with(body, &theta, None, backend, false)?;
        let grad = &report.mean - x;
        residual = grad.norm();
        let direction = spd_solve(&report.covariance, &grad)?;
        let decrement = grad.dot(&direction).max(0.0).sqrt();
        trace.push(NewtonStep { theta: theta.iter().copied().collect(), decrement });
        if residual <= tol {
            return Ok(DualSolution { theta, newton_trace: trace, residual, report });
        }
        if !decrement.is_finite() {
            break;
        }
        let step = if decrement > FULL_STEP_DECREMENT { 1.0 / (1.0 + decrement) } else { 1.0 };
        theta -= step * direction;
    }
    Err(Error::NoConvergence { solver: "dual map newton", iterations: trace.len().saturating_sub(1), residual })
}

/// Barrier value, gradient and Hessian at an interior point.
pub fn barrier(body: &ConvexBody, x: &DVector<f64>, backend: &Backend, tol: Option<f64>) -> Result<BarrierEvaluation> {
    barrier_with(body, x, backend, &DualMapOptions { tol, ..Default::default() })
}

pub fn barrier_with(
    body: &ConvexBody,
    x: &DVector<f64>,
    backend: &Backend,
    options: &DualMapOptions,
) -> Result<BarrierEvaluation> {
    let sol = theta_of_x_with(body, x, backend, options)?;
    let cond = condition_number(&sol.report.covariance);
    if cond > MAX_CONDITION {
        return Err(Error::NearSingular(cond));
    }
    let hessian = spd_inverse(&sol.report.covariance)?;
    Ok(BarrierEvaluation {
        x: x.clone(),
        value: sol.theta.dot(x) - sol.report.f_value,
        theta: sol.theta,
        hessian,
        newton_trace: sol.newton_trace,
        residual: sol.residual,
    })
}

/// `f*(x)` against `∫ p log p` for `p = p_{θ(x)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyCheck {
    pub f_star: f64,
    pub neg_entropy: f64,
    pub gap: f64,
}

pub const MAX_ENTROPY_DIM: usize = 4;

/// Compares `f*(x)` with the negative differential entropy of `p_{θ(x)}`,
/// the latter integrated pointwise by Gauss–Legendre quadrature over the body.
pub fn entropy_check(body: &ConvexBody, x: &DVector<f64>, backend: &Backend) -> Result<EntropyCheck> {
    if !backend.is_quadrature() {
        return Err(Error::BackendMismatch {
            backend: backend.name().into(),
            reason: "entropy check needs a quadrature backend".into(),
        });
    }
    if body.dim() > MAX_ENTROPY_DIM {
        return Err(Error::InvalidArgument(format!(
            "entropy check supports dimension <= {MAX_ENTROPY_DIM}, got {}",
            body.dim()
        )));
    }
    // θ·(x(θ) - x) enters the comparison at first order, so solve tightly
    let eval = barrier(body, x, backend, Some(1e-4 * default_tolerance(body)))?;
    let f = logpartition::log_partition(body, &eval.theta, backend)?;
    let neg_entropy = integrate_p_log_p(body, &eval.theta, f);
    Ok(EntropyCheck { f_star: eval.value, neg_entropy, gap: (eval.value - neg_entropy).abs() })
}

/// Composite Gauss–Legendre nodes on `[lo, hi]` for the factor `e^{c t}`:
/// panels keep the exponent variation per panel below 10.
fn axis_nodes(lo: f64, hi: f64, c: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = ((c.abs() * (hi - lo) / 10.0).ceil() as usize).clamp(2, 400);
    composite(lo, hi, order, panels)
}

fn integrate_p_log_p(body: &ConvexBody, theta: &DVector<f64>, f: f64) -> f64 {
    let n = body.dim();
    let order = match n {
        1 | 2 => 48,
        3 => 16,
        _ => 8,
    };
    let (lo, hi) = mass_window(body, theta);
    let axes: Vec<_> = (0..n - 1).map(|j| axis_nodes(lo[j], hi[j], theta[j], order)).collect();
    let mut direction = DVector::zeros(n);
    direction[n - 1] = 1.0;
    let mut point = DVector::zeros(n);
    let mut idx = vec![0usize; n - 1];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        let mut lin = 0.0;
        for j in 0..n - 1 {
            point[j] = axes[j].0[idx[j]];
            weight *= axes[j].1[idx[j]];
            lin += theta[j] * point[j];
        }
        point[n - 1] = 0.0;
        if let Some((t0, t1)) = body.line_intersection(&point, &direction) {
            if t1 > t0 {
                let (ts, ws) = axis_nodes(t0, t1, theta[n - 1], order);
                for (t, w) in ts.iter().zip(&ws) {
                    let log_p = lin + theta[n - 1] * t - f;
                    total += weight * w * log_p.exp() * log_p;
                }
            }
        }
        // odometer over the outer axes
        let mut k = 0;
        while k < n - 1 {
            idx[k] += 1;
            if idx[k] < axes[k].0.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n - 1 {
            break;
        }
    }
    total
}
