//! Short-step path following for `min ⟨c, x⟩` over `K` with the entropic barrier.
//!
//! The central path `x(t) = argmin t⟨c, x⟩ + f*(x)` satisfies `θ(x(t)) = -t c`,
//! so `x(t)` is the mean of `p_{-tc}`. The solver follows it with one Newton
//! step per update `t ← t (1 + γ/√ν)` and certifies the gap by `ν / t`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dualmap::{default_tolerance, theta_of_x_with, DualMapOptions};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::linalg::min_eigenvalue;
use crate::logpartition::{moments, moments_with, Backend, MomentReport};
use crate::scverify::nu_used;

/// Short-step constant `γ`.
pub const GAMMA: f64 = 0.125;
const FULL_STEP_DECREMENT: f64 = 0.25;
const MAX_T_HALVINGS: usize = 30;
/// Decrement perturbation allowed from inexact dual points while following the path.
const PATH_DECREMENT_ERROR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathMode {
    /// `x(t)` as the mean of `p_{-tc}`.
    MeanMap,
    /// Damped Newton on `x ↦ t⟨c, x⟩ + f*(x)` from the centroid.
    NewtonMinimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    IterationCap,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub t: f64,
    pub x: Vec<f64>,
    /// Newton decrement of `t⟨c, ·⟩ + f*` at `x`.
    pub newton_decrement: f64,
    /// `ν / t`.
    pub gap_bound: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralPathTrace {
    pub records: Vec<PathRecord>,
    pub status: SolveStatus,
    pub nu: f64,
    /// Outer Newton steps, including polishing.
    pub newton_steps: usize,
    /// Reason for a non-converged status.
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub gamma: f64,
    /// Cap on path-following updates.
    pub max_iterations: usize,
    /// Polishing stops once the decrement falls below this.
    pub polish_decrement: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions { gamma: GAMMA, max_iterations: 100_000, polish_decrement: 1e-7 }
    }
}

/// Point on the central path at parameter `t`.
pub fn central_path_point(
    body: &ConvexBody,
    c: &DVector<f64>,
    t: f64,
    backend: &Backend,
    mode: PathMode,
) -> Result<DVector<f64>> {
    body.check_dim(c)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    match mode {
        PathMode::MeanMap => Ok(moments(body, &(-t * c), None, backend)?.mean),
        PathMode::NewtonMinimize => newton_minimize(body, c, t, backend, 1e-8, 500).map(|(x, _)| x),
    }
}

/// Local state: the iterate with its dual point and moments there.
struct Iterate {
    x: DVector<f64>,
    theta: DVector<f64>,
    report: MomentReport,
}

/// Dual-map tolerance that perturbs the Newton decrement by at most
/// `decrement_error`: an error `δx` in the mean moves the decrement by about
/// `δx / σ_min`.
fn dual_tol(body: &ConvexBody, report: &MomentReport, decrement_error: f64) -> f64 {
    let spread = min_eigenvalue(&report.covariance).max(0.0).sqrt();
    default_tolerance(body).min(decrement_error * spread).max(1e-15 * body.diameter())
}

fn relocate(
    body: &ConvexBody,
    x: DVector<f64>,
    prev: &Iterate,
    backend: &Backend,
    decrement_error: f64,
) -> Result<Iterate> {
    let options = DualMapOptions {
        tol: Some(dual_tol(body, &prev.report, decrement_error)),
        start: Some(prev.theta.clone()),
        ..Default::default()
    };
    let sol = theta_of_x_with(body, &x, backend, &options)?;
    Ok(Iterate { x, theta: sol.theta, report: sol.report })
}

/// Gradient `t c + θ(x)`, Newton step `-Σ g` and decrement `√(gᵀΣg)`.
fn newton_direction(it: &Iterate, c: &DVector<f64>, t: f64) -> (DVector<f64>, f64) {
    let g = c * t + &it.theta;
    let step = -(&it.report.covariance * &g);
    let dec = (-g.dot(&step)).max(0.0).sqrt();
    (step, dec)
}

fn start(body: &ConvexBody, backend: &Backend) -> Result<Iterate> {
    let theta = DVector::zeros(body.dim());
    let report = moments_with(body, &theta, None, backend, false)?;
    Ok(Iterate { x: report.mean.clone(), theta, report })
}

/// Damped Newton on `t⟨c, x⟩ + f*(x)` from the centroid until the decrement
/// is below `decrement_tol`; returns the minimizer and the step count.
pub fn newton_minimize(
    body: &ConvexBody,
    c: &DVector<f64>,
    t: f64,
    backend: &Backend,
    decrement_tol: f64,
    max_steps: usize,
) -> Result<(DVector<f64>, usize)> {
    let mut it = start(body, backend)?;
    for k in 0..max_steps {
        let (dx, dec) = newton_direction(&it, c, t);
        if dec <= decrement_tol {
            return Ok((it.x, k));
        }
        let mut s = if dec > FULL_STEP_DECREMENT { 1.0 / (1.0 + dec) } else { 1.0 };
        let mut next = &it.x + &dx * s;
        while body.margin_unchecked(&next) <= 0.0 {
            s *= 0.5;
            if s < 1e-12 {
                return Err(Error::Numerical("newton step cannot stay interior".into()));
            }
            next = &it.x + &dx * s;
        }
        it = relocate(body, next, &it, backend, 0.1 * decrement_tol)?;
    }
    Err(Error::NoConvergence { solver: "central path newton", iterations: max_steps, residual: f64::NAN })
}

/// Minimizes `⟨c, x⟩` over `K` to accuracy `epsilon` certified by `ν / t`.
pub fn solve_lp(
    body: &ConvexBody,
    c: &DVector<f64>,
    epsilon: f64,
    backend: &Backend,
) -> Result<(DVector<f64>, CentralPathTrace)> {
    solve_lp_with(body, c, epsilon, backend, &LpOptions::default())
}

pub fn solve_lp_with(
    body: &ConvexBody,
    c: &DVector<f64>,
    epsilon: f64,
    backend: &Backend,
    options: &LpOptions,
) -> Result<(DVector<f64>, CentralPathTrace)> {
    body.check_dim(c)?;
    backend.check_applicable(body)?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cost vector has non-finite entries".into()));
    }
    let nu = nu_used(body.dim());
    let mut trace = CentralPathTrace { records: Vec::new(), status: SolveStatus::Converged, nu, newton_steps: 0, message: None };
    let mut it = start(body, backend)?;
    let c_norm = c.norm();
    if c_norm == 0.0 {
        return Ok((it.x, trace));
    }
    let spread = c.dot(&(&it.report.covariance * c)).sqrt();
    let mut t = (1.0 / c_norm).min(1.0 / (4.0 * spread));
    let t_final = nu / epsilon;
    let growth = options.gamma / nu.sqrt();
    let mut t_prev = t;

    let fail = |trace: &mut CentralPathTrace, status: SolveStatus, msg: String| {
        trace.status = status;
        trace.message = Some(msg);
    };

    for iteration in 0.. {
        if iteration >= options.max_iterations {
            fail(&mut trace, SolveStatus::IterationCap, format!("{iteration} updates without reaching t = {t_final:.3e}"));
            return Ok((it.x, trace));
        }
        // one Newton step at t, shrinking the t-update if interiority is lost
        let mut halvings = 0;
        let next = loop {
            let (dx, dec) = newton_direction(&it, c, t);
            let s = if dec > FULL_STEP_DECREMENT { 1.0 / (1.0 + dec) } else { 1.0 };
            let candidate = &it.x + &dx * s;
            if body.margin_unchecked(&candidate) > 0.0 {
                break candidate;
            }
            halvings += 1;
            if halvings > MAX_T_HALVINGS || t == t_prev {
                fail(&mut trace, SolveStatus::NumericalFailure, format!("lost interiority at t = {t:.6e}"));
                return Ok((it.x, trace));
            }
            t = t_prev + 0.5 * (t - t_prev);
        };
        it = match relocate(body, next, &it, backend, PATH_DECREMENT_ERROR) {
            Ok(v) => v,
            Err(e) => {
                let reliable = trace.records.last().map_or(0.0, |r| r.t);
                fail(&mut trace, SolveStatus::NumericalFailure, format!("{e}; largest reliable t = {reliable:.6e}"));
                return Ok((it.x, trace));
            }
        };
        trace.newton_steps += 1;
        let (_, dec) = newton_direction(&it, c, t);
        trace.records.push(PathRecord {
            t,
            x: it.x.iter().copied().collect(),
            newton_decrement: dec,
            gap_bound: nu / t,
            objective: c.dot(&it.x),
        });
        if t >= t_final {
            break;
        }
        t_prev = t;
        t = (t * (1.0 + growth)).min(t_final);
    }

    // polish at the final t
    for _ in 0..50 {
        let (dx, dec) = newton_direction(&it, c, t);
        if dec <= options.polish_decrement {
            break;
        }
        let s = if dec > FULL_STEP_DECREMENT { 1.0 / (1.0 + dec) } else { 1.0 };
        let candidate = &it.x + &dx * s;
        if body.margin_unchecked(&candidate) <= 0.0 {
            break;
        }
        match relocate(body, candidate, &it, backend, 0.1 * options.polish_decrement) {
            Ok(v) => it = v,
            Err(_) => break,
        }
        trace.newton_steps += 1;
    }
    let (_, dec) = newton_direction(&it, c, t);
    if let Some(last) = trace.records.last_mut() {
        last.x = it.x.iter().copied().collect();
        last.newton_decrement = dec;
        last.objective = c.dot(&it.x);
    }
    Ok((it.x, trace))
}
