//! The log-partition function `f(θ) = log ∫_K e^{⟨θ,x⟩} dx` and its derivatives.
//!
//! `∇f(θ)` is the mean of `p_θ`, `∇²f(θ)` its covariance `Σ(θ)` and `∇³f(θ)` its
//! third central moment tensor; [`moments`] reports the contraction
//! `∇³f(θ)[h, h, h]` for a caller-supplied `h`.
//!
//! Backends:
//!
//! | backend            | bodies                     | method                                   |
//! |--------------------|----------------------------|------------------------------------------|
//! | `ClosedForm`       | boxes, simplices, H-polytopes | Langevin formulas; divided differences over a triangulation |
//! | `TensorQuadrature` | axis boxes                 | Gauss–Legendre per axis                  |
//! | `GridQuadrature`   | any body, `n <= 4`         | extrapolated grid, exact on the last axis; balls by their radial law |
//! | `MonteCarlo`       | any body                   | hit-and-run sample moments               |
//!
//! Affine images are reduced to their inner body through
//! `f_{MK+s}(θ) = log|det M| + ⟨θ, s⟩ + f_K(Mᵀθ)`.

mod ball;
mod closed_form;
mod grid;

pub(crate) use grid::mass_window;
mod monte_carlo;
mod simplicial;
mod tensor;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;

pub const DEFAULT_TENSOR_ORDER: usize = 64;
pub const DEFAULT_GRID_RESOLUTION: usize = 200;
pub const MAX_GRID_DIM: usize = 4;

/// How `f` and its derivatives are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    ClosedForm,
    TensorQuadrature {
        #[serde(default = "default_order")]
        order: usize,
    },
    GridQuadrature {
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    MonteCarlo {
        samples: usize,
        /// Defaults to `100 n²`.
        #[serde(default)]
        burn_in: Option<usize>,
        /// Defaults to `n`.
        #[serde(default)]
        thinning: Option<usize>,
        #[serde(default)]
        seed: u64,
    },
}

fn default_order() -> usize {
    DEFAULT_TENSOR_ORDER
}

fn default_resolution() -> usize {
    DEFAULT_GRID_RESOLUTION
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::ClosedForm => "closed_form",
            Backend::TensorQuadrature { .. } => "tensor_quadrature",
            Backend::GridQuadrature { .. } => "grid_quadrature",
            Backend::MonteCarlo { .. } => "monte_carlo",
        }
    }

    pub fn tensor() -> Self {
        Backend::TensorQuadrature { order: DEFAULT_TENSOR_ORDER }
    }

    pub fn grid(resolution: usize) -> Self {
        Backend::GridQuadrature { resolution }
    }

    /// Deterministic backends produce bit-identical results for identical inputs
    /// and define a smooth `f`, so Newton-type solvers can drive residuals to
    /// round-off.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Backend::MonteCarlo { .. })
    }

    /// Backends that integrate numerically or exactly (everything but Monte Carlo).
    pub fn is_quadrature(&self) -> bool {
        self.is_deterministic()
    }

    /// The first applicable backend from the table above.
    pub fn default_for(body: &ConvexBody) -> Self {
        if has_closed_form(body) {
            Backend::ClosedForm
        } else if body.dim() <= MAX_GRID_DIM {
            Backend::GridQuadrature { resolution: DEFAULT_GRID_RESOLUTION }
        } else {
            Backend::MonteCarlo { samples: 10_000, burn_in: None, thinning: None, seed: 0 }
        }
    }

    pub fn check_applicable(&self, body: &ConvexBody) -> Result<()> {
        let mismatch = |reason: String| Error::BackendMismatch { backend: self.name().into(), reason };
        match self {
            Backend::ClosedForm => {
                if !has_closed_form(body) {
                    return Err(mismatch(format!("needs a box, simplex or H-polytope, got {}", body.kind_name())));
                }
            }
            Backend::TensorQuadrature { order } => {
                if !matches!(base_body(body), ConvexBody::AxisBox(_)) {
                    return Err(mismatch(format!("needs an axis box, got {}", body.kind_name())));
                }
                if *order == 0 {
                    return Err(mismatch("order must be positive".into()));
                }
            }
            Backend::GridQuadrature { resolution } => {
                if body.dim() > MAX_GRID_DIM {
                    return Err(mismatch(format!(
                        "dimension {} exceeds the grid cap {MAX_GRID_DIM}",
                        body.dim()
                    )));
                }
                if *resolution < 2 {
                    return Err(mismatch("resolution must be at least 2".into()));
                }
            }
            Backend::MonteCarlo { samples, thinning, .. } => {
                if *samples < 2 * crate::sampling::BATCHES {
                    return Err(mismatch(format!(
                        "need at least {} samples",
                        2 * crate::sampling::BATCHES
                    )));
                }
                if *thinning == Some(0) {
                    return Err(mismatch("thinning must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// The body at the bottom of a chain of affine images.
pub(crate) fn base_body(body: &ConvexBody) -> &ConvexBody {
    match body {
        ConvexBody::AffineImage(a) => base_body(a.inner()),
        other => other,
    }
}

/// `f(θ)`, mean, covariance and optional third moment of `p_θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    /// `f(θ)` in nats; NaN from Monte Carlo on bodies without a closed-form volume.
    pub f_value: f64,
    /// `x(θ) = ∇f(θ)`.
    pub mean: DVector<f64>,
    /// `Σ(θ) = ∇²f(θ)`.
    pub covariance: DMatrix<f64>,
    /// `E⟨X - x(θ), h⟩³ = ∇³f(θ)[h, h, h]` when `h` was supplied.
    pub third_directional: Option<f64>,
    pub backend: Backend,
    /// Absolute error estimate per entry; zero for the closed form.
    pub error_estimate: f64,
}

/// What a backend produced before packaging.
#[derive(Debug, Clone)]
pub(crate) struct Raw {
    pub f: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub third: Option<f64>,
}

impl Raw {
    fn max_abs_diff(&self, other: &Raw) -> f64 {
        let mut d = (self.f - other.f).abs();
        d = d.max((&self.mean - &other.mean).amax());
        d = d.max((&self.cov - &other.cov).amax());
        if let (Some(a), Some(b)) = (self.third, other.third) {
            d = d.max((a - b).abs());
        }
        d
    }

    /// Cancels the `h²` error term of a rule whose step is `1/√q2` times the
    /// step of `coarse`.
    fn richardson(&self, coarse: &Raw, q2: f64) -> Raw {
        let mix = |a: f64, b: f64| (q2 * a - b) / (q2 - 1.0);
        Raw {
            f: mix(self.f, coarse.f),
            mean: self.mean.zip_map(&coarse.mean, mix),
            cov: self.cov.zip_map(&coarse.cov, mix),
            third: match (self.third, coarse.third) {
                (Some(a), Some(b)) => Some(mix(a, b)),
                _ => None,
            },
        }
    }
}

/// Bodies whose moments are computed exactly: boxes per coordinate, simplices
/// and H-polytopes by divided differences over a triangulation.
fn has_closed_form(body: &ConvexBody) -> bool {
    matches!(base_body(body), ConvexBody::AxisBox(_) | ConvexBody::StandardSimplex(_) | ConvexBody::HPolytope(_))
}

fn check_theta(body: &ConvexBody, theta: &DVector<f64>, h: Option<&DVector<f64>>) -> Result<()> {
    body.check_dim(theta)?;
    if let Some(h) = h {
        body.check_dim(h)?;
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("theta has non-finite entries".into()));
    }
    Ok(())
}

/// `f(θ) = log ∫_K e^{⟨θ,x⟩} dx`.
pub fn log_partition(body: &ConvexBody, theta: &DVector<f64>, backend: &Backend) -> Result<f64> {
    check_theta(body, theta, None)?;
    backend.check_applicable(body)?;
    if let Backend::MonteCarlo { .. } = backend {
        return monte_carlo::log_partition(body, theta, backend).map(|(f, _)| f);
    }
    Ok(evaluate(body, theta, None, backend, false)?.0.f)
}

/// Moments of `p_θ` with an error estimate.
pub fn moments(
    body: &ConvexBody,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    backend: &Backend,
) -> Result<MomentReport> {
    moments_with(body, theta, h, backend, true)
}

/// As [`moments`]; `with_error = false` skips work spent only on the error
/// estimate (reported as NaN) for use inside solver loops.
pub(crate) fn moments_with(
    body: &ConvexBody,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    backend: &Backend,
    with_error: bool,
) -> Result<MomentReport> {
    check_theta(body, theta, h)?;
    backend.check_applicable(body)?;
    let (raw, err) = evaluate(body, theta, h, backend, with_error)?;
    let f_ok = raw.f.is_finite() || (raw.f.is_nan() && !backend.is_deterministic());
    if raw.cov.iter().any(|v| !v.is_finite()) || !f_ok {
        return Err(Error::Numerical(format!(
            "{} produced non-finite moments at |θ| = {:.3e}",
            backend.name(),
            theta.norm()
        )));
    }
    Ok(MomentReport {
        f_value: raw.f,
        mean: raw.mean,
        covariance: raw.cov,
        third_directional: raw.third,
        backend: backend.clone(),
        error_estimate: if with_error { err } else { f64::NAN },
    })
}

/// Panels used when a ball is reduced to its one-dimensional radial law.
const BALL_PANELS: usize = 8;

fn evaluate(
    body: &ConvexBody,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    backend: &Backend,
    with_error: bool,
) -> Result<(Raw, f64)> {
    if let ConvexBody::AffineImage(img) = body {
        let mt = img.matrix().transpose();
        let inner_theta = &mt * theta;
        let inner_h = h.map(|h| &mt * h);
        let (raw, err) = evaluate(img.inner(), &inner_theta, inner_h.as_ref(), backend, with_error)?;
        let m = img.matrix();
        let scale = m.abs().row_sum().max().max(1.0);
        let out = Raw {
            f: raw.f + img.log_abs_det() + theta.dot(img.shift()),
            mean: img.push_forward(&raw.mean),
            cov: m * &raw.cov * m.transpose(),
            third: raw.third,
        };
        return Ok((out, err * scale * scale));
    }
    match backend {
        Backend::ClosedForm => match body {
            ConvexBody::AxisBox(b) => Ok((closed_form::box_moments(b.lower(), b.upper(), theta, h), 0.0)),
            ConvexBody::StandardSimplex(sx) => {
                let n = sx.dim();
                let vertices: Vec<DVector<f64>> = std::iter::once(DVector::zeros(n))
                    .chain((0..n).map(|i| {
                        let mut e = DVector::zeros(n);
                        e[i] = 1.0;
                        e
                    }))
                    .collect();
                let all: Vec<usize> = (0..=n).collect();
                Ok((simplicial::moments(&vertices, &[all], theta, h), 0.0))
            }
            ConvexBody::HPolytope(p) => Ok((simplicial::moments(p.vertices(), p.triangulation(), theta, h), 0.0)),
            _ => unreachable!("applicability checked"),
        },
        Backend::TensorQuadrature { order } => {
            let ConvexBody::AxisBox(b) = body else {
                unreachable!("applicability checked")
            };
            let raw = tensor::box_moments(b.lower(), b.upper(), theta, h, *order);
            let err = if with_error {
                raw.max_abs_diff(&tensor::box_moments(b.lower(), b.upper(), theta, h, 2 * order))
            } else {
                f64::NAN
            };
            Ok((raw, err))
        }
        Backend::GridQuadrature { resolution } => {
            if let ConvexBody::Ball(b) = body {
                let raw = ball::moments(b, theta, h, BALL_PANELS);
                let err = if with_error {
                    raw.max_abs_diff(&ball::moments(b, theta, h, 2 * BALL_PANELS))
                } else {
                    f64::NAN
                };
                return Ok((raw, err));
            }
            let fine = grid::moments(body, theta, h, *resolution)?;
            if body.dim() == 1 {
                return Ok((fine, 0.0));
            }
            let coarse_res = (resolution / 2).max(1);
            let coarse = grid::moments(body, theta, h, coarse_res)?;
            let q2 = (*resolution as f64 / coarse_res as f64).powi(2);
            let err = fine.max_abs_diff(&coarse) / (q2 - 1.0);
            Ok((fine.richardson(&coarse, q2), err))
        }
        Backend::MonteCarlo { .. } => monte_carlo::moments(body, theta, h, backend),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn box_at_zero_tilt() {
        for n in 1..=4 {
            let body = ConvexBody::cube(n);
            let f = log_partition(&body, &DVector::zeros(n), &Backend::ClosedForm).unwrap();
            assert!((f - n as f64 * 2f64.ln()).abs() < 1e-14);
            let r = moments(&body, &DVector::zeros(n), Some(&unit(n, 0)), &Backend::ClosedForm).unwrap();
            assert!(r.mean.amax() < 1e-16);
            assert!((&r.covariance - DMatrix::identity(n, n) / 3.0).amax() < 1e-16);
            assert_eq!(r.third_directional, Some(0.0));
        }
    }

    fn unit(n: usize, i: usize) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        e
    }

    #[test]
    fn box_tilt_two_is_log_sinh_two() {
        let f = log_partition(&ConvexBody::cube(1), &v(&[2.0]), &Backend::ClosedForm).unwrap();
        assert!((f - 2f64.sinh().ln()).abs() < 1e-14);
    }

    #[test]
    fn simplex_at_zero_tilt() {
        let s = ConvexBody::simplex(2).unwrap();
        let r = moments(&s, &v(&[0.0, 0.0]), None, &Backend::grid(200)).unwrap();
        assert!((r.f_value - 0.5f64.ln()).abs() < 1e-12, "{}", r.f_value);
        assert!((&r.mean - v(&[1.0 / 3.0, 1.0 / 3.0])).amax() < 1e-5);
    }

    #[test]
    fn mismatched_backend() {
        let disk = ConvexBody::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let err = log_partition(&disk, &v(&[0.0, 0.0]), &Backend::ClosedForm).unwrap_err();
        assert!(matches!(err, Error::BackendMismatch { .. }));
        let big = ConvexBody::simplex(5).unwrap();
        assert!(log_partition(&big, &DVector::zeros(5), &Backend::grid(10)).is_err());
    }

    #[test]
    fn closed_form_and_tensor_agree() {
        let body = ConvexBody::axis_box(v(&[-1.0, 0.0, 2.0]), v(&[0.5, 3.0, 2.1])).unwrap();
        let theta = v(&[3.0, -0.7, 40.0]);
        let h = v(&[0.3, -1.0, 2.0]);
        let a = moments(&body, &theta, Some(&h), &Backend::ClosedForm).unwrap();
        let b = moments(&body, &theta, Some(&h), &Backend::tensor()).unwrap();
        assert!((a.f_value - b.f_value).abs() < 1e-10);
        assert!((&a.mean - &b.mean).amax() < 1e-10);
        assert!((&a.covariance - &b.covariance).amax() < 1e-10);
        assert!((a.third_directional.unwrap() - b.third_directional.unwrap()).abs() < 1e-10);
        assert!(b.error_estimate < 1e-10);
    }

    #[test]
    fn affine_image_of_box_matches_direct_box() {
        // diag(2, 3) [-1,1]^2 + (1, 0) = [-1, 3] x [-3, 3]
        let img = ConvexBody::affine_image(
            ConvexBody::cube(2),
            DMatrix::from_diagonal(&v(&[2.0, 3.0])),
            v(&[1.0, 0.0]),
        )
        .unwrap();
        let direct = ConvexBody::axis_box(v(&[-1.0, -3.0]), v(&[3.0, 3.0])).unwrap();
        let theta = v(&[0.4, -1.3]);
        let h = v(&[1.0, 2.0]);
        let a = moments(&img, &theta, Some(&h), &Backend::ClosedForm).unwrap();
        let b = moments(&direct, &theta, Some(&h), &Backend::ClosedForm).unwrap();
        assert!((a.f_value - b.f_value).abs() < 1e-13);
        assert!((&a.mean - &b.mean).amax() < 1e-13);
        assert!((&a.covariance - &b.covariance).amax() < 1e-13);
        assert!((a.third_directional.unwrap() - b.third_directional.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn backend_json() {
        let b: Backend = serde_json::from_str(r#"{"kind": "grid_quadrature"}"#).unwrap();
        assert_eq!(b, Backend::grid(DEFAULT_GRID_RESOLUTION));
        let b: Backend = serde_json::from_str(r#"{"kind": "monte_carlo", "samples": 500, "seed": 4}"#).unwrap();
        assert!(matches!(b, Backend::MonteCarlo { samples: 500, seed: 4, .. }));
    }

    #[test]
    fn square_polytope_matches_box() {
        let square = ConvexBody::h_polytope(
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]),
            v(&[1.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        let cube = ConvexBody::cube(2);
        let h = v(&[0.6, -0.8]);
        for theta in [v(&[0.0, 0.0]), v(&[0.7, -1.9]), v(&[40.0, 3.0]), v(&[-2e4, 1e3])] {
            let a = moments(&square, &theta, Some(&h), &Backend::ClosedForm).unwrap();
            let b = moments(&cube, &theta, Some(&h), &Backend::ClosedForm).unwrap();
            let scale = b.covariance.amax();
            assert!((a.f_value - b.f_value).abs() < 1e-12 * b.f_value.abs().max(1.0), "{theta}");
            assert!((&a.mean - &b.mean).amax() < 1e-12, "{theta}");
            assert!((&a.covariance - &b.covariance).amax() < 1e-9 * scale, "{theta}");
            let t = b.third_directional.unwrap();
            assert!((a.third_directional.unwrap() - t).abs() < 1e-8 * scale.powf(1.5), "{theta}");
        }
    }

    #[test]
    fn simplex_closed_form_matches_grid() {
        let s = ConvexBody::simplex(3).unwrap();
        let theta = v(&[1.0, -2.0, 0.5]);
        let h = v(&[0.0, 0.6, 0.8]);
        let a = moments(&s, &theta, Some(&h), &Backend::ClosedForm).unwrap();
        let b = moments(&s, &theta, Some(&h), &Backend::grid(100)).unwrap();
        assert!((a.f_value - b.f_value).abs() < 1e-6);
        assert!((&a.mean - &b.mean).amax() < 1e-6);
        assert!((&a.covariance - &b.covariance).amax() < 1e-6);
        assert!((a.third_directional.unwrap() - b.third_directional.unwrap()).abs() < 1e-6);
    }
}
