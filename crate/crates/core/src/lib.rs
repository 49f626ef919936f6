//! The entropic barrier of a convex body `K ⊂ ℝⁿ`.
//!
//! The log-partition function `f(θ) = log ∫_K e^{⟨θ,x⟩} dx` generates the
//! exponential family `p_θ ∝ e^{⟨θ,x⟩} 1_K`. Its Fenchel dual `f*` is a
//! self-concordant barrier on `K` whose gradient is the inverse of the mean map
//! `θ ↦ E_{p_θ} X` and whose Hessian is the inverse covariance of `p_θ`.
//!
//! Modules:
//! - [`geometry`]: convex bodies (boxes, simplices, H-polytopes, balls, affine images).
//! - [`logpartition`]: `f`, the mean, covariance and third moments under several backends.
//! - [`dualmap`]: the inverse mean map `θ(x)` and barrier evaluations.
//! - [`scverify`]: numerical checks of self-concordance and the supporting inequalities.
//! - [`ipm`]: short-step path following for linear objectives over `K`.
//! - [`sampling`]: hit-and-run for `p_θ`.
//! - [`bandit`]: mirror descent with the entropic barrier for bandit linear optimization.

pub mod bandit;
pub mod dualmap;
pub mod error;
pub mod geometry;
pub mod ipm;
pub mod logpartition;
pub mod quadrature;
pub mod sampling;
pub mod scverify;
pub mod special;

mod linalg;

pub use error::{Error, Result};
pub use geometry::ConvexBody;
pub use logpartition::{Backend, MomentReport};
