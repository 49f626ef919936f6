//! Convex bodies and the geometric queries the rest of the crate relies on:
//! membership, chords, bounding boxes, support values and closed-form volumes.
//!
//! Bodies are validated on construction and immutable afterwards.

mod polytope;
mod spec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
pub use polytope::MAX_ENUMERATION;
pub(crate) use polytope::Polytope;
pub use spec::BodySpec;

/// Default membership slack, relative to the bounding-box diameter.
pub const DEFAULT_RELATIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "BodySpec", into = "BodySpec")]
pub enum ConvexBody {
    AxisBox(AxisBox),
    StandardSimplex(StandardSimplex),
    HPolytope(HPolytope),
    Ball(Ball),
    AffineImage(AffineImage),
}

/// `∏ [lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

/// `{x >= 0, Σ x_i <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardSimplex {
    dim: usize,
}

/// `{x : A x <= b}`, bounded with nonempty interior.
#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    poly: Polytope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: DVector<f64>,
    radius: f64,
}

/// `M K' + s` for a nonsingular square `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineImage {
    inner: Box<ConvexBody>,
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
    inverse: DMatrix<f64>,
    log_abs_det: f64,
    min_singular: f64,
}

impl AxisBox {
    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }
    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }
}

impl StandardSimplex {
    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl HPolytope {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.poly.a
    }
    pub fn b(&self) -> &DVector<f64> {
        &self.poly.b
    }
    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.poly.vertices
    }
    /// Vertex-index simplices triangulating the polytope.
    pub fn triangulation(&self) -> &[Vec<usize>] {
        self.poly.simplices()
    }
}

impl Ball {
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl AffineImage {
    pub fn inner(&self) -> &ConvexBody {
        &self.inner
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }
    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }
    /// `M^{-1} (y - s)`.
    pub fn pull_back(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.inverse * (y - &self.shift)
    }
    /// `M x + s`.
    pub fn push_forward(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.shift
    }
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidBody(format!("{what} has non-finite entries")))
    }
}

impl ConvexBody {
    pub fn axis_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.is_empty() {
            return Err(Error::InvalidBody("box dimension must be positive".into()));
        }
        check_finite(&lower, "box lower bound")?;
        check_finite(&upper, "box upper bound")?;
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] >= upper[i]) {
            return Err(Error::InvalidBody(format!(
                "box side {i} is empty: [{}, {}]",
                lower[i], upper[i]
            )));
        }
        Ok(ConvexBody::AxisBox(AxisBox { lower, upper }))
    }

    /// `[-1, 1]^n`.
    pub fn cube(n: usize) -> Self {
        Self::axis_box(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0))
            .expect("cube dimension must be positive")
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidBody("simplex dimension must be positive".into()));
        }
        Ok(ConvexBody::StandardSimplex(StandardSimplex { dim }))
    }

    pub fn h_polytope(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Ok(ConvexBody::HPolytope(HPolytope { poly: Polytope::new(a, b)? }))
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::InvalidBody("ball dimension must be positive".into()));
        }
        check_finite(&center, "ball center")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidBody(format!("ball radius must be positive, got {radius}")));
        }
        Ok(ConvexBody::Ball(Ball { center, radius }))
    }

    pub fn affine_image(inner: ConvexBody, matrix: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = inner.dim();
        if matrix.shape() != (n, n) {
            return Err(Error::InvalidBody(format!(
                "affine matrix must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if shift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shift.len() });
        }
        check_finite(&shift, "affine shift")?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBody("affine matrix has non-finite entries".into()));
        }
        let sv = matrix.clone().svd(false, false).singular_values;
        let (smin, smax) = (sv.min(), sv.max());
        if smin <= 1e-14 * smax || smin == 0.0 {
            return Err(Error::InvalidBody("affine matrix is singular".into()));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidBody("affine matrix is singular".into()))?;
        let log_abs_det = sv.iter().map(|s| s.ln()).sum();
        Ok(ConvexBody::AffineImage(AffineImage {
            inner: Box::new(inner),
            matrix,
            shift,
            inverse,
            log_abs_det,
            min_singular: smin,
        }))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::AxisBox(b) => b.lower.len(),
            ConvexBody::StandardSimplex(s) => s.dim,
            ConvexBody::HPolytope(p) => p.poly.dim(),
            ConvexBody::Ball(b) => b.center.len(),
            ConvexBody::AffineImage(a) => a.inner.dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexBody::AxisBox(_) => "axis_box",
            ConvexBody::StandardSimplex(_) => "simplex",
            ConvexBody::HPolytope(_) => "h_polytope",
            ConvexBody::Ball(_) => "ball",
            ConvexBody::AffineImage(_) => "affine_image",
        }
    }

    pub(crate) fn check_dim(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() })
        }
    }

    /// Membership in the closed body up to an additive constraint slack.
    pub fn contains(&self, x: &DVector<f64>, slack: f64) -> Result<bool> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x, slack))
    }

    /// [`contains`](Self::contains) with the default slack (`1e-9` times the diameter).
    pub fn contains_default(&self, x: &DVector<f64>) -> Result<bool> {
        self.contains(x, DEFAULT_RELATIVE_SLACK * self.diameter())
    }

    pub(crate) fn contains_unchecked(&self, x: &DVector<f64>, slack: f64) -> bool {
        match self {
            ConvexBody::AxisBox(b) => {
                (0..x.len()).all(|i| x[i] >= b.lower[i] - slack && x[i] <= b.upper[i] + slack)
            }
            ConvexBody::StandardSimplex(_) => {
                x.iter().all(|&v| v >= -slack) && x.sum() <= 1.0 + slack
            }
            ConvexBody::HPolytope(p) => p.poly.max_violation(x) <= slack,
            ConvexBody::Ball(b) => (x - &b.center).norm() <= b.radius + slack,
            ConvexBody::AffineImage(a) => a.inner.contains_unchecked(&a.pull_back(x), slack),
        }
    }

    /// Lower bound on the Euclidean distance from `x` to the boundary; exact
    /// except for affine images. Negative outside the body.
    pub fn interior_margin(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.margin_unchecked(x))
    }

    pub(crate) fn margin_unchecked(&self, x: &DVector<f64>) -> f64 {
        match self {
            ConvexBody::AxisBox(b) => (0..x.len())
                .map(|i| (x[i] - b.lower[i]).min(b.upper[i] - x[i]))
                .fold(f64::INFINITY, f64::min),
            ConvexBody::StandardSimplex(s) => {
                let sum_slack = (1.0 - x.sum()) / (s.dim as f64).sqrt();
                x.iter().copied().fold(sum_slack, f64::min)
            }
            ConvexBody::HPolytope(p) => p.poly.margin(x),
            ConvexBody::Ball(b) => b.radius - (x - &b.center).norm(),
            ConvexBody::AffineImage(a) => {
                let m = a.inner.margin_unchecked(&a.pull_back(x));
                if m > 0.0 {
                    m * a.min_singular
                } else {
                    m
                }
            }
        }
    }

    /// Intersection of the line `x + t d` with the body as a parameter interval,
    /// or `None` when they do not meet. `x` need not be inside.
    pub fn line_intersection(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<(f64, f64)> {
        match self {
            ConvexBody::AxisBox(b) => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for i in 0..x.len() {
                    if d[i] == 0.0 {
                        if x[i] < b.lower[i] || x[i] > b.upper[i] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (b.lower[i] - x[i]) / d[i];
                    let t2 = (b.upper[i] - x[i]) / d[i];
                    lo = lo.max(t1.min(t2));
                    hi = hi.min(t1.max(t2));
                }
                (lo <= hi).then_some((lo, hi))
            }
            ConvexBody::StandardSimplex(_) => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                let mut update = |slack: f64, rate: f64| -> bool {
                    // constraint: rate * t <= slack
                    if rate > 0.0 {
                        hi = hi.min(slack / rate);
                    } else if rate < 0.0 {
                        lo = lo.max(slack / rate);
                    } else if slack < 0.0 {
                        return false;
                    }
                    true
                };
                for i in 0..x.len() {
                    if !update(x[i], -d[i]) {
                        return None;
                    }
                }
                if !update(1.0 - x.sum(), d.sum()) {
                    return None;
                }
                (lo <= hi).then_some((lo, hi))
            }
            ConvexBody::HPolytope(p) => p.poly.line_intersection(x, d),
            ConvexBody::Ball(b) => {
                let dd = d.norm_squared();
                if dd == 0.0 {
                    return ((x - &b.center).norm() <= b.radius).then_some((f64::NEG_INFINITY, f64::INFINITY));
                }
                let w = x - &b.center;
                let half_b = w.dot(d) / dd;
                let c = (w.norm_squared() - b.radius * b.radius) / dd;
                let disc = half_b * half_b - c;
                if disc < 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                Some((-half_b - root, -half_b + root))
            }
            ConvexBody::AffineImage(a) => {
                let xi = a.pull_back(x);
                let di = &a.inverse * d;
                a.inner.line_intersection(&xi, &di)
            }
        }
    }

    /// Chord through a strictly interior point: `{x + t d : t ∈ [t_min, t_max]} = K ∩ line`.
    pub fn chord(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        self.check_dim(d)?;
        if d.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let margin = self.margin_unchecked(x);
        if margin <= 0.0 {
            return Err(Error::NotInterior { distance: margin });
        }
        match self.line_intersection(x, d) {
            Some((lo, hi)) if lo < 0.0 && hi > 0.0 => Ok((lo, hi)),
            _ => Err(Error::NotInterior { distance: margin }),
        }
    }

    /// Coordinate-wise box containing the body. Exact for boxes, balls,
    /// simplices and H-polytopes; affine images map the inner box.
    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        match self {
            ConvexBody::AxisBox(b) => (b.lower.clone(), b.upper.clone()),
            ConvexBody::StandardSimplex(s) => {
                (DVector::zeros(s.dim), DVector::from_element(s.dim, 1.0))
            }
            ConvexBody::HPolytope(p) => p.poly.vertex_bbox(),
            ConvexBody::Ball(b) => (b.center.add_scalar(-b.radius), b.center.add_scalar(b.radius)),
            ConvexBody::AffineImage(a) => {
                let (lo, hi) = a.inner.bounding_box();
                map_box(&a.matrix, &a.shift, &lo, &hi)
            }
        }
    }

    /// Length of the bounding-box diagonal.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Exact volume (by triangulation for H-polytopes).
    pub fn volume(&self) -> Option<f64> {
        self.log_volume().map(f64::exp)
    }

    pub fn log_volume(&self) -> Option<f64> {
        match self {
            ConvexBody::AxisBox(b) => Some((&b.upper - &b.lower).iter().map(|w| w.ln()).sum()),
            ConvexBody::StandardSimplex(s) => Some(-ln_factorial(s.dim)),
            ConvexBody::HPolytope(p) => Some(p.poly.volume_and_centroid().0.ln()),
            ConvexBody::Ball(b) => {
                let n = b.center.len() as f64;
                Some(0.5 * n * std::f64::consts::PI.ln() - ln_gamma_half(b.center.len() + 2) + n * b.radius.ln())
            }
            ConvexBody::AffineImage(a) => a.inner.log_volume().map(|v| v + a.log_abs_det),
        }
    }

    /// Exact centroid (by triangulation for H-polytopes).
    pub fn centroid(&self) -> Option<DVector<f64>> {
        match self {
            ConvexBody::AxisBox(b) => Some((&b.lower + &b.upper) * 0.5),
            ConvexBody::StandardSimplex(s) => {
                Some(DVector::from_element(s.dim, 1.0 / (s.dim as f64 + 1.0)))
            }
            ConvexBody::HPolytope(p) => Some(p.poly.volume_and_centroid().1),
            ConvexBody::Ball(b) => Some(b.center.clone()),
            ConvexBody::AffineImage(a) => a.inner.centroid().map(|c| a.push_forward(&c)),
        }
    }

    /// A strictly interior point (the centroid when known in closed form).
    pub fn interior_point(&self) -> DVector<f64> {
        match self {
            ConvexBody::HPolytope(p) => p.poly.interior.clone(),
            ConvexBody::AffineImage(a) => a.push_forward(&a.inner.interior_point()),
            _ => self.centroid().expect("closed-form centroid"),
        }
    }

    /// `max_{x ∈ K} ⟨θ, x⟩`.
    pub fn support(&self, theta: &DVector<f64>) -> f64 {
        match self {
            ConvexBody::AxisBox(b) => (0..theta.len())
                .map(|i| (theta[i] * b.lower[i]).max(theta[i] * b.upper[i]))
                .sum(),
            ConvexBody::StandardSimplex(_) => theta.max().max(0.0),
            ConvexBody::HPolytope(p) => p.poly.support(theta),
            ConvexBody::Ball(b) => theta.dot(&b.center) + b.radius * theta.norm(),
            ConvexBody::AffineImage(a) => {
                a.inner.support(&(a.matrix.transpose() * theta)) + theta.dot(&a.shift)
            }
        }
    }

    /// Bounding box of `K ∩ {⟨θ, x⟩ >= level}`; `None` when empty.
    pub(crate) fn cap_bounding_box(
        &self,
        theta: &DVector<f64>,
        level: f64,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            ConvexBody::HPolytope(p) => p.poly.cap_bbox(theta, level),
            ConvexBody::AxisBox(_) | ConvexBody::StandardSimplex(_) => {
                let (a, b, vertices) = self.polytope_data()?;
                polytope::cap_bbox(&a, &b, &vertices, theta, level)
            }
            ConvexBody::Ball(ball) => ball_cap_bbox(ball, theta, level),
            ConvexBody::AffineImage(a) => {
                let inner_theta = a.matrix.transpose() * theta;
                let (lo, hi) = a
                    .inner
                    .cap_bounding_box(&inner_theta, level - theta.dot(&a.shift))?;
                Some(map_box(&a.matrix, &a.shift, &lo, &hi))
            }
        }
    }

    /// Constraint form and vertex list for boxes and simplices (small dimensions only).
    fn polytope_data(&self) -> Option<(DMatrix<f64>, DVector<f64>, Vec<DVector<f64>>)> {
        match self {
            ConvexBody::AxisBox(bx) => {
                let n = bx.lower.len();
                if n > 16 {
                    return None;
                }
                let mut a = DMatrix::zeros(2 * n, n);
                let mut b = DVector::zeros(2 * n);
                for i in 0..n {
                    a[(i, i)] = 1.0;
                    b[i] = bx.upper[i];
                    a[(n + i, i)] = -1.0;
                    b[n + i] = -bx.lower[i];
                }
                let vertices = (0..1usize << n)
                    .map(|mask| {
                        DVector::from_fn(n, |i, _| {
                            if mask >> i & 1 == 1 {
                                bx.upper[i]
                            } else {
                                bx.lower[i]
                            }
                        })
                    })
                    .collect();
                Some((a, b, vertices))
            }
            ConvexBody::StandardSimplex(s) => {
                let n = s.dim;
                let mut a = DMatrix::zeros(n + 1, n);
                let mut b = DVector::zeros(n + 1);
                for i in 0..n {
                    a[(i, i)] = -1.0;
                    a[(n, i)] = 1.0;
                }
                b[n] = 1.0;
                let mut vertices = vec![DVector::zeros(n)];
                for i in 0..n {
                    let mut e = DVector::zeros(n);
                    e[i] = 1.0;
                    vertices.push(e);
                }
                Some((a, b, vertices))
            }
            _ => None,
        }
    }

    /// Vertices of polyhedral bodies (boxes up to dimension 16).
    pub fn vertices(&self) -> Option<Vec<DVector<f64>>> {
        match self {
            ConvexBody::HPolytope(p) => Some(p.poly.vertices.clone()),
            ConvexBody::AxisBox(_) | ConvexBody::StandardSimplex(_) => {
                self.polytope_data().map(|(_, _, v)| v)
            }
            ConvexBody::Ball(_) => None,
            ConvexBody::AffineImage(a) => a
                .inner
                .vertices()
                .map(|vs| vs.iter().map(|v| a.push_forward(v)).collect()),
        }
    }
}

fn map_box(
    m: &DMatrix<f64>,
    s: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let center = m * ((lo + hi) * 0.5) + s;
    let half = m.abs() * ((hi - lo) * 0.5);
    (&center - &half, &center + &half)
}

fn ball_cap_bbox(ball: &Ball, theta: &DVector<f64>, level: f64) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = ball.center.len();
    let norm = theta.norm();
    let r = ball.radius;
    let full = (ball.center.add_scalar(-r), ball.center.add_scalar(r));
    if norm == 0.0 {
        return (level <= 0.0).then_some(full);
    }
    let u = theta / norm;
    // cap = {⟨u, x - c⟩ >= r - depth}
    let depth = r - (level - theta.dot(&ball.center)) / norm;
    if depth <= 0.0 {
        return None;
    }
    if depth >= 2.0 * r {
        return Some(full);
    }
    let offset = r - depth;
    let rho = (r * r - offset * offset).max(0.0).sqrt();
    let mut lo = DVector::zeros(n);
    let mut hi = DVector::zeros(n);
    for j in 0..n {
        let rim = offset * u[j];
        let spread = rho * (1.0 - u[j] * u[j]).max(0.0).sqrt();
        // extreme points of the ball along ±e_j, if inside the cap
        hi[j] = if u[j] * r >= offset { r } else { rim + spread };
        lo[j] = if -u[j] * r >= offset { -r } else { rim - spread };
        hi[j] += ball.center[j];
        lo[j] += ball.center[j];
    }
    Some((lo, hi))
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln Γ(k / 2)` for a positive integer `k`.
pub(crate) fn ln_gamma_half(k: usize) -> f64 {
    if k % 2 == 0 {
        ln_factorial(k / 2 - 1)
    } else {
        // Γ(m + 1/2) = (2m)! √π / (4^m m!)
        let m = (k - 1) / 2;
        ln_factorial(2 * m) + 0.5 * std::f64::consts::PI.ln()
            - (m as f64) * 4f64.ln()
            - ln_factorial(m)
    }
}
