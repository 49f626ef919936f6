//! Numerical checks of the inequalities behind self-concordance of `f*`.
//!
//! - [`sc_ratio`]: `E⟨X-x(θ),h⟩³ / (E⟨X-x(θ),h⟩²)^{3/2}`, bounded by 2.
//! - [`nu_scan`]: `⟨Σ(θ)θ, θ⟩` against `n (1 + ε)`.
//! - [`lemma2_extremal_scan`]: the log-affine extremal family of the sharp
//!   third-moment bound for centered log-concave variables.
//! - [`lemma4_check`]: the variance sandwich for one-dimensional log-concave densities.
//! - [`lemma5_check`]: `φ^{1/n}` concave iff `ζ'' <= -(ζ')²/n` for `ζ = log φ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::logpartition::{moments, Backend};
use crate::quadrature::composite;
use crate::sampling::{derive_seed, random_direction};
use crate::special::segment_moments;

/// Variances below this are reported as degenerate.
pub const MIN_VARIANCE: f64 = 1e-14;

/// Self-concordance parameter used for path following: `n + 1`.
pub fn nu_used(n: usize) -> f64 {
    n as f64 + 1.0
}

/// One evaluated (or skipped) point of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub input: Vec<f64>,
    pub value: Option<f64>,
    pub note: Option<String>,
}

/// Worst case of a scanned quantity against its bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub quantity: String,
    pub grid: String,
    pub worst_case_value: f64,
    pub worst_case_input: Vec<f64>,
    pub bound: f64,
    /// `bound - worst_case_value`; negative on a violation.
    pub margin: f64,
    pub seed: Option<u64>,
    pub records: Vec<ScanRecord>,
}

impl ScanReport {
    fn assemble(quantity: &str, grid: String, bound: f64, seed: Option<u64>, records: Vec<ScanRecord>) -> Self {
        let mut worst = f64::NEG_INFINITY;
        let mut input = Vec::new();
        for r in &records {
            if let Some(v) = r.value {
                if v > worst {
                    worst = v;
                    input = r.input.clone();
                }
            }
        }
        ScanReport {
            quantity: quantity.into(),
            grid,
            worst_case_value: worst,
            worst_case_input: input,
            bound,
            margin: bound - worst,
            seed,
            records,
        }
    }

    /// Points that could not be evaluated.
    pub fn skipped(&self) -> usize {
        self.records.iter().filter(|r| r.value.is_none()).count()
    }
}

/// Standardized third moment of `⟨X, h⟩` under `p_θ`.
pub fn sc_ratio(body: &ConvexBody, theta: &DVector<f64>, h: &DVector<f64>, backend: &Backend) -> Result<f64> {
    body.check_dim(h)?;
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let report = moments(body, theta, Some(h), backend)?;
    let var = h.dot(&(&report.covariance * h));
    if var < MIN_VARIANCE * h.norm_squared() {
        return Err(Error::DegenerateVariance(var));
    }
    let third = report.third_directional.expect("third moment requested");
    Ok(third / var.powf(1.5))
}

/// Random tilt with `log10 ‖θ‖` uniform on `[log10 lo, log10 hi]`.
pub fn random_theta<R: Rng + ?Sized>(n: usize, lo: f64, hi: f64, rng: &mut R) -> DVector<f64> {
    let r = 10f64.powf(rng.random_range(lo.log10()..=hi.log10()));
    random_direction(n, rng) * r
}

/// `|sc_ratio|` at `samples` random `(θ, h)` pairs; point `i` uses the stream
/// `derive_seed(seed, i)`, so results do not depend on the thread count.
pub fn sc_scan(
    body: &ConvexBody,
    samples: usize,
    max_theta: f64,
    seed: u64,
    backend: &Backend,
) -> ScanReport {
    let n = body.dim();
    let records: Vec<ScanRecord> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let theta = random_theta(n, 1e-2, max_theta, &mut rng);
            let h = random_direction(n, &mut rng);
            let input: Vec<f64> = theta.iter().chain(h.iter()).copied().collect();
            match sc_ratio(body, &theta, &h, backend) {
                Ok(v) => ScanRecord { input, value: Some(v.abs()), note: None },
                Err(e) => ScanRecord { input, value: None, note: Some(e.to_string()) },
            }
        })
        .collect();
    ScanReport::assemble(
        "abs_sc_ratio",
        format!("{samples} random (theta, h), |theta| log-uniform in [1e-2, {max_theta}], backend {}", backend.name()),
        2.0,
        Some(seed),
        records,
    )
}

/// `⟨Σ(θ)θ, θ⟩` over the supplied tilts against `n (1 + ε)`; failures are
/// recorded per point.
pub fn nu_scan(body: &ConvexBody, thetas: &[DVector<f64>], backend: &Backend, epsilon: f64) -> ScanReport {
    let n = body.dim();
    let records: Vec<ScanRecord> = thetas
        .par_iter()
        .map(|theta| {
            let input: Vec<f64> = theta.iter().copied().collect();
            match moments(body, theta, None, backend) {
                Ok(r) => ScanRecord { input, value: Some(theta.dot(&(&r.covariance * theta))), note: None },
                Err(e) => ScanRecord { input, value: None, note: Some(e.to_string()) },
            }
        })
        .collect();
    ScanReport::assemble(
        "sigma_theta_theta",
        format!("{} tilts, backend {}", thetas.len(), backend.name()),
        n as f64 * (1.0 + epsilon),
        None,
        records,
    )
}

/// `[-1,1]ⁿ` intersected with `2n` random halfspaces through points of
/// `[-1/2,1/2]ⁿ`, each keeping the origin at distance at least `0.1 / ‖a‖`.
pub fn random_h_polytope<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ConvexBody> {
    let m = 4 * n;
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    for i in 0..n {
        a[(i, i)] = 1.0;
        a[(n + i, i)] = -1.0;
        b[i] = 1.0;
        b[n + i] = 1.0;
    }
    for k in 2 * n..m {
        let normal = random_direction(n, rng);
        let p = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let offset = normal.dot(&p);
        let (normal, offset) = if offset < 0.0 { (-normal, -offset) } else { (normal, offset) };
        a.set_row(k, &normal.transpose());
        b[k] = offset.max(0.1);
    }
    ConvexBody::h_polytope(a, b)
}

/// The density `∝ e^{c x}` on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAffineSegment {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LogAffineSegment {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a < b) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("need a < b and finite c, got ({a}, {b}, {c})")));
        }
        Ok(LogAffineSegment { a, b, c })
    }

    /// Parameterization by `r = e^{c (b - a)}`.
    pub fn from_ratio(a: f64, b: f64, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("need r > 0, got {r}")));
        }
        Self::new(a, b, r.ln() / (b - a))
    }

    pub fn ratio(&self) -> f64 {
        (self.c * (self.b - self.a)).exp()
    }

    /// `log Z` with `Z = (e^{cb} - e^{ca}) / c`.
    pub fn log_z(&self) -> f64 {
        crate::special::segment_log_z(self.a, self.b, self.c)
    }

    /// `(E X, E X², E X³)`.
    pub fn raw_moments(&self) -> (f64, f64, f64) {
        let m = segment_moments(self.a, self.b, self.c);
        let e2 = m.var + m.mean * m.mean;
        let e3 = m.third + 3.0 * m.mean * m.var + m.mean.powi(3);
        (m.mean, e2, e3)
    }

    /// `G = E[X² - 1]`.
    pub fn g(&self) -> f64 {
        self.raw_moments().1 - 1.0
    }

    /// `H = E[X³ - 3X]`.
    pub fn h(&self) -> f64 {
        let (m1, _, m3) = self.raw_moments();
        m3 - 3.0 * m1
    }
}

/// `sup_{x ∈ [-1,1]} x³ - 3x` by a fine grid: `(argmax, max)`.
pub fn dirac_branch() -> (f64, f64) {
    (0..=20_000)
        .map(|k| {
            let x = -1.0 + k as f64 / 10_000.0;
            (x, x * x * x - 3.0 * x)
        })
        .fold((f64::NAN, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}

/// `|log r|` below which `b(a, r)` is found by bisection instead of the quadratic.
const QUADRATIC_MIN_LOG_R: f64 = 1e-3;

/// The endpoint `b > a` with `E[X²] = 1` for the law `∝ e^{cx}` on `[a, b]`
/// and `e^{c(b-a)} = r`; `None` when no such `b` exists.
pub fn lemma2_b(a: f64, r: f64) -> Option<f64> {
    if !(r > 0.0) || !(-1.0..=1.0).contains(&a) {
        return None;
    }
    let l = r.ln();
    if l.abs() >= QUADRATIC_MIN_LOG_R {
        let qa = r * (l * l - 2.0 * l + 2.0) - 2.0;
        let qb = 2.0 * a * (l * (r + 1.0) - 2.0 * (r - 1.0));
        let qc = -a * a * l * l - (r - 1.0) * l * l - 2.0 * a * a * l + 2.0 * a * a * (r - 1.0);
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 1e-12 * (qb * qb + (4.0 * qa * qc).abs()) && qa != 0.0 {
            let sign = if qb >= 0.0 { 1.0 } else { -1.0 };
            let q = -0.5 * (qb + sign * disc.sqrt());
            let roots = [q / qa, if q != 0.0 { qc / q } else { f64::NAN }];
            let best = roots
                .into_iter()
                .filter(|b| b.is_finite() && *b > a + 1e-12)
                .fold(f64::NAN, f64::max);
            if best.is_finite() {
                return Some(best);
            }
        }
    }
    lemma2_b_bisect(a, r)
}

/// Bisection on `G(a, b, c(a, b, r))`, increasing in `b` for `b >= 1`.
fn lemma2_b_bisect(a: f64, r: f64) -> Option<f64> {
    let l = r.ln();
    let g = |b: f64| LogAffineSegment { a, b, c: l / (b - a) }.g();
    let mut lo = 1f64.max(a + 1e-12);
    if g(lo) > 0.0 {
        return None;
    }
    let mut hi = lo + 1.0;
    while g(hi) <= 0.0 {
        hi = lo + 2.0 * (hi - lo);
        if hi > 1e8 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `H(a, r) = (r (b³ - 3b) - (a³ - 3a)) / (r - 1)` at `b = b(a, r)`; the
/// removable singularity at `r = 1` uses the moment form.
pub fn lemma2_h(a: f64, r: f64) -> Option<f64> {
    let b = lemma2_b(a, r)?;
    if r.ln().abs() < QUADRATIC_MIN_LOG_R {
        return Some(LogAffineSegment::from_ratio(a, b, r).ok()?.h());
    }
    Some((r * (b * b * b - 3.0 * b) - (a * a * a - 3.0 * a)) / (r - 1.0))
}

/// `H(a, r)` over a grid plus the Dirac branch, against the bound 2.
pub fn lemma2_extremal_scan(a_grid: &[f64], r_grid: &[f64]) -> Result<ScanReport> {
    if a_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be nonempty".into()));
    }
    let mut records = Vec::with_capacity(a_grid.len() * r_grid.len() + 1);
    for &a in a_grid {
        for &r in r_grid {
            let (value, note) = match lemma2_h(a, r) {
                Some(v) => (Some(v), None),
                None => (None, Some(format!("no b > a solves the constraint at a = {a}, r = {r}"))),
            };
            records.push(ScanRecord { input: vec![a, r], value, note });
        }
    }
    let (x, v) = dirac_branch();
    records.push(ScanRecord { input: vec![x], value: Some(v), note: Some("dirac branch".into()) });
    Ok(ScanReport::assemble(
        "lemma2_H",
        format!("{} a values x {} r values plus the Dirac branch", a_grid.len(), r_grid.len()),
        2.0,
        None,
        records,
    ))
}

/// Whether `H(a, r)` increases as `r` decreases along `r_grid` (any order).
pub fn lemma2_monotone_in_r(a: f64, r_grid: &[f64]) -> bool {
    let mut rs: Vec<f64> = r_grid.to_vec();
    rs.sort_by(f64::total_cmp);
    let hs: Vec<Option<f64>> = rs.iter().map(|&r| lemma2_h(a, r)).collect();
    hs.windows(2).all(|w| matches!(w, [Some(x), Some(y)] if x >= y))
}

/// One-dimensional log-concave densities for [`lemma4_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Density1d {
    Gaussian { mean: f64, sd: f64 },
    Laplace { location: f64, scale: f64 },
    /// `∝ e^{rate x}` on `[lower, upper]`.
    TiltedUniform { lower: f64, upper: f64, rate: f64 },
}

impl Density1d {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Density1d::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Density1d::Laplace { location, scale } => location.is_finite() && scale > 0.0 && scale.is_finite(),
            Density1d::TiltedUniform { lower, upper, rate } => lower < upper && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid density {self:?}")))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Density1d::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Density1d::Laplace { location, scale } => (-(x - location).abs() / scale).exp() / (2.0 * scale),
            Density1d::TiltedUniform { lower, upper, rate } => {
                if x < lower || x > upper {
                    0.0
                } else {
                    (rate * x - crate::special::segment_log_z(lower, upper, rate)).exp()
                }
            }
        }
    }

    /// Interval carrying all mass up to `e^{-700}`-size tails.
    fn effective_support(&self) -> (f64, f64) {
        match *self {
            Density1d::Gaussian { mean, sd } => (mean - 38.0 * sd, mean + 38.0 * sd),
            Density1d::Laplace { location, scale } => (location - 700.0 * scale, location + 700.0 * scale),
            Density1d::TiltedUniform { lower, upper, .. } => (lower, upper),
        }
    }

    /// Closed support.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Density1d::TiltedUniform { lower, upper, .. } => (lower, upper),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match *self {
            Density1d::Gaussian { mean, .. } => vec![mean],
            Density1d::Laplace { location, .. } => vec![location],
            Density1d::TiltedUniform { .. } => vec![],
        }
    }

    /// `∫_lo^hi w(x) λ(x) dx` by composite Gauss–Legendre split at the kinks.
    fn integrate(&self, lo: f64, hi: f64, w: impl Fn(f64) -> f64) -> f64 {
        let (slo, shi) = self.effective_support();
        let (lo, hi) = (lo.max(slo), hi.min(shi));
        if !(lo < hi) {
            return 0.0;
        }
        let mut cuts = vec![lo];
        cuts.extend(self.kinks().into_iter().filter(|k| *k > lo && *k < hi));
        cuts.push(hi);
        let mut total = 0.0;
        for piece in cuts.windows(2) {
            let (x, wt) = composite(piece[0], piece[1], 32, 64);
            total += x.iter().zip(&wt).map(|(x, wt)| wt * w(*x) * self.pdf(*x)).sum::<f64>();
        }
        total
    }
}

/// Both sides of the variance sandwich.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma4Report {
    pub epsilon: f64,
    pub c_epsilon: f64,
    /// `(1 - 2 c(ε) ε log²(1/ε)) Var X`.
    pub lhs: f64,
    /// `∫_{x1}^{x2} (x - x0)² λ`.
    pub mid: f64,
    /// `E(|X - x0|² | X ∈ [x1, x2])`.
    pub rhs: f64,
    pub pass: bool,
    /// Set when the hypotheses fail; the inequalities are then not evaluated.
    pub hypothesis_violation: Option<String>,
}

/// `c(ε) = (1 + 2/L)³ (1 + 2/L + 2/L²)` with `L = log(1/ε)`.
pub fn c_epsilon(epsilon: f64) -> f64 {
    let l = (1.0 / epsilon).ln();
    (1.0 + 2.0 / l).powi(3) * (1.0 + 2.0 / l + 2.0 / (l * l))
}

/// Checks the sandwich at `x1 < x0 < x2`; `x2 = None` or points outside the
/// support give a hypothesis-violation report.
pub fn lemma4_check(density: &Density1d, x0: f64, x1: f64, x2: Option<f64>) -> Result<Lemma4Report> {
    density.validate()?;
    let violation = |reason: String| Lemma4Report {
        epsilon: f64::NAN,
        c_epsilon: f64::NAN,
        lhs: f64::NAN,
        mid: f64::NAN,
        rhs: f64::NAN,
        pass: false,
        hypothesis_violation: Some(reason),
    };
    let (slo, shi) = density.support();
    let Some(x2) = x2 else {
        return Ok(violation("no x2 > x0 supplied".into()));
    };
    if !(x1 < x0 && x0 < x2) {
        return Err(Error::InvalidArgument(format!("need x1 < x0 < x2, got {x1}, {x0}, {x2}")));
    }
    if x1 < slo || x2 > shi {
        return Ok(violation(format!("[{x1}, {x2}] leaves the support [{slo}, {shi}]")));
    }
    let l0 = density.pdf(x0);
    let epsilon = density.pdf(x1).max(density.pdf(x2)) / l0;
    if !(epsilon < 1.0) || epsilon <= 0.0 {
        return Ok(violation(format!("epsilon = {epsilon} is not in (0, 1)")));
    }
    let c = c_epsilon(epsilon);
    let log_inv = (1.0 / epsilon).ln();
    let (lo, hi) = density.effective_support();
    let mean = density.integrate(lo, hi, |x| x);
    let var = density.integrate(lo, hi, |x| (x - mean) * (x - mean));
    let lhs = (1.0 - 2.0 * c * epsilon * log_inv * log_inv) * var;
    let mid = density.integrate(x1, x2, |x| (x - x0) * (x - x0));
    let mass = density.integrate(x1, x2, |_| 1.0);
    let rhs = mid / mass;
    Ok(Lemma4Report { epsilon, c_epsilon: c, lhs, mid, rhs, pass: lhs <= mid && mid <= rhs, hypothesis_violation: None })
}

/// Positive test profiles for [`lemma5_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `1 - x²`
    OneMinusSquare,
    /// `e^{x²}`
    ExpSquare,
    /// `(1 - x)^power`
    OneMinusPower { power: f64 },
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::OneMinusSquare => 1.0 - x * x,
            Profile::ExpSquare => (x * x).exp(),
            Profile::OneMinusPower { power } => (1.0 - x).powf(power),
        }
    }
}

/// Outcome of the pointwise equivalence test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma5Report {
    pub points: usize,
    /// Points where `(φ^{1/n})'' <= 0` within tolerance.
    pub concave_points: usize,
    /// Points where `ζ'' + (ζ')²/n <= 0` within tolerance.
    pub differential_points: usize,
    /// Points where exactly one side holds.
    pub disagreements: usize,
    pub worst_disagreement_at: Option<f64>,
    pub equivalent: bool,
}

pub const LEMMA5_TOLERANCE: f64 = 1e-6;

/// Central second and first differences, Richardson-extrapolated.
fn derivatives(f: &dyn Fn(f64) -> f64, x: f64, step: f64) -> (f64, f64) {
    let d1 = |s: f64| (f(x + s) - f(x - s)) / (2.0 * s);
    let d2 = |s: f64| (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s);
    ((4.0 * d1(step / 2.0) - d1(step)) / 3.0, (4.0 * d2(step / 2.0) - d2(step)) / 3.0)
}

/// Evaluates both sides of the `n`-concavity criterion on the grid
/// `a + k·spacing` inside `(a, b)`.
pub fn lemma5_check(phi: &dyn Fn(f64) -> f64, n: u32, a: f64, b: f64, spacing: f64) -> Result<Lemma5Report> {
    if n == 0 || !(a < b) || !(spacing > 0.0) || spacing >= b - a {
        return Err(Error::InvalidArgument("need n >= 1, a < b and 0 < spacing < b - a".into()));
    }
    let nf = n as f64;
    let zeta = |x: f64| phi(x).ln();
    let psi = |x: f64| phi(x).powf(1.0 / nf);
    let count = ((b - a) / spacing).ceil() as usize;
    let mut report = Lemma5Report {
        points: 0,
        concave_points: 0,
        differential_points: 0,
        disagreements: 0,
        worst_disagreement_at: None,
        equivalent: true,
    };
    let mut worst = 0.0;
    for k in 1..count {
        let x = a + k as f64 * spacing;
        if x >= b {
            break;
        }
        let dist = (x - a).min(b - x);
        let step = (0.01 * dist).min(1e-3);
        for y in [x - step, x, x + step] {
            let v = phi(y);
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("phi({y}) = {v} is not positive")));
            }
        }
        let (z1, z2) = derivatives(&zeta, x, step);
        let (_, p2) = derivatives(&psi, x, step);
        let scale = z2.abs() + z1 * z1 / nf;
        let differential = z2 + z1 * z1 / nf;
        // (φ^{1/n})'' / φ^{1/n} = (ζ'' + ζ'²/n) / n
        let concave = nf * p2 / psi(x);
        let tol = LEMMA5_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        let holds_a = concave <= tol;
        let holds_b = differential <= tol;
        report.points += 1;
        report.concave_points += usize::from(holds_a);
        report.differential_points += usize::from(holds_b);
        if holds_a != holds_b {
            report.disagreements += 1;
            let gap = (concave - differential).abs() / scale.max(f64::MIN_POSITIVE);
            if gap >= worst {
                worst = gap;
                report.worst_disagreement_at = Some(x);
            }
        }
    }
    report.equivalent = report.disagreements == 0;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn symmetric_ratio_vanishes() {
        let r = sc_ratio(&ConvexBody::cube(2), &v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &Backend::ClosedForm).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn tilted_interval_ratio_below_two() {
        let r = sc_ratio(&ConvexBody::cube(1), &v(&[5.0]), &v(&[1.0]), &Backend::ClosedForm).unwrap();
        assert!(r.abs() < 2.0);
        let far = sc_ratio(&ConvexBody::cube(1), &v(&[500.0]), &v(&[1.0]), &Backend::ClosedForm).unwrap();
        // the limit 2 is reached up to round-off
        assert!(far.abs() > r.abs() && far.abs() < 2.0 + 1e-12, "{far}");
    }

    #[test]
    fn degenerate_direction() {
        let err = sc_ratio(&ConvexBody::cube(1), &v(&[1.0]), &v(&[0.0]), &Backend::ClosedForm).unwrap_err();
        assert!(matches!(err, Error::ZeroDirection));
    }

    #[test]
    fn quadratic_root_satisfies_constraint() {
        for &a in &[-1.0, -0.5, 0.0, 0.7] {
            for &r in &[1e-6, 1e-2, 0.5, 0.9995, 1.0, 1.2, 30.0, 1e6] {
                let b = lemma2_b(a, r).unwrap();
                assert!(b > a);
                let g = LogAffineSegment::from_ratio(a, b, r).unwrap().g();
                assert!(g.abs() < 1e-8, "a={a} r={r} b={b} g={g}");
                let h = lemma2_h(a, r).unwrap();
                let direct = LogAffineSegment::from_ratio(a, b, r).unwrap().h();
                assert!((h - direct).abs() < 1e-7, "a={a} r={r}: {h} vs {direct}");
            }
        }
    }

    #[test]
    fn no_root_at_a_equal_one() {
        assert!(lemma2_b(1.0, 2.0).is_none());
    }

    #[test]
    fn dirac_branch_is_two_at_minus_one() {
        assert_eq!(dirac_branch(), (-1.0, 2.0));
    }

    #[test]
    fn limit_value() {
        assert!(lemma2_h(-1.0, 1e-6).unwrap() >= 1.99);
    }

    #[test]
    fn c_epsilon_limit() {
        assert!((c_epsilon(1e-300) - 1.0).abs() < 0.05);
    }

    #[test]
    fn tilted_uniform_without_x2_is_violation() {
        let d = Density1d::TiltedUniform { lower: -1.0, upper: 1.0, rate: 3.0 };
        let r = lemma4_check(&d, 1.0 - 1e-12, -1.0, None).unwrap();
        assert!(r.hypothesis_violation.is_some() && !r.pass);
        let r = lemma4_check(&d, 0.5, -1.0, Some(2.0)).unwrap();
        assert!(r.hypothesis_violation.is_some());
    }

    #[test]
    fn lemma5_examples() {
        let r = lemma5_check(&|x| Profile::OneMinusSquare.eval(x), 1, -1.0, 1.0, 1e-2).unwrap();
        assert!(r.equivalent && r.concave_points == r.points);
        let r = lemma5_check(&|x| Profile::ExpSquare.eval(x), 1, 0.0, 1.0, 1e-2).unwrap();
        assert!(r.equivalent && r.concave_points == 0);
    }

    #[test]
    fn random_polytope_contains_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let p = random_h_polytope(n, &mut rng).unwrap();
            assert!(p.contains(&DVector::zeros(n), 0.0).unwrap());
        }
    }
}
