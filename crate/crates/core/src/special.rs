//! One-dimensional exponential-family moments on an interval.
//!
//! For the density proportional to `e^{c x}` on `[lo, hi]` everything reduces to
//! the Langevin function `L(u) = coth u - 1/u` evaluated at `u = c (hi - lo) / 2`.
//! Small arguments use Taylor series, large ones exponentially decaying forms.

/// Threshold on `|c| (hi - lo)` below which `log Z` uses its Taylor series.
pub const LOG_Z_SERIES_THRESHOLD: f64 = 1e-4;

const MOMENT_SERIES_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMoments {
    /// `log ∫_lo^hi e^{c x} dx`
    pub log_z: f64,
    pub mean: f64,
    pub var: f64,
    /// Third central moment.
    pub third: f64,
}

/// `log(sinh(u) / u)`, even in `u`.
pub fn log_sinhc(u: f64) -> f64 {
    let a = u.abs();
    if 2.0 * a < LOG_Z_SERIES_THRESHOLD {
        let u2 = a * a;
        u2 / 6.0 - u2 * u2 / 180.0
    } else {
        a + (-(-2.0 * a).exp_m1()).ln() - (2.0 * a).ln()
    }
}

/// `coth(u) - 1/u`.
pub fn langevin(u: f64) -> f64 {
    let a = u.abs();
    if a < MOMENT_SERIES_THRESHOLD {
        let u2 = u * u;
        u * (1.0 / 3.0
            + u2 * (-1.0 / 45.0 + u2 * (2.0 / 945.0 + u2 * (-1.0 / 4725.0 + u2 * 2.0 / 93555.0))))
    } else {
        1.0 / u.tanh() - 1.0 / u
    }
}

/// `1/sinh²(u)` without overflow.
fn inv_sinh_sq(a: f64) -> f64 {
    let e = (-2.0 * a.abs()).exp();
    4.0 * e / ((1.0 - e) * (1.0 - e))
}

/// Derivative of the Langevin function: `1/u² - 1/sinh²(u)`.
pub fn langevin_d1(u: f64) -> f64 {
    let a = u.abs();
    if a < MOMENT_SERIES_THRESHOLD {
        let u2 = u * u;
        1.0 / 3.0
            + u2 * (-1.0 / 15.0
                + u2 * (2.0 / 189.0 + u2 * (-1.0 / 675.0 + u2 * (2.0 / 10395.0))))
    } else {
        1.0 / (u * u) - inv_sinh_sq(a)
    }
}

/// Second derivative of the Langevin function: `-2/u³ + 2 coth(u)/sinh²(u)`.
pub fn langevin_d2(u: f64) -> f64 {
    let a = u.abs();
    if a < MOMENT_SERIES_THRESHOLD {
        let u2 = u * u;
        u * (-2.0 / 15.0
            + u2 * (8.0 / 189.0
                + u2 * (-2.0 / 225.0 + u2 * (16.0 / 10395.0 - u2 * 2764.0 / 11609325.0))))
    } else {
        -2.0 / (u * u * u) + 2.0 / u.tanh() * inv_sinh_sq(a)
    }
}

/// `log ∫_lo^hi e^{c x} dx` for `lo < hi`.
pub fn segment_log_z(lo: f64, hi: f64, c: f64) -> f64 {
    let len = hi - lo;
    let mid = 0.5 * (lo + hi);
    c * mid + len.ln() + log_sinhc(0.5 * c * len)
}

pub fn segment_moments(lo: f64, hi: f64, c: f64) -> SegmentMoments {
    let len = hi - lo;
    let half = 0.5 * len;
    let mid = 0.5 * (lo + hi);
    let u = c * half;
    SegmentMoments {
        log_z: c * mid + len.ln() + log_sinhc(u),
        mean: mid + half * langevin(u),
        var: half * half * langevin_d1(u),
        third: half * half * half * langevin_d2(u),
    }
}

/// Inverse CDF of the density proportional to `e^{rate t}` on `[lo, hi]`,
/// evaluated in shifted log space so that `|rate| (hi - lo)` may exceed the
/// `exp` overflow range.
pub fn truncated_exp_quantile(lo: f64, hi: f64, rate: f64, u: f64) -> f64 {
    let len = hi - lo;
    let s = rate * len;
    let t = if s.abs() < 1e-12 {
        lo + u * len
    } else if s.abs() <= 1.0 {
        lo + (u * s.exp_m1()).ln_1p() / rate
    } else if s > 0.0 {
        hi + (u + (1.0 - u) * (-s).exp()).ln() / rate
    } else {
        lo + ((1.0 - u) + u * s.exp()).ln() / rate
    };
    t.clamp(lo, hi)
}

/// CDF matching [`truncated_exp_quantile`].
pub fn truncated_exp_cdf(lo: f64, hi: f64, rate: f64, t: f64) -> f64 {
    if t <= lo {
        return 0.0;
    }
    if t >= hi {
        return 1.0;
    }
    let s = rate * (hi - lo);
    if s.abs() < 1e-12 {
        return (t - lo) / (hi - lo);
    }
    if s > 0.0 {
        // (e^{r(t-lo)} - 1) / (e^s - 1) = e^{r(t-hi)} (1 - e^{-r(t-lo)}) / (1 - e^{-s})
        (rate * (t - hi)).exp() * (-(rate * (t - lo))).exp_m1() / (-s).exp_m1()
    } else {
        (rate * (t - lo)).exp_m1() / s.exp_m1()
    }
}
