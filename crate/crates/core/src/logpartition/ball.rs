//! Euclidean balls by rotational symmetry.
//!
//! With `u = θ/|θ|` and `s = ⟨x - center, u⟩`, the tilted measure factors into a
//! one-dimensional law for `s` with density `∝ e^{|θ| s} (r² - s²)^{(n-1)/2}` and a
//! uniform law on the `(n-1)`-ball of radius `ρ = √(r² - s²)` orthogonal to `u`.
//! The substitution `s = r cos ψ` makes the integrand analytic on `[0, π]`, so a
//! composite Gauss–Legendre rule converges geometrically.

use nalgebra::{DMatrix, DVector};

use super::Raw;
use crate::geometry::{ln_gamma_half, Ball};
use crate::quadrature::composite;

const ORDER: usize = 32;

/// Moments of the tilted ball with `panels` Gauss–Legendre panels on the
/// mass window in `ψ`.
pub(super) fn moments(ball: &Ball, theta: &DVector<f64>, h: Option<&DVector<f64>>, panels: usize) -> Raw {
    let n = theta.len();
    let r = ball.radius();
    let kappa = theta.norm();
    let u = if kappa > 0.0 {
        theta / kappa
    } else {
        let mut e = DVector::zeros(n);
        e[0] = 1.0;
        e
    };
    let nf = n as f64;
    let window = 60.0 + 2.0 * nf + nf * (1.0 + kappa * r).ln();
    let psi_max = if kappa * r > 0.5 * window {
        2.0 * (window / (2.0 * kappa * r)).sqrt().asin()
    } else {
        std::f64::consts::PI
    };
    let (nodes, weights) = composite(0.0, psi_max, ORDER, panels);

    // d = r - s = 2 r sin²(ψ/2) keeps precision near the supporting point.
    let mut log_w = Vec::with_capacity(nodes.len());
    let mut ds = Vec::with_capacity(nodes.len());
    let mut rho2 = Vec::with_capacity(nodes.len());
    for (&psi, &w) in nodes.iter().zip(&weights) {
        let half = (0.5 * psi).sin();
        let d = 2.0 * r * half * half;
        let rho = r * psi.sin();
        log_w.push(-kappa * d + nf * rho.ln() + w.ln());
        ds.push(d);
        rho2.push(rho * rho);
    }
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut m1 = 0.0;
    for (lw, d) in log_w.iter().zip(&ds) {
        let p = (lw - peak).exp();
        z += p;
        m1 += p * d;
    }
    let mean_d = m1 / z;
    let (mut var, mut k3, mut e_rho2, mut cross) = (0.0, 0.0, 0.0, 0.0);
    for ((lw, d), q) in log_w.iter().zip(&ds).zip(&rho2) {
        let p = (lw - peak).exp() / z;
        let dd = d - mean_d;
        var += p * dd * dd;
        k3 += p * dd * dd * dd;
        e_rho2 += p * q;
        cross += p * dd * q;
    }
    // s = r - d flips the sign of odd central moments.
    let third_s = -k3;
    let cross_s = -cross;
    let mean_s = r - mean_d;

    // log of the (n-1)-ball unit volume: π^{m/2} / Γ(m/2 + 1) with m = n - 1.
    let m = n - 1;
    let log_unit = 0.5 * m as f64 * std::f64::consts::PI.ln() - ln_gamma_half(m + 2);
    let f = theta.dot(ball.center()) + kappa * r + log_unit + peak + z.ln();

    let perp = e_rho2 / (nf + 1.0);
    let mean = ball.center() + &u * mean_s;
    let uu = &u * u.transpose();
    let cov = &uu * var + (DMatrix::identity(n, n) - &uu) * perp;
    let third = h.map(|h| {
        let alpha = h.dot(&u);
        let perp_sq = (h.norm_squared() - alpha * alpha).max(0.0);
        alpha.powi(3) * third_s + 3.0 * alpha * perp_sq * cross_s / (nf + 1.0)
    });
    Raw { f, mean, cov, third }
}
