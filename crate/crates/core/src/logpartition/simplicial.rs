//! Exact moments of polytopes through a triangulation.
//!
//! On a simplex with vertices `v_0..v_n` and `z_i = ⟨θ, v_i⟩`,
//! `∫ e^{⟨θ,x⟩} dx = |det(v_i - v_0)| · e[z_0, …, z_n]`, the divided difference of
//! `exp` at the vertex values. Derivatives in `z` add repeated nodes:
//! `∂^α e[z] = α! e[z, z^α]`, which yields all moments of order ≤ 3.
//! Divided differences are read off the exponential of the bidiagonal matrix
//! with the nodes on the diagonal and ones above it; scaling and squaring keeps
//! every intermediate entry nonnegative, so no cancellation occurs.

use nalgebra::{DMatrix, DVector};

use super::Raw;

/// Nodes are shifted so that the largest is zero; this bounds the Taylor step.
const TAYLOR_NORM: f64 = 0.5;
const TAYLOR_TERMS: usize = 20;

/// `e[z_0, …, z_m]` for nodes `<= 0`.
pub(crate) fn exp_divided_difference(nodes: &[f64]) -> f64 {
    let m = nodes.len();
    if m == 1 {
        return nodes[0].exp();
    }
    let spread = nodes.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    let squarings = ((spread + 1.0) / TAYLOR_NORM).log2().ceil().max(0.0) as i32;
    let scale = 0.5f64.powi(squarings);
    // B = Z / 2^s is upper bidiagonal; exp(B) by its Taylor series.
    let b = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            nodes[i] * scale
        } else if j == i + 1 {
            scale
        } else {
            0.0
        }
    });
    let mut term = DMatrix::identity(m, m);
    let mut e = DMatrix::identity(m, m);
    for k in 1..=TAYLOR_TERMS {
        term = upper_product(&term, &b) / k as f64;
        e += &term;
    }
    for _ in 0..squarings {
        e = upper_product(&e, &e);
    }
    e[(0, m - 1)]
}

/// Product of upper-triangular matrices.
fn upper_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let m = a.nrows();
    DMatrix::from_fn(m, m, |i, j| if j < i { 0.0 } else { (i..=j).map(|k| a[(i, k)] * b[(k, j)]).sum() })
}

/// Moments of `p_θ` on the union of `simplices` (vertex-index lists into `vertices`).
pub(super) fn moments(
    vertices: &[DVector<f64>],
    simplices: &[Vec<usize>],
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
) -> Raw {
    let n = theta.len();
    let z: Vec<f64> = vertices.iter().map(|v| theta.dot(v)).collect();
    let (top, z_max) = z.iter().enumerate().fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    // coordinates relative to the maximizing vertex
    let origin = &vertices[top];
    let y: Vec<DVector<f64>> = vertices.iter().map(|v| v - origin).collect();
    let zs: Vec<f64> = z.iter().map(|v| (v - z_max).min(0.0)).collect();
    let hy: Vec<f64> = h.map_or_else(Vec::new, |h| y.iter().map(|v| h.dot(v)).collect());

    let mut s0 = 0.0;
    let mut s1 = DVector::zeros(n);
    let mut s2 = DMatrix::zeros(n, n);
    let (mut h1, mut h2, mut h3) = (0.0, 0.0, 0.0);
    let mut nodes = Vec::with_capacity(n + 4);
    for s in simplices {
        let base = &y[s[0]];
        let det = DMatrix::from_fn(n, n, |i, j| y[s[j + 1]][i] - base[i]).determinant().abs();
        if det == 0.0 {
            continue;
        }
        let simplex_nodes: Vec<f64> = s.iter().map(|&k| zs[k]).collect();
        let dd = |extra: &[usize], nodes: &mut Vec<f64>| {
            nodes.clear();
            nodes.extend_from_slice(&simplex_nodes);
            nodes.extend(extra.iter().map(|&k| zs[k]));
            // the largest node first keeps the matrix exponential well scaled
            nodes.sort_by(|a, b| b.total_cmp(a));
            exp_divided_difference(nodes)
        };
        s0 += det * dd(&[], &mut nodes);
        for (a, &i) in s.iter().enumerate() {
            let e1 = det * dd(&[i], &mut nodes);
            s1.axpy(e1, &y[i], 1.0);
            if h.is_some() {
                h1 += e1 * hy[i];
            }
            for &j in &s[a..] {
                // Σ over ordered pairs: 2 e[z, z_i, z_j] for each unordered pair
                let e2 = 2.0 * det * dd(&[i, j], &mut nodes);
                if i == j {
                    s2.ger(e2, &y[i], &y[i], 1.0);
                } else {
                    s2.ger(0.5 * e2, &y[i], &y[j], 1.0);
                    s2.ger(0.5 * e2, &y[j], &y[i], 1.0);
                }
                if h.is_some() {
                    h2 += e2 * hy[i] * hy[j];
                }
            }
        }
        if h.is_some() {
            for a in 0..s.len() {
                for b in a..s.len() {
                    for c in b..s.len() {
                        let (i, j, k) = (s[a], s[b], s[c]);
                        // multinomial count times α! is always 3! = 6
                        h3 += 6.0 * det * dd(&[i, j, k], &mut nodes) * hy[i] * hy[j] * hy[k];
                    }
                }
            }
        }
    }
    let mean_y = &s1 / s0;
    let cov = &s2 / s0 - &mean_y * mean_y.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let third = h.map(|_| {
        let (m1, m2, m3) = (h1 / s0, h2 / s0, h3 / s0);
        m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1
    });
    Raw { f: z_max + s0.ln(), mean: origin + mean_y, cov, third }
}
