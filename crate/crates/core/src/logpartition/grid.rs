use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::Raw;
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::special::{log_sinhc, segment_moments};

/// Weighted sums in log space, relative to the running maximum `log_ref`.
#[derive(Clone)]
struct Acc {
    log_ref: f64,
    s0: f64,
    s1: DVector<f64>,
    s2: DMatrix<f64>,
    s3: f64,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc {
            log_ref: f64::NEG_INFINITY,
            s0: 0.0,
            s1: DVector::zeros(n),
            s2: DMatrix::zeros(n, n),
            s3: 0.0,
        }
    }

    fn rescale(&mut self, new_ref: f64) {
        if new_ref > self.log_ref {
            let f = (self.log_ref - new_ref).exp();
            self.s0 *= f;
            self.s1 *= f;
            self.s2 *= f;
            self.s3 *= f;
            self.log_ref = new_ref;
        }
    }

    fn merge(&mut self, other: &Acc) {
        if other.s0 == 0.0 {
            return;
        }
        self.rescale(other.log_ref);
        let f = (other.log_ref - self.log_ref).exp();
        self.s0 += f * other.s0;
        self.s1 += &other.s1 * f;
        self.s2 += &other.s2 * f;
        self.s3 += f * other.s3;
    }
}

/// Window half-width in nats below the maximum of `⟨θ, x⟩`.
fn window(n: usize, theta_norm: f64, diam: f64) -> f64 {
    40.0 + n as f64 * (1.0 + theta_norm * diam).ln()
}

/// Box carrying all but a negligible fraction of the mass of `p_θ`: the
/// bounding box of the cap `⟨θ, x⟩ >= max - W` for strong tilts, the body's
/// bounding box otherwise.
pub(crate) fn mass_window(body: &ConvexBody, theta: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = body.dim();
    let top = body.support(theta);
    let (blo, bhi) = body.bounding_box();
    let low_end: f64 = (0..n).map(|i| (theta[i] * blo[i]).min(theta[i] * bhi[i])).sum();
    let w = window(n, theta.norm(), body.diameter());
    if top - low_end > w {
        if let Some((clo, chi)) = body.cap_bounding_box(theta, top - w) {
            return (clo.sup(&blo), chi.inf(&bhi));
        }
    }
    (blo, bhi)
}

/// Product rule over the first `n - 1` coordinates whose cells integrate the
/// exponential factor `e^{θ_j x_j}` exactly (a midpoint rule for the chord
/// length); the last coordinate is integrated exactly along each grid line's
/// chord. The grid covers [`mass_window`].
pub(super) fn moments(
    body: &ConvexBody,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    resolution: usize,
) -> Result<Raw> {
    let n = body.dim();
    let outer = n - 1;
    let top = body.support(theta);
    let (lo, hi) = mass_window(body, theta);
    let center = (&lo + &hi) * 0.5;
    let step: Vec<f64> = (0..outer).map(|j| (hi[j] - lo[j]) / resolution as f64).collect();
    // per-cell offsets of the tilted uniform law on one cell of each outer axis
    let cell: Vec<_> = (0..outer)
        .map(|j| segment_moments(-0.5 * step[j], 0.5 * step[j], theta[j]))
        .collect();
    let log_cell: f64 = (0..outer)
        .map(|j| step[j].ln() + log_sinhc(0.5 * theta[j] * step[j]))
        .sum();
    let inner_var: DVector<f64> = DVector::from_fn(n, |j, _| if j < outer { cell[j].var } else { 0.0 });
    let (cell_var_h, cell_third_h) = match h {
        Some(h) => (
            (0..outer).map(|j| h[j] * h[j] * cell[j].var).sum::<f64>(),
            (0..outer).map(|j| h[j].powi(3) * cell[j].third).sum::<f64>(),
        ),
        None => (0.0, 0.0),
    };
    let cells_per_row = resolution.pow(outer.saturating_sub(1) as u32);
    let rows = if outer == 0 { 1 } else { resolution };

    let direction = {
        let mut d = DVector::zeros(n);
        d[n - 1] = 1.0;
        d
    };

    let partials: Vec<Acc> = (0..rows)
        .into_par_iter()
        .map(|row| {
            let mut acc = Acc::new(n);
            let mut point = DVector::zeros(n);
            let mut y = DVector::zeros(n);
            let mut idx = vec![0usize; outer];
            for k in 0..cells_per_row {
                if outer > 0 {
                    idx[0] = row;
                    let mut rem = k;
                    for slot in idx.iter_mut().skip(1) {
                        *slot = rem % resolution;
                        rem /= resolution;
                    }
                }
                let mut lin = 0.0;
                for j in 0..outer {
                    point[j] = lo[j] + (idx[j] as f64 + 0.5) * step[j];
                    lin += theta[j] * point[j];
                }
                point[n - 1] = 0.0;
                let Some((t0, t1)) = body.line_intersection(&point, &direction) else {
                    continue;
                };
                if !(t1 > t0) {
                    continue;
                }
                let seg = segment_moments(t0, t1, theta[n - 1]);
                let lw = log_cell + lin + seg.log_z - top;
                if !lw.is_finite() {
                    continue;
                }
                acc.rescale(lw);
                let wt = (lw - acc.log_ref).exp();
                for j in 0..outer {
                    y[j] = point[j] + cell[j].mean - center[j];
                }
                y[n - 1] = seg.mean - center[n - 1];
                acc.s0 += wt;
                acc.s1.axpy(wt, &y, 1.0);
                acc.s2.ger(wt, &y, &y, 1.0);
                for j in 0..outer {
                    acc.s2[(j, j)] += wt * inner_var[j];
                }
                acc.s2[(n - 1, n - 1)] += wt * seg.var;
                if let Some(h) = h {
                    let g = h.dot(&y);
                    let hn = h[n - 1];
                    let var_h = cell_var_h + hn * hn * seg.var;
                    acc.s3 += wt * (g * g * g + 3.0 * g * var_h + cell_third_h + hn * hn * hn * seg.third);
                }
            }
            acc
        })
        .collect();

    let mut total = Acc::new(n);
    for p in &partials {
        total.merge(p);
    }
    if total.s0 == 0.0 || !total.s0.is_finite() {
        return Err(Error::Numerical("grid quadrature found no mass".into()));
    }
    let m1 = &total.s1 / total.s0;
    let m2 = &total.s2 / total.s0;
    let mut cov = &m2 - &m1 * m1.transpose();
    crate::linalg::symmetrize(&mut cov);
    let third = h.map(|h| {
        let u1 = h.dot(&m1);
        let u2 = h.dot(&(&m2 * h));
        let u3 = total.s3 / total.s0;
        u3 - 3.0 * u1 * u2 + 2.0 * u1 * u1 * u1
    });
    Ok(Raw {
        f: top + total.log_ref + total.s0.ln(),
        mean: m1 + center,
        cov,
        third,
    })
}
