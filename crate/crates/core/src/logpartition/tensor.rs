use nalgebra::DVector;

use super::closed_form::from_coordinates;
use super::Raw;
use crate::quadrature::composite;
use crate::special::SegmentMoments;

/// Mass beyond `WINDOW / |c|` from the heavy end is below `e^{-WINDOW}`.
const WINDOW: f64 = 50.0;
/// Largest variation of the exponent across one panel.
const PANEL_SPAN: f64 = 20.0;

fn axis(lo: f64, hi: f64, c: f64, order: usize) -> SegmentMoments {
    let (mut a, mut b) = (lo, hi);
    if c * (b - a) > WINDOW {
        a = b - WINDOW / c;
    } else if -c * (b - a) > WINDOW {
        b = a - WINDOW / c;
    }
    let panels = ((c.abs() * (b - a) / PANEL_SPAN).ceil() as usize).max(1);
    let (x, w) = composite(a, b, order, panels);
    let peak = if c >= 0.0 { c * b } else { c * a };
    let mut z = 0.0;
    let mut s1 = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let p = wi * (c * xi - peak).exp();
        z += p;
        s1 += p * xi;
    }
    let mean = s1 / z;
    let (mut s2, mut s3) = (0.0, 0.0);
    for (xi, wi) in x.iter().zip(&w) {
        let p = wi * (c * xi - peak).exp() / z;
        let d = xi - mean;
        s2 += p * d * d;
        s3 += p * d * d * d;
    }
    SegmentMoments { log_z: peak + z.ln(), mean, var: s2, third: s3 }
}

pub(super) fn box_moments(
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
    order: usize,
) -> Raw {
    let parts: Vec<_> = (0..theta.len())
        .map(|i| axis(lower[i], upper[i], theta[i], order))
        .collect();
    from_coordinates(&parts, h)
}
