use nalgebra::{DMatrix, DVector};

use super::Raw;
use crate::special::{segment_moments, SegmentMoments};

/// Assembles product-measure moments from per-coordinate ones.
pub(super) fn from_coordinates(parts: &[SegmentMoments], h: Option<&DVector<f64>>) -> Raw {
    let n = parts.len();
    Raw {
        f: parts.iter().map(|p| p.log_z).sum(),
        mean: DVector::from_iterator(n, parts.iter().map(|p| p.mean)),
        cov: DMatrix::from_diagonal(&DVector::from_iterator(n, parts.iter().map(|p| p.var))),
        // cross third central moments of independent coordinates vanish
        third: h.map(|h| parts.iter().zip(h.iter()).map(|(p, hi)| hi * hi * hi * p.third).sum()),
    }
}

pub(super) fn box_moments(
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    theta: &DVector<f64>,
    h: Option<&DVector<f64>>,
) -> Raw {
    let parts: Vec<_> = (0..theta.len())
        .map(|i| segment_moments(lower[i], upper[i], theta[i]))
        .collect();
    from_coordinates(&parts, h)
}
