//! JSON description of convex bodies.
//!
//! ```json
//! {"type": "axis_box", "lower": [-1, -1], "upper": [1, 1]}
//! {"type": "simplex", "dim": 3}
//! {"type": "h_polytope", "a": [[1, 0], [0, 1], [-1, -1]], "b": [1, 1, 1]}
//! {"type": "ball", "center": [0, 0], "radius": 1}
//! {"type": "affine_image", "inner": {...}, "matrix": [[2, 0], [0, 1]], "shift": [0, 0]}
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ConvexBody;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    AxisBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Simplex {
        dim: usize,
    },
    HPolytope {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    AffineImage {
        inner: Box<BodySpec>,
        matrix: Vec<Vec<f64>>,
        shift: Vec<f64>,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidBody(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

impl TryFrom<BodySpec> for ConvexBody {
    type Error = Error;

    fn try_from(spec: BodySpec) -> Result<Self> {
        match spec {
            BodySpec::AxisBox { lower, upper } => {
                ConvexBody::axis_box(DVector::from_vec(lower), DVector::from_vec(upper))
            }
            BodySpec::Simplex { dim } => ConvexBody::simplex(dim),
            BodySpec::HPolytope { a, b } => {
                let a = matrix_from_rows(&a, "h_polytope.a")?;
                ConvexBody::h_polytope(a, DVector::from_vec(b))
            }
            BodySpec::Ball { center, radius } => ConvexBody::ball(DVector::from_vec(center), radius),
            BodySpec::AffineImage { inner, matrix, shift } => {
                let inner = ConvexBody::try_from(*inner)?;
                let matrix = matrix_from_rows(&matrix, "affine_image.matrix")?;
                ConvexBody::affine_image(inner, matrix, DVector::from_vec(shift))
            }
        }
    }
}

impl From<ConvexBody> for BodySpec {
    fn from(body: ConvexBody) -> Self {
        BodySpec::from(&body)
    }
}

impl From<&ConvexBody> for BodySpec {
    fn from(body: &ConvexBody) -> Self {
        match body {
            ConvexBody::AxisBox(b) => BodySpec::AxisBox {
                lower: b.lower.iter().copied().collect(),
                upper: b.upper.iter().copied().collect(),
            },
            ConvexBody::StandardSimplex(s) => BodySpec::Simplex { dim: s.dim },
            ConvexBody::HPolytope(p) => BodySpec::HPolytope {
                a: rows_of(&p.poly.a),
                b: p.poly.b.iter().copied().collect(),
            },
            ConvexBody::Ball(b) => BodySpec::Ball {
                center: b.center.iter().copied().collect(),
                radius: b.radius,
            },
            ConvexBody::AffineImage(a) => BodySpec::AffineImage {
                inner: Box::new(BodySpec::from(a.inner.as_ref())),
                matrix: rows_of(&a.matrix),
                shift: a.shift.iter().copied().collect(),
            },
        }
    }
}
