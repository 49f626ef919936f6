//! H-polytope machinery: vertex enumeration, feasibility and boundedness checks.
//!
//! Everything here enumerates `n`-subsets of the constraints, which is exact and
//! cheap for the low-dimensional bodies this crate integrates over. Larger
//! instances are refused with an explicit error instead of running for hours.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Upper bound on the number of constraint subsets we are willing to enumerate.
pub const MAX_ENUMERATION: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct Polytope {
    pub(crate) a: DMatrix<f64>,
    pub(crate) b: DVector<f64>,
    pub(crate) vertices: Vec<DVector<f64>>,
    pub(crate) interior: DVector<f64>,
    /// Vertex indices of a triangulation, built on first use.
    simplices: OnceLock<Vec<Vec<usize>>>,
}

impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Calls `f` with every increasing `k`-subset of `0..n`.
pub(crate) fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + n - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn scale_of(b: &DVector<f64>) -> f64 {
    1.0 + b.amax()
}

/// Solves the square system built from the chosen rows, rejecting
/// ill-conditioned subsets.
fn solve_rows(rows: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = rows.ncols();
    let lu = rows.clone().lu();
    let x = lu.solve(rhs)?;
    // reject nearly parallel constraint sets
    let mut norms = 1.0;
    for i in 0..n {
        norms *= rows.row(i).norm();
    }
    let det = lu.determinant().abs();
    if norms == 0.0 || det / norms < 1e-10 {
        return None;
    }
    Some(x)
}

/// Enumerates the vertices of `{x : A x <= b}` (deduplicated).
pub(crate) fn enumerate_vertices(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let (m, n) = a.shape();
    let count = binomial(m, n);
    if count > MAX_ENUMERATION {
        return Err(Error::InvalidBody(format!(
            "{m} constraints in dimension {n} need {count} vertex candidates (limit {MAX_ENUMERATION})"
        )));
    }
    let tol = 1e-9 * scale_of(b);
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    let mut rows = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for_each_subset(m, n, |s| {
        for (r, &i) in s.iter().enumerate() {
            rows.row_mut(r).copy_from(&a.row(i));
            rhs[r] = b[i];
        }
        if let Some(x) = solve_rows(&rows, &rhs) {
            let slack = b - a * &x;
            if slack.min() >= -tol && !vertices.iter().any(|v| (v - &x).amax() <= tol) {
                vertices.push(x);
            }
        }
    });
    Ok(vertices)
}

impl Polytope {
    pub(crate) fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if n == 0 {
            return Err(Error::InvalidBody("polytope dimension must be positive".into()));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: b.len() });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidBody("non-finite constraint data".into()));
        }
        if m < n + 1 {
            return Err(Error::Unbounded(format!(
                "{m} constraints cannot bound a body in dimension {n}"
            )));
        }
        for i in 0..m {
            if a.row(i).norm() == 0.0 {
                return Err(Error::InvalidBody(format!("constraint row {i} is zero")));
            }
        }
        check_bounded(&a)?;
        let vertices = enumerate_vertices(&a, &b)?;
        if vertices.len() < n + 1 {
            return Err(Error::InvalidBody(
                "polytope has no strictly feasible point".into(),
            ));
        }
        let mut interior = DVector::zeros(n);
        for v in &vertices {
            interior += v;
        }
        interior /= vertices.len() as f64;
        let poly = Polytope { a, b, vertices, interior, simplices: OnceLock::new() };
        let diam = poly.vertex_diameter();
        if poly.margin(&poly.interior) <= 1e-9 * diam.max(1e-300) {
            return Err(Error::InvalidBody(
                "polytope has no strictly feasible point".into(),
            ));
        }
        Ok(poly)
    }

    pub(crate) fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn vertex_diameter(&self) -> f64 {
        let (lo, hi) = self.vertex_bbox();
        (hi - lo).norm()
    }

    pub(crate) fn vertex_bbox(&self) -> (DVector<f64>, DVector<f64>) {
        bbox_of(&self.vertices)
    }

    /// Smallest Euclidean distance to a facet hyperplane (negative outside).
    pub(crate) fn margin(&self, x: &DVector<f64>) -> f64 {
        let slack = &self.b - &self.a * x;
        (0..self.a.nrows())
            .map(|i| slack[i] / self.a.row(i).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).max()
    }

    /// Ratio test along `x + t d`; `None` when the line misses the body.
    pub(crate) fn line_intersection(&self, x: &DVector<f64>, d: &DVector<f64>) -> Option<(f64, f64)> {
        ratio_test(&self.a, &self.b, x, d)
    }

    pub(crate) fn support(&self, theta: &DVector<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|v| theta.dot(v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// A triangulation of the polytope using only its vertices, as lists of
    /// `n + 1` indices into [`Polytope::vertices`].
    pub(crate) fn simplices(&self) -> &[Vec<usize>] {
        self.simplices.get_or_init(|| {
            let n = self.dim();
            let scale = 1.0 + self.b.amax();
            let tol = 1e-9 * scale;
            let tight: Vec<Vec<usize>> = self
                .vertices
                .iter()
                .map(|v| {
                    let slack = &self.b - &self.a * v;
                    (0..slack.len()).filter(|&i| slack[i].abs() <= tol).collect()
                })
                .collect();
            let all: Vec<usize> = (0..self.vertices.len()).collect();
            let mut out = Vec::new();
            pull(&self.vertices, &tight, self.a.nrows(), &all, n, &mut Vec::new(), &mut out);
            out
        })
    }

    /// Volume and centroid summed over the triangulation.
    pub(crate) fn volume_and_centroid(&self) -> (f64, DVector<f64>) {
        let n = self.dim();
        let mut volume = 0.0;
        let mut moment = DVector::zeros(n);
        for s in self.simplices() {
            let base = &self.vertices[s[0]];
            let edges = DMatrix::from_fn(n, n, |i, j| self.vertices[s[j + 1]][i] - base[i]);
            let vol = edges.determinant().abs();
            let mut center = DVector::zeros(n);
            for &k in s {
                center += &self.vertices[k];
            }
            moment += center * (vol / (n as f64 + 1.0));
            volume += vol;
        }
        let factorial: f64 = (2..=n).map(|k| k as f64).product();
        (volume / factorial, moment / volume)
    }

    /// Bounding box of `K ∩ {⟨θ, x⟩ >= level}`.
    pub(crate) fn cap_bbox(&self, theta: &DVector<f64>, level: f64) -> Option<(DVector<f64>, DVector<f64>)> {
        cap_bbox(&self.a, &self.b, &self.vertices, theta, level)
    }
}

/// Affine dimension of a point set.
fn affine_dim(vertices: &[DVector<f64>], face: &[usize]) -> usize {
    if face.len() <= 1 {
        return 0;
    }
    let base = &vertices[face[0]];
    let n = base.len();
    let mut m = DMatrix::zeros(n, face.len() - 1);
    for (k, &i) in face[1..].iter().enumerate() {
        m.set_column(k, &(&vertices[i] - base));
    }
    let sv = m.singular_values();
    let top = sv.max();
    sv.iter().filter(|s| **s > 1e-9 * top.max(1e-300)).count()
}

/// Pulling triangulation: cone from the first vertex of `face` over every
/// facet of `face` that misses it. `apexes` holds the vertices pulled so far.
fn pull(
    vertices: &[DVector<f64>],
    tight: &[Vec<usize>],
    constraints: usize,
    face: &[usize],
    dim: usize,
    apexes: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    let apex = face[0];
    if dim == 0 {
        let mut s = apexes.clone();
        s.push(apex);
        out.push(s);
        return;
    }
    let mut seen: Vec<Vec<usize>> = Vec::new();
    for j in 0..constraints {
        let sub: Vec<usize> = face.iter().copied().filter(|&v| tight[v].contains(&j)).collect();
        if sub.is_empty() || sub.contains(&apex) || seen.contains(&sub) {
            continue;
        }
        if affine_dim(vertices, &sub) + 1 != dim {
            continue;
        }
        apexes.push(apex);
        pull(vertices, tight, constraints, &sub, dim - 1, apexes, out);
        apexes.pop();
        seen.push(sub);
    }
}

pub(crate) fn bbox_of(points: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
    let n = points[0].len();
    let mut lo = DVector::from_element(n, f64::INFINITY);
    let mut hi = DVector::from_element(n, f64::NEG_INFINITY);
    for p in points {
        for j in 0..n {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    (lo, hi)
}

pub(crate) fn ratio_test(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    d: &DVector<f64>,
) -> Option<(f64, f64)> {
    let ax = a * x;
    let ad = a * d;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..a.nrows() {
        let slack = b[i] - ax[i];
        let rate = ad[i];
        if rate > 0.0 {
            hi = hi.min(slack / rate);
        } else if rate < 0.0 {
            lo = lo.max(slack / rate);
        } else if slack < 0.0 {
            return None;
        }
    }
    (lo <= hi).then_some((lo, hi))
}

pub(crate) fn cap_bbox(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    vertices: &[DVector<f64>],
    theta: &DVector<f64>,
    level: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (m, n) = a.shape();
    let mut points: Vec<DVector<f64>> =
        vertices.iter().filter(|v| theta.dot(v) >= level).cloned().collect();
    if points.is_empty() {
        return None;
    }
    if n == 1 {
        // the cut point itself
        if theta[0] != 0.0 {
            let x = DVector::from_element(1, level / theta[0]);
            if (a * &x - b).max() <= 1e-12 * scale_of(b) {
                points.push(x);
            }
        }
        return Some(bbox_of(&points));
    }
    let tol = 1e-9 * scale_of(b);
    let mut rows = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    rows.row_mut(n - 1).copy_from(&theta.transpose());
    rhs[n - 1] = level;
    for_each_subset(m, n - 1, |s| {
        for (r, &i) in s.iter().enumerate() {
            rows.row_mut(r).copy_from(&a.row(i));
            rhs[r] = b[i];
        }
        if let Some(x) = solve_rows(&rows, &rhs) {
            if (a * &x - b).max() <= tol {
                points.push(x);
            }
        }
    });
    Some(bbox_of(&points))
}

/// The recession cone `{d : A d <= 0}` must be trivial; checked by enumerating
/// the vertices of its intersection with the unit cube.
fn check_bounded(a: &DMatrix<f64>) -> Result<()> {
    let (m, n) = a.shape();
    let mut cone = DMatrix::zeros(m + 2 * n, n);
    cone.view_mut((0, 0), (m, n)).copy_from(a);
    for j in 0..n {
        cone[(m + j, j)] = 1.0;
        cone[(m + n + j, j)] = -1.0;
    }
    let mut rhs = DVector::zeros(m + 2 * n);
    for j in 0..2 * n {
        rhs[m + j] = 1.0;
    }
    let vertices = enumerate_vertices(&cone, &rhs)?;
    // scale rows so the tolerance is meaningful
    if let Some(v) = vertices.iter().find(|v| v.amax() > 1e-7) {
        return Err(Error::Unbounded(format!(
            "recession direction {:?}",
            v.iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> (DMatrix<f64>, DVector<f64>) {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
        (a, b)
    }

    #[test]
    fn subsets_are_complete() {
        let mut seen = Vec::new();
        for_each_subset(5, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len() as u64, binomial(5, 3));
        assert_eq!(seen.first().unwrap(), &vec![0, 1, 2]);
        assert_eq!(seen.last().unwrap(), &vec![2, 3, 4]);
        let mut one = Vec::new();
        for_each_subset(3, 3, |s| one.push(s.to_vec()));
        assert_eq!(one, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn square_vertices() {
        let (a, b) = unit_square();
        let p = Polytope::new(a, b).unwrap();
        assert_eq!(p.vertices.len(), 4);
        assert!(p.interior.amax() < 1e-12);
        assert!((p.margin(&p.interior) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_strip_rejected() {
        let a = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 0.0, -1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(Polytope::new(a, b), Err(Error::Unbounded(_))));
    }

    #[test]
    fn empty_polytope_rejected() {
        let a = DMatrix::from_row_slice(3, 1, &[1.0, -1.0, 1.0]);
        let b = DVector::from_vec(vec![-1.0, -1.0, 5.0]);
        assert!(matches!(Polytope::new(a, b), Err(Error::InvalidBody(_))));
    }

    #[test]
    fn flat_polytope_rejected() {
        // x <= 0 and -x <= 0 in the first coordinate
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]);
        assert!(Polytope::new(a, b).is_err());
    }

    #[test]
    fn cap_of_square() {
        let (a, b) = unit_square();
        let p = Polytope::new(a, b).unwrap();
        let theta = DVector::from_vec(vec![1.0, 1.0]);
        let (lo, hi) = p.cap_bbox(&theta, 1.5).unwrap();
        assert!((lo - DVector::from_vec(vec![0.5, 0.5])).amax() < 1e-12);
        assert!((hi - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-12);
        assert!(p.cap_bbox(&theta, 2.5).is_none());
    }
}
