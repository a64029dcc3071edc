//! Convex compact sets of covariance matrices.
//!
//! A set is stored either as a scalar interval `[r, R]` (dimension one) or as
//! the convex hull of finitely many positive semidefinite matrices. Both
//! representations give an exact support function, and projection onto a hull
//! reduces to a small quadratic program over vertex weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue tolerance for accepting a vertex as positive semidefinite.
pub const PSD_TOL: f64 = 1e-12;
/// Eigenvalue tolerance accepted by [`matrix_sqrt`].
pub const SQRT_PSD_TOL: f64 = 1e-8;

const PROJECTION_MAX_ITER: usize = 10_000;

/// A real symmetric matrix. Symmetry is exact after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds a matrix from row-major entries, symmetrizing `(A + A')/2`.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries)))
    }

    /// Symmetrizes an arbitrary square matrix.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetric matrix must be square");
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn scalar(value: f64) -> Self {
        SymMatrix(DMatrix::from_element(1, 1, value))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SymMatrix(&self.0 * factor)
    }

    pub fn add(&self, other: &Self) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        SymMatrix(&self.0 - &other.0)
    }

    /// `self * self`, symmetrized.
    pub fn square(&self) -> Self {
        Self::from_matrix(&self.0 * &self.0)
    }

    /// `tr(self * other)`, the Frobenius inner product for symmetric matrices.
    pub fn trace_product(&self, other: &Self) -> f64 {
        self.0.component_mul(&other.0).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Eigenvalues in ascending order with matching eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(d, d);
        for (col, &i) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigen().0.last().unwrap()
    }

    /// Spectral norm.
    pub fn operator_norm(&self) -> f64 {
        let (vals, _) = self.eigen();
        vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `self * v` for a column vector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Outer product `v v'`.
    pub fn outer(v: &[f64]) -> Self {
        let d = v.len();
        SymMatrix(DMatrix::from_fn(d, d, |i, j| v[i] * v[j]))
    }
}

/// The unique positive semidefinite square root, by symmetric eigendecomposition.
///
/// Eigenvalues in `[-1e-8, 0)` are clipped to zero.
pub fn matrix_sqrt(gamma: &SymMatrix) -> Result<SymMatrix> {
    let (vals, vecs) = gamma.eigen();
    if vals[0] < -SQRT_PSD_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: vals[0],
        });
    }
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|v| v.max(0.0).sqrt()));
    let s = &vecs * DMatrix::from_diagonal(&roots) * vecs.transpose();
    Ok(SymMatrix::from_matrix(s))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// `[r, R]`, only for dimension one.
    Interval { r: f64, big_r: f64 },
    /// Convex hull of positive semidefinite vertices.
    Hull { vertices: Vec<SymMatrix> },
}

/// Nonempty convex compact subset of the positive semidefinite cone.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    dim: usize,
    repr: Representation,
    r_d: f64,
    big_r_d: f64,
}

impl UncertaintySet {
    pub fn interval(r: f64, big_r: f64) -> Result<Self> {
        if !(r.is_finite() && big_r.is_finite()) || r < 0.0 || big_r < r {
            return Err(Error::InvalidArgument(format!(
                "interval needs 0 <= r <= R < inf, got [{r}, {big_r}]"
            )));
        }
        Ok(Self {
            dim: 1,
            repr: Representation::Interval { r, big_r },
            r_d: r,
            big_r_d: big_r,
        })
    }

    pub fn hull(vertices: Vec<SymMatrix>) -> Result<Self> {
        let first = vertices
            .first()
            .ok_or_else(|| Error::InvalidArgument("hull needs at least one vertex".into()))?;
        let dim = first.dim();
        let mut r_d = f64::INFINITY;
        let mut big_r_d = 0.0_f64;
        for v in &vertices {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            let (vals, _) = v.eigen();
            let lo = vals[0];
            if lo < -PSD_TOL {
                return Err(Error::NotPsd { min_eigenvalue: lo });
            }
            // Smallest eigenvalue is concave and the operator norm convex, so
            // both extremes over the hull sit at vertices.
            r_d = r_d.min(if lo <= PSD_TOL { 0.0 } else { lo });
            big_r_d = big_r_d.max(*vals.last().unwrap());
        }
        Ok(Self {
            dim,
            repr: Representation::Hull { vertices },
            r_d,
            big_r_d: big_r_d.max(0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// `(r_D, R_D)`: smallest eigenvalue and largest operator norm over the set.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        (self.r_d, self.big_r_d)
    }

    /// Extreme points as matrices. An interval yields its (distinct) endpoints.
    pub fn vertices(&self) -> Vec<SymMatrix> {
        match &self.repr {
            Representation::Interval { r, big_r } => {
                if r == big_r {
                    vec![SymMatrix::scalar(*r)]
                } else {
                    vec![SymMatrix::scalar(*r), SymMatrix::scalar(*big_r)]
                }
            }
            Representation::Hull { vertices } => vertices.clone(),
        }
    }

    /// True when the set has a diagonal-only vertex description.
    pub fn is_diagonal(&self) -> bool {
        self.vertices().iter().all(|v| {
            (0..v.dim()).all(|i| (0..v.dim()).all(|j| i == j || v.get(i, j) == 0.0))
        })
    }

    /// `{factor * A : A in D}`.
    pub fn scale(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale factor must be positive, got {factor}"
            )));
        }
        match &self.repr {
            Representation::Interval { r, big_r } => Self::interval(r * factor, big_r * factor),
            Representation::Hull { vertices } => {
                Self::hull(vertices.iter().map(|v| v.scaled(factor)).collect())
            }
        }
    }

    fn check_dim(&self, gamma: &SymMatrix) -> Result<()> {
        if gamma.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: gamma.dim(),
            });
        }
        Ok(())
    }

    /// `G(Gamma) = sup_{A in D} tr(Gamma A) / 2`.
    pub fn support_function(&self, gamma: &SymMatrix) -> Result<f64> {
        self.check_dim(gamma)?;
        Ok(match &self.repr {
            Representation::Interval { r, big_r } => {
                let g = gamma.get(0, 0);
                0.5 * (big_r * g.max(0.0) - r * (-g).max(0.0))
            }
            Representation::Hull { vertices } => {
                vertices
                    .iter()
                    .map(|v| v.trace_product(gamma))
                    .fold(f64::NEG_INFINITY, f64::max)
                    * 0.5
            }
        })
    }

    /// Scalar support function for one-dimensional sets.
    pub fn g_scalar(&self, gamma: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        match &self.repr {
            Representation::Interval { r, big_r } => 0.5 * (big_r * gamma.max(0.0) - r * (-gamma).max(0.0)),
            Representation::Hull { vertices } => {
                0.5 * vertices
                    .iter()
                    .map(|v| v.get(0, 0) * gamma)
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Frobenius distance from `gamma` to the set.
    pub fn distance(&self, gamma: &SymMatrix) -> Result<f64> {
        let p = self.project(gamma)?;
        Ok(p.sub(gamma).frobenius_norm())
    }

    /// True iff `gamma` is within Frobenius distance `tol` of the set.
    pub fn contains(&self, gamma: &SymMatrix, tol: f64) -> Result<bool> {
        self.check_dim(gamma)?;
        if let Representation::Interval { r, big_r } = &self.repr {
            let g = gamma.get(0, 0);
            return Ok(g >= r - tol && g <= big_r + tol);
        }
        Ok(self.distance(gamma)? <= tol)
    }

    /// Euclidean (Frobenius) projection onto the set.
    pub fn project(&self, gamma: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(gamma)?;
        match &self.repr {
            Representation::Interval { r, big_r } => {
                Ok(SymMatrix::scalar(gamma.get(0, 0).clamp(*r, *big_r)))
            }
            Representation::Hull { vertices } => {
                let target = DVector::from_column_slice(gamma.as_matrix().as_slice());
                let points: Vec<DVector<f64>> = vertices
                    .iter()
                    .map(|v| DVector::from_column_slice(v.as_matrix().as_slice()) - &target)
                    .collect();
                let weights = min_norm_point(&points)?;
                let mut acc = DMatrix::zeros(self.dim, self.dim);
                for (w, v) in weights.iter().zip(vertices) {
                    acc += v.as_matrix() * *w;
                }
                Ok(SymMatrix::from_matrix(acc))
            }
        }
    }

    /// Vertices plus dyadic convex combinations of every vertex pair.
    ///
    /// `refinement = 0` gives the vertices, `1` adds midpoints, `k` adds the
    /// points `(1 - j/2^k) A + (j/2^k) B`.
    pub fn gamma_candidates(&self, refinement: u32) -> Vec<SymMatrix> {
        let verts = self.vertices();
        let mut out = verts.clone();
        let parts = 1usize << refinement.min(10);
        for i in 0..verts.len() {
            for j in (i + 1)..verts.len() {
                for m in 1..parts {
                    let t = m as f64 / parts as f64;
                    let c = verts[i].scaled(1.0 - t).add(&verts[j].scaled(t));
                    if !out.iter().any(|o| o.sub(&c).frobenius_norm() <= 1e-14) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }

    pub fn from_config(cfg: &UncertaintyConfig) -> Result<Self> {
        match cfg.kind {
            SetKind::Interval => {
                if cfg.dim != 1 {
                    return Err(Error::Config("interval sets require dim = 1".into()));
                }
                let r = cfg.r.ok_or_else(|| Error::Config("interval needs `r`".into()))?;
                let big_r = cfg.big_r.ok_or_else(|| Error::Config("interval needs `R`".into()))?;
                Self::interval(r, big_r).map_err(|e| Error::Config(e.to_string()))
            }
            SetKind::Hull => {
                let rows = cfg
                    .vertices
                    .as_ref()
                    .ok_or_else(|| Error::Config("hull needs `vertices`".into()))?;
                let verts = rows
                    .iter()
                    .map(|row| SymMatrix::from_row_major(cfg.dim, row))
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| Error::Config(e.to_string()))?;
                Self::hull(verts).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    pub fn to_config(&self) -> UncertaintyConfig {
        match &self.repr {
            Representation::Interval { r, big_r } => UncertaintyConfig {
                dim: 1,
                kind: SetKind::Interval,
                r: Some(*r),
                big_r: Some(*big_r),
                vertices: None,
            },
            Representation::Hull { vertices } => UncertaintyConfig {
                dim: self.dim,
                kind: SetKind::Hull,
                r: None,
                big_r: None,
                vertices: Some(vertices.iter().map(SymMatrix::to_row_major).collect()),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Interval,
    Hull,
}

/// Structured-text description of a set: `{dim, kind, r, R | vertices}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyConfig {
    pub dim: usize,
    pub kind: SetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    /// Row-major entries of each vertex.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
}

/// Minimum-norm point of the convex hull of `points` (Wolfe's active-set
/// method). Returns the convex weights.
fn min_norm_point(points: &[DVector<f64>]) -> Result<Vec<f64>> {
    let m = points.len();
    let scale = points.iter().map(|p| p.norm_squared()).fold(0.0_f64, f64::max).max(1e-300);
    let tol = 1e-15 * scale;
    let eps = 1e-14;

    let start = (0..m)
        .min_by(|&a, &b| points[a].norm_squared().total_cmp(&points[b].norm_squared()))
        .unwrap();
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();

    let combine = |active: &[usize], w: &[f64]| {
        let mut acc = DVector::zeros(points[0].len());
        for (&i, &wi) in active.iter().zip(w) {
            acc += &points[i] * wi;
        }
        acc
    };

    for _ in 0..PROJECTION_MAX_ITER {
        let (j, ip) = (0..m)
            .map(|i| (i, x.dot(&points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let xx = x.norm_squared();
        if xx - ip <= tol || active.contains(&j) {
            let mut full = vec![0.0; m];
            for (&i, &w) in active.iter().zip(&lambda) {
                full[i] += w;
            }
            return Ok(full);
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            let alpha = affine_min_norm(points, &active);
            if alpha.iter().all(|&a| a > eps) {
                lambda = alpha;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, a) in lambda.iter().zip(&alpha) {
                if *a <= eps {
                    let denom = l - a;
                    if denom > 0.0 {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            // Drop the (at least one) vanishing weight.
            let min_idx = (0..lambda.len())
                .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]))
                .unwrap();
            let mut keep: Vec<bool> = lambda.iter().map(|&l| l > eps).collect();
            keep[min_idx] = false;
            let mut k = 0;
            active.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            let mut k = 0;
            lambda.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            if active.is_empty() {
                active.push(j);
                lambda.push(1.0);
            }
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
            if active.len() == 1 {
                break;
            }
        }
        x = combine(&active, &lambda);
    }
    Err(Error::ProjectionDiverged {
        iterations: PROJECTION_MAX_ITER,
        residual: x.norm(),
    })
}

/// Weights `alpha` with `sum alpha = 1` minimizing `|sum alpha_i p_i|`.
fn affine_min_norm(points: &[DVector<f64>], active: &[usize]) -> Vec<f64> {
    let k = active.len();
    let mut sys = DMatrix::zeros(k + 1, k + 1);
    let mut rhs = DVector::zeros(k + 1);
    for a in 0..k {
        for b in 0..k {
            sys[(a, b)] = points[active[a]].dot(&points[active[b]]);
        }
        sys[(a, k)] = 1.0;
        sys[(k, a)] = 1.0;
    }
    rhs[k] = 1.0;
    let svd = sys.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-13)
        .unwrap_or_else(|_| DVector::from_element(k + 1, 1.0 / k as f64));
    (0..k).map(|i| sol[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_diag() -> UncertaintySet {
        UncertaintySet::hull(vec![SymMatrix::diag(&[1.0, 2.0]), SymMatrix::diag(&[3.0, 1.0])]).unwrap()
    }

    #[test]
    fn support_function_interval() {
        let d = UncertaintySet::interval(1.0, 4.0).unwrap();
        assert_eq!(d.support_function(&SymMatrix::scalar(2.0)).unwrap(), 4.0);
        assert_eq!(d.support_function(&SymMatrix::scalar(-2.0)).unwrap(), -1.0);
        assert_eq!(d.support_function(&SymMatrix::scalar(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn support_function_hull_matches_dense_combinations() {
        let d = two_diag();
        let gamma = SymMatrix::diag(&[1.0, 0.0]);
        let g = d.support_function(&gamma).unwrap();
        let verts = d.vertices();
        let dense = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                verts[0].scaled(1.0 - t).add(&verts[1].scaled(t)).trace_product(&gamma) / 2.0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(g, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(g, dense, epsilon = 1e-12);
        assert_eq!(d.support_function(&SymMatrix::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn support_function_dimension_mismatch() {
        let d = two_diag();
        assert!(matches!(
            d.support_function(&SymMatrix::scalar(1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spectrum_bounds_examples() {
        assert_eq!(UncertaintySet::interval(1.0, 4.0).unwrap().spectrum_bounds(), (1.0, 4.0));
        let (r, big_r) = two_diag().spectrum_bounds();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(big_r, 3.0, epsilon = 1e-12);
        let sing = UncertaintySet::hull(vec![SymMatrix::diag(&[0.0, 1.0])]).unwrap();
        assert_eq!(sing.spectrum_bounds(), (0.0, 1.0));
    }

    #[test]
    fn rejects_non_psd_vertex() {
        let bad = SymMatrix::from_row_major(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(UncertaintySet::hull(vec![bad]), Err(Error::NotPsd { .. })));
        assert!(UncertaintySet::interval(2.0, 1.0).is_err());
        assert!(UncertaintySet::hull(vec![]).is_err());
    }

    #[test]
    fn scale_examples() {
        let d = UncertaintySet::interval(1.0, 4.0).unwrap();
        assert_eq!(d.scale(0.25).unwrap().spectrum_bounds(), (0.25, 1.0));
        assert_eq!(d.scale(1.0).unwrap(), d);
        let h = UncertaintySet::hull(vec![SymMatrix::diag(&[1.0, 2.0])]).unwrap();
        assert_eq!(h.scale(0.5).unwrap().vertices(), vec![SymMatrix::diag(&[0.5, 1.0])]);
        assert!(d.scale(0.0).is_err());
        assert!(d.scale(-1.0).is_err());
    }

    #[test]
    fn contains_examples() {
        let d = UncertaintySet::interval(1.0, 4.0).unwrap();
        assert!(d.contains(&SymMatrix::scalar(2.0), 0.0).unwrap());
        assert!(!d.contains(&SymMatrix::scalar(5.0), 0.0).unwrap());
        assert!(two_diag().contains(&SymMatrix::diag(&[2.0, 1.5]), 1e-9).unwrap());
        assert!(!two_diag().contains(&SymMatrix::diag(&[2.0, 2.0]), 1e-9).unwrap());
    }

    #[test]
    fn project_examples() {
        let d = UncertaintySet::interval(1.0, 4.0).unwrap();
        assert_eq!(d.project(&SymMatrix::scalar(5.0)).unwrap(), SymMatrix::scalar(4.0));
        assert_eq!(d.project(&SymMatrix::scalar(2.0)).unwrap(), SymMatrix::scalar(2.0));
        let single = UncertaintySet::hull(vec![SymMatrix::identity(2)]).unwrap();
        let p = single.project(&SymMatrix::diag(&[3.0, 0.0])).unwrap();
        assert_abs_diff_eq!(p.sub(&SymMatrix::identity(2)).frobenius_norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn project_onto_segment_interior() {
        // Nearest point of the segment diag(1,2)--diag(3,1) to diag(3,3).
        // Parametrize A(t) = diag(1+2t, 2-t); minimize (2t-2)^2 + (t+1)^2 -> t = 0.6.
        let p = two_diag().project(&SymMatrix::diag(&[3.0, 3.0])).unwrap();
        assert_abs_diff_eq!(p.get(0, 0), 2.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.get(1, 1), 1.4, epsilon = 1e-12);
    }

    #[test]
    fn project_is_idempotent() {
        let d = UncertaintySet::hull(vec![
            SymMatrix::identity(2),
            SymMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).unwrap(),
            SymMatrix::diag(&[0.5, 3.0]),
        ])
        .unwrap();
        let g = SymMatrix::from_row_major(2, &[4.0, -1.0, -1.0, 0.0]).unwrap();
        let p = d.project(&g).unwrap();
        let pp = d.project(&p).unwrap();
        assert_abs_diff_eq!(p.sub(&pp).frobenius_norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn matrix_sqrt_examples() {
        let s = matrix_sqrt(&SymMatrix::diag(&[4.0, 9.0])).unwrap();
        assert_abs_diff_eq!(s.sub(&SymMatrix::diag(&[2.0, 3.0])).frobenius_norm(), 0.0, epsilon = 1e-12);
        let i = matrix_sqrt(&SymMatrix::identity(3)).unwrap();
        assert_abs_diff_eq!(i.sub(&SymMatrix::identity(3)).frobenius_norm(), 0.0, epsilon = 1e-12);
        let g = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = matrix_sqrt(&g).unwrap();
        assert!(s.square().sub(&g).frobenius_norm() < 1e-10);
        let (vals, _) = s.eigen();
        assert_abs_diff_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn matrix_sqrt_rejects_negative() {
        let g = SymMatrix::diag(&[1.0, -1e-6]);
        assert!(matches!(matrix_sqrt(&g), Err(Error::NotPsd { .. })));
        // Float noise below the tolerance is clipped.
        assert!(matrix_sqrt(&SymMatrix::diag(&[1.0, -1e-10])).is_ok());
    }

    #[test]
    fn config_roundtrip() {
        let text = "dim = 2\nkind = \"hull\"\nvertices = [[1.0, 0.0, 0.0, 2.0], [3.0, 0.0, 0.0, 1.0]]\n";
        let cfg: UncertaintyConfig = toml::from_str(text).unwrap();
        let d = UncertaintySet::from_config(&cfg).unwrap();
        assert_eq!(d, two_diag());
        let cfg: UncertaintyConfig = toml::from_str("dim = 1\nkind = \"interval\"\nr = 1.0\nR = 4.0\n").unwrap();
        assert_eq!(UncertaintySet::from_config(&cfg).unwrap().spectrum_bounds(), (1.0, 4.0));
        let bad: UncertaintyConfig = toml::from_str("dim = 2\nkind = \"interval\"\nr = 1.0\nR = 4.0\n").unwrap();
        assert!(matches!(UncertaintySet::from_config(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn gamma_candidates_include_midpoints() {
        let d = UncertaintySet::interval(1.0, 4.0).unwrap();
        let c: Vec<f64> = d.gamma_candidates(1).iter().map(|m| m.get(0, 0)).collect();
        assert_eq!(c, vec![1.0, 4.0, 2.5]);
        assert_eq!(d.gamma_candidates(2).len(), 5);
        let deg = UncertaintySet::interval(2.0, 2.0).unwrap();
        assert_eq!(deg.gamma_candidates(3).len(), 1);
    }
}
