use serde::Serialize;

use crate::error::{NmfError, Result};
use crate::matrix::{
    dot, norm2, normalize_columns_l1, numeric_rank, svd, DenseMatrix, DEFAULT_RANK_TOL,
};

use super::hull::{contains, convex_hull, intersect_halfplanes, signed_area, HalfPlane};

/// Planar picture of a rank-3 exact NMF problem: the normalized columns
/// (inner points) inside the slice of the simplex by `col(M)` (outer
/// polygon), in orthonormal coordinates centered at the mean normalized
/// column.
#[derive(Clone, Debug, Serialize)]
pub struct NppInstance {
    pub inner: Vec<[f64; 2]>,
    /// Counterclockwise vertices of the outer polygon.
    pub outer: Vec<[f64; 2]>,
    /// For each outer edge (starting at the vertex of the same index), the
    /// row `i` whose constraint `x_i ≥ 0` supports it.
    pub outer_facets: Vec<usize>,
    /// Origin of the plane coordinates (length `p`).
    pub anchor: Vec<f64>,
    /// `p × 2` orthonormal basis of the direction space.
    pub basis: DenseMatrix,
}

impl NppInstance {
    /// Plane point `z` mapped back to `ℝᵖ`.
    pub fn lift(&self, z: [f64; 2]) -> Vec<f64> {
        (0..self.anchor.len())
            .map(|i| self.anchor[i] + self.basis[(i, 0)] * z[0] + self.basis[(i, 1)] * z[1])
            .collect()
    }

    /// Indices of the inner points on their convex hull, counterclockwise.
    pub fn inner_hull(&self) -> Vec<usize> {
        convex_hull(&self.inner)
    }

    pub fn inner_circumradius(&self) -> f64 {
        max_radius(&self.inner)
    }

    pub fn outer_circumradius(&self) -> f64 {
        max_radius(&self.outer)
    }

    /// Inner over outer circumradius, both measured from the anchor.
    pub fn ratio(&self) -> f64 {
        self.inner_circumradius() / self.outer_circumradius()
    }

    /// Whether all inner points lie in the outer polygon up to `tol`.
    pub fn nested(&self, tol: f64) -> bool {
        self.inner.iter().all(|&z| contains(&self.outer, z, tol))
    }
}

fn max_radius(pts: &[[f64; 2]]) -> f64 {
    pts.iter().map(|z| z[0].hypot(z[1])).fold(0.0, f64::max)
}

/// Builds the nested-polygon instance of a nonnegative rank-3 matrix.
pub fn npp_extract(m: &DenseMatrix) -> Result<NppInstance> {
    m.check_nonnegative()?;
    if let Some(j) = m.column_l1_norms().iter().position(|&s| s == 0.0) {
        return Err(NmfError::ZeroColumn(j));
    }
    let rank = numeric_rank(m, DEFAULT_RANK_TOL)?;
    if rank != 3 {
        return Err(NmfError::InvalidArgument(format!(
            "nested polygon extraction needs rank 3, got {rank}"
        )));
    }
    let nd = normalize_columns_l1(m)?;
    let y = &nd.normalized;
    let (p, n) = y.shape();
    let anchor: Vec<f64> = (0..p).map(|i| y.row(i).iter().sum::<f64>() / n as f64).collect();
    let centered = DenseMatrix::from_fn(p, n, |i, j| y[(i, j)] - anchor[i]);
    let dec = svd(&centered)?;
    let basis = DenseMatrix::from_fn(p, 2, |i, k| dec.u[(i, k)]);

    let inner: Vec<[f64; 2]> = (0..n)
        .map(|j| {
            let c = centered.col(j);
            [dot(&c, &basis.col(0)), dot(&c, &basis.col(1))]
        })
        .collect();

    // x = anchor + B z ≥ 0  ⇔  −B(i,:) z ≤ anchor_i.
    let planes: Vec<HalfPlane> = (0..p)
        .map(|i| HalfPlane {
            normal: [-basis[(i, 0)], -basis[(i, 1)]],
            offset: anchor[i],
        })
        .collect();
    let (outer, outer_facets) = intersect_halfplanes(&planes)?;
    debug_assert!(signed_area(&outer) > 0.0);
    debug_assert!(norm2(&basis.col(0)) > 0.0);
    Ok(NppInstance {
        inner,
        outer,
        outer_facets,
        anchor,
        basis,
    })
}
