//! Minimum-volume enclosing ellipsoid preconditioning for SPA.
//!
//! The origin-centered ellipsoid `{x : xᵀ A x ≤ 1}` of least volume covering
//! the reduced columns (and their negatives) is found with Khachiyan's
//! first-order algorithm. Whitening with `A^{1/2}` maps it to the unit ball,
//! which makes SPA's norm comparisons insensitive to anisotropic scaling.

use nalgebra::DMatrix;

use crate::error::{NmfError, Result};
use crate::matrix::{numeric_rank, DenseMatrix, DEFAULT_RANK_TOL};

use super::{pca_reduce, spa};

/// Relative volume tolerance for Khachiyan's algorithm.
pub const MVE_TOL: f64 = 1e-6;
pub const MVE_MAX_ITERS: usize = 10_000;

/// Result of the ellipsoid computation.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    /// Shape matrix `A` of `{x : xᵀ A x ≤ 1}`.
    pub shape: DenseMatrix,
    /// Symmetric whitening transform `A^{1/2}`.
    pub whitening: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
}

impl Ellipsoid {
    /// Semi-axis lengths, largest first.
    pub fn semi_axes(&self) -> Vec<f64> {
        let eig = self.shape.to_nalgebra().symmetric_eigen();
        let mut axes: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
        axes.sort_by(|a, b| b.total_cmp(a));
        axes
    }
}

/// Khachiyan's algorithm for the origin-centered minimum-volume ellipsoid
/// covering `±y_j`, `y_j` the columns of `points` (`d × n`), with
/// Todd–Yildirim away steps that shift weight off interior points.
pub fn khachiyan_centered(points: &DenseMatrix) -> Result<Ellipsoid> {
    let (d, n) = points.shape();
    if d == 0 || n == 0 {
        return Err(NmfError::EmptyMatrix);
    }
    if numeric_rank(points, DEFAULT_RANK_TOL)? < d {
        return Err(NmfError::Degenerate(format!(
            "points span fewer than {d} dimensions"
        )));
    }
    let cols: Vec<nalgebra::DVector<f64>> = (0..n)
        .map(|j| nalgebra::DVector::from_vec(points.col(j)))
        .collect();
    let dim = d as f64;
    let mut weights = vec![1.0 / n as f64; n];
    let mut scatter = DMatrix::<f64>::zeros(d, d);
    for (w, c) in weights.iter().zip(&cols) {
        scatter.ger(*w, c, c, 1.0);
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut kappa = vec![0.0; n];
    let mut x_inv;
    loop {
        x_inv = scatter
            .clone()
            .cholesky()
            .ok_or_else(|| NmfError::Degenerate("weighted scatter matrix is singular".into()))?
            .inverse();
        for (k, c) in kappa.iter_mut().zip(&cols) {
            *k = (c.transpose() * &x_inv * c)[(0, 0)];
        }
        let (up, k_up) = super::argmax_first(&kappa);
        if k_up <= dim * (1.0 + MVE_TOL) {
            converged = true;
            break;
        }
        if iterations >= MVE_MAX_ITERS {
            break;
        }
        // Away candidate: smallest κ among points carrying weight.
        let (down, k_down) = kappa
            .iter()
            .enumerate()
            .filter(|&(j, _)| weights[j] > 0.0)
            .fold((usize::MAX, f64::INFINITY), |acc, (j, &k)| if k < acc.1 { (j, k) } else { acc });
        let (j, step) = if k_up / dim - 1.0 >= 1.0 - k_down / dim {
            (up, (k_up - dim) / (dim * (k_up - 1.0)))
        } else {
            // Optimal negative step, clamped so the weight stays nonnegative.
            let floor = -weights[down] / (1.0 - weights[down]);
            let exact = if k_down > 1.0 {
                (k_down - dim) / (dim * (k_down - 1.0))
            } else {
                f64::NEG_INFINITY
            };
            (down, exact.max(floor))
        };
        weights.iter_mut().for_each(|w| *w *= 1.0 - step);
        weights[j] += step;
        if weights[j] < 1e-300 {
            weights[j] = 0.0;
        }
        scatter *= 1.0 - step;
        scatter.ger(step, &cols[j], &cols[j], 1.0);
        if iterations % 256 == 255 {
            scatter.fill(0.0);
            for (w, c) in weights.iter().zip(&cols) {
                if *w > 0.0 {
                    scatter.ger(*w, c, c, 1.0);
                }
            }
        }
        iterations += 1;
    }
    // Scale so every point is covered even before full convergence.
    let kmax = kappa.iter().copied().fold(0.0, f64::max);
    let shape = x_inv / kmax;
    let eig = shape.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let whitening = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
    Ok(Ellipsoid {
        shape: DenseMatrix::from_nalgebra(&shape),
        whitening: DenseMatrix::from_nalgebra(&whitening),
        iterations,
        converged,
    })
}

/// Whitening transform `L` (`r × r`) for reduced coordinates `coords`
/// (`r × n`, e.g. from [`pca_reduce`]); SPA is then run on `L · coords`.
pub fn mve_precondition(coords: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    if r < 2 {
        return Err(NmfError::InvalidArgument(
            "ellipsoid preconditioning needs r >= 2".into(),
        ));
    }
    if coords.rows() != r {
        return Err(crate::error::dim_err(
            "mve_precondition",
            format!("expected {r} reduced coordinates, got {}", coords.rows()),
        ));
    }
    Ok(khachiyan_centered(coords)?.whitening)
}

/// SPA on the rank-`r` reduced, ellipsoid-whitened columns of `M`.
pub fn spa_mve(m: &DenseMatrix, r: usize) -> Result<Vec<usize>> {
    let reduced = pca_reduce(m, r)?;
    let l = mve_precondition(&reduced.coords, r)?;
    spa(&l.matmul(&reduced.coords)?, r)
}
