//! Separable NMF: find `r` columns `K` of `M` with `M ≈ M(:,K) V`, `V ≥ 0`.
//!
//! Geometric route: [`spa`] (greedy norm maximization with orthogonal
//! projection), optionally after [`pca_denoise`] or the minimum-volume
//! ellipsoid preconditioner in [`mve`], and followed by [`refine_vertices`].
//! Convex route: the trace-minimization self-dictionary model in
//! [`selfdict`].

pub mod mve;
pub mod selfdict;

use serde::{Deserialize, Serialize};

use crate::error::{NmfError, Result};
use crate::matrix::{dot, normalize_columns_l1, residual, svd, DenseMatrix};
use crate::nnls::{nnls_fast_gradient, NnlsConfig};

pub use mve::{mve_precondition, spa_mve, Ellipsoid};
pub use selfdict::{
    default_penalty, preselect_candidates, project_row, self_dictionary, solve_self_dictionary, SelfDictConfig,
    SelfDictSolution,
};

/// Selected columns, their abundances and the fit residual.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparableResult {
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(skip)]
    pub v: DenseMatrix,
    /// `‖M − M(:,K) V‖_F`.
    pub residual: f64,
    pub r: usize,
}

impl SeparableResult {
    /// Computes abundances for `k` and packages the result.
    pub fn from_indices(m: &DenseMatrix, k: Vec<usize>) -> Result<Self> {
        let v = abundances(m, &k)?;
        let res = residual(m, &m.select_columns(&k), &v)?;
        Ok(SeparableResult {
            r: k.len(),
            k,
            v,
            residual: res,
        })
    }
}

/// Column selection methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spa,
    SpaMve,
    #[serde(rename = "selfdict")]
    SelfDict,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spa => "spa",
            Method::SpaMve => "spa-mve",
            Method::SelfDict => "selfdict",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spa" => Ok(Method::Spa),
            "spa-mve" | "spa+mve" => Ok(Method::SpaMve),
            "selfdict" => Ok(Method::SelfDict),
            other => Err(NmfError::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Full selection pipeline on raw data: ℓ1-normalize (zero columns are
/// skipped), optionally project on the leading `r`-dimensional subspace,
/// select with `method`, optionally re-examine the picks with
/// [`refine_vertices`]. Indices refer to the columns of `m`.
pub fn select_columns(m: &DenseMatrix, r: usize, method: Method, denoise: bool, refine: bool) -> Result<Vec<usize>> {
    if r == 0 {
        return Err(NmfError::InvalidArgument("r must be >= 1".into()));
    }
    let nd = normalize_columns_l1(m)?;
    if nd.kept.len() < r {
        return Err(NmfError::RankDeficient { found: vec![] });
    }
    let work = if denoise {
        pca_denoise(&nd.normalized, r)?
    } else {
        nd.normalized
    };
    let mut local = match method {
        Method::Spa => spa(&work, r)?,
        Method::SpaMve => spa_mve(&work, r)?,
        Method::SelfDict => self_dictionary(&work, &SelfDictConfig::auto(&work, r)?, r)?.k,
    };
    if refine {
        local = refine_vertices(&work, &local)?;
    }
    Ok(local.into_iter().map(|j| nd.kept[j]).collect())
}

/// [`select_columns`] followed by abundances on the raw data.
pub fn separable_nmf(m: &DenseMatrix, r: usize, method: Method, denoise: bool, refine: bool) -> Result<SeparableResult> {
    SeparableResult::from_indices(m, select_columns(m, r, method, denoise, refine)?)
}

/// Relative size (against the largest initial column norm) below which the
/// projected residual counts as zero in [`spa`].
const SPA_ZERO_TOL: f64 = 1e-12;

/// Column-major working copy: one `Vec` per column.
fn columns_of(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.cols()).map(|j| m.col(j)).collect()
}

/// Successive projection algorithm.
///
/// Repeatedly picks the column of largest ℓ2 norm (lowest index on ties) and
/// projects every column onto the orthogonal complement of the pick. Expects
/// column-ℓ1-normalized input. If the residual vanishes before `r` picks,
/// returns [`NmfError::RankDeficient`] carrying the indices found so far.
pub fn spa(m: &DenseMatrix, r: usize) -> Result<Vec<usize>> {
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    if r == 0 || r > m.cols() {
        return Err(NmfError::InvalidArgument(format!(
            "spa: r = {r} must be in 1..={}",
            m.cols()
        )));
    }
    let mut cols = columns_of(m);
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max).sqrt();
    let mut picked = Vec::with_capacity(r);
    for _ in 0..r {
        let (best, best_sq) = argmax_first(&norms);
        if !(best_sq.sqrt() > SPA_ZERO_TOL * scale) {
            return Err(NmfError::RankDeficient { found: picked });
        }
        picked.push(best);
        let nrm = best_sq.sqrt();
        let u: Vec<f64> = cols[best].iter().map(|v| v / nrm).collect();
        for (c, n) in cols.iter_mut().zip(norms.iter_mut()) {
            let proj = dot(&u, c);
            for (x, ui) in c.iter_mut().zip(&u) {
                *x -= proj * ui;
            }
            *n = dot(c, c);
        }
    }
    Ok(picked)
}

/// Index of the first maximum and the maximum itself.
pub(crate) fn argmax_first(values: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if v > best_val {
            best = j;
            best_val = v;
        }
    }
    (best, best_val)
}

/// Best rank-`k` approximation of `M` by truncated SVD.
pub fn pca_denoise(m: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let reduced = pca_reduce(m, k)?;
    reduced.basis.matmul(&reduced.coords)
}

/// Rank-`k` coordinates of the columns of `M` in its leading left singular
/// subspace.
#[derive(Clone, Debug)]
pub struct PcaReduction {
    /// `p × k` orthonormal basis.
    pub basis: DenseMatrix,
    /// `k × n` coordinates, `basisᵀ M`.
    pub coords: DenseMatrix,
}

pub fn pca_reduce(m: &DenseMatrix, k: usize) -> Result<PcaReduction> {
    let limit = m.rows().min(m.cols());
    if k == 0 || k > limit {
        return Err(NmfError::InvalidArgument(format!(
            "pca rank {k} must be in 1..={limit}"
        )));
    }
    let d = svd(m)?;
    let basis = DenseMatrix::from_fn(m.rows(), k, |i, c| d.u[(i, c)]);
    let coords = DenseMatrix::from_fn(k, m.cols(), |c, j| d.singular_values[c] * d.v[(j, c)]);
    Ok(PcaReduction { basis, coords })
}

/// Orthonormal basis (as columns in a `Vec`) of the span of the listed
/// columns, by modified Gram–Schmidt with reorthogonalization.
fn orthonormal_basis(cols: &[Vec<f64>], idx: &[usize]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(idx.len());
    for &j in idx {
        let mut v = cols[j].clone();
        let orig = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let n = dot(&v, &v).sqrt();
        if n > 1e-14 * orig.max(f64::MIN_POSITIVE) {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
    }
    basis
}

fn residual_sq_norms(cols: &[Vec<f64>], basis: &[Vec<f64>]) -> Vec<f64> {
    cols.iter()
        .map(|c| {
            let mut v = c.clone();
            for q in basis {
                let coef = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= coef * qi);
            }
            dot(&v, &v)
        })
        .collect()
}

/// Maximum number of full passes in [`refine_vertices`].
pub const REFINE_MAX_PASSES: usize = 10;

/// Re-examines each selected vertex: with the other `r−1` picks projected
/// out, a column whose residual norm strictly exceeds the current pick's
/// replaces it. Each swap strictly increases the Gram determinant of the
/// selected columns.
pub fn refine_vertices(m: &DenseMatrix, k: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = k.iter().find(|&&j| j >= m.cols()) {
        return Err(NmfError::InvalidArgument(format!("column index {bad} out of range")));
    }
    let cols = columns_of(m);
    let mut picks = k.to_vec();
    for _ in 0..REFINE_MAX_PASSES {
        let mut swapped = false;
        for pos in 0..picks.len() {
            let others: Vec<usize> = picks
                .iter()
                .enumerate()
                .filter(|&(q, _)| q != pos)
                .map(|(_, &j)| j)
                .collect();
            let basis = orthonormal_basis(&cols, &others);
            let norms = residual_sq_norms(&cols, &basis);
            let (best, best_val) = argmax_first(&norms);
            if best != picks[pos] && best_val > norms[picks[pos]] && !others.contains(&best) {
                picks[pos] = best;
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    Ok(picks)
}

/// `det(M(:,K)ᵀ M(:,K))`, the squared volume criterion SPA greedily grows.
pub fn gram_determinant(m: &DenseMatrix, k: &[usize]) -> f64 {
    let a = m.select_columns(k);
    let g = a.t_matmul(&a).expect("square");
    g.to_nalgebra().determinant()
}

/// Solver settings used for abundance estimation.
pub const ABUNDANCE_NNLS: NnlsConfig = NnlsConfig {
    max_iters: 1000,
    tol: 1e-9,
    restart: true,
};

/// Nonnegative abundances `V = argmin_{V ≥ 0} ‖M − M(:,K) V‖_F`.
///
/// Warm-started from the clamped unconstrained least-squares solution.
pub fn abundances(m: &DenseMatrix, k: &[usize]) -> Result<DenseMatrix> {
    if k.is_empty() {
        return Err(NmfError::InvalidArgument("empty index set".into()));
    }
    if let Some(&bad) = k.iter().find(|&&j| j >= m.cols()) {
        return Err(NmfError::InvalidArgument(format!("column index {bad} out of range")));
    }
    let a = m.select_columns(k);
    if a.max_abs() == 0.0 {
        return Err(NmfError::Degenerate("selected columns are all zero".into()));
    }
    let x0 = least_squares_clamped(&a, m);
    nnls_fast_gradient(&a, m, &x0, &ABUNDANCE_NNLS)
}

/// `max(0, A⁺ B)` via the SVD pseudo-inverse.
pub(crate) fn least_squares_clamped(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let dec = a.to_nalgebra().svd(true, true);
    let eps = 1e-12 * dec.singular_values.max();
    match dec.solve(&b.to_nalgebra(), eps) {
        Ok(x) => DenseMatrix::from_nalgebra(&x).map(|v| if v.is_finite() { v.max(0.0) } else { 0.0 }),
        Err(_) => DenseMatrix::zeros(a.cols(), b.cols()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::normalize_columns_l1;
    use crate::rng::SeededRng;

    /// `[I_r, A]` with `A` columns random convex combinations of `I_r`.
    fn simplex_with_interior(r: usize, extra: usize, seed: u64) -> DenseMatrix {
        let mut rng = SeededRng::new(seed);
        let mut cols: Vec<Vec<f64>> = (0..r)
            .map(|i| (0..r).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..extra {
            cols.push(rng.dirichlet(r, 1.0));
        }
        DenseMatrix::from_columns(&cols).unwrap()
    }

    #[test]
    fn spa_finds_simplex_vertices() {
        let m = simplex_with_interior(4, 20, 1);
        let mut k = spa(&m, 4).unwrap();
        k.sort();
        assert_eq!(k, vec![0, 1, 2, 3]);
    }

    #[test]
    fn spa_signals_rank_deficiency() {
        let m = simplex_with_interior(3, 10, 2);
        match spa(&m, 4) {
            Err(NmfError::RankDeficient { found }) => assert_eq!(found.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(spa(&m, 0).is_err());
    }

    #[test]
    fn spa_breaks_ties_by_lowest_index() {
        let m = DenseMatrix::from_rows(&[[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(spa(&m, 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn spa_is_permutation_equivariant() {
        let mut rng = SeededRng::new(7);
        let u = rng.uniform_matrix(10, 4);
        let v = rng.uniform_matrix(4, 30);
        let m = normalize_columns_l1(&u.matmul(&v).unwrap()).unwrap().normalized;
        let perm = rng.permutation(30);
        let mp = m.select_columns(&perm);
        let k = spa(&m, 4).unwrap();
        let kp = spa(&mp, 4).unwrap();
        let mapped: Vec<usize> = kp.iter().map(|&j| perm[j]).collect();
        assert_eq!(mapped, k);
        assert_eq!(spa(&m, 4).unwrap(), k);
    }

    #[test]
    fn pca_denoise_cases() {
        let mut rng = SeededRng::new(3);
        let u = rng.uniform_matrix(8, 3);
        let v = rng.uniform_matrix(3, 10);
        let m = u.matmul(&v).unwrap();
        let d = pca_denoise(&m, 3).unwrap();
        assert!(d.sub(&m).unwrap().max_abs() < 1e-10);

        let a: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.uniform()).collect();
        let r1 = DenseMatrix::from_fn(8, 10, |i, j| a[i] * b[j]);
        assert!(pca_denoise(&r1, 1).unwrap().sub(&r1).unwrap().max_abs() < 1e-12);

        let noise = rng.normal_matrix(8, 10).scaled(1e-2);
        let noisy = DenseMatrix::from_fn(8, 10, |i, j| m[(i, j)] + noise[(i, j)]);
        let den = pca_denoise(&noisy, 3).unwrap();
        assert!(den.sub(&m).unwrap().frobenius_norm() < noise.frobenius_norm());

        assert!(pca_denoise(&m, 0).is_err());
        assert!(pca_denoise(&m, 9).is_err());
    }

    #[test]
    fn refine_keeps_optimal_picks() {
        let m = simplex_with_interior(4, 15, 4);
        let k = spa(&m, 4).unwrap();
        assert_eq!(refine_vertices(&m, &k).unwrap(), k);
    }

    #[test]
    fn refine_repairs_bad_pick_and_grows_volume() {
        let m = simplex_with_interior(3, 10, 5);
        // Column 5 is interior; refinement should swap it for vertex 2.
        let k = vec![0, 1, 5];
        let refined = refine_vertices(&m, &k).unwrap();
        let mut sorted = refined.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
        assert!(gram_determinant(&m, &refined) > gram_determinant(&m, &k));
    }

    #[test]
    fn abundances_of_separable_matrix() {
        let m = simplex_with_interior(4, 12, 6);
        let v = abundances(&m, &[0, 1, 2, 3]).unwrap();
        let res = residual(&m, &m.select_columns(&[0, 1, 2, 3]), &v).unwrap();
        assert!(res < 1e-8);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn abundances_full_square_is_identity() {
        let mut rng = SeededRng::new(9);
        let m = rng.uniform_matrix(5, 5).map(|v| v + 0.1);
        let v = abundances(&m, &[0, 1, 2, 3, 4]).unwrap();
        assert!(v.sub(&DenseMatrix::identity(5)).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn abundances_rejects_zero_columns() {
        let m = DenseMatrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(abundances(&m, &[0]).is_err());
        assert!(abundances(&m, &[]).is_err());
    }
}
