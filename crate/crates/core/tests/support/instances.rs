//! Seeded planted-model instances shared by the integration and acceptance
//! tests.

use nmfkit::rng::SeededRng;
use nmfkit::DenseMatrix;

pub struct Planted {
    pub m: DenseMatrix,
    /// Column indices of the planted pure columns, endmember order.
    pub k: Vec<usize>,
    pub outliers: Vec<usize>,
    pub noise_norm: f64,
}

/// `p × (n + outliers)` separable matrix with column-normalized random
/// `U`, Dirichlet(1) mixtures, `r` pure columns at random positions,
/// optional Gaussian noise at `snr_db` (clamped at zero) and outlier columns
/// drawn uniformly from the unit simplex of `ℝᵖ`, appended at the end.
pub fn separable(seed: u64, p: usize, r: usize, n: usize, outliers: usize, snr_db: Option<f64>) -> Planted {
    let mut rng = SeededRng::new(seed);
    let mut u = rng.uniform_matrix(p, r);
    for k in 0..r {
        let col = u.col(k);
        let s: f64 = col.iter().sum();
        u.set_col(k, &col.iter().map(|x| x / s).collect::<Vec<_>>());
    }
    let k = rng.sample_distinct(n, r);
    let mut v = DenseMatrix::zeros(r, n);
    for j in 0..n {
        v.set_col(j, &rng.dirichlet(r, 1.0));
    }
    for (e, &j) in k.iter().enumerate() {
        v.set_col(j, &(0..r).map(|i| if i == e { 1.0 } else { 0.0 }).collect::<Vec<_>>());
    }
    let clean = u.matmul(&v).unwrap();
    let mut m = clean.clone();
    if let Some(db) = snr_db {
        let sigma = clean.frobenius_norm() / ((p * n) as f64 * 10f64.powf(db / 10.0)).sqrt();
        let noise = rng.normal_matrix(p, n).scaled(sigma);
        m = DenseMatrix::from_fn(p, n, |i, j| (clean[(i, j)] + noise[(i, j)]).max(0.0));
    }
    let noise_norm = m.sub(&clean).unwrap().frobenius_norm();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.col(j)).collect();
    let mut out = Vec::new();
    for _ in 0..outliers {
        out.push(cols.len());
        cols.push(rng.dirichlet(p, 1.0));
    }
    Planted {
        m: DenseMatrix::from_columns(&cols).unwrap(),
        k,
        outliers: out,
        noise_norm,
    }
}

/// Strictly positive random `p × n` matrix.
pub fn positive(seed: u64, p: usize, n: usize) -> DenseMatrix {
    SeededRng::new(seed).uniform_matrix(p, n).map(|x| x + 0.05)
}

pub fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Anisotropic endmembers `c + s_k d_k` (scales halving from 1) with all
/// pairwise midpoints pushed away from the vertex mean by `delta`, columns
/// shuffled. Returns the matrix and the sorted positions of the vertices.
pub fn anisotropic_midpoints(seed: u64, delta: f64) -> (DenseMatrix, Vec<usize>) {
    const SCALES: [f64; 5] = [1.0, 0.5, 0.25, 0.12, 0.06];
    let (p, r) = (20, SCALES.len());
    let mut rng = SeededRng::new(seed);
    let c = rng.uniform_matrix(p, 1);
    let d = rng.uniform_matrix(p, r);
    let u = DenseMatrix::from_fn(p, r, |i, k| c[(i, 0)] + SCALES[k] * d[(i, k)]);
    let mean: Vec<f64> = (0..p).map(|i| u.row(i).iter().sum::<f64>() / r as f64).collect();
    let mut cols: Vec<Vec<f64>> = (0..r).map(|k| u.col(k)).collect();
    for x in 0..r {
        for y in x + 1..r {
            cols.push(
                (0..p)
                    .map(|i| {
                        let mid = 0.5 * (u[(i, x)] + u[(i, y)]);
                        (mid + delta * (mid - mean[i])).max(0.0)
                    })
                    .collect(),
            );
        }
    }
    let perm = rng.permutation(cols.len());
    let m = DenseMatrix::from_columns(&perm.iter().map(|&j| cols[j].clone()).collect::<Vec<_>>()).unwrap();
    let k = (0..r).map(|v| perm.iter().position(|&j| j == v).unwrap()).collect();
    (m, sorted(k))
}
