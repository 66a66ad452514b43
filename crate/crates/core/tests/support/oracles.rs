//! Reference solutions computed by brute force, independent of the library
//! algorithms they check.

use nalgebra::{DMatrix, DVector};
use nmfkit::DenseMatrix;

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// `½‖b − A x‖²`... reported without the half: `‖b − A x‖²`.
pub fn ls_objective(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    (0..a.rows())
        .map(|i| {
            let ax: f64 = (0..a.cols()).map(|k| a[(i, k)] * x[k]).sum();
            (b[i] - ax).powi(2)
        })
        .sum()
}

/// Single-column NNLS by enumerating every support pattern: least squares on
/// each subset of columns, keep the feasible candidate of least objective.
pub fn nnls_enumeration(a: &DenseMatrix, b: &[f64]) -> (Vec<f64>, f64) {
    let r = a.cols();
    let an = to_na(a);
    let bn = DVector::from_column_slice(b);
    let mut best = (vec![0.0; r], ls_objective(a, b, &vec![0.0; r]));
    for mask in 1u32..(1 << r) {
        let cols: Vec<usize> = (0..r).filter(|k| mask & (1 << k) != 0).collect();
        let sub = an.select_columns(&cols);
        let Ok(sol) = sub.svd(true, true).solve(&bn, 1e-14) else { continue };
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let mut x = vec![0.0; r];
        for (i, &k) in cols.iter().enumerate() {
            x[k] = sol[i];
        }
        let f = ls_objective(a, b, &x);
        if f < best.1 {
            best = (x, f);
        }
    }
    best
}

/// Column-wise [`nnls_enumeration`] objective summed over `B`.
pub fn nnls_enumeration_objective(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (0..b.cols()).map(|j| nnls_enumeration(a, &b.col(j)).1).sum()
}

/// Minimizer of `‖r − u v‖²` over `u ≥ 0` coordinate by coordinate on a
/// grid of `steps + 1` points spanning `[0, hi]`.
pub fn hals_column_grid(rk: &DenseMatrix, v: &[f64], hi: f64, steps: usize) -> Vec<f64> {
    (0..rk.rows())
        .map(|i| {
            let row = rk.row(i);
            let f = |u: f64| row.iter().zip(v).map(|(x, w)| (x - u * w).powi(2)).sum::<f64>();
            (0..=steps)
                .map(|s| hi * s as f64 / steps as f64)
                .min_by(|a, b| f(*a).total_cmp(&f(*b)))
                .unwrap()
        })
        .collect()
}

/// Projection onto `{0 ≤ x_j ≤ x_diag ≤ 1}` by scanning the diagonal value
/// on a grid of resolution `step`, off-diagonals clamped to `[0, d]`.
pub fn projection_grid(row: &[f64], diag: usize, step: f64) -> Vec<f64> {
    let steps = (1.0 / step).round() as usize;
    let build = |d: f64| -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| if j == diag { d } else { v.clamp(0.0, d) })
            .collect()
    };
    let dist = |p: &[f64]| p.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..=steps)
        .map(|s| build(s as f64 / steps as f64))
        .min_by(|a, b| dist(a).total_cmp(&dist(b)))
        .unwrap()
}

/// Projection by bisection on the derivative of the convex objective in the
/// diagonal value `d`; exact to machine precision.
pub fn projection_bisect(row: &[f64], diag: usize) -> Vec<f64> {
    // d ↦ (d − x_diag) + Σ_{j ≠ diag, x_j > d} (d − x_j), nondecreasing.
    let slope = |d: f64| -> f64 {
        row.iter()
            .enumerate()
            .map(|(j, &v)| if j == diag { d - v } else if v > d { d - v } else { 0.0 })
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let d = if slope(0.0) >= 0.0 {
        0.0
    } else if slope(1.0) <= 0.0 {
        1.0
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    row.iter()
        .enumerate()
        .map(|(j, &v)| if j == diag { d } else { v.clamp(0.0, d) })
        .collect()
}

/// Objective `tr(X) + μ‖M − M_C X‖²` with `X` indexed by candidate rows.
pub fn selfdict_objective(m: &DenseMatrix, cand: &[usize], mu: f64, x: &DenseMatrix) -> f64 {
    let mc = m.select_columns(cand);
    let fit = m.sub(&mc.matmul(x).unwrap()).unwrap().frobenius_norm().powi(2);
    let tr: f64 = cand.iter().enumerate().map(|(i, &c)| x[(i, c)]).sum();
    tr + mu * fit
}

/// FISTA with function-value restart on the self-dictionary program from
/// `starts` random feasible points; returns the best point found.
pub fn selfdict_multistart(
    m: &DenseMatrix,
    cand: &[usize],
    mu: f64,
    starts: usize,
    seed: u64,
) -> (DenseMatrix, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = m.cols();
    let c = cand.len();
    let mc = m.select_columns(cand);
    let g = mc.t_matmul(&mc).unwrap();
    let gm = mc.t_matmul(m).unwrap();
    let lip = 2.0 * mu * to_na(&g).symmetric_eigenvalues().max() * 1.0001;
    let project = |y: &DenseMatrix| {
        let mut out = DenseMatrix::zeros(c, n);
        for i in 0..c {
            out.set_row(i, &projection_bisect(y.row(i), cand[i]));
        }
        out
    };
    let step = |y: &DenseMatrix| {
        let gy = g.matmul(y).unwrap();
        let moved = DenseMatrix::from_fn(c, n, |i, j| {
            let grad = 2.0 * mu * (gy[(i, j)] - gm[(i, j)]) + if j == cand[i] { 1.0 } else { 0.0 };
            y[(i, j)] - grad / lip
        });
        project(&moved)
    };
    let mut best: Option<(DenseMatrix, f64)> = None;
    for _ in 0..starts {
        let mut x = project(&DenseMatrix::from_fn(c, n, |_, _| rng.random::<f64>()));
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut fx = selfdict_objective(m, cand, mu, &x);
        for _ in 0..100_000 {
            let mut next = step(&y);
            let mut fn_ = selfdict_objective(m, cand, mu, &next);
            if fn_ > fx {
                // Momentum overshot: restart from a plain step at x.
                t = 1.0;
                next = step(&x);
                fn_ = selfdict_objective(m, cand, mu, &next);
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            let change = next.sub(&x).unwrap().frobenius_norm();
            y = DenseMatrix::from_fn(c, n, |i, j| next[(i, j)] + beta * (next[(i, j)] - x[(i, j)]));
            x = next;
            fx = fn_;
            t = t_next;
            if change < 1e-12 {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| fx < b.1) {
            best = Some((x, fx));
        }
    }
    best.unwrap()
}

/// `det(AᵀA)` for the selected columns.
pub fn gram_det(m: &DenseMatrix, k: &[usize]) -> f64 {
    let a = to_na(&m.select_columns(k));
    (a.transpose() * &a).determinant()
}
