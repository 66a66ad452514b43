//! Benchmark suites behind `nmfkit bench`. Each suite runs one experiment
//! per seed and judges the collected metrics.

use nalgebra::DVector;
use nmfkit::exact::rank_plus_estimate;
use nmfkit::geometry::{hexagon_matrix, npp_extract};
use nmfkit::hsi::{generate_synthetic, score, unmix, UnmixMethod, UnmixOptions};
use nmfkit::matrix::normalize_columns_l1;
use nmfkit::nmf::{factorize, Algorithm, NmfConfig};
use nmfkit::nnls::{nnls_fast_gradient, NnlsConfig};
use nmfkit::rng::SeededRng;
use nmfkit::separable::{project_row, self_dictionary, spa, SelfDictConfig};
use nmfkit::{DenseMatrix, Result};
use rayon::prelude::*;
use serde::Serialize;

pub type Metrics = Vec<(&'static str, f64)>;

pub struct Suite {
    pub name: &'static str,
    pub about: &'static str,
    run: fn(u64) -> Result<Metrics>,
    judge: fn(&[(u64, Metrics)]) -> (bool, String),
}

#[derive(Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: &'static str,
    pub seeds: usize,
    pub passed: bool,
    pub note: String,
}

pub const SUITES: &[Suite] = &[
    Suite { name: "nmf", about: "MU/HALS trace monotonicity, 50x40, r=5, 500 iterations", run: nmf_seed, judge: judge_nmf },
    Suite { name: "nnls", about: "fast gradient vs support enumeration, 10x3", run: nnls_seed, judge: judge_nnls },
    Suite { name: "projection", about: "row projection vs diagonal grid, 20 rows of length 6", run: projection_seed, judge: judge_projection },
    Suite { name: "spa", about: "noiseless planted recovery, p=20, r=5, n=100", run: spa_seed, judge: judge_spa },
    Suite { name: "selfdict", about: "agreement with SPA and outlier picks at 30 dB", run: selfdict_seed, judge: judge_selfdict },
    Suite { name: "hexagon", about: "nonnegative rank ladder of M_a, a = 2, 3, 4, 10", run: hexagon_seed, judge: judge_hexagon },
    Suite { name: "npp", about: "inner/outer circumradius ratio of M_a", run: npp_seed, judge: judge_npp },
    Suite { name: "hsi", about: "SPA unmixing, p=100, 50x50, r=5, 40 dB", run: hsi_seed, judge: judge_hsi },
];

pub fn find(name: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.name == name)
}

/// Runs `suite` on `seeds` in parallel; rows come back in seed order.
pub fn run_suite(suite: &Suite, seeds: &[u64]) -> Result<(Vec<(u64, Metrics)>, SuiteSummary)> {
    let rows: Vec<(u64, Metrics)> = seeds
        .par_iter()
        .map(|&s| (suite.run)(s).map(|m| (s, m)))
        .collect::<Result<_>>()?;
    let (passed, note) = (suite.judge)(&rows);
    Ok((
        rows,
        SuiteSummary {
            suite: suite.name,
            seeds: seeds.len(),
            passed,
            note,
        },
    ))
}

fn metric(m: &Metrics, key: &str) -> f64 {
    m.iter().find(|(k, _)| *k == key).map_or(f64::NAN, |(_, v)| *v)
}

fn count(rows: &[(u64, Metrics)], key: &str, pred: impl Fn(f64) -> bool) -> usize {
    rows.iter().filter(|(_, m)| pred(metric(m, key))).count()
}

fn worst(rows: &[(u64, Metrics)], key: &str) -> f64 {
    rows.iter().map(|(_, m)| metric(m, key)).fold(f64::NEG_INFINITY, f64::max)
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// Largest increase between consecutive trace entries.
fn max_increase(trace: &[(usize, f64)]) -> f64 {
    trace.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max)
}

fn nmf_seed(seed: u64) -> Result<Metrics> {
    let m = SeededRng::stream(seed, 0).uniform_matrix(50, 40);
    let mut out = Vec::new();
    for (alg, key) in [(Algorithm::Mu, "mu_max_increase"), (Algorithm::Hals, "hals_max_increase")] {
        let cfg = NmfConfig::new(5, alg).with_seed(seed).with_iters(500).with_tol(0.0);
        out.push((key, max_increase(&factorize(&m, &cfg)?.trace)));
    }
    Ok(out)
}

fn judge_nmf(rows: &[(u64, Metrics)]) -> (bool, String) {
    let (mu, hals) = (worst(rows, "mu_max_increase"), worst(rows, "hals_max_increase"));
    (mu <= 1e-12 && hals <= 1e-12, format!("largest step increase MU {mu:e}, HALS {hals:e}"))
}

/// Least objective over all supports of a single-column problem.
fn enumerate_nnls(a: &DenseMatrix, b: &[f64]) -> f64 {
    let an = a.to_nalgebra();
    let bn = DVector::from_column_slice(b);
    let mut best = bn.norm_squared();
    for mask in 1u32..(1 << a.cols()) {
        let cols: Vec<usize> = (0..a.cols()).filter(|k| mask & (1 << k) != 0).collect();
        let sub = an.select_columns(&cols);
        if let Ok(x) = sub.clone().svd(true, true).solve(&bn, 1e-14) {
            if x.iter().all(|&v| v >= 0.0) {
                best = best.min((&bn - sub * x).norm_squared());
            }
        }
    }
    best
}

fn nnls_seed(seed: u64) -> Result<Metrics> {
    let mut rng = SeededRng::stream(seed, 1);
    let a = rng.uniform_matrix(10, 3);
    let b = rng.normal_matrix(10, 1);
    let cfg = NnlsConfig { max_iters: 5000, tol: 1e-12, restart: true };
    let x = nnls_fast_gradient(&a, &b, &DenseMatrix::zeros(3, 1), &cfg)?;
    let got = a.matmul(&x)?.sub(&b)?.frobenius_norm().powi(2);
    let want = enumerate_nnls(&a, &b.col(0));
    Ok(vec![("relative_gap", (got - want).abs() / want.max(f64::MIN_POSITIVE))])
}

fn judge_nnls(rows: &[(u64, Metrics)]) -> (bool, String) {
    let w = worst(rows, "relative_gap");
    (w <= 1e-6, format!("worst relative objective gap {w:e}"))
}

fn projection_seed(seed: u64) -> Result<Metrics> {
    let mut rng = SeededRng::stream(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let row: Vec<f64> = (0..6).map(|_| rng.uniform_range(-0.5, 1.5)).collect();
        let diag = rng.index(6);
        let mut got = row.clone();
        project_row(&mut got, diag);
        // Scan the diagonal value on a 1e-4 grid with clamped off-diagonals.
        let mut best = (f64::INFINITY, vec![]);
        for s in 0..=10_000 {
            let d = s as f64 * 1e-4;
            let cand: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(j, &v)| if j == diag { d } else { v.clamp(0.0, d) })
                .collect();
            let dist: f64 = cand.iter().zip(&row).map(|(a, b)| (a - b).powi(2)).sum();
            if dist < best.0 {
                best = (dist, cand);
            }
        }
        let gap: f64 = got.iter().zip(&best.1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(gap);
    }
    Ok(vec![("max_distance", worst)])
}

fn judge_projection(rows: &[(u64, Metrics)]) -> (bool, String) {
    let w = worst(rows, "max_distance");
    (w < 1e-3, format!("largest distance to grid oracle {w:e}"))
}

/// Planted separable matrix (uniform column-normalized `U`, Dirichlet
/// mixtures), optional noise and Dirichlet outlier columns appended last.
fn planted(seed: u64, outliers: usize, snr_db: Option<f64>) -> (DenseMatrix, Vec<usize>, Vec<usize>) {
    let (p, r, n) = (20, 5, 100);
    let mut rng = SeededRng::stream(seed, 3);
    let mut u = rng.uniform_matrix(p, r);
    for k in 0..r {
        let c = u.col(k);
        let s: f64 = c.iter().sum();
        u.set_col(k, &c.iter().map(|x| x / s).collect::<Vec<_>>());
    }
    let k = rng.sample_distinct(n, r);
    let mut v = DenseMatrix::zeros(r, n);
    for j in 0..n {
        v.set_col(j, &rng.dirichlet(r, 1.0));
    }
    for (e, &j) in k.iter().enumerate() {
        v.set_col(j, &(0..r).map(|i| flag(i == e)).collect::<Vec<_>>());
    }
    let clean = u.matmul(&v).expect("dims");
    let m = match snr_db {
        Some(db) => {
            let sigma = clean.frobenius_norm() / ((p * n) as f64 * 10f64.powf(db / 10.0)).sqrt();
            let noise = rng.normal_matrix(p, n);
            DenseMatrix::from_fn(p, n, |i, j| (clean[(i, j)] + sigma * noise[(i, j)]).max(0.0))
        }
        None => clean,
    };
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| m.col(j)).collect();
    let out: Vec<usize> = (n..n + outliers).collect();
    for _ in 0..outliers {
        cols.push(rng.dirichlet(p, 1.0));
    }
    (DenseMatrix::from_columns(&cols).expect("columns"), k, out)
}

fn spa_seed(seed: u64) -> Result<Metrics> {
    let (m, k, _) = planted(seed, 0, None);
    let got = spa(&normalize_columns_l1(&m)?.normalized, 5)?;
    Ok(vec![("recovered", flag(sorted(got) == sorted(k)))])
}

fn judge_spa(rows: &[(u64, Metrics)]) -> (bool, String) {
    let c = count(rows, "recovered", |v| v == 1.0);
    (c == rows.len(), format!("recovered {c}/{}", rows.len()))
}

fn selfdict_seed(seed: u64) -> Result<Metrics> {
    let (m, _, _) = planted(seed, 0, None);
    let mn = normalize_columns_l1(&m)?.normalized;
    let a = sorted(spa(&mn, 5)?);
    let b = sorted(self_dictionary(&mn, &SelfDictConfig::auto(&mn, 5)?, 5)?.k);
    let (m, _, out) = planted(seed, 2, Some(30.0));
    let mn = normalize_columns_l1(&m)?.normalized;
    let hit = |k: &[usize]| flag(k.iter().any(|j| out.contains(j)));
    let spa_out = hit(&spa(&mn, 5)?);
    let sd_out = hit(&self_dictionary(&mn, &SelfDictConfig::auto(&mn, 5)?, 5)?.k);
    Ok(vec![("agrees_with_spa", flag(a == b)), ("spa_outlier", spa_out), ("selfdict_outlier", sd_out)])
}

fn judge_selfdict(rows: &[(u64, Metrics)]) -> (bool, String) {
    let agree = count(rows, "agrees_with_spa", |v| v == 1.0);
    let spa_out = count(rows, "spa_outlier", |v| v == 1.0);
    let sd_out = count(rows, "selfdict_outlier", |v| v == 1.0);
    (
        agree == rows.len() && sd_out < spa_out,
        format!("agreement {agree}/{n}; outlier picks SPA {spa_out}/{n}, selfdict {sd_out}/{n}", n = rows.len()),
    )
}

const LADDER: [(f64, usize, &str); 4] = [(2.0, 3, "upper_a2"), (3.0, 4, "upper_a3"), (4.0, 5, "upper_a4"), (10.0, 5, "upper_a10")];

fn hexagon_seed(seed: u64) -> Result<Metrics> {
    LADDER
        .iter()
        .map(|&(a, _, key)| Ok((key, rank_plus_estimate(&hexagon_matrix(a)?, 6, 200, seed)?.upper as f64)))
        .collect()
}

fn judge_hexagon(rows: &[(u64, Metrics)]) -> (bool, String) {
    let ok = LADDER
        .iter()
        .all(|&(_, want, key)| count(rows, key, |v| v == want as f64) == rows.len());
    (ok, "expected upper bounds 3, 4, 5, 5".into())
}

fn npp_seed(_seed: u64) -> Result<Metrics> {
    [(2.0, "error_a2"), (3.0, "error_a3"), (5.0, "error_a5"), (10.0, "error_a10")]
        .iter()
        .map(|&(a, key)| Ok((key, (npp_extract(&hexagon_matrix(a)?)?.ratio() - (a - 1.0) / a).abs())))
        .collect()
}

fn judge_npp(rows: &[(u64, Metrics)]) -> (bool, String) {
    let w = ["error_a2", "error_a3", "error_a5", "error_a10"]
        .iter()
        .map(|k| worst(rows, k))
        .fold(0.0, f64::max);
    (w <= 1e-9, format!("largest ratio error {w:e}"))
}

fn hsi_seed(seed: u64) -> Result<Metrics> {
    let (cube, truth) = generate_synthetic(100, 50, 50, 5, true, Some(40.0), seed)?;
    let res = unmix(&cube, 5, &UnmixOptions::new(UnmixMethod::Spa).with_refine(true))?;
    let sc = score(&res, &truth)?;
    Ok(vec![
        ("index_recovery", sc.index_recovery.unwrap_or(f64::NAN)),
        ("abundance_rmse", sc.abundance_rmse),
        ("spectral_angle_mean", sc.spectral_angle_mean),
    ])
}

fn judge_hsi(rows: &[(u64, Metrics)]) -> (bool, String) {
    let full = count(rows, "index_recovery", |v| v == 1.0);
    let rmse = worst(rows, "abundance_rmse");
    (
        full * 20 >= rows.len() * 19 && rmse < 0.05,
        format!("full recovery {full}/{}; worst abundance RMSE {rmse:.4}", rows.len()),
    )
}
