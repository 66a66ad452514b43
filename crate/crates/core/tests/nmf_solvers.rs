mod support;

use nmfkit::geometry::hexagon_matrix_inf;
use nmfkit::matrix::relative_residual;
use nmfkit::nmf::{factorize, hals_step, mu_step, Algorithm, NmfConfig};
use nmfkit::nnls::{hals_update_column, nnls_fast_gradient, NnlsConfig};
use nmfkit::rng::SeededRng;
use nmfkit::DenseMatrix;
use support::oracles;

fn tight() -> NnlsConfig {
    NnlsConfig { max_iters: 5000, tol: 1e-12, restart: true }
}

#[test]
fn fast_gradient_matches_sign_pattern_enumeration() {
    for seed in 0..10 {
        let mut rng = SeededRng::new(1000 + seed);
        let a = rng.uniform_matrix(10, 3);
        let b = rng.normal_matrix(10, 4);
        let x = nnls_fast_gradient(&a, &b, &DenseMatrix::zeros(3, 4), &tight()).unwrap();
        let got = a.matmul(&x).unwrap().sub(&b).unwrap().frobenius_norm().powi(2);
        let want = oracles::nnls_enumeration_objective(&a, &b);
        assert!((got - want).abs() <= 1e-6 * want.max(1e-300), "seed {seed}: {got} vs {want}");
        assert!(x.is_nonnegative());
    }
}

#[test]
fn hals_column_matches_coordinate_grid() {
    let mut rng = SeededRng::new(42);
    let m = rng.uniform_matrix(6, 4);
    let u = rng.uniform_matrix(6, 3);
    let v = rng.uniform_matrix(3, 4);
    let k = 2;
    let got = hals_update_column(&m, &u, &v, k).unwrap();
    // R_k built by hand, independent of the library's residual bookkeeping.
    let rk = DenseMatrix::from_fn(6, 4, |i, j| {
        m[(i, j)] - (0..3).filter(|&q| q != k).map(|q| u[(i, q)] * v[(q, j)]).sum::<f64>()
    });
    let hi = 4.0;
    let steps = 400_000;
    let grid = oracles::hals_column_grid(&rk, v.row(k), hi, steps);
    for (g, o) in got.iter().zip(&grid) {
        assert!((g - o).abs() <= hi / steps as f64, "{g} vs {o}");
    }
}

fn random_pair(seed: u64, p: usize, n: usize, r: usize) -> (DenseMatrix, NmfConfig) {
    let m = SeededRng::new(seed).uniform_matrix(p, n);
    (m, NmfConfig::new(r, Algorithm::Hals).with_seed(seed))
}

#[test]
fn hals_beats_mu_on_most_seeds() {
    let mut wins = 0;
    for seed in 0..25 {
        let (m, cfg) = random_pair(seed, 20, 15, 4);
        let cfg = cfg.with_iters(200).with_tol(0.0);
        let hals = factorize(&m, &cfg).unwrap().relative_residual();
        let mu = factorize(&m, &NmfConfig { algorithm: Algorithm::Mu, ..cfg }).unwrap().relative_residual();
        if hals <= mu {
            wins += 1;
        }
    }
    assert!(wins >= 20, "HALS won {wins}/25");
}

#[test]
fn hals_stationary_points_are_sparse() {
    let mut sparse = 0;
    for seed in 0..20 {
        let (m, cfg) = random_pair(500 + seed, 20, 15, 4);
        let model = factorize(&m, &cfg.with_iters(5000).with_tol(1e-10)).unwrap();
        let zero = |x: &DenseMatrix| x.as_slice().contains(&0.0);
        if zero(&model.u) || zero(&model.v) {
            sparse += 1;
        }
    }
    assert!(sparse >= 18, "exact zeros in {sparse}/20 runs");
}

#[test]
fn traces_are_monotone_and_deterministic() {
    for alg in [Algorithm::Mu, Algorithm::Hals] {
        let m = SeededRng::new(3).uniform_matrix(12, 10);
        let cfg = NmfConfig::new(3, alg).with_seed(9).with_iters(300).with_tol(0.0);
        let a = factorize(&m, &cfg).unwrap();
        let b = factorize(&m, &cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 301);
        for w in a.trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12, "{alg}: {:?}", w);
        }
        assert!(a.u.is_nonnegative() && a.v.is_nonnegative());
    }
}

#[test]
fn mu_zero_entries_stay_zero_through_many_steps() {
    let mut rng = SeededRng::new(17);
    let m = rng.uniform_matrix(8, 6);
    let mut u = rng.uniform_matrix(8, 2);
    let mut v = rng.uniform_matrix(2, 6);
    u[(3, 1)] = 0.0;
    v[(0, 4)] = 0.0;
    for _ in 0..100 {
        (u, v) = mu_step(&m, &u, &v, 1e-16).unwrap();
        assert_eq!(u[(3, 1)], 0.0);
        assert_eq!(v[(0, 4)], 0.0);
    }
}

#[test]
fn hals_sweep_never_increases_objective() {
    let mut rng = SeededRng::new(5);
    let m = rng.uniform_matrix(10, 8);
    let mut u = rng.uniform_matrix(10, 3);
    let mut v = rng.uniform_matrix(3, 8);
    let mut prev = relative_residual(&m, &u, &v).unwrap();
    for _ in 0..100 {
        (u, v) = hals_step(&m, &u, &v).unwrap();
        let now = relative_residual(&m, &u, &v).unwrap();
        assert!(now <= prev + 1e-12);
        prev = now;
    }
}

#[test]
fn limiting_hexagon_factorizes_exactly_at_rank_five() {
    let m = hexagon_matrix_inf();
    let best = (0..50)
        .map(|s| {
            let cfg = NmfConfig::new(5, Algorithm::Hals).with_seed(s).with_iters(5000).with_tol(0.0);
            factorize(&m, &cfg).unwrap().relative_residual()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-9, "best relative residual {best}");
}
