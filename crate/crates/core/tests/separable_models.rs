mod support;

use nmfkit::geometry::hexagon_matrix;
use nmfkit::matrix::normalize_columns_l1;
use nmfkit::rng::SeededRng;
use nmfkit::separable::{
    abundances, project_row, refine_vertices, self_dictionary, solve_self_dictionary, spa, spa_mve,
    SelfDictConfig,
};
use nmfkit::DenseMatrix;
use support::{instances, oracles};

fn normalized(m: &DenseMatrix) -> DenseMatrix {
    normalize_columns_l1(m).unwrap().normalized
}

#[test]
fn spa_on_hexagon_follows_greedy_volume_rule() {
    let m = normalized(&hexagon_matrix(2.0).unwrap());
    let k = spa(&m, 3).unwrap();
    // Exhaustive check over all prefixes extended by one column.
    for t in 1..=3 {
        let best = (0..6)
            .filter(|j| !k[..t - 1].contains(j))
            .map(|j| {
                let mut s = k[..t - 1].to_vec();
                s.push(j);
                oracles::gram_det(&m, &s)
            })
            .fold(0.0, f64::max);
        let got = oracles::gram_det(&m, &k[..t]);
        assert!(got >= best * (1.0 - 1e-9), "step {t}: {got} < {best}");
    }
}

#[test]
fn spa_recovers_planted_columns() {
    for seed in 0..50 {
        let inst = instances::separable(seed, 20, 5, 100, 0, None);
        let k = spa(&normalized(&inst.m), 5).unwrap();
        assert_eq!(instances::sorted(k), instances::sorted(inst.k), "seed {seed}");
    }
}

#[test]
fn noisy_abundance_fit_is_within_noise_level() {
    for seed in 0..10 {
        let inst = instances::separable(100 + seed, 20, 5, 100, 0, Some(30.0));
        let v = abundances(&inst.m, &inst.k).unwrap();
        let res = inst.m.sub(&inst.m.select_columns(&inst.k).matmul(&v).unwrap()).unwrap().frobenius_norm();
        assert!(res <= 1.1 * inst.noise_norm, "seed {seed}: {res} vs {}", inst.noise_norm);
    }
}

#[test]
fn refinement_on_near_ties_never_loses_volume() {
    for seed in 0..20 {
        let inst = instances::separable(200 + seed, 20, 5, 60, 0, None);
        // Duplicate one planted vertex with a 1e-3 perturbation.
        let mut rng = SeededRng::stream(seed, 7);
        let dup: Vec<f64> = inst.m.col(inst.k[0]).iter().map(|x| (x + 1e-3 * rng.normal()).max(0.0)).collect();
        let mut cols: Vec<Vec<f64>> = (0..inst.m.cols()).map(|j| inst.m.col(j)).collect();
        cols.push(dup);
        let m = normalized(&DenseMatrix::from_columns(&cols).unwrap());
        let mut starts = vec![spa(&m, 5).unwrap()];
        let mut swapped = inst.k.clone();
        swapped[0] = m.cols() - 1;
        starts.push(swapped);
        for k in starts {
            let refined = refine_vertices(&m, &k).unwrap();
            assert!(oracles::gram_det(&m, &refined) >= oracles::gram_det(&m, &k) * (1.0 - 1e-12));
        }
    }
}

#[test]
fn refinement_keeps_planted_noiseless_picks() {
    for seed in 0..10 {
        let inst = instances::separable(300 + seed, 20, 5, 100, 0, None);
        let m = normalized(&inst.m);
        let k = spa(&m, 5).unwrap();
        assert_eq!(refine_vertices(&m, &k).unwrap(), k);
    }
}

#[test]
fn ellipsoid_preconditioning_helps_on_anisotropic_data() {
    let (mut plain, mut mve) = (0, 0);
    for seed in 0..50 {
        let (m, want) = instances::anisotropic_midpoints(seed, 0.1);
        let m = normalized(&m);
        plain += (instances::sorted(spa(&m, 5).unwrap()) == want) as usize;
        mve += (instances::sorted(spa_mve(&m, 5).unwrap()) == want) as usize;
    }
    assert!(mve >= plain, "SPA+MVE {mve}/50 vs SPA {plain}/50");
}

#[test]
fn projection_matches_grid_oracle() {
    let mut rng = SeededRng::new(77);
    for _ in 0..200 {
        let row: Vec<f64> = (0..6).map(|_| rng.uniform_range(-0.5, 1.5)).collect();
        let diag = rng.index(6);
        let mut got = row.clone();
        project_row(&mut got, diag);
        let want = oracles::projection_grid(&row, diag, 1e-4);
        let dist: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-3, "{row:?}: {got:?} vs {want:?}");
    }
}

#[test]
fn self_dictionary_with_all_candidates_finds_planted_diagonal() {
    let inst = instances::separable(11, 10, 3, 30, 0, None);
    let m = normalized(&inst.m);
    let cfg = SelfDictConfig::new((0..30).collect(), 1000.0);
    let sol = solve_self_dictionary(&m, &cfg).unwrap();
    let diag = sol.diagonal();
    for (j, d) in diag.iter().enumerate() {
        if inst.k.contains(&j) {
            assert!(*d > 0.9, "planted {j}: {d}");
        } else {
            assert!(*d < 0.1, "other {j}: {d}");
        }
    }
    let res = self_dictionary(&m, &cfg, 3).unwrap();
    assert_eq!(instances::sorted(res.k), instances::sorted(spa(&m, 3).unwrap()));
    // Feasibility holds exactly and the objective never increases.
    for i in 0..sol.x.rows() {
        let d = sol.x[(i, sol.candidates[i])];
        assert!((0.0..=1.0).contains(&d));
        assert!(sol.x.row(i).iter().all(|&v| v >= 0.0 && v <= d));
    }
    for w in sol.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn self_dictionary_matches_multistart_oracle_on_tiny_instance() {
    // Three simplex corners in ℝ³ plus one interior mixture.
    let m = normalized(
        &DenseMatrix::from_rows(&[
            [0.9, 0.05, 0.1, 0.4],
            [0.05, 0.8, 0.2, 0.3],
            [0.05, 0.15, 0.7, 0.3],
        ])
        .unwrap(),
    );
    let cand: Vec<usize> = (0..4).collect();
    for mu in [2.0, 10.0] {
        let mut cfg = SelfDictConfig::new(cand.clone(), mu);
        cfg.tol = 1e-14;
        cfg.max_iters = 200_000;
        let sol = solve_self_dictionary(&m, &cfg).unwrap();
        let got = oracles::selfdict_objective(&m, &cand, mu, &sol.x);
        let (_, want) = oracles::selfdict_multistart(&m, &cand, mu, 100, 5);
        assert!((got - want).abs() < 1e-6, "mu {mu}: {got} vs {want}");
    }
}
