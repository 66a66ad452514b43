mod support;

use nmfkit::exact::rank_plus_estimate;
use nmfkit::geometry::hull::signed_area;
use nmfkit::geometry::{npp_extract, slack_matrix, verify_lift, PolytopeH};
use nmfkit::matrix::residual;
use nmfkit::nnls::{hals_update_column, nnls_fast_gradient, NnlsConfig};
use nmfkit::rng::SeededRng;
use nmfkit::separable::{abundances, spa};
use nmfkit::DenseMatrix;
use proptest::prelude::*;

/// Convex polygon with vertices at sorted random angles on the unit circle.
fn random_polygon(seed: u64, n: usize) -> PolytopeH {
    let mut rng = SeededRng::new(seed);
    let tau = std::f64::consts::TAU;
    // Evenly spaced slots with bounded jitter keep every gap below π.
    let angles: Vec<f64> = (0..n)
        .map(|j| (j as f64 + 0.8 * rng.uniform()) * tau / n as f64)
        .collect();
    let w: Vec<Vec<f64>> = angles.iter().map(|t| vec![t.cos(), t.sin()]).collect();
    let mut a = DenseMatrix::zeros(n, 2);
    let mut b = vec![0.0; n];
    for j in 0..n {
        let (p, q) = (&w[j], &w[(j + 1) % n]);
        let normal = [q[1] - p[1], p[0] - q[0]];
        let len = normal[0].hypot(normal[1]);
        a[(j, 0)] = normal[0] / len;
        a[(j, 1)] = normal[1] / len;
        b[j] = a[(j, 0)] * p[0] + a[(j, 1)] * p[1];
    }
    PolytopeH::new(a, b, w).unwrap()
}

fn positive_product(seed: u64, p: usize, r: usize, n: usize) -> DenseMatrix {
    let mut rng = SeededRng::new(seed);
    let u = rng.uniform_matrix(p, r).map(|x| x + 0.1);
    let v = rng.uniform_matrix(r, n).map(|x| x + 0.1);
    u.matmul(&v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn slack_matrices_have_zeros_in_every_row_and_column(seed in any::<u64>(), n in 3usize..12) {
        let poly = random_polygon(seed, n);
        let s = slack_matrix(&poly).unwrap();
        prop_assert!(s.is_nonnegative());
        for i in 0..n {
            prop_assert!(s.row(i).contains(&0.0));
            prop_assert!(s.col(i).contains(&0.0));
        }
        let rep = verify_lift(&poly, &s, &DenseMatrix::identity(n)).unwrap();
        prop_assert!(rep.passed());
    }

    #[test]
    fn nested_polygons_for_rank_three_products(seed in any::<u64>(), p in 4usize..9, n in 4usize..12) {
        let m = positive_product(seed, p, 3, n);
        let inst = npp_extract(&m).unwrap();
        prop_assert!(inst.nested(1e-9));
        prop_assert!(inst.outer.len() >= 3 && inst.outer.len() <= p);
        prop_assert!(signed_area(&inst.outer) > 0.0);
        prop_assert!(inst.ratio() <= 1.0 + 1e-9);
    }

    #[test]
    fn rank_bracket_is_ordered(seed in any::<u64>(), r in 1usize..4) {
        let m = positive_product(seed, 6, r, 7);
        let est = rank_plus_estimate(&m, 6, 3, seed).unwrap();
        prop_assert!(est.lower <= est.upper);
        prop_assert_eq!(est.lower, r);
        if let Some(w) = &est.witness {
            prop_assert!(w.u.is_nonnegative() && w.v.is_nonnegative());
            prop_assert_eq!(w.rank(), est.upper);
        }
    }

    #[test]
    fn hals_column_update_never_increases_objective(seed in any::<u64>(), k in 0usize..3) {
        let mut rng = SeededRng::new(seed);
        let m = rng.uniform_matrix(7, 5);
        let mut u = rng.uniform_matrix(7, 3);
        let v = rng.uniform_matrix(3, 5);
        let before = residual(&m, &u, &v).unwrap();
        let col = hals_update_column(&m, &u, &v, k).unwrap();
        prop_assert!(col.iter().all(|&x| x >= 0.0));
        u.set_col(k, &col);
        prop_assert!(residual(&m, &u, &v).unwrap() <= before + 1e-12);
    }

    #[test]
    fn fast_gradient_is_monotone_from_any_start(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let a = rng.uniform_matrix(8, 3);
        let b = rng.normal_matrix(8, 4);
        let x0 = rng.uniform_matrix(3, 4);
        let x = nnls_fast_gradient(&a, &b, &x0, &NnlsConfig::default()).unwrap();
        let f = |x: &DenseMatrix| a.matmul(x).unwrap().sub(&b).unwrap().frobenius_norm();
        prop_assert!(x.is_nonnegative());
        prop_assert!(f(&x) <= f(&x0) * (1.0 + 1e-12));
    }

    #[test]
    fn spa_indices_are_distinct_and_abundances_nonnegative(seed in any::<u64>()) {
        let inst = support::instances::separable(seed, 12, 4, 30, 0, Some(25.0));
        let m = nmfkit::matrix::normalize_columns_l1(&inst.m).unwrap().normalized;
        let k = spa(&m, 4).unwrap();
        let mut s = k.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), 4);
        prop_assert!(abundances(&m, &k).unwrap().is_nonnegative());
    }
}
