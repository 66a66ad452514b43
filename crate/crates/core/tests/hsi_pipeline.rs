use nmfkit::hsi::{generate_synthetic, score, unmix, UnmixMethod, UnmixOptions, UnmixResult};
use nmfkit::rng::SeededRng;
use nmfkit::DenseMatrix;

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

#[test]
fn generated_snr_is_close_to_target() {
    for seed in 0..3 {
        let (cube, truth) = generate_synthetic(100, 50, 50, 5, true, Some(40.0), seed).unwrap();
        let snr = truth.empirical_snr_db(&cube).unwrap();
        assert!((snr - 40.0).abs() < 0.5, "seed {seed}: {snr} dB");
        for j in 0..truth.v.cols() {
            let s: f64 = truth.v.col(j).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn every_method_finds_pure_pixels_without_noise() {
    let (cube, truth) = generate_synthetic(40, 20, 20, 4, true, None, 5).unwrap();
    let pure = sorted(truth.pure_pixels.clone().unwrap());
    for method in [UnmixMethod::Spa, UnmixMethod::SpaMve, UnmixMethod::SelfDict] {
        let res = unmix(&cube, 4, &UnmixOptions::new(method)).unwrap();
        assert_eq!(sorted(res.k.clone()), pure, "{method}");
        assert!(res.residual < 1e-6, "{method}: {}", res.residual);
        let sc = score(&res, &truth).unwrap();
        assert_eq!(sc.index_recovery, Some(1.0));
    }
}

#[test]
fn refined_spa_unmixing_at_forty_db() {
    for seed in 0..4 {
        let (cube, truth) = generate_synthetic(100, 50, 50, 5, true, Some(40.0), 10 + seed).unwrap();
        let plain = unmix(&cube, 5, &UnmixOptions::new(UnmixMethod::Spa)).unwrap();
        let refined = unmix(&cube, 5, &UnmixOptions::new(UnmixMethod::Spa).with_refine(true)).unwrap();
        assert!(refined.residual <= plain.residual);
        let sc = score(&refined, &truth).unwrap();
        assert!(sc.abundance_rmse < 0.05, "seed {seed}: {}", sc.abundance_rmse);
        assert_eq!(score(&plain, &truth).unwrap().index_recovery, Some(1.0));
    }
}

#[test]
fn score_rmse_tracks_injected_abundance_noise() {
    let (_, truth) = generate_synthetic(30, 20, 20, 4, true, None, 2).unwrap();
    let mut rng = SeededRng::new(9);
    let noise = rng.normal_matrix(truth.v.rows(), truth.v.cols()).scaled(1e-3);
    let v = DenseMatrix::from_fn(truth.v.rows(), truth.v.cols(), |i, j| truth.v[(i, j)] + noise[(i, j)]);
    let res = UnmixResult {
        u: truth.u.clone(),
        v,
        k: truth.pure_pixels.clone().unwrap(),
        residual: 0.0,
        r: 4,
    };
    let sc = score(&res, &truth).unwrap();
    assert!((0.5e-3..=2e-3).contains(&sc.abundance_rmse), "{}", sc.abundance_rmse);
    assert!(sc.spectral_angle_mean < 1e-6);
}
