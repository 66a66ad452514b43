//! Synthetic hyperspectral unmixing under the linear mixing model.
//!
//! A cube is stored as `p × n` reflectances, one column per pixel, `n =
//! width · height`. Pixels are `U · v_j` with `v_j` on the unit simplex,
//! plus clamped Gaussian noise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NmfError, Result};
use crate::io::{read_matrix, write_csv};
use crate::matrix::{relative_residual, DenseMatrix};
use crate::nmf::{factorize_from, Algorithm, NmfConfig};
use crate::rng::SeededRng;
use crate::separable::{abundances, select_columns};

#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    pub width: usize,
    pub height: usize,
    /// `p × (width · height)` reflectances.
    pub m: DenseMatrix,
    /// `None` for a noiseless cube.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl HsiCube {
    pub fn new(width: usize, height: usize, m: DenseMatrix) -> Result<Self> {
        if m.rows() == 0 || width == 0 || height == 0 {
            return Err(NmfError::EmptyMatrix);
        }
        if m.cols() != width * height {
            return Err(crate::error::dim_err(
                "HsiCube",
                format!("{} pixels for a {width}x{height} image", m.cols()),
            ));
        }
        m.check_nonnegative()?;
        Ok(HsiCube {
            width,
            height,
            m,
            snr_db: None,
            seed: 0,
        })
    }

    pub fn bands(&self) -> usize {
        self.m.rows()
    }

    pub fn pixels(&self) -> usize {
        self.m.cols()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    /// `p × r` endmember spectra.
    pub u: DenseMatrix,
    /// `r × n` abundances, columns summing to one.
    pub v: DenseMatrix,
    pub pure_pixels: Option<Vec<usize>>,
    pub snr_db: Option<f64>,
}

impl GroundTruth {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    /// Noiseless cube `U V`.
    pub fn clean(&self) -> DenseMatrix {
        self.u.matmul(&self.v).expect("ground truth dimensions agree")
    }

    /// `10 log₁₀(‖UV‖² / ‖M − UV‖²)`, infinite for a noiseless cube.
    pub fn empirical_snr_db(&self, cube: &HsiCube) -> Result<f64> {
        let clean = self.clean();
        let noise = cube.m.sub(&clean)?.frobenius_norm();
        Ok(20.0 * (clean.frobenius_norm() / noise).log10())
    }
}

/// Smooth positive spectrum: a baseline plus 3 to 6 Gaussian bumps, scaled
/// to a peak reflectance of 1.
fn spectrum(p: usize, rng: &mut SeededRng) -> Vec<f64> {
    let baseline = rng.uniform_range(0.05, 0.2);
    let bumps: Vec<(f64, f64, f64)> = (0..3 + rng.index(4))
        .map(|_| {
            (
                rng.uniform(),
                rng.uniform_range(0.03, 0.15),
                rng.uniform_range(0.2, 1.0),
            )
        })
        .collect();
    let scale = (p.max(2) - 1) as f64;
    let mut s: Vec<f64> = (0..p)
        .map(|i| {
            let t = i as f64 / scale;
            baseline
                + bumps
                    .iter()
                    .map(|&(c, w, a)| a * (-(t - c).powi(2) / (2.0 * w * w)).exp())
                    .sum::<f64>()
        })
        .collect();
    let peak = s.iter().copied().fold(0.0, f64::max);
    s.iter_mut().for_each(|x| *x /= peak);
    s
}

/// Synthetic cube and its ground truth, deterministic in `seed`.
///
/// Abundances are Dirichlet(1); with `pure`, `r` distinct random pixels are
/// replaced by unit abundance vectors. `snr_db = None` gives a noiseless
/// cube; otherwise Gaussian noise is added at that SNR and the result is
/// clamped at zero.
pub fn generate_synthetic(
    p: usize,
    width: usize,
    height: usize,
    r: usize,
    pure: bool,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<(HsiCube, GroundTruth)> {
    let n = width * height;
    if p == 0 || n == 0 {
        return Err(NmfError::EmptyMatrix);
    }
    if r == 0 || r > p.min(n) {
        return Err(NmfError::InvalidArgument(format!(
            "r = {r} must lie in 1..={}",
            p.min(n)
        )));
    }
    if snr_db.is_some_and(|s| !s.is_finite()) {
        return Err(NmfError::InvalidArgument("SNR must be finite (use none for noiseless)".into()));
    }
    let mut spec_rng = SeededRng::stream(seed, 0);
    let cols: Vec<Vec<f64>> = (0..r).map(|_| spectrum(p, &mut spec_rng)).collect();
    let u = DenseMatrix::from_columns(&cols)?;

    let mut ab_rng = SeededRng::stream(seed, 1);
    let mut v = DenseMatrix::zeros(r, n);
    for j in 0..n {
        let a = ab_rng.dirichlet(r, 1.0);
        for (k, x) in a.into_iter().enumerate() {
            v[(k, j)] = x;
        }
    }
    let pure_pixels = pure.then(|| {
        let mut pick = SeededRng::stream(seed, 2);
        let idx = pick.sample_distinct(n, r);
        for (k, &j) in idx.iter().enumerate() {
            for kk in 0..r {
                v[(kk, j)] = if kk == k { 1.0 } else { 0.0 };
            }
        }
        idx
    });

    let mut m = u.matmul(&v)?;
    if let Some(db) = snr_db {
        let sigma = m.frobenius_norm() / ((p * n) as f64 * 10f64.powf(db / 10.0)).sqrt();
        let mut noise_rng = SeededRng::stream(seed, 3);
        for x in m.as_mut_slice() {
            *x = (*x + sigma * noise_rng.normal()).max(0.0);
        }
    }
    let cube = HsiCube {
        width,
        height,
        m,
        snr_db,
        seed,
    };
    let truth = GroundTruth {
        u,
        v,
        pure_pixels,
        snr_db,
    };
    Ok((cube, truth))
}

/// Pixel selection methods, shared with [`crate::separable`].
pub use crate::separable::Method as UnmixMethod;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnmixOptions {
    pub method: UnmixMethod,
    /// Project normalized pixels on their leading `r`-dimensional subspace
    /// before selection.
    pub denoise: bool,
    /// HALS refinement from `(M(:,K), V)`.
    pub refine: bool,
    pub refine_iters: usize,
}

impl UnmixOptions {
    pub fn new(method: UnmixMethod) -> Self {
        UnmixOptions {
            method,
            denoise: false,
            refine: false,
            refine_iters: 200,
        }
    }

    pub fn with_denoise(mut self, on: bool) -> Self {
        self.denoise = on;
        self
    }

    pub fn with_refine(mut self, on: bool) -> Self {
        self.refine = on;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnmixResult {
    #[serde(skip)]
    pub u: DenseMatrix,
    #[serde(skip)]
    pub v: DenseMatrix,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    /// Relative residual `‖M − UV‖_F / ‖M‖_F`.
    pub residual: f64,
    pub r: usize,
}

/// Selects `r` pixels on the normalized (optionally denoised) cube, fits
/// abundances on the raw cube and optionally refines with HALS.
///
/// After refinement every component is rescaled so its spectrum keeps the
/// ℓ1 norm of the selected pixel, which keeps abundances on the scale of
/// the data.
pub fn unmix(cube: &HsiCube, r: usize, opts: &UnmixOptions) -> Result<UnmixResult> {
    if r == 0 {
        return Err(NmfError::InvalidArgument("r must be >= 1".into()));
    }
    let m = &cube.m;
    let k = select_columns(m, r, opts.method, opts.denoise, false)?;
    let mut u = m.select_columns(&k);
    let mut v = abundances(m, &k)?;
    if opts.refine {
        let cfg = NmfConfig::new(r, Algorithm::Hals)
            .with_iters(opts.refine_iters)
            .with_seed(cube.seed);
        let norms = u.column_l1_norms();
        let model = factorize_from(m, u, v, &cfg)?;
        u = model.u;
        v = model.v;
        for (kk, &target) in norms.iter().enumerate() {
            let now: f64 = (0..u.rows()).map(|i| u[(i, kk)]).sum();
            if now > 0.0 {
                let s = target / now;
                for i in 0..u.rows() {
                    u[(i, kk)] *= s;
                }
                v.row_mut(kk).iter_mut().for_each(|x| *x /= s);
            }
        }
    }
    let residual = relative_residual(m, &u, &v)?;
    Ok(UnmixResult {
        u,
        v,
        k,
        residual,
        r,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Score {
    /// Mean spectral angle (radians) between matched endmembers.
    pub spectral_angle_mean: f64,
    pub abundance_rmse: f64,
    /// Fraction of planted pure pixels among the selected indices.
    pub index_recovery: Option<f64>,
    /// `matching[k]` is the result component matched to true endmember `k`.
    pub matching: Vec<usize>,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = crate::matrix::norm2(a);
    let nb = crate::matrix::norm2(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (crate::matrix::dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Greedy endmember matching by descending cosine similarity, then angle,
/// abundance RMSE and pure-pixel recovery.
pub fn score(result: &UnmixResult, truth: &GroundTruth) -> Result<Score> {
    let r = truth.rank();
    if result.u.cols() != r || result.v.rows() != r {
        return Err(crate::error::dim_err(
            "score",
            format!("result rank {} vs truth rank {r}", result.u.cols()),
        ));
    }
    if result.u.rows() != truth.u.rows() || result.v.cols() != truth.v.cols() {
        return Err(crate::error::dim_err("score", "cube dimensions differ".to_string()));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(r * r);
    for t in 0..r {
        let tc = truth.u.col(t);
        for e in 0..r {
            pairs.push((cosine(&tc, &result.u.col(e)), t, e));
        }
    }
    // Descending similarity; index order breaks ties.
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matching = vec![usize::MAX; r];
    let mut used = vec![false; r];
    let mut angle_sum = 0.0;
    for (c, t, e) in pairs {
        if matching[t] == usize::MAX && !used[e] {
            matching[t] = e;
            used[e] = true;
            angle_sum += c.acos();
        }
    }
    let n = truth.v.cols();
    let mut sq = 0.0;
    for (t, &e) in matching.iter().enumerate() {
        for j in 0..n {
            let d = result.v[(e, j)] - truth.v[(t, j)];
            sq += d * d;
        }
    }
    let index_recovery = truth.pure_pixels.as_ref().map(|pp| {
        pp.iter().filter(|j| result.k.contains(j)).count() as f64 / r as f64
    });
    Ok(Score {
        spectral_angle_mean: angle_sum / r as f64,
        abundance_rmse: (sq / (r * n) as f64).sqrt(),
        index_recovery,
        matching,
    })
}

/// JSON header of a stored cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub p: usize,
    pub width: usize,
    pub height: usize,
    pub snr_db: Option<f64>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pure_pixels: Option<Vec<usize>>,
}

pub const CUBE_HEADER: &str = "cube.json";
pub const CUBE_DATA: &str = "cube.csv";
pub const TRUTH_U: &str = "truth_U.csv";
pub const TRUTH_V: &str = "truth_V.csv";

/// Writes `cube.json`, `cube.csv` and, with a ground truth, `truth_U.csv`
/// and `truth_V.csv` into `dir`.
pub fn write_cube(dir: &Path, cube: &HsiCube, truth: Option<&GroundTruth>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = CubeHeader {
        p: cube.bands(),
        width: cube.width,
        height: cube.height,
        snr_db: cube.snr_db,
        seed: cube.seed,
        pure_pixels: truth.and_then(|t| t.pure_pixels.clone()),
    };
    std::fs::write(dir.join(CUBE_HEADER), serde_json::to_string_pretty(&header)? + "\n")?;
    write_csv(dir.join(CUBE_DATA), &cube.m)?;
    if let Some(t) = truth {
        write_csv(dir.join(TRUTH_U), &t.u)?;
        write_csv(dir.join(TRUTH_V), &t.v)?;
    }
    Ok(())
}

/// Reads a cube written by [`write_cube`]; the ground truth is returned
/// when both truth files exist.
pub fn read_cube(dir: &Path) -> Result<(HsiCube, Option<GroundTruth>)> {
    let header: CubeHeader = serde_json::from_str(&std::fs::read_to_string(dir.join(CUBE_HEADER))?)?;
    let m = read_matrix(dir.join(CUBE_DATA))?;
    if m.rows() != header.p {
        return Err(crate::error::dim_err(
            "read_cube",
            format!("header says {} bands, data has {}", header.p, m.rows()),
        ));
    }
    let mut cube = HsiCube::new(header.width, header.height, m)?;
    cube.snr_db = header.snr_db;
    cube.seed = header.seed;
    let truth = if dir.join(TRUTH_U).exists() && dir.join(TRUTH_V).exists() {
        Some(GroundTruth {
            u: read_matrix(dir.join(TRUTH_U))?,
            v: read_matrix(dir.join(TRUTH_V))?,
            pure_pixels: header.pure_pixels,
            snr_db: header.snr_db,
        })
    } else {
        None
    };
    Ok((cube, truth))
}
