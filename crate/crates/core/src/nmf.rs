//! Standard NMF solvers, `min ‖M − UV‖_F` over `U, V ≥ 0`, all following
//! the two-block coordinate descent template: update `U` with `V` fixed,
//! then `V` with `U` fixed.
//!
//! * MU: Lee–Seung multiplicative updates.
//! * HALS: exact cyclic updates of the columns of `U` and rows of `V`.
//! * ANLS: one accelerated-gradient NNLS solve per block per iteration.

use serde::{Deserialize, Serialize};

use crate::error::{NmfError, Result};
use crate::matrix::{dot, norm2, normalize_columns_l1, relative_residual, DenseMatrix};
use crate::nnls::{nnls_fast_gradient, solve_with_gram, NnlsConfig, ZERO_ROW_TOL};
use crate::rng::SeededRng;
use crate::separable::spa;

/// Number of iterations the stopping rule averages the relative change over.
pub const STOP_WINDOW: usize = 5;
/// Relative residual treated as exact: below it, changes are round-off noise
/// and the windowed test cannot fire.
pub const RESIDUAL_FLOOR: f64 = 64.0 * f64::EPSILON;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Mu,
    Hals,
    Anls,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Mu => "mu",
            Algorithm::Hals => "hals",
            Algorithm::Anls => "anls",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mu" => Ok(Algorithm::Mu),
            "hals" => Ok(Algorithm::Hals),
            "anls" => Ok(Algorithm::Anls),
            other => Err(NmfError::InvalidArgument(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Init {
    RandomScaled,
    SpaInit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub r: usize,
    pub algorithm: Algorithm,
    pub init: Init,
    pub max_outer_iters: usize,
    /// Stop when the relative residual change, averaged over
    /// [`STOP_WINDOW`] iterations, falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Floor for the MU denominators.
    pub mu_epsilon: f64,
    /// Inner accelerated-gradient iterations per block for ANLS.
    pub inner_iters: usize,
}

impl NmfConfig {
    pub fn new(r: usize, algorithm: Algorithm) -> Self {
        NmfConfig {
            r,
            algorithm,
            init: Init::RandomScaled,
            max_outer_iters: 500,
            tol: 1e-7,
            seed: 0,
            mu_epsilon: 1e-16,
            inner_iters: 20,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.max_outer_iters = iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self, m: &DenseMatrix) -> Result<()> {
        let limit = m.rows().min(m.cols());
        if self.r == 0 || self.r > limit {
            return Err(NmfError::InvalidArgument(format!(
                "rank r = {} must be in 1..={limit}",
                self.r
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(NmfError::InvalidArgument("max_outer_iters must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(NmfError::InvalidArgument("tol must be >= 0".into()));
        }
        if !(self.mu_epsilon > 0.0) {
            return Err(NmfError::InvalidArgument("mu_epsilon must be > 0".into()));
        }
        if self.inner_iters == 0 {
            return Err(NmfError::InvalidArgument("inner_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Factor pair with its convergence history.
#[derive(Clone, Debug, PartialEq)]
pub struct NmfModel {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    /// `(iteration, relative residual)`, iteration 0 being the initialization.
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
}

impl NmfModel {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |t| t.0)
    }

    pub fn relative_residual(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.1)
    }
}

/// Scale applied to uniform(0,1) entries so that `E[UV] = mean(M)`.
fn random_scale(m: &DenseMatrix, r: usize) -> f64 {
    2.0 * (m.mean().max(0.0) / r as f64).sqrt()
}

/// Random factors with i.i.d. uniform entries scaled to the data.
pub fn random_scaled_factors(
    m: &DenseMatrix,
    r: usize,
    rng: &mut SeededRng,
) -> (DenseMatrix, DenseMatrix) {
    let s = random_scale(m, r);
    let u = rng.uniform_matrix(m.rows(), r).scaled(s);
    let v = rng.uniform_matrix(r, m.cols()).scaled(s);
    (u, v)
}

/// Initial factors for [`factorize`]; deterministic in `cfg.seed`.
pub fn init_factors(m: &DenseMatrix, cfg: &NmfConfig) -> Result<(DenseMatrix, DenseMatrix)> {
    cfg.validate(m)?;
    m.check_nonnegative()?;
    match cfg.init {
        Init::RandomScaled => {
            let mut rng = SeededRng::stream(cfg.seed, 0);
            Ok(random_scaled_factors(m, cfg.r, &mut rng))
        }
        Init::SpaInit => {
            let nd = normalize_columns_l1(m)?;
            if nd.kept.len() < cfg.r {
                return Err(NmfError::RankDeficient { found: vec![] });
            }
            let k: Vec<usize> = spa(&nd.normalized, cfg.r)?
                .into_iter()
                .map(|j| nd.kept[j])
                .collect();
            let u = m.select_columns(&k);
            let nnls = NnlsConfig {
                max_iters: 100,
                tol: 1e-6,
                restart: true,
            };
            let v = nnls_fast_gradient(&u, m, &DenseMatrix::zeros(cfg.r, m.cols()), &nnls)?;
            Ok((u, v))
        }
    }
}

/// One multiplicative update of `U` then `V`, denominators floored at
/// `mu_epsilon`. Exact zeros stay zero.
pub fn mu_step(
    m: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    mu_epsilon: f64,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mvt = m.matmul_t(v)?;
    let vvt = v.matmul_t(v)?;
    let den = u.matmul(&vvt)?;
    let u_new = DenseMatrix::from_fn(u.rows(), u.cols(), |i, k| {
        u[(i, k)] * mvt[(i, k)] / den[(i, k)].max(mu_epsilon)
    });
    let utm = u_new.t_matmul(m)?;
    let utu = u_new.t_matmul(&u_new)?;
    let den = utu.matmul(v)?;
    let v_new = DenseMatrix::from_fn(v.rows(), v.cols(), |k, j| {
        v[(k, j)] * utm[(k, j)] / den[(k, j)].max(mu_epsilon)
    });
    Ok((u_new, v_new))
}

/// Replaces column `k` of `U` and row `k` of `V` with scaled random values.
fn reseed_component(
    m: &DenseMatrix,
    u: &mut DenseMatrix,
    v: &mut DenseMatrix,
    k: usize,
    rng: &mut SeededRng,
) {
    let s = random_scale(m, u.cols());
    for i in 0..u.rows() {
        u[(i, k)] = s * rng.uniform();
    }
    for x in v.row_mut(k) {
        *x = s * rng.uniform();
    }
}

/// One HALS sweep in place: every column of `U`, then every row of `V`,
/// each set to its exact nonnegative least-squares minimizer. A component
/// whose partner has (numerically) zero norm is reseeded at random first.
pub fn hals_sweep(
    m: &DenseMatrix,
    u: &mut DenseMatrix,
    v: &mut DenseMatrix,
    rng: &mut SeededRng,
) -> Result<()> {
    let r = u.cols();
    let p = u.rows();
    let n = v.cols();
    if m.shape() != (p, n) || v.rows() != r {
        return Err(crate::error::dim_err(
            "hals_sweep",
            format!("M {:?}, U {:?}, V {:?}", m.shape(), u.shape(), v.shape()),
        ));
    }

    // U block: U(:,k) = max(0, (A(:,k) − Σ_{j≠k} U(:,j) B(j,k)) / B(k,k)),
    // with A = M Vᵀ, B = V Vᵀ.
    let mut a = m.matmul_t(v)?;
    let mut b = v.matmul_t(v)?;
    for k in 0..r {
        if b[(k, k)].sqrt() <= ZERO_ROW_TOL {
            reseed_component(m, u, v, k, rng);
            a = m.matmul_t(v)?;
            b = v.matmul_t(v)?;
        }
        let bkk = b[(k, k)];
        for i in 0..p {
            let urow = u.row(i);
            let mut s = a[(i, k)];
            for j in 0..r {
                if j != k {
                    s -= urow[j] * b[(j, k)];
                }
            }
            u[(i, k)] = (s / bkk).max(0.0);
        }
    }

    // V block, symmetric: C = UᵀM, D = UᵀU.
    let mut c = u.t_matmul(m)?;
    let mut d = u.t_matmul(u)?;
    for k in 0..r {
        if d[(k, k)].sqrt() <= ZERO_ROW_TOL {
            reseed_component(m, u, v, k, rng);
            c = u.t_matmul(m)?;
            d = u.t_matmul(u)?;
        }
        let dkk = d[(k, k)];
        let mut row: Vec<f64> = c.row(k).to_vec();
        for j in 0..r {
            if j == k {
                continue;
            }
            let w = d[(k, j)];
            if w != 0.0 {
                row.iter_mut().zip(v.row(j)).for_each(|(x, vj)| *x -= w * vj);
            }
        }
        for (dst, x) in v.row_mut(k).iter_mut().zip(row) {
            *dst = (x / dkk).max(0.0);
        }
    }
    Ok(())
}

/// One HALS sweep returning new factors (reseeding, if ever needed, draws
/// from a fixed stream).
pub fn hals_step(
    m: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (mut u, mut v) = (u.clone(), v.clone());
    let mut rng = SeededRng::stream(0, 1);
    hals_sweep(m, &mut u, &mut v, &mut rng)?;
    Ok((u, v))
}

/// One ANLS iteration in place: accelerated-gradient NNLS for `U` (through
/// `Mᵀ ≈ Vᵀ Uᵀ`), then for `V`.
fn anls_step(
    m: &DenseMatrix,
    u: &mut DenseMatrix,
    v: &mut DenseMatrix,
    inner: &NnlsConfig,
    rng: &mut SeededRng,
) -> Result<()> {
    for k in 0..v.rows() {
        if norm2(v.row(k)) <= ZERO_ROW_TOL {
            reseed_component(m, u, v, k, rng);
        }
    }
    let vvt = v.matmul_t(v)?;
    let vmt = v.matmul_t(m)?;
    *u = solve_with_gram(&vvt, &vmt, u.transpose(), inner)?.transpose();

    for k in 0..u.cols() {
        let col = u.col(k);
        if dot(&col, &col).sqrt() <= ZERO_ROW_TOL {
            reseed_component(m, u, v, k, rng);
        }
    }
    let utu = u.t_matmul(u)?;
    let utm = u.t_matmul(m)?;
    *v = solve_with_gram(&utu, &utm, v.clone(), inner)?;
    Ok(())
}

/// Runs the configured solver from its own initialization.
pub fn factorize(m: &DenseMatrix, cfg: &NmfConfig) -> Result<NmfModel> {
    let (u, v) = init_factors(m, cfg)?;
    factorize_from(m, u, v, cfg)
}

/// Runs the configured solver from the given factors.
///
/// Stops when the relative residual change averaged over the last
/// [`STOP_WINDOW`] iterations is below `cfg.tol`, when the residual drops to
/// [`RESIDUAL_FLOOR`], or after `cfg.max_outer_iters` iterations.
pub fn factorize_from(
    m: &DenseMatrix,
    mut u: DenseMatrix,
    mut v: DenseMatrix,
    cfg: &NmfConfig,
) -> Result<NmfModel> {
    cfg.validate(m)?;
    m.check_nonnegative()?;
    if u.shape() != (m.rows(), cfg.r) || v.shape() != (cfg.r, m.cols()) {
        return Err(crate::error::dim_err(
            "factorize_from",
            format!("U {:?}, V {:?} for rank {}", u.shape(), v.shape(), cfg.r),
        ));
    }
    u.check_nonnegative()?;
    v.check_nonnegative()?;
    if m.frobenius_norm() == 0.0 {
        let u = DenseMatrix::zeros(m.rows(), cfg.r);
        let v = DenseMatrix::zeros(cfg.r, m.cols());
        return Ok(NmfModel {
            u,
            v,
            trace: vec![(0, 0.0)],
            converged: true,
        });
    }

    let mut rng = SeededRng::stream(cfg.seed, 1);
    let inner = NnlsConfig {
        max_iters: cfg.inner_iters,
        tol: 1e-6,
        restart: true,
    };
    let mut trace = vec![(0, relative_residual(m, &u, &v)?)];
    let mut converged = false;
    for it in 1..=cfg.max_outer_iters {
        match cfg.algorithm {
            Algorithm::Mu => {
                let (nu, nv) = mu_step(m, &u, &v, cfg.mu_epsilon)?;
                u = nu;
                v = nv;
            }
            Algorithm::Hals => hals_sweep(m, &mut u, &mut v, &mut rng)?,
            Algorithm::Anls => anls_step(m, &mut u, &mut v, &inner, &mut rng)?,
        }
        let res = relative_residual(m, &u, &v)?;
        if !res.is_finite() {
            return Err(NmfError::NonFinite(format!(
                "relative residual at iteration {it}"
            )));
        }
        trace.push((it, res));
        if res <= RESIDUAL_FLOOR || window_change(&trace) < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(NmfModel {
        u,
        v,
        trace,
        converged,
    })
}

/// Mean relative residual change over the last [`STOP_WINDOW`] iterations,
/// infinite until the window is full.
fn window_change(trace: &[(usize, f64)]) -> f64 {
    if trace.len() <= STOP_WINDOW {
        return f64::INFINITY;
    }
    let tail = &trace[trace.len() - STOP_WINDOW - 1..];
    tail.windows(2)
        .map(|w| (w[0].1 - w[1].1).abs() / w[0].1.max(f64::MIN_POSITIVE))
        .sum::<f64>()
        / STOP_WINDOW as f64
}
