//! Heuristic exact NMF and nonnegative rank bracketing.
//!
//! Exact NMF is NP-hard, so [`exact_nmf`] is a multi-start local search:
//! each restart runs HALS from a random point and, when the residual looks
//! promising, keeps going with random perturbations whenever progress
//! stalls. A failure at rank `r` is evidence, never a proof, that
//! `rank₊(M) > r`.

use serde::{Deserialize, Serialize};

use crate::error::{NmfError, Result};
use crate::matrix::{dot, norm2, numeric_rank, relative_residual, DenseMatrix, DEFAULT_RANK_TOL};
use crate::nmf::{hals_sweep, random_scaled_factors, NmfModel};
use crate::rng::SeededRng;

pub const DEFAULT_EXACT_TOL: f64 = 1e-9;

/// How a restart builds its starting point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactStrategy {
    /// Random scaled factors.
    Random,
    /// Components added one at a time, each seeded from the dominant
    /// singular pair of the positive part of the current residual and
    /// polished by HALS; the best of `build_tries` candidates is kept.
    RankByRank,
}

impl std::str::FromStr for ExactStrategy {
    type Err = NmfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ExactStrategy::Random),
            "rank-by-rank" => Ok(ExactStrategy::RankByRank),
            other => Err(NmfError::InvalidArgument(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Restart schedule of [`exact_nmf`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactConfig {
    pub restarts: usize,
    pub strategy: ExactStrategy,
    /// HALS sweeps and candidates per component for [`ExactStrategy::RankByRank`].
    pub build_sweeps: usize,
    pub build_tries: usize,
    pub exact_tol: f64,
    pub seed: u64,
    /// HALS sweeps every restart gets.
    pub initial_sweeps: usize,
    /// Residual below which a restart is continued past `initial_sweeps`.
    pub promising_tol: f64,
    pub max_sweeps: usize,
    /// Stagnation window (sweeps) and minimal relative improvement over it.
    pub kick_window: usize,
    pub kick_improvement: f64,
    /// Safeguarded extrapolation after every sweep.
    pub extrapolate: bool,
    /// Extra sweeps spent refining a successful restart, stopped early once
    /// the residual improves by less than 10% over a kick window.
    pub polish_sweeps: usize,
}

impl ExactConfig {
    pub fn new(restarts: usize, seed: u64) -> Self {
        ExactConfig {
            restarts,
            strategy: ExactStrategy::Random,
            build_sweeps: 200,
            build_tries: 5,
            exact_tol: DEFAULT_EXACT_TOL,
            seed,
            initial_sweeps: 500,
            promising_tol: 1e-4,
            max_sweeps: 5000,
            kick_window: 50,
            kick_improvement: 1e-12,
            extrapolate: false,
            polish_sweeps: 2000,
        }
    }

    pub fn with_tol(mut self, exact_tol: f64) -> Self {
        self.exact_tol = exact_tol;
        self
    }

    pub fn with_strategy(mut self, strategy: ExactStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.exact_tol > 0.0) {
            return Err(NmfError::InvalidArgument("exact_tol must be positive".into()));
        }
        if self.build_tries == 0 {
            return Err(NmfError::InvalidArgument("build_tries must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(NmfError::InvalidArgument("restarts must be >= 1".into()));
        }
        if self.initial_sweeps == 0 || self.max_sweeps < self.initial_sweeps || self.kick_window == 0 {
            return Err(NmfError::InvalidArgument("inconsistent sweep schedule".into()));
        }
        Ok(())
    }
}

/// Outcome of a single restart.
#[derive(Clone, Debug)]
pub struct RestartOutcome {
    pub index: usize,
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub residual: f64,
    pub sweeps: usize,
    pub kicks: usize,
    pub trace: Vec<(usize, f64)>,
}

/// Multi-start summary of [`exact_search`].
#[derive(Clone, Debug)]
pub struct ExactSearch {
    pub witness: Option<NmfModel>,
    /// Restart that produced the witness.
    pub success_index: Option<usize>,
    pub best_residual: f64,
    /// Restarts actually run (the search stops at the first success).
    pub attempts: usize,
}

/// Perturbs the factor with more zeros: a random half of its entries is
/// multiplied by uniform(0.9, 1.1), zeros in that half are lifted to a
/// small positive value.
fn kick(u: &mut DenseMatrix, v: &mut DenseMatrix, rng: &mut SeededRng) {
    let zeros = |x: &DenseMatrix| x.as_slice().iter().filter(|&&e| e == 0.0).count();
    let target = if zeros(u) * v.as_slice().len() >= zeros(v) * u.as_slice().len() {
        u
    } else {
        v
    };
    let nz: Vec<f64> = target.as_slice().iter().copied().filter(|&e| e > 0.0).collect();
    let lift = if nz.is_empty() {
        1.0
    } else {
        0.05 * nz.iter().sum::<f64>() / nz.len() as f64
    };
    for e in target.as_mut_slice() {
        if rng.uniform() < 0.5 {
            *e = if *e == 0.0 {
                lift * rng.uniform()
            } else {
                *e * rng.uniform_range(0.9, 1.1)
            };
        }
    }
}

/// Adaptive momentum on whole sweeps: the extrapolated point
/// `max(0, X + β(X − X_prev))` is kept only if it lowers the residual; `β`
/// grows after a success and shrinks after a failure.
struct Extrapolation {
    beta: f64,
    beta_max: f64,
}

impl Extrapolation {
    fn new() -> Self {
        Extrapolation {
            beta: 0.5,
            beta_max: 1.0,
        }
    }

    fn step(
        &mut self,
        m: &DenseMatrix,
        u: &mut DenseMatrix,
        v: &mut DenseMatrix,
        pu: &DenseMatrix,
        pv: &DenseMatrix,
        res: f64,
    ) -> Result<f64> {
        let b = self.beta;
        let push = |x: &DenseMatrix, px: &DenseMatrix| {
            DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
                (x[(i, j)] + b * (x[(i, j)] - px[(i, j)])).max(0.0)
            })
        };
        let (eu, ev) = (push(u, pu), push(v, pv));
        let eres = relative_residual(m, &eu, &ev)?;
        if eres < res {
            *u = eu;
            *v = ev;
            self.beta = (self.beta * 1.05).min(self.beta_max);
            self.beta_max = (self.beta_max * 1.01).min(1.0);
            Ok(eres)
        } else {
            self.beta_max = self.beta;
            self.beta /= 1.5;
            Ok(res)
        }
    }
}

/// Factors `[U u]`, `[V; v]` where `(u, v)` approximates the dominant
/// singular pair of `max(0, M − UV)`, jittered multiplicatively.
fn append_component(
    m: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    rng: &mut SeededRng,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (p, n) = m.shape();
    let r = u.cols();
    let approx = if r == 0 {
        DenseMatrix::zeros(p, n)
    } else {
        u.matmul(v)?
    };
    let pos = DenseMatrix::from_fn(p, n, |i, j| (m[(i, j)] - approx[(i, j)]).max(0.0));
    let mut x: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let mut y = vec![0.0; p];
    for _ in 0..50 {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(pos.row(i), &x);
        }
        let ny = norm2(&y);
        if ny == 0.0 {
            break;
        }
        y.iter_mut().for_each(|e| *e /= ny);
        x.iter_mut().for_each(|e| *e = 0.0);
        for (i, yi) in y.iter().enumerate() {
            x.iter_mut().zip(pos.row(i)).for_each(|(xj, pij)| *xj += yi * pij);
        }
    }
    let nu = DenseMatrix::from_fn(p, r + 1, |i, k| {
        if k < r {
            u[(i, k)]
        } else {
            y[i].max(0.0) * (1.0 + 0.5 * rng.uniform())
        }
    });
    let nv = DenseMatrix::from_fn(r + 1, n, |k, j| {
        if k < r {
            v[(k, j)]
        } else {
            x[j].max(0.0) * (1.0 + 0.5 * rng.uniform())
        }
    });
    Ok((nu, nv))
}

fn rank_by_rank_start(
    m: &DenseMatrix,
    r: usize,
    cfg: &ExactConfig,
    rng: &mut SeededRng,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let mut u = DenseMatrix::zeros(m.rows(), 0);
    let mut v = DenseMatrix::zeros(0, m.cols());
    for _ in 0..r {
        let mut best: Option<(f64, DenseMatrix, DenseMatrix)> = None;
        for _ in 0..cfg.build_tries {
            let (mut a, mut b) = append_component(m, &u, &v, rng)?;
            for _ in 0..cfg.build_sweeps {
                hals_sweep(m, &mut a, &mut b, rng)?;
            }
            let res = relative_residual(m, &a, &b)?;
            if best.as_ref().is_none_or(|bb| res < bb.0) {
                best = Some((res, a, b));
            }
        }
        let (_, a, b) = best.expect("build_tries >= 1");
        u = a;
        v = b;
    }
    Ok((u, v))
}

/// Runs restart `index` of the schedule; its randomness comes from the
/// stream `(seed, r, index)` only, so restarts can run in any order.
pub fn exact_restart(m: &DenseMatrix, r: usize, index: usize, cfg: &ExactConfig) -> Result<RestartOutcome> {
    let mut rng = SeededRng::stream(cfg.seed, ((r as u64) << 32) | index as u64);
    let (mut u, mut v) = match cfg.strategy {
        ExactStrategy::Random => random_scaled_factors(m, r, &mut rng),
        ExactStrategy::RankByRank => rank_by_rank_start(m, r, cfg, &mut rng)?,
    };
    let mut res = relative_residual(m, &u, &v)?;
    let mut trace = vec![(0, res)];
    let mut kicks = 0;
    let mut sweeps = 0;
    let mut best = (res, u.clone(), v.clone());
    let mut extrap = Extrapolation::new();
    while sweeps < cfg.max_sweeps && res >= cfg.exact_tol {
        if sweeps == cfg.initial_sweeps && best.0 >= cfg.promising_tol {
            break;
        }
        let prev = cfg.extrapolate.then(|| (u.clone(), v.clone()));
        hals_sweep(m, &mut u, &mut v, &mut rng)?;
        sweeps += 1;
        res = relative_residual(m, &u, &v)?;
        if let Some((pu, pv)) = prev {
            res = extrap.step(m, &mut u, &mut v, &pu, &pv, res)?;
        }
        if !res.is_finite() {
            return Err(NmfError::NonFinite(format!("residual at sweep {sweeps}")));
        }
        trace.push((sweeps, res));
        if res < best.0 {
            best = (res, u.clone(), v.clone());
        }
        if sweeps > cfg.initial_sweeps && sweeps % cfg.kick_window == 0 && res >= cfg.exact_tol {
            let then = trace[sweeps - cfg.kick_window].1;
            if then - res < cfg.kick_improvement * then {
                // Continue from the best point seen, perturbed.
                u = best.1.clone();
                v = best.2.clone();
                kick(&mut u, &mut v, &mut rng);
                kicks += 1;
                res = relative_residual(m, &u, &v)?;
            }
        }
    }
    if best.0 < cfg.exact_tol && cfg.polish_sweeps > 0 {
        // Entrywise checks downstream need more than the Frobenius threshold.
        u = best.1.clone();
        v = best.2.clone();
        let mut mark = best.0;
        for k in 1..=cfg.polish_sweeps {
            let prev = cfg.extrapolate.then(|| (u.clone(), v.clone()));
            hals_sweep(m, &mut u, &mut v, &mut rng)?;
            sweeps += 1;
            res = relative_residual(m, &u, &v)?;
            if let Some((pu, pv)) = prev {
                res = extrap.step(m, &mut u, &mut v, &pu, &pv, res)?;
            }
            if !res.is_finite() {
                break;
            }
            trace.push((sweeps, res));
            if res < best.0 {
                best = (res, u.clone(), v.clone());
            }
            if k % cfg.kick_window == 0 {
                if best.0 > 0.9 * mark {
                    break;
                }
                mark = best.0;
            }
        }
    }
    Ok(RestartOutcome {
        index,
        residual: best.0,
        u: best.1,
        v: best.2,
        sweeps,
        kicks,
        trace,
    })
}

fn check_input(m: &DenseMatrix, r: usize) -> Result<()> {
    m.check_nonnegative()?;
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    if r == 0 || r > m.rows().min(m.cols()) {
        return Err(NmfError::InvalidArgument(format!(
            "rank {r} outside 1..={} for a {:?} matrix",
            m.rows().min(m.cols()),
            m.shape()
        )));
    }
    Ok(())
}

fn witness(out: RestartOutcome) -> NmfModel {
    NmfModel {
        u: out.u,
        v: out.v,
        trace: out.trace,
        converged: true,
    }
}

/// Sequential multi-start search, stopping at the lowest successful restart.
pub fn exact_search(m: &DenseMatrix, r: usize, cfg: &ExactConfig) -> Result<ExactSearch> {
    check_input(m, r)?;
    cfg.validate()?;
    let mut best = f64::INFINITY;
    for idx in 0..cfg.restarts {
        let out = exact_restart(m, r, idx, cfg)?;
        best = best.min(out.residual);
        if out.residual < cfg.exact_tol {
            return Ok(ExactSearch {
                witness: Some(witness(out)),
                success_index: Some(idx),
                best_residual: best,
                attempts: idx + 1,
            });
        }
    }
    Ok(ExactSearch {
        witness: None,
        success_index: None,
        best_residual: best,
        attempts: cfg.restarts,
    })
}

/// Nonnegative factors of rank `r` with relative residual below
/// `exact_tol`, if the restarts find any.
pub fn exact_nmf(
    m: &DenseMatrix,
    r: usize,
    restarts: usize,
    exact_tol: f64,
    seed: u64,
) -> Result<Option<NmfModel>> {
    let cfg = ExactConfig::new(restarts, seed).with_tol(exact_tol);
    Ok(exact_search(m, r, &cfg)?.witness)
}

/// Per-rank statistics of [`rank_plus_estimate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankAttempt {
    pub r: usize,
    pub restarts: usize,
    pub best_residual: f64,
    pub found: bool,
}

/// Bracket `lower ≤ rank₊(M) ≤ upper`.
#[derive(Clone, Debug, Serialize)]
pub struct RankPlusEstimate {
    pub lower: usize,
    pub upper: usize,
    #[serde(skip)]
    pub witness: Option<NmfModel>,
    #[serde(rename = "per_r")]
    pub attempts: Vec<RankAttempt>,
    pub seed: u64,
}

impl RankPlusEstimate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("estimate serializes")
    }
}

/// Trivial exact factorization of inner dimension `min(p, n)`.
fn identity_factorization(m: &DenseMatrix) -> NmfModel {
    let (p, n) = m.shape();
    let (u, v) = if p <= n {
        (DenseMatrix::identity(p), m.clone())
    } else {
        (m.clone(), DenseMatrix::identity(n))
    };
    NmfModel {
        u,
        v,
        trace: vec![(0, 0.0)],
        converged: true,
    }
}

/// `lower` is the numerical rank; `upper` is the first `r` from `lower` to
/// `r_max` at which [`exact_search`] succeeds, else `min(p, n)` through the
/// identity factorization.
pub fn rank_plus_estimate(m: &DenseMatrix, r_max: usize, restarts: usize, seed: u64) -> Result<RankPlusEstimate> {
    rank_plus_with(m, r_max, &ExactConfig::new(restarts, seed))
}

/// [`rank_plus_estimate`] with a full restart schedule.
pub fn rank_plus_with(m: &DenseMatrix, r_max: usize, cfg: &ExactConfig) -> Result<RankPlusEstimate> {
    m.check_nonnegative()?;
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    cfg.validate()?;
    let full = m.rows().min(m.cols());
    let lower = numeric_rank(m, DEFAULT_RANK_TOL)?;
    if lower == 0 {
        return Ok(RankPlusEstimate {
            lower: 0,
            upper: 0,
            witness: None,
            attempts: vec![],
            seed: cfg.seed,
        });
    }
    let mut attempts = Vec::new();
    for r in lower..=r_max.min(full) {
        let s = exact_search(m, r, cfg)?;
        attempts.push(RankAttempt {
            r,
            restarts: s.attempts,
            best_residual: s.best_residual,
            found: s.witness.is_some(),
        });
        if let Some(w) = s.witness {
            return Ok(RankPlusEstimate {
                lower,
                upper: r,
                witness: Some(w),
                attempts,
                seed: cfg.seed,
            });
        }
    }
    Ok(RankPlusEstimate {
        lower,
        upper: full,
        witness: Some(identity_factorization(m)),
        attempts,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hexagon_matrix;

    #[test]
    fn identity_is_its_own_bracket() {
        let est = rank_plus_estimate(&DenseMatrix::identity(4), 4, 20, 0).unwrap();
        assert_eq!((est.lower, est.upper), (4, 4));
        let w = est.witness.unwrap();
        assert!(relative_residual(&DenseMatrix::identity(4), &w.u, &w.v).unwrap() < 1e-9);
    }

    #[test]
    fn planted_rank_three() {
        let mut rng = SeededRng::new(5);
        let u = rng.uniform_matrix(6, 3).map(|x| x + 0.1);
        let v = rng.uniform_matrix(3, 8).map(|x| x + 0.1);
        let m = u.matmul(&v).unwrap();
        let est = rank_plus_estimate(&m, 6, 20, 1).unwrap();
        assert_eq!((est.lower, est.upper), (3, 3));
        let w = est.witness.unwrap();
        assert!(w.u.is_nonnegative() && w.v.is_nonnegative());
        assert!(relative_residual(&m, &w.u, &w.v).unwrap() < 1e-9);
    }

    #[test]
    fn hexagon_a2_is_a_triangle() {
        let m = hexagon_matrix(2.0).unwrap();
        let w = exact_nmf(&m, 3, 200, 1e-9, 0).unwrap().expect("rank 3 factorization");
        assert!(relative_residual(&m, &w.u, &w.v).unwrap() < 1e-9);
    }

    #[test]
    fn fallback_when_search_is_cut_short() {
        let m = hexagon_matrix(2.0).unwrap();
        let mut cfg = ExactConfig::new(1, 0);
        cfg.initial_sweeps = 1;
        cfg.max_sweeps = 1;
        let est = rank_plus_with(&m, 3, &cfg).unwrap();
        assert_eq!(est.upper, 6);
        assert_eq!(est.attempts.len(), 1);
        assert!(!est.attempts[0].found);
        let w = est.witness.as_ref().unwrap();
        assert_eq!(relative_residual(&m, &w.u, &w.v).unwrap(), 0.0);
        let json = est.to_json();
        assert!(json.contains("\"per_r\"") && json.contains("best_residual"));
    }

    #[test]
    fn deterministic_and_order_free() {
        let m = hexagon_matrix(3.0).unwrap();
        let cfg = ExactConfig::new(3, 9);
        let a = exact_restart(&m, 4, 2, &cfg).unwrap();
        let _ = exact_restart(&m, 4, 0, &cfg).unwrap();
        let b = exact_restart(&m, 4, 2, &cfg).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.residual.to_bits(), b.residual.to_bits());
    }

    #[test]
    fn invalid_rank() {
        let m = DenseMatrix::identity(3);
        assert!(exact_nmf(&m, 0, 1, 1e-9, 0).is_err());
        assert!(exact_nmf(&m, 4, 1, 1e-9, 0).is_err());
        assert!(exact_nmf(&m, 2, 1, 0.0, 0).is_err());
    }
}
