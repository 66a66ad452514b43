//! Trace-minimization self-dictionary model for separable NMF:
//!
//! ```text
//! min  tr(X) + μ ‖M − M X‖_F²
//! s.t. 0 ≤ X(i,j) ≤ X(i,i) ≤ 1,   X(i,:) = 0 for i outside the candidates
//! ```
//!
//! solved by accelerated projected gradient with function-value restart.
//! The per-row projection onto `{x : 0 ≤ x_j ≤ x_i ≤ 1}` is exact.

use crate::error::{NmfError, Result};
use crate::matrix::{dot, DenseMatrix};
use crate::nnls::largest_eigenvalue;

use super::{spa, SeparableResult};

#[derive(Clone, Debug, PartialEq)]
pub struct SelfDictConfig {
    /// Columns whose rows of `X` may be nonzero.
    pub candidates: Vec<usize>,
    /// Weight μ of the data-fit penalty.
    pub penalty: f64,
    pub max_iters: usize,
    /// Stop when `‖X_{k+1} − X_k‖_F ≤ tol · max(1, ‖X_k‖_F)`.
    pub tol: f64,
}

impl SelfDictConfig {
    pub fn new(candidates: Vec<usize>, penalty: f64) -> Self {
        SelfDictConfig {
            candidates,
            penalty,
            max_iters: 20_000,
            tol: 1e-10,
        }
    }

    /// Preselected candidates with [`default_penalty`].
    pub fn auto(m: &DenseMatrix, r: usize) -> Result<Self> {
        Self::preselected(m, r, default_penalty(m)?)
    }

    /// Candidates from [`preselect_candidates`] with `5r` picks.
    pub fn preselected(m: &DenseMatrix, r: usize, penalty: f64) -> Result<Self> {
        Ok(Self::new(preselect_candidates(m, 5 * r)?, penalty))
    }
}

/// Penalty scale relative to the mean squared column norm.
pub const DEFAULT_PENALTY_SCALE: f64 = 0.3;

/// `μ = 0.3 / mean_j ‖M(:,j)‖²`: a column left entirely unexplained costs
/// about as much as a third of a unit of trace.
pub fn default_penalty(m: &DenseMatrix) -> Result<f64> {
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    let mean = m.column_sq_norms().iter().sum::<f64>() / m.cols() as f64;
    if mean == 0.0 {
        return Err(NmfError::ZeroMatrix);
    }
    Ok(DEFAULT_PENALTY_SCALE / mean)
}

/// Euclidean projection of `row` onto `{x : 0 ≤ x_j ≤ x_diag ≤ 1}`, in place.
///
/// For a fixed diagonal value `d` the off-diagonal entries project to
/// `clamp(x_j, 0, d)`. The remaining one-dimensional problem in `d` is a
/// convex piecewise quadratic whose stationarity condition is
/// `d − x_diag = Σ_{x_j > d} (x_j − d)`; the root is found by scanning the
/// sorted positive off-diagonal values, then clamped to `[0, 1]`.
pub fn project_row(row: &mut [f64], diag: usize) {
    let x_d = row[diag];
    let mut pos: Vec<f64> = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| j != diag && v > 0.0)
        .map(|(_, &v)| v)
        .collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    let mut d = 0.0;
    let mut cum = 0.0;
    for k in 0..=pos.len() {
        if k > 0 {
            cum += pos[k - 1];
        }
        let cand = (x_d + cum) / (1.0 + k as f64);
        let upper = if k == 0 { f64::INFINITY } else { pos[k - 1] };
        let lower = if k < pos.len() { pos[k] } else { 0.0 };
        if cand >= lower && cand <= upper {
            d = cand;
            break;
        }
    }
    let d = d.clamp(0.0, 1.0);
    for (j, v) in row.iter_mut().enumerate() {
        *v = if j == diag { d } else { v.clamp(0.0, d) };
    }
}

/// Up to `count` candidate columns by successive SPA rounds: each round runs
/// SPA on the columns not yet chosen until its residual vanishes. Returned
/// in ascending index order.
pub fn preselect_candidates(m: &DenseMatrix, count: usize) -> Result<Vec<usize>> {
    if count == 0 {
        return Err(NmfError::InvalidArgument("candidate count must be >= 1".into()));
    }
    let count = count.min(m.cols());
    let mut chosen: Vec<usize> = Vec::with_capacity(count);
    let mut remaining: Vec<usize> = (0..m.cols()).collect();
    while chosen.len() < count && !remaining.is_empty() {
        let sub = m.select_columns(&remaining);
        let want = (count - chosen.len()).min(remaining.len());
        let picks = match spa(&sub, want) {
            Ok(p) => p,
            Err(NmfError::RankDeficient { found }) => found,
            Err(e) => return Err(e),
        };
        if picks.is_empty() {
            break;
        }
        let picked: Vec<usize> = picks.iter().map(|&q| remaining[q]).collect();
        chosen.extend(&picked);
        remaining.retain(|j| !picked.contains(j));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Solution of the self-dictionary program restricted to the candidate rows.
#[derive(Clone, Debug)]
pub struct SelfDictSolution {
    pub candidates: Vec<usize>,
    /// `|candidates| × n`; row `i` is row `candidates[i]` of the full `X`.
    pub x: DenseMatrix,
    /// Objective after every accepted iterate, starting at `X = 0`.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SelfDictSolution {
    /// Diagonal entries `X(c, c)` for each candidate `c`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, &c)| self.x[(i, c)])
            .collect()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace has the initial value")
    }
}

struct Problem {
    candidates: Vec<usize>,
    penalty: f64,
    /// `M_Cᵀ M_C`.
    gram_cc: DenseMatrix,
    /// `M_Cᵀ M`.
    gram_cm: DenseMatrix,
    /// `‖M‖_F²`.
    m_sq: f64,
}

impl Problem {
    fn objective(&self, x: &DenseMatrix) -> f64 {
        // ‖M − M_C X‖² = ‖M‖² − 2⟨X, M_CᵀM⟩ + ⟨X, M_CᵀM_C X⟩
        let gx = self.gram_cc.matmul(x).expect("shapes");
        let fit = self.m_sq - 2.0 * dot(x.as_slice(), self.gram_cm.as_slice())
            + dot(x.as_slice(), gx.as_slice());
        let trace: f64 = self
            .candidates
            .iter()
            .enumerate()
            .map(|(i, &c)| x[(i, c)])
            .sum();
        trace + self.penalty * fit.max(0.0)
    }

    fn gradient(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut g = self.gram_cc.matmul(x).expect("shapes");
        let two_mu = 2.0 * self.penalty;
        for (gv, b) in g.as_mut_slice().iter_mut().zip(self.gram_cm.as_slice()) {
            *gv = two_mu * (*gv - b);
        }
        for (i, &c) in self.candidates.iter().enumerate() {
            g[(i, c)] += 1.0;
        }
        g
    }

    fn project(&self, x: &mut DenseMatrix) {
        for (i, &c) in self.candidates.iter().enumerate() {
            project_row(x.row_mut(i), c);
        }
    }

    fn step(&self, y: &DenseMatrix, step: f64) -> DenseMatrix {
        let g = self.gradient(y);
        let mut out = DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| y[(i, j)] - step * g[(i, j)]);
        self.project(&mut out);
        out
    }
}

/// Solves the penalized self-dictionary program by accelerated projected
/// gradient; the objective never increases between accepted iterates.
pub fn solve_self_dictionary(m: &DenseMatrix, cfg: &SelfDictConfig) -> Result<SelfDictSolution> {
    if !(cfg.penalty > 0.0) {
        return Err(NmfError::InvalidArgument("penalty must be > 0".into()));
    }
    if cfg.candidates.is_empty() {
        return Err(NmfError::InvalidArgument("candidate list is empty".into()));
    }
    if cfg.max_iters == 0 {
        return Err(NmfError::InvalidArgument("max_iters must be >= 1".into()));
    }
    let n = m.cols();
    let mut candidates = cfg.candidates.clone();
    candidates.sort_unstable();
    candidates.dedup();
    if let Some(&bad) = candidates.iter().find(|&&c| c >= n) {
        return Err(NmfError::InvalidArgument(format!("candidate {bad} out of range")));
    }
    let mc = m.select_columns(&candidates);
    let problem = Problem {
        gram_cc: mc.t_matmul(&mc)?,
        gram_cm: mc.t_matmul(m)?,
        m_sq: m.frobenius_norm().powi(2),
        penalty: cfg.penalty,
        candidates,
    };
    let mut lipschitz = 2.0 * cfg.penalty * largest_eigenvalue(&problem.gram_cc);
    if !(lipschitz > 0.0) {
        lipschitz = 1.0;
    }

    let c = problem.candidates.len();
    let mut x = DenseMatrix::zeros(c, n);
    let mut f_x = problem.objective(&x);
    let mut trace = vec![f_x];
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = DenseMatrix::from_fn(c, n, |i, j| x[(i, j)] + beta * (x[(i, j)] - x_prev[(i, j)]));
        let mut x_new = problem.step(&y, 1.0 / lipschitz);
        let mut f_new = problem.objective(&x_new);
        t = t_next;
        if f_new > f_x {
            t = 1.0;
            loop {
                x_new = problem.step(&x, 1.0 / lipschitz);
                f_new = problem.objective(&x_new);
                if f_new <= f_x || lipschitz > 1e300 {
                    break;
                }
                lipschitz *= 2.0;
            }
            if f_new > f_x {
                converged = true;
                break;
            }
        }
        if !f_new.is_finite() {
            return Err(NmfError::NonFinite("self-dictionary objective".into()));
        }
        let change = x_new.sub(&x)?.frobenius_norm();
        let scale = x.frobenius_norm().max(1.0);
        x_prev = std::mem::replace(&mut x, x_new);
        f_x = f_new;
        trace.push(f_x);
        if change <= cfg.tol * scale {
            converged = true;
            break;
        }
    }
    Ok(SelfDictSolution {
        candidates: problem.candidates,
        x,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Self-dictionary separable NMF: solve the convex program, keep the `r`
/// candidates with the largest diagonal entries (lowest index on ties), and
/// recompute abundances for them.
pub fn self_dictionary(m: &DenseMatrix, cfg: &SelfDictConfig, r: usize) -> Result<SeparableResult> {
    let mut distinct = cfg.candidates.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if r == 0 || distinct.len() < r {
        return Err(NmfError::InvalidArgument(format!(
            "need at least r = {r} candidates, got {}",
            distinct.len()
        )));
    }
    let sol = solve_self_dictionary(m, cfg)?;
    let k = top_diagonal(&sol, r);
    SeparableResult::from_indices(m, k)
}

/// Candidates with the `r` largest diagonal entries, in decreasing order.
pub fn top_diagonal(sol: &SelfDictSolution, r: usize) -> Vec<usize> {
    let diag = sol.diagonal();
    let mut order: Vec<usize> = (0..diag.len()).collect();
    // Stable sort keeps ascending candidate order among equal values.
    order.sort_by(|&a, &b| diag[b].total_cmp(&diag[a]));
    order.into_iter().take(r).map(|i| sol.candidates[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn feasible(row: &[f64], diag: usize) -> bool {
        let d = row[diag];
        (0.0..=1.0).contains(&d) && row.iter().all(|&v| v >= 0.0 && v <= d)
    }

    /// Projection by ternary search over the diagonal value.
    fn projection_by_search(row: &[f64], diag: usize) -> Vec<f64> {
        // Entries with v <= 0 project to 0 whatever d is; leave them out so
        // the objective keeps full precision near its minimum.
        let phi = |d: f64| -> f64 {
            row.iter()
                .enumerate()
                .filter(|&(j, &v)| j == diag || v > 0.0)
                .map(|(j, &v)| {
                    let p = if j == diag { d } else { v.clamp(0.0, d) };
                    (p - v) * (p - v)
                })
                .sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if phi(a) <= phi(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let d = 0.5 * (lo + hi);
        row.iter()
            .enumerate()
            .map(|(j, &v)| if j == diag { d } else { v.clamp(0.0, d) })
            .collect()
    }

    #[test]
    fn projection_matches_search_and_is_feasible() {
        let mut rng = SeededRng::new(1);
        for _ in 0..500 {
            let len = 2 + rng.index(8);
            let diag = rng.index(len);
            let row: Vec<f64> = (0..len).map(|_| 1.5 * rng.normal()).collect();
            let mut p = row.clone();
            project_row(&mut p, diag);
            assert!(feasible(&p, diag));
            let q = projection_by_search(&row, diag);
            let dist: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dist < 1e-6, "{row:?} -> {p:?} vs {q:?}");
        }
    }

    #[test]
    fn projection_fixes_feasible_points() {
        let mut row = vec![0.2, 0.7, 0.5, 0.0];
        project_row(&mut row, 1);
        assert_eq!(row, vec![0.2, 0.7, 0.5, 0.0]);
        let mut row = vec![3.0, -1.0];
        project_row(&mut row, 0);
        assert_eq!(row, vec![1.0, 0.0]);
    }

    #[test]
    fn preselection_collects_distinct_candidates() {
        let mut rng = SeededRng::new(4);
        let m = rng.uniform_matrix(6, 30);
        let c = preselect_candidates(&m, 15).unwrap();
        assert_eq!(c.len(), 15);
        let mut d = c.clone();
        d.dedup();
        assert_eq!(d.len(), 15);
        assert!(preselect_candidates(&m, 0).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let m = DenseMatrix::identity(3);
        assert!(self_dictionary(&m, &SelfDictConfig::new(vec![0, 1], 10.0), 3).is_err());
        assert!(solve_self_dictionary(&m, &SelfDictConfig::new(vec![], 10.0)).is_err());
        assert!(solve_self_dictionary(&m, &SelfDictConfig::new(vec![0], 0.0)).is_err());
    }
}
