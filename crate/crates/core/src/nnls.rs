//! Nonnegative least squares subsolvers: `min_{X ≥ 0} ‖B − AX‖_F`.
//!
//! [`nnls_fast_gradient`] is an accelerated projected gradient method with
//! a function-value restart, so every returned iterate is no worse than the
//! starting point. [`hals_update_column`] is the exact closed-form minimizer
//! over a single factor column used by HALS.

use crate::error::{dim_err, NmfError, Result};
use crate::matrix::{dot, DenseMatrix};

/// Rows of `V` (or columns of `U`) with ℓ2 norm at or below this are treated
/// as zero by the HALS update.
pub const ZERO_ROW_TOL: f64 = 1e-15;

const POWER_ITERS: usize = 30;
const POWER_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnlsConfig {
    pub max_iters: usize,
    /// Stop once `‖min(X, ∇f(X))‖_F` drops below `tol` times its value at `X0`.
    pub tol: f64,
    /// Discard momentum whenever the objective would increase.
    pub restart: bool,
}

impl Default for NnlsConfig {
    fn default() -> Self {
        NnlsConfig {
            max_iters: 20,
            tol: 1e-6,
            restart: true,
        }
    }
}

impl NnlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(NmfError::InvalidArgument("nnls max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(NmfError::InvalidArgument("nnls tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration.
pub fn largest_eigenvalue(g: &DenseMatrix) -> f64 {
    let n = g.rows();
    if n == 0 {
        return 0.0;
    }
    // Perturbed constant start: nonzero overlap with the Perron vector of a
    // nonnegative Gram matrix, and generic otherwise.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let nx = crate::matrix::norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y: Vec<f64> = (0..n).map(|i| dot(g.row(i), &x)).collect();
        let next = dot(&x, &y);
        x = y;
        let done = (next - lambda).abs() <= POWER_TOL * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Gradient `AᵀA X − AᵀB` of `½‖B − AX‖²`, given the Gram pieces.
fn gradient(ata: &DenseMatrix, atb: &DenseMatrix, x: &DenseMatrix) -> DenseMatrix {
    let mut g = ata.matmul(x).expect("shapes checked");
    for (gv, b) in g.as_mut_slice().iter_mut().zip(atb.as_slice()) {
        *gv -= b;
    }
    g
}

/// `½‖B − AX‖² − ½‖B‖²` from the Gram pieces, with the magnitude of its two
/// terms (the scale its round-off lives at).
fn shifted_objective(ata: &DenseMatrix, atb: &DenseMatrix, x: &DenseMatrix) -> (f64, f64) {
    let ax = ata.matmul(x).expect("shapes checked");
    let quad = 0.5 * dot(x.as_slice(), ax.as_slice());
    let lin = dot(x.as_slice(), atb.as_slice());
    (quad - lin, quad.abs() + lin.abs())
}

/// Relative round-off allowance when comparing objective values.
const OBJECTIVE_SLACK: f64 = 1e-13;


/// `‖min(X, ∇f(X))‖_F`, the KKT residual of the NNLS problem at `X ≥ 0`.
pub fn kkt_residual(a: &DenseMatrix, b: &DenseMatrix, x: &DenseMatrix) -> Result<f64> {
    let ata = a.t_matmul(a)?;
    let atb = a.t_matmul(b)?;
    if x.shape() != atb.shape() {
        return Err(dim_err("kkt_residual", "X shape"));
    }
    Ok(kkt_from_parts(&ata, &atb, x))
}

fn kkt_from_parts(ata: &DenseMatrix, atb: &DenseMatrix, x: &DenseMatrix) -> f64 {
    let g = gradient(ata, atb, x);
    x.as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&xv, &gv)| {
            let m = xv.min(gv);
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

fn project_step(y: &DenseMatrix, g: &DenseMatrix, step: f64) -> DenseMatrix {
    let data = y
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(&yv, &gv)| (yv - step * gv).max(0.0))
        .collect();
    DenseMatrix::new(y.rows(), y.cols(), data).expect("finite step")
}

/// Accelerated projected gradient for `min_{X ≥ 0} ‖B − AX‖_F` started at `X0`.
///
/// Step size is `1/L` with `L` the largest eigenvalue of `AᵀA`. With
/// `cfg.restart` set, momentum is dropped whenever the objective would go up,
/// so the result never has a larger residual than `X0`.
pub fn nnls_fast_gradient(
    a: &DenseMatrix,
    b: &DenseMatrix,
    x0: &DenseMatrix,
    cfg: &NnlsConfig,
) -> Result<DenseMatrix> {
    cfg.validate()?;
    let (p, r) = a.shape();
    if r == 0 || b.rows() != p || x0.shape() != (r, b.cols()) {
        return Err(dim_err(
            "nnls_fast_gradient",
            format!("A {:?}, B {:?}, X0 {:?}", a.shape(), b.shape(), x0.shape()),
        ));
    }
    x0.check_nonnegative()?;
    let ata = a.t_matmul(a)?;
    if let Some(k) = (0..r).find(|&k| ata[(k, k)] == 0.0) {
        return Err(NmfError::ZeroColumn(k));
    }
    let atb = a.t_matmul(b)?;
    solve_with_gram(&ata, &atb, x0.clone(), cfg)
}

/// Same as [`nnls_fast_gradient`] with precomputed `AᵀA` and `AᵀB`.
pub(crate) fn solve_with_gram(
    ata: &DenseMatrix,
    atb: &DenseMatrix,
    x0: DenseMatrix,
    cfg: &NnlsConfig,
) -> Result<DenseMatrix> {
    let mut lipschitz = largest_eigenvalue(ata);
    if !(lipschitz > 0.0) {
        return Ok(x0);
    }
    let kkt0 = kkt_from_parts(ata, atb, &x0);
    if kkt0 == 0.0 {
        return Ok(x0);
    }
    let target = cfg.tol * kkt0;

    let mut x = x0;
    let (mut f_x, _) = shifted_objective(ata, atb, &x);
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    for _ in 0..cfg.max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = if cfg.restart || t > 1.0 { (t - 1.0) / t_next } else { 0.0 };
        let y = if beta > 0.0 {
            let data = x
                .as_slice()
                .iter()
                .zip(x_prev.as_slice())
                .map(|(&a, &b)| a + beta * (a - b))
                .collect();
            DenseMatrix::new(x.rows(), x.cols(), data).expect("finite extrapolation")
        } else {
            x.clone()
        };
        let mut x_new = project_step(&y, &gradient(ata, atb, &y), 1.0 / lipschitz);
        let (mut f_new, _) = shifted_objective(ata, atb, &x_new);
        t = t_next;
        if cfg.restart && f_new > f_x {
            // Drop momentum and take a plain projected gradient step from x.
            // That step cannot increase the objective unless L was
            // underestimated; near the optimum the comparison is limited by
            // round-off, hence the slack.
            t = 1.0;
            let g = gradient(ata, atb, &x);
            let mut accepted = false;
            while lipschitz < 1e300 {
                x_new = project_step(&x, &g, 1.0 / lipschitz);
                let (f, scale) = shifted_objective(ata, atb, &x_new);
                f_new = f;
                if f_new <= f_x + OBJECTIVE_SLACK * scale {
                    accepted = true;
                    break;
                }
                lipschitz *= 2.0;
            }
            if !accepted {
                break;
            }
        }
        if !f_new.is_finite() {
            return Err(NmfError::NonFinite("nnls objective".into()));
        }
        x_prev = std::mem::replace(&mut x, x_new);
        f_x = f_new.min(f_x);
        if kkt_from_parts(ata, atb, &x) <= target {
            break;
        }
    }
    Ok(x)
}

/// Closed-form HALS update of column `k` of `U`:
/// `max(0, R_k V(k,:)ᵀ / ‖V(k,:)‖²)` with `R_k = M − Σ_{j≠k} U(:,j) V(j,:)`.
pub fn hals_update_column(
    m: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    k: usize,
) -> Result<Vec<f64>> {
    let r = u.cols();
    if u.rows() != m.rows() || v.cols() != m.cols() || v.rows() != r || k >= r {
        return Err(dim_err(
            "hals_update_column",
            format!("M {:?}, U {:?}, V {:?}, k = {k}", m.shape(), u.shape(), v.shape()),
        ));
    }
    let vk = v.row(k);
    let vk_sq = dot(vk, vk);
    if vk_sq.sqrt() <= ZERO_ROW_TOL {
        return Err(NmfError::ZeroRow(k));
    }
    // R_k V(k,:)ᵀ = M V(k,:)ᵀ − Σ_{j≠k} U(:,j) ⟨V(j,:), V(k,:)⟩
    let cross: Vec<f64> = (0..r)
        .map(|j| if j == k { 0.0 } else { dot(v.row(j), vk) })
        .collect();
    Ok((0..m.rows())
        .map(|i| {
            let proj = dot(m.row(i), vk) - dot(u.row(i), &cross);
            (proj / vk_sq).max(0.0)
        })
        .collect())
}
