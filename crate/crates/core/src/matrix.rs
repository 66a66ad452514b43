//! Dense row-major matrices and the handful of linear-algebra kernels the
//! solvers share: products, norms, residuals, column normalization and
//! numerical rank.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, NmfError, Result};

/// Default relative tolerance (against the largest singular value) used by
/// [`numeric_rank`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Relative threshold (against the largest column sum) below which a column
/// is treated as zero by [`normalize_columns_l1`].
pub const ZERO_COLUMN_TOL: f64 = 1e-15;

/// Row-major dense real matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Wire form of a matrix: `{rows, cols, data}` with `data` flat row-major.
#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<RawMatrix> for DenseMatrix {
    type Error = NmfError;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        DenseMatrix::new(raw.rows, raw.cols, raw.data)
    }
}

impl From<DenseMatrix> for RawMatrix {
    fn from(m: DenseMatrix) -> Self {
        RawMatrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data. Rejects wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(dim_err(
                "DenseMatrix::new",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(NmfError::NonFinite(format!(
                "entry ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(dim_err(
                    "DenseMatrix::from_rows",
                    format!("row {i} has {} entries, expected {cols}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(dim_err(
                    "DenseMatrix::from_columns",
                    format!("column {j} has {} entries, expected {rows}", c.len()),
                ));
            }
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(NmfError::NonFinite("column data".into()));
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Flat row-major view of the entries.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        self.row_mut(i).copy_from_slice(values);
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Submatrix made of the listed columns, in order.
    pub fn select_columns(&self, idx: &[usize]) -> DenseMatrix {
        Self::from_fn(self.rows, idx.len(), |i, k| self[(i, idx[k])])
    }

    /// Submatrix made of the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        Self::from_fn(idx.len(), self.cols, |k, j| self[(idx[k], j)])
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(dim_err(
                "matmul",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in o_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(dim_err(
                "t_matmul",
                format!(
                    "({}x{})ᵀ times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(dim_err(
                "matmul_t",
                format!(
                    "{}x{} times ({}x{})ᵀ",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = dot(a_row, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(dim_err(
                "sub",
                format!("{:?} minus {:?}", self.shape(), other.shape()),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.sum() / self.data.len() as f64
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with the first negative entry, if any.
    pub fn check_nonnegative(&self) -> Result<()> {
        match self.data.iter().position(|&v| v < 0.0) {
            None => Ok(()),
            Some(pos) => Err(NmfError::NegativeEntry {
                row: pos / self.cols,
                col: pos % self.cols,
                value: self.data[pos],
            }),
        }
    }

    pub fn column_l1_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v.abs();
            }
        }
        out
    }

    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v * v;
            }
        }
        out
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `M = U diag(s) Vᵀ`, singular values in
/// descending order.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

/// Computes the thin SVD (Golub–Kahan bidiagonalization with implicit-shift
/// QR, via nalgebra), sorted by decreasing singular value.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    let dec = m.to_nalgebra().svd(true, true);
    let u = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested Vᵀ");
    let s = dec.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let k = order.len();
    let u_sorted = DenseMatrix::from_fn(m.rows(), k, |i, c| u[(i, order[c])]);
    let v_sorted = DenseMatrix::from_fn(m.cols(), k, |j, c| vt[(order[c], j)]);
    Ok(Svd {
        u: u_sorted,
        singular_values: order.iter().map(|&c| s[c]).collect(),
        v: v_sorted,
    })
}

pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Err(NmfError::EmptyMatrix);
    }
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values strictly above `tol * σ_max`.
pub fn numeric_rank(m: &DenseMatrix, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(NmfError::InvalidArgument(format!(
            "rank tolerance must be positive, got {tol}"
        )));
    }
    let s = singular_values(m)?;
    let smax = s[0];
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&v| v > tol * smax).count())
}

fn check_factor_dims(m: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> Result<()> {
    if u.rows() != m.rows() || v.cols() != m.cols() || u.cols() != v.rows() {
        return Err(dim_err(
            "residual",
            format!(
                "M {:?}, U {:?}, V {:?}",
                m.shape(),
                u.shape(),
                v.shape()
            ),
        ));
    }
    Ok(())
}

/// Frobenius norm of `M - UV`.
pub fn residual(m: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    check_factor_dims(m, u, v)?;
    let r = u.cols();
    let mut total = 0.0;
    let mut buf = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        buf.copy_from_slice(m.row(i));
        let u_row = u.row(i);
        for k in 0..r {
            let a = u_row[k];
            if a == 0.0 {
                continue;
            }
            for (b, &x) in buf.iter_mut().zip(v.row(k)) {
                *b -= a * x;
            }
        }
        total += buf.iter().map(|x| x * x).sum::<f64>();
    }
    Ok(total.sqrt())
}

/// `‖M - UV‖_F / ‖M‖_F`.
pub fn relative_residual(m: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix) -> Result<f64> {
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Err(NmfError::ZeroMatrix);
    }
    Ok(residual(m, u, v)? / norm)
}

/// Column-ℓ1-normalized data together with the scales that undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedData {
    /// Retained columns, each summing to one.
    pub normalized: DenseMatrix,
    /// ℓ1 norm of each retained column (diagonal of `D_M`).
    pub scale: Vec<f64>,
    /// Original indices of the retained columns.
    pub kept: Vec<usize>,
    /// Original indices of the dropped zero columns.
    pub removed: Vec<usize>,
}

impl NormalizedData {
    /// `normalized · diag(scale)`, i.e. the retained columns of the input.
    pub fn rescale(&self) -> DenseMatrix {
        let n = &self.normalized;
        DenseMatrix::from_fn(n.rows(), n.cols(), |i, j| n[(i, j)] * self.scale[j])
    }
}

/// Drops (numerically) zero columns and scales the others to unit ℓ1 norm.
pub fn normalize_columns_l1(m: &DenseMatrix) -> Result<NormalizedData> {
    m.check_nonnegative()?;
    let sums = m.column_l1_norms();
    let max_sum = sums.iter().copied().fold(0.0, f64::max);
    let threshold = ZERO_COLUMN_TOL * max_sum;
    let (kept, removed): (Vec<usize>, Vec<usize>) =
        (0..m.cols()).partition(|&j| max_sum > 0.0 && sums[j] > threshold);
    let scale: Vec<f64> = kept.iter().map(|&j| sums[j]).collect();
    let normalized =
        DenseMatrix::from_fn(m.rows(), kept.len(), |i, k| m[(i, kept[k])] / scale[k]);
    Ok(NormalizedData {
        normalized,
        scale,
        kept,
        removed,
    })
}
