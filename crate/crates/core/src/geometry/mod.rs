//! Nested polygons, slack matrices and extended formulations.

pub mod hull;
mod npp;

use serde::{Deserialize, Serialize};

use crate::error::{NmfError, Result};
use crate::matrix::DenseMatrix;

pub use npp::{npp_extract, NppInstance};

/// Tolerance for vertex feasibility and facet tightness.
pub const SLACK_TOL: f64 = 1e-10;
/// Tolerance of the lift checks.
pub const LIFT_TOL: f64 = 1e-8;

fn cyclic(pattern: [f64; 6]) -> DenseMatrix {
    DenseMatrix::from_fn(6, 6, |i, j| pattern[(j + 6 - i) % 6])
}

/// The 6×6 matrix `M_a` whose columns, once normalized, form a hexagon
/// nested in another hexagon with ratio `(a−1)/a`.
pub fn hexagon_matrix(a: f64) -> Result<DenseMatrix> {
    if !(a.is_finite() && a > 1.0) {
        return Err(NmfError::InvalidArgument(format!("hexagon parameter a must exceed 1, got {a}")));
    }
    let t = 2.0 * a - 1.0;
    Ok(cyclic([1.0, a, t, t, a, 1.0].map(|x| x / a)))
}

/// Limit of `a · M_a − 1·1ᵀ` scaled to integers: the slack pattern of the
/// regular hexagon.
pub fn hexagon_matrix_inf() -> DenseMatrix {
    cyclic([0.0, 1.0, 2.0, 2.0, 1.0, 0.0])
}

/// Integer rank-5 nonnegative factors of [`hexagon_matrix_inf`].
pub const HEXAGON_U: [[i64; 5]; 6] = [
    [1, 0, 0, 1, 0],
    [2, 0, 0, 0, 1],
    [1, 0, 1, 0, 0],
    [0, 1, 1, 0, 0],
    [0, 2, 0, 0, 1],
    [0, 1, 0, 1, 0],
];

pub const HEXAGON_V: [[i64; 6]; 5] = [
    [0, 0, 0, 1, 1, 0],
    [1, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 1, 2],
    [0, 1, 2, 1, 0, 0],
    [0, 0, 1, 0, 0, 1],
];

/// Integer product of [`HEXAGON_U`] and [`HEXAGON_V`].
pub fn hexagon_factor_product() -> [[i64; 6]; 6] {
    let mut out = [[0i64; 6]; 6];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..5).map(|k| HEXAGON_U[i][k] * HEXAGON_V[k][j]).sum();
        }
    }
    out
}

/// [`HEXAGON_U`] and [`HEXAGON_V`] as floating-point matrices.
pub fn hexagon_factors() -> (DenseMatrix, DenseMatrix) {
    let u = DenseMatrix::from_fn(6, 5, |i, k| HEXAGON_U[i][k] as f64);
    let v = DenseMatrix::from_fn(5, 6, |k, j| HEXAGON_V[k][j] as f64);
    (u, v)
}

/// Polytope `{x : A x ≤ b}` together with its vertex list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolytopeH {
    #[serde(rename = "A")]
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub vertices: Vec<Vec<f64>>,
}

impl PolytopeH {
    pub fn new(a: DenseMatrix, b: Vec<f64>, vertices: Vec<Vec<f64>>) -> Result<Self> {
        let p = PolytopeH { a, b, vertices };
        p.check_dims()?;
        Ok(p)
    }

    fn check_dims(&self) -> Result<()> {
        if self.a.rows() != self.b.len() {
            return Err(crate::error::dim_err(
                "PolytopeH",
                format!("A has {} rows, b has {}", self.a.rows(), self.b.len()),
            ));
        }
        if let Some(w) = self.vertices.iter().find(|w| w.len() != self.a.cols()) {
            return Err(crate::error::dim_err(
                "PolytopeH",
                format!("vertex of length {} in dimension {}", w.len(), self.a.cols()),
            ));
        }
        if self.b.iter().chain(self.vertices.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(NmfError::NonFinite("polytope data".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn num_facets(&self) -> usize {
        self.b.len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PolytopeH = serde_json::from_str(text)?;
        p.check_dims()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polytope serializes")
    }
}

/// Regular `n`-gon inscribed in the unit circle, one unit-normal facet per
/// edge; facet `j` supports the edge from vertex `j` to vertex `j+1`.
pub fn regular_polygon(n: usize) -> Result<PolytopeH> {
    if n < 3 {
        return Err(NmfError::InvalidArgument(format!("a polygon needs n >= 3, got {n}")));
    }
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let vertices: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let t = step * j as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let a = DenseMatrix::from_fn(n, 2, |j, c| {
        let t = step * (j as f64 + 0.5);
        if c == 0 {
            t.cos()
        } else {
            t.sin()
        }
    });
    let b = vec![(step / 2.0).cos(); n];
    PolytopeH::new(a, b, vertices)
}

/// Slack matrix `S(i,j) = b_i − A(i,:) w_j` after normalizing every facet
/// to a unit normal. Entries within [`SLACK_TOL`] of zero are set to zero.
pub fn slack_matrix(p: &PolytopeH) -> Result<DenseMatrix> {
    p.check_dims()?;
    let (f, n) = (p.num_facets(), p.vertices.len());
    if f == 0 || n == 0 {
        return Err(NmfError::EmptyMatrix);
    }
    let mut s = DenseMatrix::zeros(f, n);
    for i in 0..f {
        let normal = p.a.row(i);
        let len = crate::matrix::norm2(normal);
        if len == 0.0 {
            return Err(NmfError::Degenerate(format!("facet {i} has a zero normal")));
        }
        for (j, w) in p.vertices.iter().enumerate() {
            let val = (p.b[i] - crate::matrix::dot(normal, w)) / len;
            if val < -SLACK_TOL {
                return Err(NmfError::VertexOutside {
                    vertex: j,
                    facet: i,
                    violation: -val,
                });
            }
            s[(i, j)] = if val <= SLACK_TOL { 0.0 } else { val };
        }
    }
    Ok(s)
}

/// Outcome of [`verify_lift`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftReport {
    /// Largest entry of `|S − UV|`.
    pub factorization_error: f64,
    pub factorization_ok: bool,
    pub u_nonnegative: bool,
    /// Vertices `j` where `b − A w_j = U V(:,j)` or `V(:,j) ≥ 0` fails.
    pub failed_vertices: Vec<usize>,
    pub vertex_lifts_ok: bool,
    /// Number of inequalities `y ≥ 0` in the lifted description.
    pub inequalities: usize,
    pub containment_note: String,
}

impl LiftReport {
    pub fn passed(&self) -> bool {
        self.factorization_ok && self.u_nonnegative && self.vertex_lifts_ok
    }
}

/// Checks that `Q = {(x, y) : b − A x = U y, y ≥ 0}` is an extended
/// formulation of `P` with the vertex lifts `(w_j, V(:,j))`.
///
/// `U` and `V` must factor [`slack_matrix`] of `P`, i.e. the slacks are
/// taken with unit facet normals.
pub fn verify_lift(p: &PolytopeH, u: &DenseMatrix, v: &DenseMatrix) -> Result<LiftReport> {
    let s = slack_matrix(p)?;
    if u.rows() != s.rows() || v.cols() != s.cols() || u.cols() != v.rows() {
        return Err(crate::error::dim_err(
            "verify_lift",
            format!("slack {:?}, U {:?}, V {:?}", s.shape(), u.shape(), v.shape()),
        ));
    }
    let uv = u.matmul(v)?;
    let diff = s.sub(&uv)?;
    let factorization_error = diff.max_abs();
    let tol = LIFT_TOL * s.max_abs().max(1.0);
    let failed_vertices: Vec<usize> = (0..s.cols())
        .filter(|&j| {
            let lifts = (0..s.rows()).all(|i| diff[(i, j)].abs() <= tol);
            let nonneg = (0..v.rows()).all(|k| v[(k, j)] >= 0.0);
            !(lifts && nonneg)
        })
        .collect();
    let u_nonnegative = u.is_nonnegative();
    let containment_note = if u_nonnegative {
        "U >= 0 and y >= 0 give b - Ax = Uy >= 0, so the projection of Q lies in P".to_string()
    } else {
        "U has negative entries; containment of the projection in P is not certified".to_string()
    };
    Ok(LiftReport {
        factorization_error,
        factorization_ok: factorization_error <= tol,
        u_nonnegative,
        vertex_lifts_ok: failed_vertices.is_empty(),
        failed_vertices,
        inequalities: u.cols(),
        containment_note,
    })
}

/// Row permutation, column permutation and scale `c` with
/// `a(i,j) = c · b(rows[i], cols[j])` within `tol · max|a|`, if any.
///
/// Searches all column permutations, so it is meant for small matrices.
pub fn match_permuted_scaled(
    a: &DenseMatrix,
    b: &DenseMatrix,
    tol: f64,
) -> Option<(Vec<usize>, Vec<usize>, f64)> {
    if a.shape() != b.shape() || a.is_empty() {
        return None;
    }
    let (amax, bmax) = (a.max_abs(), b.max_abs());
    if bmax == 0.0 {
        return (amax == 0.0).then(|| ((0..a.rows()).collect(), (0..a.cols()).collect(), 1.0));
    }
    let c = amax / bmax;
    let atol = tol * amax.max(f64::MIN_POSITIVE);
    let n = a.cols();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut found = None;
    permute(&mut cols, 0, &mut |perm| {
        let mut used = vec![false; b.rows()];
        let mut rows = Vec::with_capacity(a.rows());
        for i in 0..a.rows() {
            let hit = (0..b.rows()).find(|&k| {
                !used[k] && (0..n).all(|j| (a[(i, j)] - c * b[(k, perm[j])]).abs() <= atol)
            });
            match hit {
                Some(k) => {
                    used[k] = true;
                    rows.push(k);
                }
                None => return false,
            }
        }
        found = Some((rows, perm.to_vec(), c));
        true
    });
    found
}

/// Recursive permutation enumeration; stops once `visit` returns true.
fn permute(v: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize]) -> bool) -> bool {
    if k == v.len() {
        return visit(v);
    }
    for i in k..v.len() {
        v.swap(k, i);
        if permute(v, k + 1, visit) {
            return true;
        }
        v.swap(k, i);
    }
    false
}
