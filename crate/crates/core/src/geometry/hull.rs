//! Planar convex hulls and halfspace intersection.

use crate::error::{NmfError, Result};

/// Collinearity / containment tolerance for the planar routines.
pub const PLANAR_TOL: f64 = 1e-10;

#[inline]
fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Indices of the convex hull vertices in counterclockwise order (Andrew's
/// monotone chain). Collinear and duplicate points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    idx.dedup_by(|a, b| {
        (points[*a][0] - points[*b][0]).abs() <= PLANAR_TOL
            && (points[*a][1] - points[*b][1]).abs() <= PLANAR_TOL
    });
    if idx.len() < 3 {
        return idx;
    }
    let scale = points
        .iter()
        .fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        .max(1.0);
    let tol = PLANAR_TOL * scale * scale;
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(
                    points[hull[hull.len() - 2]],
                    points[hull[hull.len() - 1]],
                    points[i],
                ) <= tol
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// A halfspace `normal · z ≤ offset` in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

/// Vertices (counterclockwise) of `{z : nᵢ·z ≤ bᵢ}` and the index of the
/// constraint supporting the edge that starts at each vertex.
///
/// Requires the origin strictly inside every constraint (`bᵢ > 0`) so the
/// intersection can be read off the dual hull of the points `nᵢ / bᵢ`.
/// Constraints with a zero normal are ignored; redundant constraints do not
/// appear in the output. Returns [`NmfError::Unbounded`] when the region is
/// not bounded.
pub fn intersect_halfplanes(planes: &[HalfPlane]) -> Result<(Vec<[f64; 2]>, Vec<usize>)> {
    let mut dual: Vec<[f64; 2]> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    for (i, h) in planes.iter().enumerate() {
        let nn = h.normal[0].hypot(h.normal[1]);
        if nn <= PLANAR_TOL {
            if h.offset < -PLANAR_TOL {
                return Err(NmfError::Degenerate("infeasible constant constraint".into()));
            }
            continue;
        }
        if !(h.offset > PLANAR_TOL * nn) {
            return Err(NmfError::Degenerate(
                "origin is not strictly inside every halfplane".into(),
            ));
        }
        dual.push([h.normal[0] / h.offset, h.normal[1] / h.offset]);
        owner.push(i);
    }
    let hull = convex_hull(&dual);
    if hull.len() < 3 {
        return Err(NmfError::Unbounded);
    }
    // Bounded iff the origin lies strictly inside the dual hull.
    for w in 0..hull.len() {
        let a = dual[hull[w]];
        let b = dual[hull[(w + 1) % hull.len()]];
        if cross(a, b, [0.0, 0.0]) <= PLANAR_TOL {
            return Err(NmfError::Unbounded);
        }
    }
    // Consecutive dual vertices a, b give the primal vertex where lines
    // a·z = 1 and b·z = 1 meet.
    let mut verts = Vec::with_capacity(hull.len());
    let mut edges = Vec::with_capacity(hull.len());
    for w in 0..hull.len() {
        let a = dual[hull[w]];
        let b = dual[hull[(w + 1) % hull.len()]];
        let det = a[0] * b[1] - a[1] * b[0];
        verts.push([(b[1] - a[1]) / det, (a[0] - b[0]) / det]);
        edges.push(owner[hull[(w + 1) % hull.len()]]);
    }
    Ok((verts, edges))
}

/// Signed area (positive for counterclockwise order).
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}

/// Whether `pt` lies in the convex counterclockwise polygon, up to `tol`
/// in distance to each edge line.
pub fn contains(poly: &[[f64; 2]], pt: [f64; 2], tol: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        cross(a, b, pt) >= -tol * len
    })
}
