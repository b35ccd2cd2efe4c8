//! Planar Delaunay triangulation for small point sets.
//!
//! Points are first put in lexicographic order, swept into an arbitrary
//! triangulation of their convex hull, then edge-flipped until every
//! interior edge is locally Delaunay. Working in the sorted order makes the
//! result independent of how the caller ordered the input. Cocircular
//! quadrilaterals are never flipped, so ties resolve to whatever diagonal
//! the sweep produced.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Twice the signed area of `abc`; positive when counter-clockwise.
pub fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies inside the circumcircle of counter-clockwise `abc`.
pub fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation {
    /// Points in canonical (lexicographic) order.
    points: Vec<[f64; 2]>,
    /// `order[k]` is the caller's index of canonical point `k`.
    order: Vec<usize>,
    /// Counter-clockwise triangles over canonical indices.
    triangles: Vec<[usize; 3]>,
    /// `neighbors[t][k]` is the triangle across the edge opposite vertex `k`.
    neighbors: Vec<[Option<usize>; 3]>,
}

impl Triangulation {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::TooFewElectrodes(points.len()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite point coordinate".into()));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&i, &j| {
            let (a, b) = (points[i], points[j]);
            a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
        });
        let sorted: Vec<[f64; 2]> = order.iter().map(|&i| points[i]).collect();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Shape(format!("duplicate point {:?}", w[0])));
        }

        let scale = bounding_extent(&sorted);
        let area_eps = 1e-14 * scale * scale;
        let mut triangles = sweep(&sorted, area_eps).ok_or(Error::Collinear(points.len()))?;
        legalize(&sorted, &mut triangles, 1e-13 * scale.powi(4));
        let neighbors = adjacency(&triangles);
        Ok(Triangulation {
            points: sorted,
            order,
            triangles,
            neighbors,
        })
    }

    /// Triangles as counter-clockwise triples of the caller's point indices.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        self.triangles
            .iter()
            .map(|t| t.map(|k| self.order[k]))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn canonical_points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub(crate) fn canonical_order(&self) -> &[usize] {
        &self.order
    }

    pub(crate) fn canonical_triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub(crate) fn canonical_neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    /// Largest `incircle` value of any point against any triangle's
    /// circumcircle, relative to the fourth power of the point spread.
    /// Non-positive (up to rounding) for a Delaunay triangulation.
    pub fn max_circumcircle_violation(&self) -> f64 {
        let scale = bounding_extent(&self.points).powi(4);
        let mut worst = f64::NEG_INFINITY;
        for t in &self.triangles {
            let [a, b, c] = t.map(|k| self.points[k]);
            for (k, &d) in self.points.iter().enumerate() {
                if t.contains(&k) {
                    continue;
                }
                worst = worst.max(incircle(a, b, c, d) / scale);
            }
        }
        worst
    }
}

fn bounding_extent(points: &[[f64; 2]]) -> f64 {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE)
}

/// Triangulates lexicographically sorted points by sweeping left to right and
/// fanning each new point to the hull edges it can see.
fn sweep(points: &[[f64; 2]], eps: f64) -> Option<Vec<[usize; 3]>> {
    // collinear prefix
    let first = (2..points.len()).find(|&k| orient(points[0], points[1], points[k]).abs() > eps)?;
    let apex = points[first];
    let mut triangles = Vec::new();
    let upward = orient(points[0], points[1], apex) > 0.0;
    for i in 0..first - 1 {
        if upward {
            triangles.push([i, i + 1, first]);
        } else {
            triangles.push([i + 1, i, first]);
        }
    }
    // counter-clockwise hull
    let mut hull: Vec<usize> = if upward {
        (0..first).chain(std::iter::once(first)).collect()
    } else {
        std::iter::once(first).chain((0..first).rev()).collect()
    };

    for p in first + 1..points.len() {
        let n = hull.len();
        let visible: Vec<bool> = (0..n)
            .map(|i| orient(points[hull[i]], points[hull[(i + 1) % n]], points[p]) < -eps)
            .collect();
        // start of the visible run: a visible edge whose predecessor is hidden
        let start = (0..n).find(|&i| visible[i] && !visible[(i + n - 1) % n])?;
        let mut len = 0;
        while visible[(start + len) % n] {
            let (a, b) = (hull[(start + len) % n], hull[(start + len + 1) % n]);
            triangles.push([b, a, p]);
            len += 1;
        }
        // drop the vertices strictly inside the visible run, insert p
        let mut next = Vec::with_capacity(n + 1);
        for j in 0..n {
            let offset = (j + n - start) % n;
            if offset >= 1 && offset < len {
                continue;
            }
            next.push(hull[j]);
            if offset == 0 {
                next.push(p);
            }
        }
        hull = next;
    }
    Some(triangles)
}

type EdgeMap = HashMap<(usize, usize), (usize, usize)>;

/// Directed edge `(a, b)` → (triangle, local index of the opposite vertex).
fn edge_map(triangles: &[[usize; 3]]) -> EdgeMap {
    let mut map = HashMap::with_capacity(triangles.len() * 3);
    for (t, tri) in triangles.iter().enumerate() {
        for k in 0..3 {
            map.insert((tri[(k + 1) % 3], tri[(k + 2) % 3]), (t, k));
        }
    }
    map
}

fn adjacency(triangles: &[[usize; 3]]) -> Vec<[Option<usize>; 3]> {
    let map = edge_map(triangles);
    triangles
        .iter()
        .map(|tri| {
            let mut nb = [None; 3];
            for (k, slot) in nb.iter_mut().enumerate() {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                *slot = map.get(&(b, a)).map(|&(t, _)| t);
            }
            nb
        })
        .collect()
}

fn legalize(points: &[[f64; 2]], triangles: &mut [[usize; 3]], eps: f64) {
    // every flip strictly increases the minimum angle vector, so this ends
    let limit = 64 * triangles.len() * triangles.len() + 64;
    for _ in 0..limit {
        let map = edge_map(triangles);
        let mut flipped = false;
        for t in 0..triangles.len() {
            for k in 0..3 {
                let tri = triangles[t];
                let (c, a, b) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let Some(&(u, j)) = map.get(&(b, a)) else { continue };
                if u < t {
                    continue;
                }
                let d = triangles[u][j];
                let (pa, pb, pc, pd) = (points[a], points[b], points[c], points[d]);
                if incircle(pc, pa, pb, pd) > eps
                    && orient(pc, pa, pd) > 0.0
                    && orient(pd, pb, pc) > 0.0
                {
                    triangles[t] = [c, a, d];
                    triangles[u] = [d, b, c];
                    flipped = true;
                    break;
                }
            }
            if flipped {
                break;
            }
        }
        if !flipped {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Montage;
    use crate::topomap::project;

    fn area(points: &[[f64; 2]], tri: [usize; 3]) -> f64 {
        orient(points[tri[0]], points[tri[1]], points[tri[2]]) / 2.0
    }

    #[test]
    fn three_points_make_one_triangle() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let t = Triangulation::new(&pts).unwrap();
        assert_eq!(t.len(), 1);
        assert!(area(&pts, t.triangles()[0]) > 0.0);
    }

    #[test]
    fn square_gives_two_delaunay_triangles() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let t = Triangulation::new(&pts).unwrap();
        assert_eq!(t.len(), 2);
        let total: f64 = t.triangles().into_iter().map(|tri| area(&pts, tri)).sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(t.max_circumcircle_violation() <= 1e-9);
    }

    #[test]
    fn collinear_points_are_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(Triangulation::new(&pts), Err(Error::Collinear(4))));
    }

    #[test]
    fn collinear_prefix_is_fanned() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [1.5, 2.0]];
        let t = Triangulation::new(&pts).unwrap();
        assert_eq!(t.len(), 3);
        let total: f64 = t.triangles().into_iter().map(|tri| area(&pts, tri)).sum();
        assert!((total - 3.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            Triangulation::new(&[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::TooFewElectrodes(2))
        ));
    }

    #[test]
    fn standard_layout_is_delaunay_and_covers_the_hull() {
        let layout = project(&Montage::standard_32()).unwrap();
        let t = Triangulation::new(&layout.points).unwrap();
        assert!(t.max_circumcircle_violation() <= 1e-9);
        // Euler: T = 2n - 2 - h for a triangulated point set with h hull vertices
        let n = layout.len();
        let boundary = t
            .canonical_neighbors()
            .iter()
            .flatten()
            .filter(|nb| nb.is_none())
            .count();
        assert_eq!(t.len(), 2 * n - 2 - boundary);
        for tri in t.triangles() {
            assert!(area(&layout.points, tri) > 0.0);
        }
    }

    #[test]
    fn random_sets_are_delaunay() {
        let mut s = 5u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for n in [3usize, 5, 10, 40, 100] {
            let pts: Vec<[f64; 2]> = (0..n).map(|_| [next(), next()]).collect();
            let t = Triangulation::new(&pts).unwrap();
            assert!(t.max_circumcircle_violation() <= 1e-9, "n={n}");
        }
    }

    #[test]
    fn input_order_does_not_change_the_mesh() {
        let layout = project(&Montage::standard_32()).unwrap();
        let a = Triangulation::new(&layout.points).unwrap();
        let mut rev = layout.points.clone();
        rev.reverse();
        let b = Triangulation::new(&rev).unwrap();
        assert_eq!(a.canonical_triangles(), b.canonical_triangles());
    }
}
