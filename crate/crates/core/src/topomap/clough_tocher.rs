//! Clough-Tocher C1 piecewise-cubic interpolation over a triangulation.
//!
//! Each triangle is split at its centroid into three cubic Bézier patches.
//! Vertex gradients come from a weighted least-squares plane fit over the
//! vertex's mesh neighbours, which reproduces linear data exactly. The
//! cross-boundary derivative along each edge is constrained to vary
//! linearly, using the neighbouring triangle's centroid to pick the
//! direction, which makes adjacent patches join with C1 continuity.

use super::delaunay::Triangulation;
use crate::error::{Error, Result};

const INSIDE_TOL: f64 = 1e-10;

/// Per-triangle geometry that does not depend on the data values.
#[derive(Debug, Clone)]
struct Element {
    vertices: [usize; 3],
    /// Affine map from `(x - p0)` to the barycentric coordinates `(b1, b2)`.
    inverse: [[f64; 2]; 2],
    origin: [f64; 2],
    /// Edge-derivative coupling per edge (opposite vertex k).
    g: [f64; 3],
}

impl Element {
    fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let dx = p[0] - self.origin[0];
        let dy = p[1] - self.origin[1];
        let b1 = self.inverse[0][0] * dx + self.inverse[0][1] * dy;
        let b2 = self.inverse[1][0] * dx + self.inverse[1][1] * dy;
        [1.0 - b1 - b2, b1, b2]
    }
}

/// Geometry of a Clough-Tocher interpolant, shared by every data vector
/// over the same points.
#[derive(Debug, Clone)]
pub struct CloughTocherMesh {
    tri: Triangulation,
    elements: Vec<Element>,
    /// Sorted neighbour lists per canonical vertex.
    neighbours: Vec<Vec<usize>>,
}

impl CloughTocherMesh {
    pub fn new(points: &[[f64; 2]]) -> Result<Self> {
        let tri = Triangulation::new(points)?;
        let pts = tri.canonical_points();
        let centroid = |t: &[usize; 3]| {
            [
                (pts[t[0]][0] + pts[t[1]][0] + pts[t[2]][0]) / 3.0,
                (pts[t[0]][1] + pts[t[1]][1] + pts[t[2]][1]) / 3.0,
            ]
        };

        let mut elements: Vec<Element> = tri
            .canonical_triangles()
            .iter()
            .map(|&t| {
                let [p0, p1, p2] = t.map(|k| pts[k]);
                let (ax, ay) = (p1[0] - p0[0], p1[1] - p0[1]);
                let (bx, by) = (p2[0] - p0[0], p2[1] - p0[1]);
                let det = ax * by - ay * bx;
                Element {
                    vertices: t,
                    inverse: [[by / det, -bx / det], [-ay / det, ax / det]],
                    origin: p0,
                    g: [0.0; 3],
                }
            })
            .collect();

        for (e, nb) in tri.canonical_neighbors().iter().enumerate() {
            for k in 0..3 {
                elements[e].g[k] = match nb[k] {
                    None => -0.5,
                    Some(other) => {
                        let c = elements[e].barycentric(centroid(&tri.canonical_triangles()[other]));
                        let (i, j) = ((k + 2) % 3, (k + 1) % 3);
                        (2.0 * c[i] + c[j] - 1.0) / (2.0 - 3.0 * c[i] - 3.0 * c[j])
                    }
                };
            }
        }

        let mut neighbours = vec![Vec::new(); pts.len()];
        for t in tri.canonical_triangles() {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        neighbours[t[a]].push(t[b]);
                    }
                }
            }
        }
        for n in &mut neighbours {
            n.sort_unstable();
            n.dedup();
        }

        Ok(CloughTocherMesh {
            tri,
            elements,
            neighbours,
        })
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn point_count(&self) -> usize {
        self.tri.point_count()
    }

    /// Locates `p`: element index and barycentric coordinates.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        self.elements.iter().enumerate().find_map(|(i, e)| {
            let b = e.barycentric(p);
            b.iter().all(|&v| v >= -INSIDE_TOL).then_some((i, b))
        })
    }

    /// Binds data values (in the caller's point order) to the mesh.
    pub fn interpolant(&self, values: &[f64]) -> Result<CloughTocher<'_>> {
        if values.len() != self.point_count() {
            return Err(Error::Shape(format!(
                "{} values for {} points",
                values.len(),
                self.point_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Shape(format!("value {i} is not finite")));
        }
        let f: Vec<f64> = self.tri.canonical_order().iter().map(|&i| values[i]).collect();
        let grads = self.gradients(&f);
        let patches = self
            .elements
            .iter()
            .map(|e| Patch::new(e, self.tri.canonical_points(), &f, &grads))
            .collect();
        Ok(CloughTocher { mesh: self, patches })
    }

    /// Weighted least-squares gradient at every vertex.
    fn gradients(&self, f: &[f64]) -> Vec<[f64; 2]> {
        let pts = self.tri.canonical_points();
        self.neighbours
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                let (mut a11, mut a12, mut a22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for &j in nb {
                    let dx = pts[j][0] - pts[i][0];
                    let dy = pts[j][1] - pts[i][1];
                    let w = 1.0 / (dx * dx + dy * dy);
                    let df = f[j] - f[i];
                    a11 += w * dx * dx;
                    a12 += w * dx * dy;
                    a22 += w * dy * dy;
                    r1 += w * dx * df;
                    r2 += w * dy * df;
                }
                let det = a11 * a22 - a12 * a12;
                [(a22 * r1 - a12 * r2) / det, (a11 * r2 - a12 * r1) / det]
            })
            .collect()
    }
}

/// Bézier control net of one macro-triangle: indices follow the
/// `c[i][j][k][l]` convention with `l` the centroid weight.
#[derive(Debug, Clone, Copy)]
struct Patch {
    c3000: f64,
    c0300: f64,
    c0030: f64,
    c2100: f64,
    c2010: f64,
    c1200: f64,
    c0210: f64,
    c1020: f64,
    c0120: f64,
    c2001: f64,
    c0201: f64,
    c0021: f64,
    c1101: f64,
    c1011: f64,
    c0111: f64,
    c1002: f64,
    c0102: f64,
    c0012: f64,
    c0003: f64,
}

impl Patch {
    fn new(e: &Element, pts: &[[f64; 2]], f: &[f64], grads: &[[f64; 2]]) -> Self {
        let [v0, v1, v2] = e.vertices;
        let (p0, p1, p2) = (pts[v0], pts[v1], pts[v2]);
        let e12 = [p1[0] - p0[0], p1[1] - p0[1]];
        let e23 = [p2[0] - p1[0], p2[1] - p1[1]];
        let e31 = [p0[0] - p2[0], p0[1] - p2[1]];
        let dot = |g: [f64; 2], e: [f64; 2]| g[0] * e[0] + g[1] * e[1];
        let (g1, g2, g3) = (grads[v0], grads[v1], grads[v2]);

        let df12 = dot(g1, e12);
        let df21 = -dot(g2, e12);
        let df23 = dot(g2, e23);
        let df32 = -dot(g3, e23);
        let df31 = dot(g3, e31);
        let df13 = -dot(g1, e31);

        let c3000 = f[v0];
        let c2100 = (df12 + 3.0 * c3000) / 3.0;
        let c2010 = (df13 + 3.0 * c3000) / 3.0;
        let c0300 = f[v1];
        let c1200 = (df21 + 3.0 * c0300) / 3.0;
        let c0210 = (df23 + 3.0 * c0300) / 3.0;
        let c0030 = f[v2];
        let c1020 = (df31 + 3.0 * c0030) / 3.0;
        let c0120 = (df32 + 3.0 * c0030) / 3.0;

        let c2001 = (c2100 + c2010 + c3000) / 3.0;
        let c0201 = (c1200 + c0300 + c0210) / 3.0;
        let c0021 = (c1020 + c0120 + c0030) / 3.0;

        let g = e.g;
        let c0111 = (g[0] * (-c0300 + 3.0 * c0210 - 3.0 * c0120 + c0030)
            + (-c0300 + 2.0 * c0210 - c0120 + c0021 + c0201))
            / 2.0;
        let c1011 = (g[1] * (-c0030 + 3.0 * c1020 - 3.0 * c2010 + c3000)
            + (-c0030 + 2.0 * c1020 - c2010 + c2001 + c0021))
            / 2.0;
        let c1101 = (g[2] * (-c3000 + 3.0 * c2100 - 3.0 * c1200 + c0300)
            + (-c3000 + 2.0 * c2100 - c1200 + c2001 + c0201))
            / 2.0;

        let c1002 = (c1101 + c1011 + c2001) / 3.0;
        let c0102 = (c1101 + c0111 + c0201) / 3.0;
        let c0012 = (c1011 + c0111 + c0021) / 3.0;
        let c0003 = (c1002 + c0102 + c0012) / 3.0;

        Patch {
            c3000,
            c0300,
            c0030,
            c2100,
            c2010,
            c1200,
            c0210,
            c1020,
            c0120,
            c2001,
            c0201,
            c0021,
            c1101,
            c1011,
            c0111,
            c1002,
            c0102,
            c0012,
            c0003,
        }
    }

    /// Evaluates at barycentric `b` of the macro-triangle.
    fn eval(&self, b: [f64; 3]) -> f64 {
        // The sub-triangle is the one opposite the smallest coordinate;
        // shifting by it yields coordinates relative to (two vertices, centroid).
        let m = b[0].min(b[1]).min(b[2]);
        let (b1, b2, b3, b4) = (b[0] - m, b[1] - m, b[2] - m, 3.0 * m);
        let c = self;
        b1 * b1 * b1 * c.c3000
            + 3.0 * b1 * b1 * b2 * c.c2100
            + 3.0 * b1 * b1 * b3 * c.c2010
            + 3.0 * b1 * b1 * b4 * c.c2001
            + 3.0 * b1 * b2 * b2 * c.c1200
            + 6.0 * b1 * b2 * b4 * c.c1101
            + 3.0 * b1 * b3 * b3 * c.c1020
            + 6.0 * b1 * b3 * b4 * c.c1011
            + 3.0 * b1 * b4 * b4 * c.c1002
            + b2 * b2 * b2 * c.c0300
            + 3.0 * b2 * b2 * b3 * c.c0210
            + 3.0 * b2 * b2 * b4 * c.c0201
            + 3.0 * b2 * b3 * b3 * c.c0120
            + 6.0 * b2 * b3 * b4 * c.c0111
            + 3.0 * b2 * b4 * b4 * c.c0102
            + b3 * b3 * b3 * c.c0030
            + 3.0 * b3 * b3 * b4 * c.c0021
            + 3.0 * b3 * b4 * b4 * c.c0012
            + b4 * b4 * b4 * c.c0003
    }
}

/// A Clough-Tocher interpolant bound to one data vector.
#[derive(Debug, Clone)]
pub struct CloughTocher<'m> {
    mesh: &'m CloughTocherMesh,
    patches: Vec<Patch>,
}

impl CloughTocher<'_> {
    /// Value at `p`, or `None` outside the convex hull.
    pub fn eval(&self, p: [f64; 2]) -> Option<f64> {
        self.mesh.locate(p).map(|(i, b)| self.patches[i].eval(b))
    }

    pub(crate) fn eval_located(&self, element: usize, b: [f64; 3]) -> f64 {
        self.patches[element].eval(b)
    }
}
