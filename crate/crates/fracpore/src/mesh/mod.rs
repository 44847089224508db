//! Admissible triangular meshes with embedded fracture polylines.
//!
//! The two-point flux approximation needs an orthogonality-admissible mesh:
//! cell centers are circumcenters, so the segment joining a cell center to any
//! of its edge midpoints is orthogonal to that edge, and the center-to-edge
//! distances must be strictly positive, which holds exactly when every
//! triangle is acute.
//!
//! Rectangular domains are meshed with a structured block pattern: each `w x 2w`
//! rectangle is split into 8 strictly acute triangles (two interior points on
//! the vertical midline at heights `0.75 w` and `1.25 w`, plus midpoints of the
//! two vertical sides). The largest angle of the pattern is about 83 degrees,
//! so admissibility holds by construction with a uniform margin, while every
//! horizontal line `y = 2 w j` and vertical line `x = w i` is a union of mesh
//! edges - exactly where fracture segments are allowed to lie.
//!
//! Fracture edges are tagged with their two matrix sides (+/-). Fracture
//! network nodes are classified as simple (2 incident fracture edges),
//! intersection (>= 3), tip (interior endpoint) or boundary endpoint.

mod io;

pub use io::{read_mesh_text, write_mesh_text, write_mesh_vtk};

use crate::error::{FracporeError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone)]
pub struct Cell {
    /// Vertex indices, counterclockwise.
    pub v: [usize; 3],
    /// Area (m^2).
    pub area: f64,
    /// Cell center used by the TPFA scheme: the circumcenter.
    pub center: Point,
    /// Barycenter, used for measures (axisymmetric weights) and tagging.
    pub centroid: Point,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Vertex indices with `v[0] < v[1]`.
    pub v: [usize; 2],
    pub length: f64,
    pub midpoint: Point,
    /// Incident cells (1 for boundary edges, 2 otherwise).
    pub cells: Vec<usize>,
}

/// Which side of a rectangular domain a boundary edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct FractureEdge {
    /// Index into `edges`.
    pub edge: usize,
    /// Matrix cell on the `+` side (the side `normal_plus` points away from).
    pub cell_pos: usize,
    /// Matrix cell on the `-` side.
    pub cell_neg: usize,
    /// Unit normal oriented outward of the `+` side.
    pub normal_plus: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractureNodeKind {
    /// Exactly 2 incident fracture edges; eliminated in the fracture flow.
    Simple,
    /// >= 3 incident fracture edges; carries its own flow unknowns.
    Intersection,
    /// Interior endpoint of a fracture: no flow unknown, zero tangential flux.
    Tip,
    /// Fracture endpoint on the domain boundary.
    Boundary,
}

#[derive(Debug, Clone)]
pub struct FractureNode {
    pub vertex: usize,
    pub kind: FractureNodeKind,
    /// Indices into `fracture_edges`.
    pub incident: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// Edge indices of each cell, aligned with `cell_edge_distances`.
    pub cell_edges: Vec<[usize; 3]>,
    /// Distance from cell center to each edge line, signed positive inward.
    pub cell_edge_distances: Vec<[f64; 3]>,
    pub fracture_edges: Vec<FractureEdge>,
    pub fracture_nodes: Vec<FractureNode>,
    /// Map vertex -> index into `fracture_nodes` (usize::MAX if none).
    pub fracture_node_of_vertex: Vec<usize>,
    /// Map edge -> index into `fracture_edges` (usize::MAX if none).
    pub fracture_edge_of_edge: Vec<usize>,
    /// Bounding box, used to classify boundary edges of rectangular domains.
    pub bbox: [Point; 2],
}

/// Rectangular domain plus fracture polylines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Geometry {
    /// `[x0, y0, x1, y1]`.
    pub domain: [f64; 4],
    /// Each fracture is a chain of points; segments must be axis-aligned for
    /// the structured generator.
    pub fractures: Vec<Vec<[f64; 2]>>,
}

const ALIGN_TOL: f64 = 1e-9;

impl Geometry {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Geometry {
            domain: [x0, y0, x1, y1],
            fractures: Vec::new(),
        }
    }

    pub fn with_fracture(mut self, points: Vec<[f64; 2]>) -> Self {
        self.fractures.push(points);
        self
    }

    fn width(&self) -> f64 {
        self.domain[2] - self.domain[0]
    }

    fn height(&self) -> f64 {
        self.domain[3] - self.domain[1]
    }

    /// All fracture segments as point pairs.
    fn segments(&self) -> Vec<(Point, Point)> {
        let mut out = Vec::new();
        for poly in &self.fractures {
            for w in poly.windows(2) {
                out.push((w[0], w[1]));
            }
        }
        out
    }
}

/// Builds an admissible structured mesh conforming to the fracture network.
///
/// `target_h` is the horizontal block size; the actual size is `width / nx`
/// with `nx = round(width / target_h)`. Fails with `Admissibility` if the
/// domain aspect or the fracture coordinates cannot be aligned with the block
/// lattice, and with `Geometry` if fractures cross inside their interiors or
/// leave the domain.
pub fn build_mesh(geometry: &Geometry, target_h: f64) -> Result<Mesh> {
    if !(target_h > 0.0) {
        return Err(FracporeError::Admissibility("target_h must be positive".into()));
    }
    let [x0, y0, x1, y1] = geometry.domain;
    if !(x1 > x0 && y1 > y0) {
        return Err(FracporeError::Geometry("empty domain rectangle".into()));
    }
    check_fracture_geometry(geometry)?;

    let width = geometry.width();
    let height = geometry.height();
    let nx = (width / target_h).round().max(1.0) as usize;
    let w = width / nx as f64;
    let ny_f = height / (2.0 * w);
    let ny = ny_f.round().max(1.0) as usize;
    if (ny_f - ny as f64).abs() > ALIGN_TOL * ny_f.max(1.0) {
        return Err(FracporeError::Admissibility(format!(
            "domain height {height} is not a multiple of 2*w = {} at target_h {target_h}",
            2.0 * w
        )));
    }

    // Lattice vertex ids.
    let n_corner = (nx + 1) * (ny + 1);
    let n_mid = (nx + 1) * ny;
    let corner = |i: usize, j: usize| j * (nx + 1) + i;
    let midside = |i: usize, j: usize| n_corner + j * (nx + 1) + i;
    let interior = |i: usize, j: usize, k: usize| n_corner + n_mid + 2 * (j * nx + i) + k;

    let mut vertices = vec![[0.0, 0.0]; n_corner + n_mid + 2 * nx * ny];
    for j in 0..=ny {
        for i in 0..=nx {
            vertices[corner(i, j)] = [x0 + i as f64 * w, y0 + j as f64 * 2.0 * w];
        }
    }
    for j in 0..ny {
        for i in 0..=nx {
            vertices[midside(i, j)] = [x0 + i as f64 * w, y0 + (2 * j + 1) as f64 * w];
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            let cx = x0 + (i as f64 + 0.5) * w;
            let base = y0 + j as f64 * 2.0 * w;
            vertices[interior(i, j, 0)] = [cx, base + 0.75 * w];
            vertices[interior(i, j, 1)] = [cx, base + 1.25 * w];
        }
    }

    let mut tris: Vec<[usize; 3]> = Vec::with_capacity(8 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let c00 = corner(i, j);
            let c10 = corner(i + 1, j);
            let c01 = corner(i, j + 1);
            let c11 = corner(i + 1, j + 1);
            let ml = midside(i, j);
            let mr = midside(i + 1, j);
            let cl = interior(i, j, 0);
            let ch = interior(i, j, 1);
            tris.push([c00, c10, cl]);
            tris.push([c10, mr, cl]);
            tris.push([cl, mr, ch]);
            tris.push([mr, c11, ch]);
            tris.push([c11, c01, ch]);
            tris.push([c01, ml, ch]);
            tris.push([ml, cl, ch]);
            tris.push([c00, cl, ml]);
        }
    }

    // Fracture edges: walk each segment along the lattice.
    let snap = |v: f64, origin: f64, step: f64, what: &str| -> Result<i64> {
        let k = (v - origin) / step;
        let r = k.round();
        if (k - r).abs() > 1e-6 {
            return Err(FracporeError::Admissibility(format!(
                "fracture coordinate {v} does not align with the {what} lattice (step {step})"
            )));
        }
        Ok(r as i64)
    };
    let mut frac_pairs: Vec<[usize; 2]> = Vec::new();
    for (a, b) in geometry.segments() {
        if (a[0] - b[0]).abs() < ALIGN_TOL {
            // vertical segment on x = const
            let i = snap(a[0], x0, w, "vertical-line")? as usize;
            let ka = snap(a[1].min(b[1]), y0, w, "vertical-node")?;
            let kb = snap(a[1].max(b[1]), y0, w, "vertical-node")?;
            for k in ka..kb {
                // vertices on the line x0 + i*w at heights multiples of w:
                // even -> corner, odd -> midside
                let vid = |k: i64| -> usize {
                    if k % 2 == 0 {
                        corner(i, (k / 2) as usize)
                    } else {
                        midside(i, ((k - 1) / 2) as usize)
                    }
                };
                frac_pairs.push([vid(k), vid(k + 1)]);
            }
        } else if (a[1] - b[1]).abs() < ALIGN_TOL {
            let j2 = snap(a[1], y0, 2.0 * w, "horizontal-line")? as usize;
            let ia = snap(a[0].min(b[0]), x0, w, "horizontal-node")?;
            let ib = snap(a[0].max(b[0]), x0, w, "horizontal-node")?;
            for i in ia..ib {
                frac_pairs.push([corner(i as usize, j2), corner(i as usize + 1, j2)]);
            }
        } else {
            return Err(FracporeError::Admissibility(
                "structured generator supports axis-aligned fracture segments only".into(),
            ));
        }
    }

    let mesh = assemble_mesh(vertices, tris, &frac_pairs, [[x0, y0], [x1, y1]])?;
    let report = validate_admissibility(&mesh);
    if !report.ok() {
        return Err(FracporeError::Admissibility(format!(
            "generated mesh fails admissibility: max defect {:.3e} rad, min distance {:.3e}",
            report.max_orthogonality_defect, report.min_center_edge_distance
        )));
    }
    Ok(mesh)
}

/// Pre-validation of the fracture layout: inside the domain, axis-aligned
/// crossings only at endpoints.
fn check_fracture_geometry(geometry: &Geometry) -> Result<()> {
    let [x0, y0, x1, y1] = geometry.domain;
    let inside = |p: Point| {
        p[0] >= x0 - ALIGN_TOL && p[0] <= x1 + ALIGN_TOL && p[1] >= y0 - ALIGN_TOL && p[1] <= y1 + ALIGN_TOL
    };
    let segs = geometry.segments();
    for (a, b) in &segs {
        if !inside(*a) || !inside(*b) {
            return Err(FracporeError::Geometry(format!(
                "fracture segment ({a:?}, {b:?}) leaves the domain"
            )));
        }
        let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if len <= ALIGN_TOL {
            return Err(FracporeError::Geometry("degenerate fracture segment".into()));
        }
    }
    // Pairwise interior-crossing check. Contact at endpoints (including an
    // endpoint lying on another segment's interior, a T-junction) is allowed.
    for p in 0..segs.len() {
        for q in (p + 1)..segs.len() {
            if segments_cross_interior(segs[p], segs[q]) {
                return Err(FracporeError::Geometry(format!(
                    "fracture segments {:?} and {:?} cross in their interiors",
                    segs[p], segs[q]
                )));
            }
        }
    }
    Ok(())
}

/// True if the open interiors of both segments intersect (transversal crossing
/// or collinear overlap of positive length).
fn segments_cross_interior(s1: (Point, Point), s2: (Point, Point)) -> bool {
    let (a, b) = s1;
    let (c, d) = s2;
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let cross = |u: [f64; 2], v: [f64; 2]| u[0] * v[1] - u[1] * v[0];
    let qp = [c[0] - a[0], c[1] - a[1]];
    let denom = cross(r, s);
    let scale = (r[0].abs() + r[1].abs() + s[0].abs() + s[1].abs()).max(1e-300);
    if denom.abs() > 1e-12 * scale * scale {
        let t = cross(qp, s) / denom;
        let u = cross(qp, r) / denom;
        let eps = 1e-9;
        return t > eps && t < 1.0 - eps && u > eps && u < 1.0 - eps;
    }
    // Parallel. Overlap only possible if collinear.
    if cross(qp, r).abs() > 1e-12 * scale * scale {
        return false;
    }
    let rr = r[0] * r[0] + r[1] * r[1];
    let t0 = (qp[0] * r[0] + qp[1] * r[1]) / rr;
    let t1 = t0 + (s[0] * r[0] + s[1] * r[1]) / rr;
    let (lo, hi) = (t0.min(t1), t0.max(t1));
    let eps = 1e-9;
    hi > eps && lo < 1.0 - eps && (hi.min(1.0) - lo.max(0.0)) > eps
}

/// Builds every derived field from raw vertices, triangles and tagged
/// fracture vertex pairs. Used by the generator and by mesh import; performs
/// topological validation but no admissibility enforcement (that is
/// report-only, see [`validate_admissibility`]).
pub fn assemble_mesh(
    vertices: Vec<Point>,
    tris: Vec<[usize; 3]>,
    fracture_vertex_pairs: &[[usize; 2]],
    bbox: [Point; 2],
) -> Result<Mesh> {
    let mut cells = Vec::with_capacity(tris.len());
    for t in &tris {
        let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        if area2 <= 0.0 {
            return Err(FracporeError::Geometry(format!(
                "triangle {t:?} is degenerate or not counterclockwise"
            )));
        }
        cells.push(Cell {
            v: *t,
            area: 0.5 * area2,
            center: circumcenter(p),
            centroid: [
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ],
        });
    }

    // Edge table.
    let mut edge_of_pair: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut cell_edges = vec![[usize::MAX; 3]; cells.len()];
    for (ci, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let eid = *edge_of_pair.entry(key).or_insert_with(|| {
                let pa = vertices[key.0];
                let pb = vertices[key.1];
                edges.push(Edge {
                    v: [key.0, key.1],
                    length: ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt(),
                    midpoint: [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])],
                    cells: Vec::with_capacity(2),
                });
                edges.len() - 1
            });
            edges[eid].cells.push(ci);
            cell_edges[ci][k] = eid;
        }
    }
    for e in &edges {
        if e.cells.is_empty() || e.cells.len() > 2 {
            return Err(FracporeError::Geometry(format!(
                "edge {:?} has {} incident cells",
                e.v,
                e.cells.len()
            )));
        }
    }

    // Fracture edges.
    let mut fracture_edge_of_edge = vec![usize::MAX; edges.len()];
    let mut fracture_edges = Vec::new();
    for pair in fracture_vertex_pairs {
        let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        let eid = *edge_of_pair.get(&key).ok_or_else(|| {
            FracporeError::Geometry(format!("fracture pair {pair:?} is not a mesh edge"))
        })?;
        if fracture_edge_of_edge[eid] != usize::MAX {
            continue; // duplicate tag
        }
        let e = &edges[eid];
        if e.cells.len() != 2 {
            return Err(FracporeError::Geometry(format!(
                "fracture edge {:?} lies on the domain boundary",
                e.v
            )));
        }
        let pa = vertices[e.v[0]];
        let pb = vertices[e.v[1]];
        let t = [(pb[0] - pa[0]) / e.length, (pb[1] - pa[1]) / e.length];
        let n_plus = [-t[1], t[0]];
        // cell_pos is the cell that n_plus points away from.
        let c0 = &cells[e.cells[0]];
        let side0 = (c0.centroid[0] - e.midpoint[0]) * n_plus[0] + (c0.centroid[1] - e.midpoint[1]) * n_plus[1];
        let (cell_pos, cell_neg) = if side0 < 0.0 {
            (e.cells[0], e.cells[1])
        } else {
            (e.cells[1], e.cells[0])
        };
        fracture_edge_of_edge[eid] = fracture_edges.len();
        fracture_edges.push(FractureEdge {
            edge: eid,
            cell_pos,
            cell_neg,
            normal_plus: n_plus,
        });
    }

    // Fracture node classification.
    let mut incident: std::collections::HashMap<usize, Vec<usize>> = std::collections::HashMap::new();
    for (fi, fe) in fracture_edges.iter().enumerate() {
        for &v in &edges[fe.edge].v {
            incident.entry(v).or_default().push(fi);
        }
    }
    let on_boundary = |p: Point| {
        let [lo, hi] = bbox;
        (p[0] - lo[0]).abs() < ALIGN_TOL * (1.0 + hi[0] - lo[0])
            || (p[0] - hi[0]).abs() < ALIGN_TOL * (1.0 + hi[0] - lo[0])
            || (p[1] - lo[1]).abs() < ALIGN_TOL * (1.0 + hi[1] - lo[1])
            || (p[1] - hi[1]).abs() < ALIGN_TOL * (1.0 + hi[1] - lo[1])
    };
    let mut fracture_nodes = Vec::new();
    let mut fracture_node_of_vertex = vec![usize::MAX; vertices.len()];
    let mut keys: Vec<usize> = incident.keys().copied().collect();
    keys.sort_unstable();
    for v in keys {
        let inc = incident.remove(&v).unwrap();
        let kind = match inc.len() {
            1 => {
                if on_boundary(vertices[v]) {
                    FractureNodeKind::Boundary
                } else {
                    FractureNodeKind::Tip
                }
            }
            2 => FractureNodeKind::Simple,
            _ => FractureNodeKind::Intersection,
        };
        fracture_node_of_vertex[v] = fracture_nodes.len();
        fracture_nodes.push(FractureNode {
            vertex: v,
            kind,
            incident: inc,
        });
    }

    // Center-to-edge distances.
    let mut cell_edge_distances = vec![[0.0; 3]; cells.len()];
    for ci in 0..cells.len() {
        for k in 0..3 {
            let eid = cell_edges[ci][k];
            let n_out = outward_normal_raw(&cells[ci], &edges[eid], &vertices);
            let c = cells[ci].center;
            let m = edges[eid].midpoint;
            cell_edge_distances[ci][k] = (m[0] - c[0]) * n_out[0] + (m[1] - c[1]) * n_out[1];
        }
    }

    Ok(Mesh {
        vertices,
        cells,
        edges,
        cell_edges,
        cell_edge_distances,
        fracture_edges,
        fracture_nodes,
        fracture_node_of_vertex,
        fracture_edge_of_edge,
        bbox,
    })
}

fn circumcenter(p: [Point; 3]) -> Point {
    let [a, b, c] = p;
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    [
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ]
}

fn outward_normal_raw(cell: &Cell, edge: &Edge, vertices: &[Point]) -> Point {
    let pa = vertices[edge.v[0]];
    let pb = vertices[edge.v[1]];
    let t = [(pb[0] - pa[0]) / edge.length, (pb[1] - pa[1]) / edge.length];
    let mut n = [-t[1], t[0]];
    let g = cell.centroid;
    if (g[0] - edge.midpoint[0]) * n[0] + (g[1] - edge.midpoint[1]) * n[1] > 0.0 {
        n = [-n[0], -n[1]];
    }
    n
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Unit normal of `edge` pointing out of `cell`.
    pub fn outward_normal(&self, cell: usize, edge: usize) -> Point {
        outward_normal_raw(&self.cells[cell], &self.edges[edge], &self.vertices)
    }

    /// Signed distance from the center of `cell` to the line of its `k`-th edge.
    pub fn center_edge_distance(&self, cell: usize, k: usize) -> f64 {
        self.cell_edge_distances[cell][k]
    }

    /// Boundary edges with their side classification (rectangular domains).
    pub fn boundary_edges(&self) -> Vec<(usize, BoundarySide)> {
        let [lo, hi] = self.bbox;
        let tol_x = ALIGN_TOL * (1.0 + hi[0] - lo[0]);
        let tol_y = ALIGN_TOL * (1.0 + hi[1] - lo[1]);
        let mut out = Vec::new();
        for (eid, e) in self.edges.iter().enumerate() {
            if e.cells.len() != 1 {
                continue;
            }
            let m = e.midpoint;
            let side = if (m[0] - lo[0]).abs() < tol_x {
                BoundarySide::Left
            } else if (m[0] - hi[0]).abs() < tol_x {
                BoundarySide::Right
            } else if (m[1] - lo[1]).abs() < tol_y {
                BoundarySide::Bottom
            } else if (m[1] - hi[1]).abs() < tol_y {
                BoundarySide::Top
            } else {
                continue;
            };
            out.push((eid, side));
        }
        out
    }

    /// Vertices lying on a given boundary side.
    pub fn boundary_vertices(&self, side: BoundarySide) -> Vec<usize> {
        let [lo, hi] = self.bbox;
        let tol_x = ALIGN_TOL * (1.0 + hi[0] - lo[0]);
        let tol_y = ALIGN_TOL * (1.0 + hi[1] - lo[1]);
        (0..self.vertices.len())
            .filter(|&v| {
                let p = self.vertices[v];
                match side {
                    BoundarySide::Left => (p[0] - lo[0]).abs() < tol_x,
                    BoundarySide::Right => (p[0] - hi[0]).abs() < tol_x,
                    BoundarySide::Bottom => (p[1] - lo[1]).abs() < tol_y,
                    BoundarySide::Top => (p[1] - hi[1]).abs() < tol_y,
                }
            })
            .collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }
}

/// Admissibility report: worst orthogonality defect (radians) between the
/// center-to-edge-midpoint segments and the edge normals, and the smallest
/// center-to-edge distance.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    pub max_orthogonality_defect: f64,
    pub min_center_edge_distance: f64,
}

impl AdmissibilityReport {
    pub fn ok(&self) -> bool {
        self.max_orthogonality_defect <= 1e-10 && self.min_center_edge_distance > 0.0
    }
}

/// Checks every (cell, edge) incidence; report-only.
pub fn validate_admissibility(mesh: &Mesh) -> AdmissibilityReport {
    let mut max_defect: f64 = 0.0;
    let mut min_dist = f64::INFINITY;
    for ci in 0..mesh.cells.len() {
        for k in 0..3 {
            let eid = mesh.cell_edges[ci][k];
            let e = &mesh.edges[eid];
            let c = mesh.cells[ci].center;
            let m = e.midpoint;
            let seg = [m[0] - c[0], m[1] - c[1]];
            let seg_n = (seg[0] * seg[0] + seg[1] * seg[1]).sqrt();
            let pa = mesh.vertices[e.v[0]];
            let pb = mesh.vertices[e.v[1]];
            let t = [(pb[0] - pa[0]) / e.length, (pb[1] - pa[1]) / e.length];
            if seg_n > 1e-300 {
                let sin_angle = ((seg[0] * t[0] + seg[1] * t[1]) / seg_n).abs();
                max_defect = max_defect.max(sin_angle.asin());
            }
            min_dist = min_dist.min(mesh.cell_edge_distances[ci][k]);
        }
    }
    AdmissibilityReport {
        max_orthogonality_defect: max_defect,
        min_center_edge_distance: min_dist,
    }
}
