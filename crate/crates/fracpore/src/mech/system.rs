//! Quadratic finite elements for linear elasticity on the fracture-duplicated
//! displacement space, in plane strain or axisymmetric (x, r) form.
//!
//! The bilinear form is `∫ 2 mu e(u):e(v) + lambda div(u) div(v)`; loads come
//! from cell-wise equivalent pressures (`b p_E div v`), fracture-face
//! equivalent pressures acting on the displacement jump, a constant
//! pre-stress, boundary tractions and optional body forces. Solves use the
//! direct sparse LU, factored once per mesh.

use super::dofmap::MechDofMap;
use crate::error::{FracporeError, Result};
use crate::mesh::{BoundarySide, Mesh, Point};
use crate::solvers::{CsrMatrix, SparseLu, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechMode {
    Plane,
    /// Coordinates are (x, r); the second coordinate is the radius. Strains
    /// gain the hoop component `u_r / r` and all integrals carry `2 pi r`.
    Axisymmetric,
}

/// 6-point, degree-4 exact triangle rule; weights sum to 1, so
/// `∫_K f = area * Σ w_i f(x_i)`.
const TRI_QUAD: [(f64, f64, f64); 6] = [
    (0.445948490915965, 0.445948490915965, 0.223381589678011),
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.445948490915965, 0.108103018168070, 0.223381589678011),
    (0.091576213509771, 0.091576213509771, 0.109951743655322),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
    (0.091576213509771, 0.816847572980459, 0.109951743655322),
];

/// 3-point Gauss on [0,1], exact to degree 5.
const EDGE_QUAD: [(f64, f64); 3] = [
    (0.112701665379258, 0.277777777777778),
    (0.5, 0.444444444444444),
    (0.887298334620742, 0.277777777777778),
];

/// P2 shape values at barycentric (l1, l2).
fn p2_values(l1: f64, l2: f64) -> [f64; 6] {
    let l0 = 1.0 - l1 - l2;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Reference-space gradients of the P2 shapes at (l1, l2).
fn p2_ref_grads(l1: f64, l2: f64) -> [[f64; 2]; 6] {
    let l0 = 1.0 - l1 - l2;
    // grad(l0) = (-1,-1), grad(l1) = (1,0), grad(l2) = (0,1)
    [
        [-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)],
        [4.0 * l1 - 1.0, 0.0],
        [0.0, 4.0 * l2 - 1.0],
        [4.0 * (l0 - l1), -4.0 * l1],
        [4.0 * l2, 4.0 * l1],
        [-4.0 * l2, 4.0 * (l0 - l2)],
    ]
}

/// Quadratic trace shapes on an edge parameterized by t in [0,1]:
/// [end0, midpoint, end1].
fn edge_trace_values(t: f64) -> [f64; 3] {
    [
        (1.0 - t) * (1.0 - 2.0 * t),
        4.0 * t * (1.0 - t),
        t * (2.0 * t - 1.0),
    ]
}

pub struct MechSystem {
    pub mode: MechMode,
    pub lambda: f64,
    pub mu: f64,
    pub map: MechDofMap,
    k_full: CsrMatrix,
    dirichlet: Vec<Option<f64>>,
    lu: Option<SparseLu>,
}

struct CellBasis {
    /// physical gradients per node
    grads: [[f64; 2]; 6],
    values: [f64; 6],
    /// physical quadrature point
    point: Point,
}

impl MechSystem {
    pub fn new(mesh: &Mesh, mode: MechMode, lambda: f64, mu: f64) -> Result<MechSystem> {
        assert!(lambda > 0.0 && mu > 0.0, "Lame coefficients must be positive");
        let map = MechDofMap::build(mesh);
        let n = map.n_dofs();
        let mut tb = TripletBuilder::new(n, n);
        let mut ke = [[0.0f64; 12]; 12];
        for ci in 0..mesh.n_cells() {
            for row in ke.iter_mut() {
                row.fill(0.0);
            }
            for q in 0..TRI_QUAD.len() {
                let basis = Self::cell_basis(mesh, ci, q);
                let meas = Self::measure_factor(mode, basis.point) * mesh.cells[ci].area * TRI_QUAD[q].2;
                let r = basis.point[1];
                // strain rows per (node, comp): plane => 3, axisym => 4
                for a in 0..6 {
                    for ca in 0..2 {
                        let ea = Self::strain_row(mode, &basis, a, ca, r);
                        for b in 0..6 {
                            for cb in 0..2 {
                                let eb = Self::strain_row(mode, &basis, b, cb, r);
                                let tr_a = ea[0] + ea[1] + ea[2];
                                let tr_b = eb[0] + eb[1] + eb[2];
                                let v = meas
                                    * (2.0 * mu
                                        * (ea[0] * eb[0] + ea[1] * eb[1] + ea[2] * eb[2]
                                            + 0.5 * ea[3] * eb[3])
                                        + lambda * tr_a * tr_b);
                                ke[2 * a + ca][2 * b + cb] += v;
                            }
                        }
                    }
                }
            }
            let nodes = map.cell_nodes[ci];
            for a in 0..6 {
                for ca in 0..2 {
                    let i = 2 * nodes[a] + ca;
                    for b in 0..6 {
                        for cb in 0..2 {
                            tb.add_structural(i, 2 * nodes[b] + cb, ke[2 * a + ca][2 * b + cb]);
                        }
                    }
                }
            }
        }
        let k_full = tb.build();
        Ok(MechSystem {
            mode,
            lambda,
            mu,
            dirichlet: vec![None; n],
            map,
            k_full,
            lu: None,
        })
    }

    fn measure_factor(mode: MechMode, p: Point) -> f64 {
        match mode {
            MechMode::Plane => 1.0,
            MechMode::Axisymmetric => 2.0 * std::f64::consts::PI * p[1],
        }
    }

    /// Strain vector (e_xx, e_yy_or_rr, e_zz_or_theta, gamma_xy) of basis
    /// function (node `a`, component `ca`).
    fn strain_row(mode: MechMode, basis: &CellBasis, a: usize, ca: usize, r: f64) -> [f64; 4] {
        let g = basis.grads[a];
        let mut e = [0.0; 4];
        if ca == 0 {
            e[0] = g[0];
            e[3] = g[1];
        } else {
            e[1] = g[1];
            e[3] += g[0];
            if mode == MechMode::Axisymmetric {
                e[2] = basis.values[a] / r;
            }
        }
        e
    }

    fn cell_basis(mesh: &Mesh, ci: usize, q: usize) -> CellBasis {
        let (l1, l2, _) = TRI_QUAD[q];
        let c = &mesh.cells[ci];
        let p0 = mesh.vertices[c.v[0]];
        let p1 = mesh.vertices[c.v[1]];
        let p2 = mesh.vertices[c.v[2]];
        let j = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        // J^{-T}
        let jinv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        let rg = p2_ref_grads(l1, l2);
        let mut grads = [[0.0; 2]; 6];
        for a in 0..6 {
            grads[a] = [
                jinv_t[0][0] * rg[a][0] + jinv_t[0][1] * rg[a][1],
                jinv_t[1][0] * rg[a][0] + jinv_t[1][1] * rg[a][1],
            ];
        }
        let point = [
            p0[0] + j[0][0] * l1 + j[0][1] * l2,
            p0[1] + j[1][0] * l1 + j[1][1] * l2,
        ];
        CellBasis {
            grads,
            values: p2_values(l1, l2),
            point,
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.map.n_dofs()
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.k_full
    }

    pub fn set_dirichlet(&mut self, node: usize, comp: usize, value: f64) {
        self.dirichlet[2 * node + comp] = Some(value);
        self.lu = None;
    }

    /// Constrains component `comp` on every displacement node of a boundary
    /// side, with the value given by `f` at the node position.
    pub fn dirichlet_on_side<F: Fn(Point) -> f64>(
        &mut self,
        mesh: &Mesh,
        side: BoundarySide,
        comp: usize,
        f: F,
    ) {
        for v in mesh.boundary_vertices(side) {
            for node in self.map.vertex_nodes(v) {
                self.dirichlet[2 * node + comp] = Some(f(self.map.node_position[node]));
            }
        }
        for (eid, s) in mesh.boundary_edges() {
            if s == side {
                let e = &mesh.edges[eid];
                // boundary edges are never fracture edges; single midpoint node
                let node = self
                    .map
                    .cell_nodes
                    .iter()
                    .zip(mesh.cell_edges.iter())
                    .find_map(|(nodes, edges)| {
                        edges.iter().position(|&x| x == eid).map(|k| nodes[3 + Self::local_of_edge(mesh, edges, k)])
                    });
                let _ = e;
                if let Some(n) = node {
                    self.dirichlet[2 * n + comp] = Some(f(self.map.node_position[n]));
                }
            }
        }
        self.lu = None;
    }

    // Given cell_edges[k] == eid, the local midpoint slot is the local edge
    // index; cell edge k joins local vertices (k, k+1), and dofmap stored
    // midpoints in the same convention, so this is the identity.
    fn local_of_edge(_mesh: &Mesh, _edges: &[usize; 3], k: usize) -> usize {
        k
    }

    pub fn clamp_all_boundaries(&mut self, mesh: &Mesh) {
        for side in [
            BoundarySide::Left,
            BoundarySide::Right,
            BoundarySide::Bottom,
            BoundarySide::Top,
        ] {
            for comp in 0..2 {
                self.dirichlet_on_side(mesh, side, comp, |_| 0.0);
            }
        }
    }

    pub fn factorize(&mut self) -> Result<()> {
        let n = self.n_dofs();
        let mut tb = TripletBuilder::new(n, n);
        for i in 0..n {
            if self.dirichlet[i].is_some() {
                tb.add_structural(i, i, 1.0);
                continue;
            }
            let (cols, vals) = self.k_full.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if self.dirichlet[j].is_none() {
                    tb.add_structural(i, j, v);
                }
            }
        }
        let k_bc = tb.build();
        let lu = SparseLu::factor(&k_bc).map_err(|e| {
            FracporeError::LinearSolve(format!(
                "stiffness factorization failed (unconstrained rigid modes?): {e}"
            ))
        })?;
        self.lu = Some(lu);
        Ok(())
    }

    /// Solves `K u = rhs` with the configured Dirichlet data.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self
            .lu
            .as_ref()
            .ok_or_else(|| FracporeError::LinearSolve("factorize() not called".into()))?;
        let n = self.n_dofs();
        // lift Dirichlet values
        let mut u_d = vec![0.0; n];
        for i in 0..n {
            if let Some(v) = self.dirichlet[i] {
                u_d[i] = v;
            }
        }
        let mut k_ud = vec![0.0; n];
        self.k_full.matvec(&u_d, &mut k_ud);
        let mut b = vec![0.0; n];
        for i in 0..n {
            b[i] = match self.dirichlet[i] {
                Some(v) => v,
                None => rhs[i] - k_ud[i],
            };
        }
        let x = lu.solve(&b);
        // residual sanity check on the constrained system
        let mut tmp = vec![0.0; n];
        self.k_full.matvec(&x, &mut tmp);
        let mut r2 = 0.0f64;
        let mut b2 = 0.0f64;
        for i in 0..n {
            if self.dirichlet[i].is_none() {
                let r = tmp[i] - rhs[i];
                r2 += r * r;
                b2 += rhs[i] * rhs[i];
            }
        }
        let k_scale = self.k_full.max_abs();
        let x_scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let denom = (b2.sqrt()).max(k_scale * x_scale).max(1e-300);
        if !(r2.sqrt() <= 1e-8 * denom) {
            return Err(FracporeError::LinearSolve(format!(
                "mechanics solve residual {:.3e} relative to {:.3e}",
                r2.sqrt(),
                denom
            )));
        }
        Ok(x)
    }

    /// Zero load vector of the right size.
    pub fn zero_loads(&self) -> Vec<f64> {
        vec![0.0; self.n_dofs()]
    }

    /// `rhs += b * sum_K p_E[K] ∫_K div v`.
    pub fn add_cell_pressure_loads(&self, mesh: &Mesh, b_biot: f64, p_e: &[f64], rhs: &mut [f64]) {
        for ci in 0..mesh.n_cells() {
            let coeff = b_biot * p_e[ci];
            if coeff == 0.0 {
                continue;
            }
            let nodes = self.map.cell_nodes[ci];
            for q in 0..TRI_QUAD.len() {
                let basis = Self::cell_basis(mesh, ci, q);
                let meas = Self::measure_factor(self.mode, basis.point) * mesh.cells[ci].area * TRI_QUAD[q].2;
                let r = basis.point[1];
                for a in 0..6 {
                    for ca in 0..2 {
                        let e = Self::strain_row(self.mode, &basis, a, ca, r);
                        let div = e[0] + e[1] + e[2];
                        rhs[2 * nodes[a] + ca] += coeff * meas * div;
                    }
                }
            }
        }
    }

    /// `rhs -= sum_sigma p_f_E[sigma] ∫_sigma [[v]]` (the fracture fluid
    /// pressure pries the faces apart).
    pub fn add_fracture_pressure_loads(&self, mesh: &Mesh, p_f_e: &[f64], rhs: &mut [f64]) {
        for (fi, fe) in mesh.fracture_edges.iter().enumerate() {
            let p = p_f_e[fi];
            if p == 0.0 {
                continue;
            }
            let e = &mesh.edges[fe.edge];
            let trace = &self.map.frac_trace[fi];
            let pa = mesh.vertices[e.v[0]];
            let pb = mesh.vertices[e.v[1]];
            for (t, wq) in EDGE_QUAD {
                let pos = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let meas = Self::measure_factor(self.mode, pos) * e.length * wq;
                let shapes = edge_trace_values(t);
                for k in 0..3 {
                    for c in 0..2 {
                        // plus side: jump contribution v+ . n+
                        rhs[2 * trace.plus[k] + c] -= p * meas * shapes[k] * fe.normal_plus[c];
                        // minus side: v- . n- with n- = -n+
                        rhs[2 * trace.minus[k] + c] += p * meas * shapes[k] * fe.normal_plus[c];
                    }
                }
            }
        }
    }

    /// `rhs -= ∫ sigma0 : e(v)` for a constant pre-stress given as
    /// `(s_xx, s_yy_or_rr, s_zz_or_theta, s_xy)`, tension positive.
    pub fn add_prestress_loads(&self, mesh: &Mesh, sigma0: [f64; 4], rhs: &mut [f64]) {
        if sigma0 == [0.0; 4] {
            return;
        }
        for ci in 0..mesh.n_cells() {
            let nodes = self.map.cell_nodes[ci];
            for q in 0..TRI_QUAD.len() {
                let basis = Self::cell_basis(mesh, ci, q);
                let meas = Self::measure_factor(self.mode, basis.point) * mesh.cells[ci].area * TRI_QUAD[q].2;
                let r = basis.point[1];
                for a in 0..6 {
                    for ca in 0..2 {
                        let e = Self::strain_row(self.mode, &basis, a, ca, r);
                        let contraction =
                            sigma0[0] * e[0] + sigma0[1] * e[1] + sigma0[2] * e[2] + sigma0[3] * e[3];
                        rhs[2 * nodes[a] + ca] -= meas * contraction;
                    }
                }
            }
        }
    }

    /// `rhs += ∫_side g . v` for a constant traction `g`.
    pub fn add_traction_loads(&self, mesh: &Mesh, side: BoundarySide, g: [f64; 2], rhs: &mut [f64]) {
        if g == [0.0; 2] {
            return;
        }
        for (eid, s) in mesh.boundary_edges() {
            if s != side {
                continue;
            }
            let e = &mesh.edges[eid];
            let ci = e.cells[0];
            // trace nodes: [v0 node, midpoint, v1 node] as seen from the only cell
            let n0 = self.map.vertex_node_for_cell(e.v[0], ci);
            let n1 = self.map.vertex_node_for_cell(e.v[1], ci);
            let nodes_mid = self
                .map
                .cell_nodes[ci][3 + mesh.cell_edges[ci].iter().position(|&x| x == eid).unwrap()];
            let tr = [n0, nodes_mid, n1];
            let pa = mesh.vertices[e.v[0]];
            let pb = mesh.vertices[e.v[1]];
            for (t, wq) in EDGE_QUAD {
                let pos = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let meas = Self::measure_factor(self.mode, pos) * e.length * wq;
                let shapes = edge_trace_values(t);
                for k in 0..3 {
                    for c in 0..2 {
                        rhs[2 * tr[k] + c] += meas * shapes[k] * g[c];
                    }
                }
            }
        }
    }

    /// `rhs += ∫ f . v` for a body force field.
    pub fn add_body_force_loads<F: Fn(Point) -> [f64; 2]>(&self, mesh: &Mesh, f: F, rhs: &mut [f64]) {
        for ci in 0..mesh.n_cells() {
            let nodes = self.map.cell_nodes[ci];
            for q in 0..TRI_QUAD.len() {
                let basis = Self::cell_basis(mesh, ci, q);
                let meas = Self::measure_factor(self.mode, basis.point) * mesh.cells[ci].area * TRI_QUAD[q].2;
                let fv = f(basis.point);
                for a in 0..6 {
                    for c in 0..2 {
                        rhs[2 * nodes[a] + c] += meas * basis.values[a] * fv[c];
                    }
                }
            }
        }
    }

    /// Face-wise constant aperture `d_f = -(1/|s|) ∫_s [[u]]`, geometric part
    /// (no scenario offset). Simpson is exact for the quadratic traces.
    pub fn extract_aperture(&self, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(mesh.fracture_edges.len());
        for (fi, fe) in mesh.fracture_edges.iter().enumerate() {
            let trace = &self.map.frac_trace[fi];
            let n = fe.normal_plus;
            let jump_at = |k: usize| -> f64 {
                let up = [u[2 * trace.plus[k]], u[2 * trace.plus[k] + 1]];
                let um = [u[2 * trace.minus[k]], u[2 * trace.minus[k] + 1]];
                (up[0] - um[0]) * n[0] + (up[1] - um[1]) * n[1]
            };
            let mean_jump = (jump_at(0) + 4.0 * jump_at(1) + jump_at(2)) / 6.0;
            out.push(-mean_jump);
        }
        out
    }

    /// Cell-wise divergence of the displacement at the centroid (the P2
    /// divergence is linear per cell; the centroid value is its cell mean).
    pub fn cell_divergence(&self, mesh: &Mesh, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(mesh.n_cells());
        for ci in 0..mesh.n_cells() {
            let e = self.cell_strain_at_centroid(mesh, ci, u);
            out.push(e[0] + e[1] + e[2]);
        }
        out
    }

    /// Strain (e_xx, e_rr_or_yy, e_theta_or_zz, gamma) at the cell centroid.
    pub fn cell_strain_at_centroid(&self, mesh: &Mesh, ci: usize, u: &[f64]) -> [f64; 4] {
        let c = &mesh.cells[ci];
        let bc = centroid_basis(mesh, ci);
        let nodes = self.map.cell_nodes[ci];
        let mut e = [0.0f64; 4];
        let r = c.centroid[1];
        for a in 0..6 {
            for ca in 0..2 {
                let row = Self::strain_row(self.mode, &bc, a, ca, r);
                let ua = u[2 * nodes[a] + ca];
                for k in 0..4 {
                    e[k] += row[k] * ua;
                }
            }
        }
        e
    }

    /// Total stress per cell: `sigma_T = sigma0 + sigma(u) - b p_E I`,
    /// components `(s_xx, s_yy_or_rr, s_zz_or_theta, s_shear)` at centroids.
    pub fn total_stress(
        &self,
        mesh: &Mesh,
        u: &[f64],
        p_e: &[f64],
        b_biot: f64,
        sigma0: [f64; 4],
    ) -> Vec<[f64; 4]> {
        let mut out = Vec::with_capacity(mesh.n_cells());
        for ci in 0..mesh.n_cells() {
            let e = self.cell_strain_at_centroid(mesh, ci, u);
            let tr = e[0] + e[1] + e[2];
            let bp = b_biot * p_e[ci];
            out.push([
                sigma0[0] + 2.0 * self.mu * e[0] + self.lambda * tr - bp,
                sigma0[1] + 2.0 * self.mu * e[1] + self.lambda * tr - bp,
                sigma0[2] + 2.0 * self.mu * e[2] + self.lambda * tr - bp,
                sigma0[3] + self.mu * e[3],
            ])
        }
        out
    }

    /// `u^T K u`, twice the elastic strain energy.
    pub fn strain_energy_form(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.k_full.matvec(u, &mut ku);
        u.iter().zip(&ku).map(|(a, b)| a * b).sum()
    }
}

fn centroid_basis(mesh: &Mesh, ci: usize) -> CellBasis {
    let c = &mesh.cells[ci];
    let p0 = mesh.vertices[c.v[0]];
    let p1 = mesh.vertices[c.v[1]];
    let p2 = mesh.vertices[c.v[2]];
    let j = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let jinv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
    let (l1, l2) = (1.0 / 3.0, 1.0 / 3.0);
    let rg = p2_ref_grads(l1, l2);
    let mut grads = [[0.0; 2]; 6];
    for a in 0..6 {
        grads[a] = [
            jinv_t[0][0] * rg[a][0] + jinv_t[0][1] * rg[a][1],
            jinv_t[1][0] * rg[a][0] + jinv_t[1][1] * rg[a][1],
        ];
    }
    CellBasis {
        grads,
        values: p2_values(l1, l2),
        point: c.centroid,
    }
}
