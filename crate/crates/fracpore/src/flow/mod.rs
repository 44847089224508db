//! Discrete two-phase flow: degrees of freedom, geometric transmissibilities,
//! residual/Jacobian assembly and flow diagnostics.
//!
//! Per phase, unknown pressures live at: matrix cells, fracture faces (one per
//! fracture edge), interface sides (two per fracture edge) and fracture
//! intersection nodes (>= 3 incident fracture edges). The matrix scheme is a
//! cell-centered TPFA; matrix cells exchange with the interface sides through
//! half-transmissibilities, interface sides exchange with the fracture face
//! through the upwinded two-point flux `Q = T_f |s| eta_up (p_side - p_face)`
//! whose mobility is taken on the damaged layer side when the jump is
//! non-negative and on the fracture side otherwise (this makes `Q * jump >= 0`,
//! the discrete dissipation property). Tangential fracture fluxes use
//! Poiseuille conductances `d_f^3 / 12` harmonically combined per half-face;
//! simple fracture nodes are eliminated, intersection nodes keep a flux
//! balance equation.
//!
//! In the continuous-pressure variant the side unknowns are slaved to the face
//! value (jump = 0), the damaged-layer accumulation is dropped and the matrix
//! half-fluxes attach directly to the face pressure.

mod assembly;
#[cfg(test)]
mod tests;

pub use assembly::{upwind_flux, FlowDiagnostics, FlowNewton, InterfaceFlux, PrevAccumulation};

use crate::error::{FracporeError, Result};
use crate::mesh::{BoundarySide, FractureNodeKind, Mesh};
use crate::rockphys::{Phase, RockType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus = 0,
    Minus = 1,
}

pub const SIDES: [Side; 2] = [Side::Plus, Side::Minus];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureModel {
    /// Interface-side unknowns with two-point upwinded exchange fluxes and a
    /// damaged-layer accumulation (pressures may jump at fractures).
    Discontinuous,
    /// Side unknowns constrained to the face value; no damaged accumulation.
    Continuous,
}

/// Index layout of the per-phase flow entities:
/// `[cells | faces | side+ | side- | intersection nodes]`.
#[derive(Debug, Clone)]
pub struct FlowDofMap {
    pub n_cells: usize,
    pub n_faces: usize,
    /// Mesh fracture-node index of each intersection unknown.
    pub intersection_nodes: Vec<usize>,
}

impl FlowDofMap {
    pub fn n_entities(&self) -> usize {
        self.n_cells + 3 * self.n_faces + self.intersection_nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_entities()
    }

    pub fn cell(&self, k: usize) -> usize {
        k
    }

    pub fn face(&self, f: usize) -> usize {
        self.n_cells + f
    }

    pub fn side(&self, f: usize, s: Side) -> usize {
        self.n_cells + self.n_faces * (1 + s as usize) + f
    }

    pub fn node(&self, k: usize) -> usize {
        self.n_cells + 3 * self.n_faces + k
    }

    /// DOF index of (entity, phase); phases interleave fastest.
    pub fn dof(&self, entity: usize, phase: Phase) -> usize {
        2 * entity + phase.idx()
    }
}

/// Rock-law bundle for the four roles.
#[derive(Debug, Clone)]
pub struct FlowRocks {
    pub matrix: RockType,
    pub fracture: RockType,
    pub damaged_plus: RockType,
    pub damaged_minus: RockType,
}

/// Static description handed to `FlowSystem::new`.
#[derive(Debug, Clone)]
pub struct FlowSetup {
    /// Isotropic matrix permeability (m^2).
    pub permeability: f64,
    /// Normal fracture transmissivity `T_f` (m); frozen w.r.t. aperture.
    pub t_normal: f64,
    pub rocks: FlowRocks,
    pub model: PressureModel,
    /// Axisymmetric measures: the second coordinate is the radius.
    pub axisymmetric: bool,
    /// Matrix Dirichlet data per boundary side: phase pressures (nw, w).
    pub matrix_bc: Vec<(BoundarySide, [f64; 2])>,
    /// Fracture-node Dirichlet data per boundary side.
    pub fracture_bc: Vec<(BoundarySide, [f64; 2])>,
}

// --- connection tables (geometric, mobility- and aperture-free) ---

#[derive(Debug, Clone)]
struct MatrixConn {
    cell_a: usize,
    cell_b: usize,
    /// permeability * measure / (d_a + d_b)
    trans: f64,
}

#[derive(Debug, Clone)]
struct MatrixBcConn {
    cell: usize,
    trans: f64,
    /// imposed phase pressures
    p_bc: [f64; 2],
    side: BoundarySide,
}

#[derive(Debug, Clone)]
struct HalfConn {
    face: usize,
    side: Side,
    cell: usize,
    /// permeability * measure / d_{K,s}
    trans: f64,
}

#[derive(Debug, Clone)]
struct TangentialConn {
    face_a: usize,
    face_b: usize,
    /// half distances (face center to shared node)
    half_len: [f64; 2],
    /// measure factor at the shared node (2 pi r or 1)
    node_measure: f64,
}

#[derive(Debug, Clone)]
struct NodeConn {
    face: usize,
    /// intersection unknown index
    node: usize,
    half_len: f64,
    node_measure: f64,
}

#[derive(Debug, Clone)]
struct FractureBcConn {
    face: usize,
    half_len: f64,
    node_measure: f64,
    p_bc: [f64; 2],
}

pub struct FlowSystem<'m> {
    pub mesh: &'m Mesh,
    pub map: FlowDofMap,
    pub setup: FlowSetup,
    /// measure of each cell (area, axisymmetric-weighted).
    pub cell_measure: Vec<f64>,
    /// measure of each fracture face (length, axisymmetric-weighted).
    pub face_measure: Vec<f64>,
    matrix_conns: Vec<MatrixConn>,
    matrix_bc_conns: Vec<MatrixBcConn>,
    half_conns: Vec<HalfConn>,
    tangential_conns: Vec<TangentialConn>,
    node_conns: Vec<NodeConn>,
    fracture_bc_conns: Vec<FractureBcConn>,
    /// total source rate per (entity, phase), m^3/s.
    pub sources: Vec<[f64; 2]>,
    /// row scaling for the Newton norm (pore-volume measures).
    pub row_weights: Vec<f64>,
}

impl<'m> FlowSystem<'m> {
    pub fn new(mesh: &'m Mesh, setup: FlowSetup) -> Result<FlowSystem<'m>> {
        let n_cells = mesh.n_cells();
        let intersection_nodes: Vec<usize> = mesh
            .fracture_nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind == FractureNodeKind::Intersection)
            .map(|(i, _)| i)
            .collect();
        let map = FlowDofMap {
            n_cells,
            n_faces: mesh.fracture_edges.len(),
            intersection_nodes: intersection_nodes.clone(),
        };
        let axi = setup.axisymmetric;
        let weight = |p: [f64; 2]| -> f64 {
            if axi {
                2.0 * std::f64::consts::PI * p[1]
            } else {
                1.0
            }
        };
        if axi {
            for v in &mesh.vertices {
                if v[1] <= 0.0 {
                    return Err(FracporeError::Geometry(
                        "axisymmetric mesh must have strictly positive radii".into(),
                    ));
                }
            }
        }

        let cell_measure: Vec<f64> = mesh
            .cells
            .iter()
            .map(|c| c.area * weight(c.centroid))
            .collect();
        let face_measure: Vec<f64> = mesh
            .fracture_edges
            .iter()
            .map(|fe| {
                let e = &mesh.edges[fe.edge];
                e.length * weight(e.midpoint)
            })
            .collect();

        let perm = setup.permeability;
        if perm <= 0.0 {
            return Err(FracporeError::Validation("permeability must be positive".into()));
        }

        let mut matrix_conns = Vec::new();
        let mut matrix_bc_conns = Vec::new();
        let mut half_conns = Vec::new();
        let bc_of_side = |list: &[(BoundarySide, [f64; 2])], s: BoundarySide| -> Option<[f64; 2]> {
            list.iter().find(|(bs, _)| *bs == s).map(|(_, p)| *p)
        };
        let boundary_sides: std::collections::HashMap<usize, BoundarySide> =
            mesh.boundary_edges().into_iter().collect();

        let dist_of = |cell: usize, edge: usize| -> Result<f64> {
            let k = mesh.cell_edges[cell]
                .iter()
                .position(|&e| e == edge)
                .expect("edge belongs to cell");
            let d = mesh.cell_edge_distances[cell][k];
            if d <= 0.0 {
                return Err(FracporeError::Admissibility(format!(
                    "non-positive center-edge distance at cell {cell}, edge {edge}"
                )));
            }
            Ok(d)
        };

        for (eid, e) in mesh.edges.iter().enumerate() {
            let e_meas = e.length * weight(e.midpoint);
            let fidx = mesh.fracture_edge_of_edge[eid];
            if fidx != usize::MAX {
                let fe = &mesh.fracture_edges[fidx];
                for (side, cell) in [(Side::Plus, fe.cell_pos), (Side::Minus, fe.cell_neg)] {
                    let d = dist_of(cell, eid)?;
                    half_conns.push(HalfConn {
                        face: fidx,
                        side,
                        cell,
                        trans: perm * e_meas / d,
                    });
                }
                continue;
            }
            match e.cells.len() {
                2 => {
                    let (a, b) = (e.cells[0], e.cells[1]);
                    let da = dist_of(a, eid)?;
                    let db = dist_of(b, eid)?;
                    matrix_conns.push(MatrixConn {
                        cell_a: a,
                        cell_b: b,
                        trans: perm * e_meas / (da + db),
                    });
                }
                1 => {
                    if let Some(side) = boundary_sides.get(&eid) {
                        if let Some(p_bc) = bc_of_side(&setup.matrix_bc, *side) {
                            let cell = e.cells[0];
                            let d = dist_of(cell, eid)?;
                            matrix_bc_conns.push(MatrixBcConn {
                                cell,
                                trans: perm * e_meas / d,
                                p_bc,
                                side: *side,
                            });
                        }
                    }
                }
                _ => unreachable!(),
            }
        }

        let mut tangential_conns = Vec::new();
        let mut node_conns = Vec::new();
        let mut fracture_bc_conns = Vec::new();
        let node_entity_of: std::collections::HashMap<usize, usize> = intersection_nodes
            .iter()
            .enumerate()
            .map(|(k, &fnode)| (fnode, k))
            .collect();
        let vertex_side = |v: usize| -> Option<BoundarySide> {
            let p = mesh.vertices[v];
            let [lo, hi] = mesh.bbox;
            let tol_x = 1e-9 * (1.0 + hi[0] - lo[0]);
            let tol_y = 1e-9 * (1.0 + hi[1] - lo[1]);
            if (p[0] - lo[0]).abs() < tol_x {
                Some(BoundarySide::Left)
            } else if (p[0] - hi[0]).abs() < tol_x {
                Some(BoundarySide::Right)
            } else if (p[1] - lo[1]).abs() < tol_y {
                Some(BoundarySide::Bottom)
            } else if (p[1] - hi[1]).abs() < tol_y {
                Some(BoundarySide::Top)
            } else {
                None
            }
        };
        for (ni, fnode) in mesh.fracture_nodes.iter().enumerate() {
            let p_node = mesh.vertices[fnode.vertex];
            let node_measure = weight(p_node);
            match fnode.kind {
                FractureNodeKind::Tip => {}
                FractureNodeKind::Simple => {
                    let (f1, f2) = (fnode.incident[0], fnode.incident[1]);
                    let hl = |f: usize| mesh.edges[mesh.fracture_edges[f].edge].length * 0.5;
                    tangential_conns.push(TangentialConn {
                        face_a: f1,
                        face_b: f2,
                        half_len: [hl(f1), hl(f2)],
                        node_measure,
                    });
                }
                FractureNodeKind::Intersection => {
                    let node = node_entity_of[&ni];
                    for &f in &fnode.incident {
                        node_conns.push(NodeConn {
                            face: f,
                            node,
                            half_len: mesh.edges[mesh.fracture_edges[f].edge].length * 0.5,
                            node_measure,
                        });
                    }
                }
                FractureNodeKind::Boundary => {
                    if let Some(side) = vertex_side(fnode.vertex) {
                        if let Some(p_bc) = bc_of_side(&setup.fracture_bc, side) {
                            let f = fnode.incident[0];
                            fracture_bc_conns.push(FractureBcConn {
                                face: f,
                                half_len: mesh.edges[mesh.fracture_edges[f].edge].length * 0.5,
                                node_measure,
                                p_bc,
                            });
                        }
                    }
                }
            }
        }

        let n_entities = map.n_entities();
        let sources = vec![[0.0; 2]; n_entities];

        // Newton row weights: pore-volume-like measures per entity row.
        let d_plus = setup
            .rocks
            .damaged_plus
            .damaged
            .map(|d| d.width * d.porosity)
            .unwrap_or(1e-3);
        let d_minus = setup
            .rocks
            .damaged_minus
            .damaged
            .map(|d| d.width * d.porosity)
            .unwrap_or(1e-3);
        let mut row_weights = vec![1.0; 2 * n_entities];
        for k in 0..n_cells {
            let w = cell_measure[k];
            row_weights[2 * k] = w;
            row_weights[2 * k + 1] = w;
        }
        for f in 0..map.n_faces {
            let wf = face_measure[f] * 1e-3;
            let e_f = map.face(f);
            row_weights[2 * e_f] = wf;
            row_weights[2 * e_f + 1] = wf;
            for (s, dd) in [(Side::Plus, d_plus), (Side::Minus, d_minus)] {
                let e_s = map.side(f, s);
                let ws = match setup.model {
                    PressureModel::Discontinuous => face_measure[f] * dd,
                    PressureModel::Continuous => 1.0,
                };
                row_weights[2 * e_s] = ws;
                row_weights[2 * e_s + 1] = ws;
            }
        }
        for k in 0..map.intersection_nodes.len() {
            let e_n = map.node(k);
            let mean: f64 = node_conns
                .iter()
                .filter(|nc| nc.node == k)
                .map(|nc| face_measure[nc.face] * 1e-3)
                .sum::<f64>()
                .max(1e-12);
            row_weights[2 * e_n] = mean;
            row_weights[2 * e_n + 1] = mean;
        }

        Ok(FlowSystem {
            mesh,
            map,
            setup,
            cell_measure,
            face_measure,
            matrix_conns,
            matrix_bc_conns,
            half_conns,
            tangential_conns,
            node_conns,
            fracture_bc_conns,
            sources,
            row_weights,
        })
    }

    /// Rescales the matrix-cell row weights with the actual porosity.
    pub fn set_row_weight_porosity(&mut self, phi0: f64) {
        for k in 0..self.map.n_cells {
            let w = self.cell_measure[k] * phi0;
            self.row_weights[2 * k] = w;
            self.row_weights[2 * k + 1] = w;
        }
    }

    /// Sets the total source rate (m^3/s) of a fracture face for one phase.
    pub fn set_face_source(&mut self, face: usize, phase: Phase, rate: f64) {
        self.sources[self.map.face(face)][phase.idx()] = rate;
    }

    pub fn set_cell_source(&mut self, cell: usize, phase: Phase, rate: f64) {
        self.sources[self.map.cell(cell)][phase.idx()] = rate;
    }

    pub fn total_source(&self, phase: Phase) -> f64 {
        self.sources.iter().map(|s| s[phase.idx()]).sum()
    }

    /// Uniform initial pressures on every entity.
    pub fn uniform_state(&self, p_nw: f64, p_w: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.map.n_dofs()];
        for e in 0..self.map.n_entities() {
            p[2 * e] = p_nw;
            p[2 * e + 1] = p_w;
        }
        p
    }

    pub fn rock_of_side(&self, s: Side) -> &RockType {
        match s {
            Side::Plus => &self.setup.rocks.damaged_plus,
            Side::Minus => &self.setup.rocks.damaged_minus,
        }
    }

    /// Capillary pressure of an entity in the state vector.
    pub fn pc(&self, p: &[f64], entity: usize) -> f64 {
        p[2 * entity] - p[2 * entity + 1]
    }

    /// Cell-wise equivalent pressures (matrix law).
    pub fn equivalent_pressure_cells(&self, p: &[f64]) -> Vec<f64> {
        (0..self.map.n_cells)
            .map(|k| {
                let e = self.map.cell(k);
                self.setup
                    .rocks
                    .matrix
                    .saturation
                    .equivalent_pressure(p[2 * e], p[2 * e + 1])
            })
            .collect()
    }

    /// Face-wise equivalent pressures (fracture law).
    pub fn equivalent_pressure_faces(&self, p: &[f64]) -> Vec<f64> {
        (0..self.map.n_faces)
            .map(|f| {
                let e = self.map.face(f);
                self.setup
                    .rocks
                    .fracture
                    .saturation
                    .equivalent_pressure(p[2 * e], p[2 * e + 1])
            })
            .collect()
    }

    /// Saturation of `phase` at every cell.
    pub fn cell_saturation(&self, p: &[f64], phase: Phase) -> Vec<f64> {
        (0..self.map.n_cells)
            .map(|k| {
                self.setup
                    .rocks
                    .matrix
                    .saturation
                    .sat(phase, self.pc(p, self.map.cell(k)))
            })
            .collect()
    }

    pub fn face_saturation(&self, p: &[f64], phase: Phase) -> Vec<f64> {
        (0..self.map.n_faces)
            .map(|f| {
                self.setup
                    .rocks
                    .fracture
                    .saturation
                    .sat(phase, self.pc(p, self.map.face(f)))
            })
            .collect()
    }
}

/// Aperture-dependent, outer-iterate-frozen closures for one flow solve.
#[derive(Debug, Clone)]
pub struct FlowClosures {
    /// Pressure-independent porosity part per cell:
    /// `phi0 + b div(u - u0) - p_E0 / M`.
    pub phi_base: Vec<f64>,
    /// 1 / M (Biot modulus inverse; 0 freezes porosity).
    pub inv_m: f64,
    /// Face-wise constant aperture (m), frozen during the flow solve.
    pub d_f: Vec<f64>,
}

impl FlowClosures {
    /// Porosity-frozen closures (rigid skeleton): `phi_D = phi0`, aperture given.
    pub fn rigid(n_cells: usize, phi0: f64, d_f: Vec<f64>) -> FlowClosures {
        FlowClosures {
            phi_base: vec![phi0; n_cells],
            inv_m: 0.0,
            d_f,
        }
    }
}
