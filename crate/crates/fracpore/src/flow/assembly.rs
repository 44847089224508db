//! Residual and analytic Jacobian of the two-phase flow system, plus the flow
//! diagnostics (dissipation, jump energies, interface fluxes, masses).
//!
//! Every residual row is a balance: accumulation rate + outgoing fluxes -
//! incoming fluxes - sources. Fluxes are assembled per connection (+F to the
//! upstream row, -F to the downstream row) so that closed-system mass
//! telescopes to the residual sum bitwise.

use super::{FlowClosures, FlowSystem, PressureModel, Side, SIDES};
use crate::error::{FracporeError, Result};
use crate::rockphys::{Phase, RockType, SaturationLaw, PHASES};
use crate::solvers::{CsrMatrix, NewtonProblem, TripletBuilder};

/// Pure upwinded two-point flux: `F = t * eta_up * (p_a - p_b)` with
/// `eta_up = eta_a` if `p_a - p_b >= 0` (ties on the `a`/damaged branch) else
/// `eta_b`. Satisfies `F * (p_a - p_b) >= 0` whenever mobilities are >= 0.
pub fn upwind_flux(t: f64, p_a: f64, p_b: f64, eta_a: f64, eta_b: f64) -> f64 {
    let dp = p_a - p_b;
    let eta = if dp >= 0.0 { eta_a } else { eta_b };
    t * eta * dp
}

/// Saturation of `phase` and its derivative w.r.t. capillary pressure. The
/// derivative is the smooth extension (see `sat_nw_deriv_smooth`), identical
/// to the exact one wherever the phase is present.
fn sat_and_deriv(law: &SaturationLaw, phase: Phase, pc: f64) -> (f64, f64) {
    let s_nw = law.sat_nw(pc);
    let ds = law.sat_nw_deriv_smooth(pc);
    match phase {
        Phase::NonWetting => (s_nw, ds),
        Phase::Wetting => (1.0 - s_nw, -ds),
    }
}

/// One endpoint of an upwinded flux.
struct FluxEnd<'a> {
    /// Flow entity index, or None for a boundary value.
    entity: Option<usize>,
    p: [f64; 2],
    /// Laws used when this end is upstream: saturation law + mobility carrier.
    sat_law: &'a SaturationLaw,
    rock: &'a RockType,
}

struct Assembler {
    r: Vec<f64>,
    tb: Option<TripletBuilder>,
}

impl Assembler {
    fn add_jac(&mut self, row: usize, col: usize, v: f64) {
        if let Some(tb) = self.tb.as_mut() {
            tb.add_structural(row, col, v);
        }
    }
}

impl<'m> FlowSystem<'m> {
    fn phi_d(&self, p: &[f64], closures: &FlowClosures, cell: usize) -> f64 {
        let e = self.map.cell(cell);
        let pe = self
            .setup
            .rocks
            .matrix
            .saturation
            .equivalent_pressure(p[2 * e], p[2 * e + 1]);
        closures.phi_base[cell] + closures.inv_m * pe
    }

    /// Mass of `phase` in a matrix cell: `measure * phi_D * s`.
    pub fn cell_mass(&self, p: &[f64], closures: &FlowClosures, cell: usize, phase: Phase) -> f64 {
        let e = self.map.cell(cell);
        let s = self
            .setup
            .rocks
            .matrix
            .saturation
            .sat(phase, self.pc(p, e));
        self.cell_measure[cell] * self.phi_d(p, closures, cell) * s
    }

    /// Mass of `phase` in a fracture face: `measure * d_f * s_f`.
    pub fn face_mass(&self, p: &[f64], closures: &FlowClosures, face: usize, phase: Phase) -> f64 {
        let e = self.map.face(face);
        let s = self
            .setup
            .rocks
            .fracture
            .saturation
            .sat(phase, self.pc(p, e));
        self.face_measure[face] * closures.d_f[face] * s
    }

    /// Damaged-layer saturation at an interface side (its own law).
    pub fn side_saturation(&self, p: &[f64], face: usize, side: Side, phase: Phase) -> f64 {
        let e = self.map.side(face, side);
        self.rock_of_side(side).saturation.sat(phase, self.pc(p, e))
    }

    /// Damaged-layer pore volume coefficient of a side: `d_a phi_a |s|`.
    pub fn side_pore_volume(&self, face: usize, side: Side) -> f64 {
        let d = self
            .rock_of_side(side)
            .damaged
            .expect("damaged layer parameters required for side accumulation");
        d.width * d.porosity * self.face_measure[face]
    }

    /// Frozen accumulation snapshot of a state (used as the previous-time
    /// terms for the next step; bitwise identical to the residual's own terms).
    pub fn accumulation(&self, p: &[f64], closures: &FlowClosures) -> PrevAccumulation {
        let mut cell_mass = vec![[0.0; 2]; self.map.n_cells];
        for k in 0..self.map.n_cells {
            for ph in PHASES {
                cell_mass[k][ph.idx()] = self.cell_mass(p, closures, k, ph);
            }
        }
        let mut face_mass = vec![[0.0; 2]; self.map.n_faces];
        let mut side_sat = vec![[[0.0; 2]; 2]; self.map.n_faces];
        for f in 0..self.map.n_faces {
            for ph in PHASES {
                face_mass[f][ph.idx()] = self.face_mass(p, closures, f, ph);
                for s in SIDES {
                    side_sat[f][s as usize][ph.idx()] = self.side_saturation(p, f, s, ph);
                }
            }
        }
        PrevAccumulation {
            cell_mass,
            face_mass,
            side_sat,
        }
    }

    /// Total fluid volume of each phase (matrix + fracture + damaged layers).
    /// Neumaier-compensated so the audit is roundoff-robust.
    pub fn total_mass(&self, p: &[f64], closures: &FlowClosures) -> [f64; 2] {
        let mut out = [0.0; 2];
        for ph in PHASES {
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            let mut add = |v: f64, sum: &mut f64, comp: &mut f64| {
                let t = *sum + v;
                if sum.abs() >= v.abs() {
                    *comp += (*sum - t) + v;
                } else {
                    *comp += (v - t) + *sum;
                }
                *sum = t;
            };
            for k in 0..self.map.n_cells {
                add(self.cell_mass(p, closures, k, ph), &mut sum, &mut comp);
            }
            for f in 0..self.map.n_faces {
                add(self.face_mass(p, closures, f, ph), &mut sum, &mut comp);
                if self.setup.model == PressureModel::Discontinuous {
                    for s in SIDES {
                        add(
                            self.side_pore_volume(f, s) * self.side_saturation(p, f, s, ph),
                            &mut sum,
                            &mut comp,
                        );
                    }
                }
            }
            out[ph.idx()] = sum + comp;
        }
        out
    }

    /// Assembles the residual and optionally the analytic Jacobian.
    pub fn assemble(
        &self,
        p: &[f64],
        prev: &PrevAccumulation,
        closures: &FlowClosures,
        dt: f64,
        want_jacobian: bool,
    ) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        let n = self.map.n_dofs();
        debug_assert_eq!(p.len(), n);
        for (f, &d) in closures.d_f.iter().enumerate() {
            if d <= 0.0 {
                return Err(FracporeError::Closure(format!(
                    "non-positive aperture {d:.3e} at fracture face {f}"
                )));
            }
        }
        let mut asm = Assembler {
            r: vec![0.0; n],
            tb: want_jacobian.then(|| TripletBuilder::new(n, n)),
        };

        let m_rock = &self.setup.rocks.matrix;
        let f_rock = &self.setup.rocks.fracture;
        let m_law = &m_rock.saturation;
        let f_law = &f_rock.saturation;

        // --- accumulation + sources ---
        for k in 0..self.map.n_cells {
            let e = self.map.cell(k);
            let phi = self.phi_d(p, closures, k);
            if phi <= 0.0 {
                return Err(FracporeError::Closure(format!(
                    "non-positive porosity {phi:.3e} at cell {k}"
                )));
            }
            let pc = self.pc(p, e);
            let (s_nw_grad, s_w_grad) = m_law.equivalent_pressure_grad(p[2 * e], p[2 * e + 1]);
            for ph in PHASES {
                let i = ph.idx();
                let mass = self.cell_mass(p, closures, k, ph);
                let row = self.map.dof(e, ph);
                asm.r[row] += (mass - prev.cell_mass[k][i]) / dt - self.sources[e][i];
                if want_jacobian {
                    let (s, ds) = sat_and_deriv(m_law, ph, pc);
                    let meas = self.cell_measure[k];
                    // d(phi s)/dp^nw and /dp^w
                    let dphi_dnw = closures.inv_m * s_nw_grad;
                    let dphi_dw = closures.inv_m * s_w_grad;
                    asm.add_jac(
                        row,
                        self.map.dof(e, Phase::NonWetting),
                        meas * (dphi_dnw * s + phi * ds) / dt,
                    );
                    asm.add_jac(
                        row,
                        self.map.dof(e, Phase::Wetting),
                        meas * (dphi_dw * s - phi * ds) / dt,
                    );
                }
            }
        }
        for f in 0..self.map.n_faces {
            let e = self.map.face(f);
            let pc = self.pc(p, e);
            for ph in PHASES {
                let i = ph.idx();
                let row = self.map.dof(e, ph);
                let mass = self.face_mass(p, closures, f, ph);
                asm.r[row] += (mass - prev.face_mass[f][i]) / dt - self.sources[e][i];
                if want_jacobian {
                    let (_, ds) = sat_and_deriv(f_law, ph, pc);
                    let c = self.face_measure[f] * closures.d_f[f] / dt;
                    asm.add_jac(row, self.map.dof(e, Phase::NonWetting), c * ds);
                    asm.add_jac(row, self.map.dof(e, Phase::Wetting), -c * ds);
                }
            }
            for s in SIDES {
                let es = self.map.side(f, s);
                match self.setup.model {
                    PressureModel::Discontinuous => {
                        let cpv = self.side_pore_volume(f, s);
                        let pcs = self.pc(p, es);
                        let law = &self.rock_of_side(s).saturation;
                        for ph in PHASES {
                            let i = ph.idx();
                            let row = self.map.dof(es, ph);
                            let sat = self.side_saturation(p, f, s, ph);
                            asm.r[row] += cpv * (sat - prev.side_sat[f][s as usize][i]) / dt;
                            if want_jacobian {
                                let (_, ds) = sat_and_deriv(law, ph, pcs);
                                asm.add_jac(row, self.map.dof(es, Phase::NonWetting), cpv * ds / dt);
                                asm.add_jac(row, self.map.dof(es, Phase::Wetting), -cpv * ds / dt);
                            }
                        }
                    }
                    PressureModel::Continuous => {
                        // constraint rows: p_side - p_face = 0
                        for ph in PHASES {
                            let row = self.map.dof(es, ph);
                            asm.r[row] += p[self.map.dof(es, ph)] - p[self.map.dof(e, ph)];
                            if want_jacobian {
                                asm.add_jac(row, self.map.dof(es, ph), 1.0);
                                asm.add_jac(row, self.map.dof(e, ph), -1.0);
                            }
                        }
                    }
                }
            }
        }
        // intersection-node rows get only fluxes; make the diagonal structural
        if want_jacobian {
            for k in 0..self.map.intersection_nodes.len() {
                let e = self.map.node(k);
                for ph in PHASES {
                    asm.add_jac(self.map.dof(e, ph), self.map.dof(e, ph), 0.0);
                }
            }
        }

        // --- matrix interior fluxes ---
        for c in &self.matrix_conns {
            let (ea, eb) = (self.map.cell(c.cell_a), self.map.cell(c.cell_b));
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    c.trans,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    &FluxEnd {
                        entity: Some(eb),
                        p: [p[2 * eb], p[2 * eb + 1]],
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    Some(ea),
                    Some(eb),
                );
            }
        }
        // --- matrix Dirichlet boundary fluxes ---
        for c in &self.matrix_bc_conns {
            let ea = self.map.cell(c.cell);
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    c.trans,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    &FluxEnd {
                        entity: None,
                        p: c.p_bc,
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    Some(ea),
                    None,
                );
            }
        }
        // --- matrix <-> interface (or face, in continuous mode) ---
        for c in &self.half_conns {
            let ea = self.map.cell(c.cell);
            let eb = match self.setup.model {
                PressureModel::Discontinuous => self.map.side(c.face, c.side),
                PressureModel::Continuous => self.map.face(c.face),
            };
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    c.trans,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    &FluxEnd {
                        entity: Some(eb),
                        // matrix saturation law evaluated at the interface
                        // capillary pressure (the damaged law only feeds the
                        // layer accumulation)
                        p: [p[2 * eb], p[2 * eb + 1]],
                        sat_law: m_law,
                        rock: m_rock,
                    },
                    Some(ea),
                    Some(eb),
                );
            }
        }
        // --- interface -> fracture two-point exchange (discontinuous only) ---
        if self.setup.model == PressureModel::Discontinuous {
            for f in 0..self.map.n_faces {
                let ef = self.map.face(f);
                let t_geo = self.setup.t_normal * self.face_measure[f];
                for s in SIDES {
                    let es = self.map.side(f, s);
                    let rock_a = self.rock_of_side(s);
                    for ph in PHASES {
                        self.flux_into(
                            &mut asm,
                            t_geo,
                            ph,
                            &FluxEnd {
                                entity: Some(es),
                                p: [p[2 * es], p[2 * es + 1]],
                                sat_law: &rock_a.saturation,
                                rock: rock_a,
                            },
                            &FluxEnd {
                                entity: Some(ef),
                                p: [p[2 * ef], p[2 * ef + 1]],
                                sat_law: f_law,
                                rock: f_rock,
                            },
                            Some(es),
                            Some(ef),
                        );
                    }
                }
            }
        }
        // --- tangential fracture fluxes ---
        for c in &self.tangential_conns {
            let t_geo = self.tangential_conductance(closures, c);
            let (ea, eb) = (self.map.face(c.face_a), self.map.face(c.face_b));
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    t_geo,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    &FluxEnd {
                        entity: Some(eb),
                        p: [p[2 * eb], p[2 * eb + 1]],
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    Some(ea),
                    Some(eb),
                );
            }
        }
        for c in &self.node_conns {
            let d = closures.d_f[c.face];
            let t_geo = c.node_measure * d * d * d / 12.0 / c.half_len;
            let (ea, eb) = (self.map.face(c.face), self.map.node(c.node));
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    t_geo,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    &FluxEnd {
                        entity: Some(eb),
                        p: [p[2 * eb], p[2 * eb + 1]],
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    Some(ea),
                    Some(eb),
                );
            }
        }
        for c in &self.fracture_bc_conns {
            let d = closures.d_f[c.face];
            let t_geo = c.node_measure * d * d * d / 12.0 / c.half_len;
            let ea = self.map.face(c.face);
            for ph in PHASES {
                self.flux_into(
                    &mut asm,
                    t_geo,
                    ph,
                    &FluxEnd {
                        entity: Some(ea),
                        p: [p[2 * ea], p[2 * ea + 1]],
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    &FluxEnd {
                        entity: None,
                        p: c.p_bc,
                        sat_law: f_law,
                        rock: f_rock,
                    },
                    Some(ea),
                    None,
                );
            }
        }

        let jac = asm.tb.take().map(|tb| tb.build());
        Ok((asm.r, jac))
    }

    pub(crate) fn tangential_conductance(&self, closures: &FlowClosures, c: &super::TangentialConn) -> f64 {
        let ca = {
            let d = closures.d_f[c.face_a];
            c.node_measure * d * d * d / 12.0 / c.half_len[0]
        };
        let cb = {
            let d = closures.d_f[c.face_b];
            c.node_measure * d * d * d / 12.0 / c.half_len[1]
        };
        if ca + cb <= 0.0 {
            0.0
        } else {
            ca * cb / (ca + cb)
        }
    }

    /// Adds an upwinded two-point flux of `phase` to the residual rows
    /// (+F to `row_a`'s entity, -F to `row_b`'s) and its derivatives to the
    /// Jacobian, with the upwind direction frozen at the current state.
    #[allow(clippy::too_many_arguments)]
    fn flux_into(
        &self,
        asm: &mut Assembler,
        t_geo: f64,
        phase: Phase,
        a: &FluxEnd,
        b: &FluxEnd,
        row_a: Option<usize>,
        row_b: Option<usize>,
    ) -> f64 {
        let i = phase.idx();
        let dp = a.p[i] - b.p[i];
        let up_is_a = dp >= 0.0;
        let up = if up_is_a { a } else { b };
        let pc_up = up.p[0] - up.p[1];
        let (s_up, ds_up) = sat_and_deriv(up.sat_law, phase, pc_up);
        let (eta, deta) = up.rock.mobility_and_deriv(phase, s_up);
        let flux = t_geo * eta * dp;

        if let Some(e) = row_a.map(|e| self.map.dof(e, phase)) {
            asm.r[e] += flux;
        }
        if let Some(e) = row_b.map(|e| self.map.dof(e, phase)) {
            asm.r[e] -= flux;
        }

        if asm.tb.is_some() {
            // pressure-difference part
            let t_eta = t_geo * eta;
            for (row, sign) in [(row_a, 1.0), (row_b, -1.0)] {
                if let Some(re) = row {
                    let row_dof = self.map.dof(re, phase);
                    if let Some(ae) = a.entity {
                        asm.add_jac(row_dof, self.map.dof(ae, phase), sign * t_eta);
                    }
                    if let Some(be) = b.entity {
                        asm.add_jac(row_dof, self.map.dof(be, phase), -sign * t_eta);
                    }
                    // mobility part through the upstream saturation
                    if let Some(ue) = (if up_is_a { a.entity } else { b.entity }) {
                        let c = t_geo * dp * deta * ds_up;
                        asm.add_jac(row_dof, self.map.dof(ue, Phase::NonWetting), sign * c);
                        asm.add_jac(row_dof, self.map.dof(ue, Phase::Wetting), -sign * c);
                    }
                }
            }
        }
        flux
    }

    /// Total outflow of `phase` through the Dirichlet edges of a boundary
    /// side (positive = leaving the domain), upwinded like the residual.
    pub fn boundary_outflow(
        &self,
        p: &[f64],
        side: crate::mesh::BoundarySide,
        phase: Phase,
    ) -> f64 {
        let m_rock = &self.setup.rocks.matrix;
        let m_law = &m_rock.saturation;
        let mut total = 0.0;
        for c in &self.matrix_bc_conns {
            if c.side != side {
                continue;
            }
            let e = self.map.cell(c.cell);
            let i = phase.idx();
            let dp = p[2 * e + i] - c.p_bc[i];
            let pc_up = if dp >= 0.0 {
                self.pc(p, e)
            } else {
                c.p_bc[0] - c.p_bc[1]
            };
            let (s_up, _) = sat_and_deriv(m_law, phase, pc_up);
            let eta = m_rock.mobility(phase, s_up);
            total += c.trans * eta * dp;
        }
        total
    }

    /// Interface exchange fluxes and jumps per face, per side, per phase.
    pub fn interface_fluxes(&self, p: &[f64], closures: &FlowClosures) -> Vec<InterfaceFlux> {
        let _ = closures;
        let mut out = Vec::with_capacity(self.map.n_faces);
        for f in 0..self.map.n_faces {
            let ef = self.map.face(f);
            let t_geo = self.setup.t_normal * self.face_measure[f];
            let mut rec = InterfaceFlux {
                jump: [[0.0; 2]; 2],
                q: [[0.0; 2]; 2],
            };
            if self.setup.model == PressureModel::Discontinuous {
                for s in SIDES {
                    let es = self.map.side(f, s);
                    let rock_a = self.rock_of_side(s);
                    for ph in PHASES {
                        let i = ph.idx();
                        let jump = p[2 * es + i] - p[2 * ef + i];
                        let pc_s = self.pc(p, es);
                        let pc_f = self.pc(p, ef);
                        let (s_a, _) = sat_and_deriv(&rock_a.saturation, ph, pc_s);
                        let (s_f, _) = sat_and_deriv(&self.setup.rocks.fracture.saturation, ph, pc_f);
                        let eta_a = rock_a.mobility(ph, s_a);
                        let eta_f = self.setup.rocks.fracture.mobility(ph, s_f);
                        rec.jump[s as usize][i] = jump;
                        rec.q[s as usize][i] = upwind_flux(t_geo, p[2 * es + i], p[2 * ef + i], eta_a, eta_f);
                    }
                }
            }
            out.push(rec);
        }
        out
    }

    /// Energy-type diagnostics of a state.
    pub fn diagnostics(&self, p: &[f64], closures: &FlowClosures) -> FlowDiagnostics {
        let mut d = FlowDiagnostics::default();
        let m_law = &self.setup.rocks.matrix.saturation;
        let f_law = &self.setup.rocks.fracture.saturation;
        for ph in PHASES {
            let i = ph.idx();
            for c in &self.matrix_conns {
                let (ea, eb) = (self.map.cell(c.cell_a), self.map.cell(c.cell_b));
                let dp = p[2 * ea + i] - p[2 * eb + i];
                d.grad_energy[i] += c.trans * dp * dp;
            }
            for c in &self.half_conns {
                let ea = self.map.cell(c.cell);
                let eb = match self.setup.model {
                    PressureModel::Discontinuous => self.map.side(c.face, c.side),
                    PressureModel::Continuous => self.map.face(c.face),
                };
                let dp = p[2 * ea + i] - p[2 * eb + i];
                d.grad_energy[i] += c.trans * dp * dp;
            }
            for c in &self.tangential_conns {
                let t = self.tangential_conductance(closures, c);
                let (ea, eb) = (self.map.face(c.face_a), self.map.face(c.face_b));
                let dp = p[2 * ea + i] - p[2 * eb + i];
                d.frac_tangential_energy[i] += t * dp * dp;
            }
            for c in &self.node_conns {
                let df = closures.d_f[c.face];
                let t = c.node_measure * df * df * df / 12.0 / c.half_len;
                let dp = p[2 * self.map.face(c.face) + i] - p[2 * self.map.node(c.node) + i];
                d.frac_tangential_energy[i] += t * dp * dp;
            }
        }
        let fluxes = self.interface_fluxes(p, closures);
        d.min_jump_dissipation = 0.0;
        for (f, rec) in fluxes.iter().enumerate() {
            let t_geo = self.setup.t_normal * self.face_measure[f];
            for s in 0..2 {
                for i in 0..2 {
                    let jp = rec.jump[s][i];
                    d.jump_energy[i] += t_geo * jp * jp;
                    let diss = rec.q[s][i] * jp;
                    d.interface_dissipation[i] += diss;
                    d.min_jump_dissipation = d.min_jump_dissipation.min(diss);
                }
            }
        }
        // capillary energy integrals
        for k in 0..self.map.n_cells {
            d.u_l1_matrix += self.cell_measure[k] * m_law.capillary_energy(self.pc(p, self.map.cell(k)));
        }
        for f in 0..self.map.n_faces {
            d.u_l1_fracture +=
                self.face_measure[f] * f_law.capillary_energy(self.pc(p, self.map.face(f)));
            if self.setup.model == PressureModel::Discontinuous {
                for s in SIDES {
                    let law = &self.rock_of_side(s).saturation;
                    d.u_l1_damaged += self.side_pore_volume(f, s)
                        * law.capillary_energy(self.pc(p, self.map.side(f, s)));
                }
            }
        }
        d
    }
}

/// Frozen accumulation terms of the previous accepted time level.
#[derive(Debug, Clone)]
pub struct PrevAccumulation {
    pub cell_mass: Vec<[f64; 2]>,
    pub face_mass: Vec<[f64; 2]>,
    /// `[face][side][phase]` damaged-layer saturations.
    pub side_sat: Vec<[[f64; 2]; 2]>,
}

/// Interface exchange record per fracture face: `[side][phase]`.
#[derive(Debug, Clone, Copy)]
pub struct InterfaceFlux {
    pub jump: [[f64; 2]; 2],
    pub q: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FlowDiagnostics {
    /// `sum T (dp)^2` over matrix connections, per phase.
    pub grad_energy: [f64; 2],
    /// `sum C_tan (dp)^2` over tangential fracture connections, per phase.
    pub frac_tangential_energy: [f64; 2],
    /// `sum T_f |s| (jump)^2`, per phase.
    pub jump_energy: [f64; 2],
    /// `sum Q * jump >= 0`, per phase.
    pub interface_dissipation: [f64; 2],
    /// Most negative single `Q * jump` observed (>= -eps expected).
    pub min_jump_dissipation: f64,
    pub u_l1_matrix: f64,
    pub u_l1_fracture: f64,
    pub u_l1_damaged: f64,
}

impl FlowDiagnostics {
    pub fn all_finite(&self) -> bool {
        let vals = [
            self.grad_energy[0],
            self.grad_energy[1],
            self.frac_tangential_energy[0],
            self.frac_tangential_energy[1],
            self.jump_energy[0],
            self.jump_energy[1],
            self.interface_dissipation[0],
            self.interface_dissipation[1],
            self.u_l1_matrix,
            self.u_l1_fracture,
            self.u_l1_damaged,
        ];
        vals.iter().all(|v| v.is_finite())
    }
}

/// Newton problem binding a flow system to a time step.
pub struct FlowNewton<'a, 'm> {
    pub sys: &'a FlowSystem<'m>,
    pub prev: &'a PrevAccumulation,
    pub closures: &'a FlowClosures,
    pub dt: f64,
}

impl<'a, 'm> NewtonProblem for FlowNewton<'a, 'm> {
    fn dim(&self) -> usize {
        self.sys.map.n_dofs()
    }

    fn residual(&mut self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let (r, _) = self.sys.assemble(x, self.prev, self.closures, self.dt, false)?;
        out.copy_from_slice(&r);
        Ok(())
    }

    fn jacobian(&mut self, x: &[f64]) -> Result<CsrMatrix> {
        let (_, j) = self.sys.assemble(x, self.prev, self.closures, self.dt, true)?;
        Ok(j.expect("jacobian requested"))
    }

    fn row_weights(&self) -> Option<&[f64]> {
        Some(&self.sys.row_weights)
    }

    /// Normalized primary-variation scale: `max(|p|_inf, 1 Pa)`.
    fn increment_scale(&self, x: &[f64]) -> f64 {
        x.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }

    /// Bounds the per-iteration saturation change of every flow entity
    /// (Appleyard-style local chop): the capillary kinks and the interface
    /// upwind switches otherwise drive limit cycles when whole entities jump
    /// across their entry pressure in one update. Full steps are kept near
    /// the root, so the local quadratic convergence of Newton is untouched.
    fn limit_step(&self, x: &[f64], dx: &mut [f64]) {
        const MAX_SAT_CHANGE: f64 = 0.2;
        let map = &self.sys.map;
        let law_of = |e: usize| {
            if e < map.n_cells {
                &self.sys.setup.rocks.matrix.saturation
            } else if e < map.n_cells + map.n_faces {
                &self.sys.setup.rocks.fracture.saturation
            } else if e < map.n_cells + 2 * map.n_faces {
                &self.sys.setup.rocks.damaged_plus.saturation
            } else if e < map.n_cells + 3 * map.n_faces {
                &self.sys.setup.rocks.damaged_minus.saturation
            } else {
                &self.sys.setup.rocks.fracture.saturation
            }
        };
        for e in 0..map.n_entities() {
            // Cap the per-iteration pressure swing of each entity: level
            // excursions (both phases together) are invisible to the
            // saturation cap but can throw the porosity closure far out of
            // range before the residual can push back.
            let swing = dx[2 * e].abs().max(dx[2 * e + 1].abs());
            let cap = 0.5 * (x[2 * e].abs().max(x[2 * e + 1].abs()) + 1e6);
            if swing > cap {
                let a = cap / swing;
                dx[2 * e] *= a;
                dx[2 * e + 1] *= a;
            }
            let pc0 = x[2 * e] - x[2 * e + 1];
            let law = law_of(e);
            let s0 = law.sat_nw(pc0);
            // Keep iterates out of the degenerate saturation regions, where
            // the absent phase's pressure is indeterminate and its equation
            // loses its accumulation slope (which catapults the next update):
            // below the entry pressure ride the non-wetting pressure on the
            // wetting one (pc clamped at 0); when fully drained, with
            // S_w below 1e-12, ride the wetting pressure on the non-wetting
            // one instead. Saturations are unchanged by either clamp.
            let floor = pc0.min(0.0);
            if pc0 + (dx[2 * e] - dx[2 * e + 1]) < floor {
                dx[2 * e] = dx[2 * e + 1] + (floor - pc0);
            }
            let cap = match *law {
                crate::rockphys::SaturationLaw::Corey { r } => (27.631 * r).max(pc0),
            };
            if pc0 + (dx[2 * e] - dx[2 * e + 1]) > cap {
                dx[2 * e + 1] = dx[2 * e] - (cap - pc0);
            }
            let dpc = dx[2 * e] - dx[2 * e + 1];
            let ds = (law.sat_nw(pc0 + dpc) - s0).abs();
            if ds > MAX_SAT_CHANGE {
                // largest alpha with |S(pc0 + alpha dpc) - S(pc0)| <= cap
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if (law.sat_nw(pc0 + mid * dpc) - s0).abs() <= MAX_SAT_CHANGE {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                dx[2 * e] *= lo;
                dx[2 * e + 1] *= lo;
            }
        }
    }
}
