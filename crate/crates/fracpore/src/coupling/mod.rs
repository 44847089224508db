//! Time integration of the coupled flow-mechanics system: adaptive stepping
//! with chopping, the per-step flow/mechanics fixed point accelerated by
//! Jacobian-free Newton-Krylov, closure updates and the initial-state solve.
//!
//! One outer sweep `G(u)`: freeze the aperture `d_f(u)` and `div u` in the
//! flow closures, Newton-solve the two-phase flow (the porosity still varies
//! with pressure through `p_E / M`, differentiated analytically), compute the
//! equivalent pressures, solve the mechanics with them. A time step is
//! accepted when JFNK drives `G(u) - u` below the relative displacement
//! increment tolerance; any nonlinear failure chops `dt` by 2 and retries.

use crate::error::{FracporeError, Result};
use crate::flow::{FlowClosures, FlowDiagnostics, FlowNewton, FlowSystem, SIDES};
use crate::mech::MechSystem;
use crate::mesh::Mesh;
use crate::rockphys::{Phase, PHASES};
use crate::solvers::{newton_krylov_fixed_point, newton_solve, FixedPointConfig, NewtonConfig};
use crate::units::DAY;

/// Adaptive time-step controller: `dt_next = min(growth * dt_prev, dt_max)`,
/// halving on nonlinear failure, clipped to land exactly on `t_final`.
#[derive(Debug, Clone)]
pub struct TimeController {
    pub dt_init: f64,
    pub growth: f64,
    pub dt_max: f64,
    pub chop_factor: f64,
    pub dt_floor: f64,
    pub t_final: f64,
}

impl TimeController {
    pub fn new(t_final: f64, dt_max: f64) -> TimeController {
        TimeController {
            dt_init: 0.001 * DAY,
            growth: 1.1,
            dt_max,
            chop_factor: 2.0,
            dt_floor: 1e-9 * DAY,
            t_final,
        }
    }

    /// Number of accepted steps the schedule takes without any chop; the
    /// deterministic count a chop-free run must reproduce.
    pub fn schedule_step_count(&self) -> usize {
        let mut t = 0.0f64;
        let mut dt = self.dt_init;
        let mut n = 0usize;
        while t < self.t_final * (1.0 - 1e-14) && n < 10_000_000 {
            let step = dt.min(self.t_final - t);
            t += step;
            n += 1;
            dt = (dt * self.growth).min(self.dt_max);
        }
        n
    }
}

/// Accepted coupled state at one time level. The stored porosity and aperture
/// satisfy the closure equations exactly for the stored `(p, u)`.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub t: f64,
    /// Flow pressures (2 per flow entity).
    pub p: Vec<f64>,
    /// Displacement DOFs.
    pub u: Vec<f64>,
    /// Cell porosities `phi_D`.
    pub phi_d: Vec<f64>,
    /// Face apertures (with the scenario offset applied).
    pub d_f: Vec<f64>,
    pub p_e_cells: Vec<f64>,
    pub p_e_faces: Vec<f64>,
}

/// Everything fixed over a run: systems, reference state and solver configs.
pub struct CoupledProblem<'m> {
    pub mesh: &'m Mesh,
    pub flow: FlowSystem<'m>,
    pub mech: MechSystem,
    pub b_biot: f64,
    /// 1 / M.
    pub inv_m: f64,
    pub phi0: f64,
    /// Pre-stress (tension positive) entering loads and total stress.
    pub sigma0: [f64; 4],
    /// Constant part of the mechanics RHS: pre-stress + boundary tractions.
    pub rhs_const: Vec<f64>,
    /// `None`: aperture is the geometric jump; `Some(d0)`: initial aperture
    /// `d0` plus the jump change since the initial displacement.
    pub d_offset: Option<f64>,
    pub newton_cfg: NewtonConfig,
    pub fixed_point_cfg: FixedPointConfig,
    /// Optional runtime lower-bound assertions (porosity, aperture).
    pub assert_phi_min: Option<f64>,
    pub assert_d0: Option<f64>,
    // reference (initial) quantities, filled by `solve_initial_state`
    pub u0: Vec<f64>,
    pub div_u0: Vec<f64>,
    pub pe0_cells: Vec<f64>,
    pub aperture0_geo: Vec<f64>,
}

impl<'m> CoupledProblem<'m> {
    /// Aperture field of a displacement vector, offset applied.
    pub fn aperture(&self, u: &[f64]) -> Vec<f64> {
        let geo = self.mech.extract_aperture(self.mesh, u);
        match self.d_offset {
            None => geo,
            Some(d0) => geo
                .iter()
                .zip(&self.aperture0_geo)
                .map(|(g, g0)| d0 + g - g0)
                .collect(),
        }
    }

    /// Flow closures for a frozen displacement iterate.
    pub fn closures_for(&self, u: &[f64]) -> FlowClosures {
        let div_u = self.mech.cell_divergence(self.mesh, u);
        let phi_base: Vec<f64> = (0..self.mesh.n_cells())
            .map(|k| {
                self.phi0 + self.b_biot * (div_u[k] - self.div_u0[k])
                    - self.inv_m * self.pe0_cells[k]
            })
            .collect();
        FlowClosures {
            phi_base,
            inv_m: self.inv_m,
            d_f: self.aperture(u),
        }
    }

    /// Exact porosity closure for a state pair.
    pub fn porosity(&self, p: &[f64], u: &[f64]) -> Vec<f64> {
        let closures = self.closures_for(u);
        let pe = self.flow.equivalent_pressure_cells(p);
        (0..self.mesh.n_cells())
            .map(|k| closures.phi_base[k] + self.inv_m * pe[k])
            .collect()
    }

    /// Mechanics RHS for given equivalent pressures.
    pub fn mech_rhs(&self, pe_cells: &[f64], pe_faces: &[f64]) -> Vec<f64> {
        let mut rhs = self.rhs_const.clone();
        self.mech
            .add_cell_pressure_loads(self.mesh, self.b_biot, pe_cells, &mut rhs);
        self.mech
            .add_fracture_pressure_loads(self.mesh, pe_faces, &mut rhs);
        rhs
    }
}

/// Per-step solver counters.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub newton_iters: usize,
    pub gmres_flow_iters: usize,
    pub nk_outer_iters: usize,
    pub gmres_nk_iters: usize,
    pub g_evaluations: usize,
}

/// Quantities logged per accepted step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub stats: StepStats,
    pub diagnostics: FlowDiagnostics,
    pub masses: [f64; 2],
    pub mean_s_nw_matrix: f64,
    pub mean_s_nw_fracture: f64,
    pub mean_aperture: f64,
    pub min_phi: f64,
    pub min_d_f: f64,
    pub strain_energy: f64,
    pub p_e_norm: f64,
    pub d_f_l4: f64,
    /// Most negative margin of the per-entity chord inequality
    /// `pc (S - S_prev) >= U - U_prev` (scaled; >= -1e-12 expected).
    pub chord_margin: f64,
    /// Cumulative interface + Darcy dissipation integral (both phases).
    pub cumulative_dissipation: f64,
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub nb_cells: usize,
    pub n_steps: usize,
    pub n_chops: usize,
    pub n_newton: usize,
    pub n_gmres_flow: usize,
    pub n_nk: usize,
    pub n_gmres_nk: usize,
    pub wall_seconds: f64,
    pub final_time: f64,
}

#[derive(Default)]
pub struct RunOptions {
    pub max_steps: Option<usize>,
}

/// Solves the static mechanics problem with the initial equivalent pressures
/// and fills the reference quantities of `problem`; returns the state at
/// `t = 0`.
pub fn solve_initial_state(problem: &mut CoupledProblem, p0: Vec<f64>) -> Result<CoupledState> {
    let pe_cells = problem.flow.equivalent_pressure_cells(&p0);
    let pe_faces = problem.flow.equivalent_pressure_faces(&p0);
    let rhs = problem.mech_rhs(&pe_cells, &pe_faces);
    let u0 = problem.mech.solve(&rhs)?;
    problem.div_u0 = problem.mech.cell_divergence(problem.mesh, &u0);
    problem.aperture0_geo = problem.mech.extract_aperture(problem.mesh, &u0);
    problem.pe0_cells = pe_cells.clone();
    problem.u0 = u0.clone();
    let d_f = problem.aperture(&u0);
    let phi_d = problem.porosity(&p0, &u0);
    Ok(CoupledState {
        t: 0.0,
        p: p0,
        u: u0,
        phi_d,
        d_f,
        p_e_cells: pe_cells,
        p_e_faces: pe_faces,
    })
}

/// Closures matching a stored state (also used by verification code).
pub fn closures_of_state(problem: &CoupledProblem, state: &CoupledState) -> FlowClosures {
    FlowClosures {
        phi_base: state
            .phi_d
            .iter()
            .zip(&state.p_e_cells)
            .map(|(phi, pe)| phi - problem.inv_m * pe)
            .collect(),
        inv_m: problem.inv_m,
        d_f: state.d_f.clone(),
    }
}

/// One step attempt at fixed `dt`.
pub fn advance_step(
    problem: &CoupledProblem,
    state: &CoupledState,
    dt: f64,
) -> Result<(CoupledState, StepStats)> {
    // previous-time accumulation, frozen against the stored state
    let closures_n = closures_of_state(problem, state);
    let prev = problem.flow.accumulation(&state.p, &closures_n);

    let mut stats = StepStats::default();
    // scratch holding the flow solution of the most recent G evaluation;
    // consecutive evaluations differ only by finite-difference perturbations
    // of u, so the previous solution is an excellent warm start
    let mut last_flow: Option<Vec<f64>> = None;

    // Every fixed-point evaluation solves the flow from the accepted state
    // (cold start): the deterministic Newton path then lands on the same
    // attractor for nearby closures, which keeps G reproducible enough for
    // the Jacobian-free directional derivatives. Warm starts across
    // evaluations look cheaper but wander within the solver's stagnation
    // floor and poison the fixed-point acceleration.
    let g = |u_cand: &[f64]| -> Result<Vec<f64>> {
        let closures = problem.closures_for(u_cand);
        let p_sol = {
            let mut flow_problem = FlowNewton {
                sys: &problem.flow,
                prev: &prev,
                closures: &closures,
                dt,
            };
            let out = newton_solve(&mut flow_problem, &state.p, &problem.newton_cfg)?;
            stats.newton_iters += out.iters;
            stats.gmres_flow_iters += out.linear_iters;
            out.x
        };
        let pe_cells = problem.flow.equivalent_pressure_cells(&p_sol);
        let pe_faces = problem.flow.equivalent_pressure_faces(&p_sol);
        let rhs = problem.mech_rhs(&pe_cells, &pe_faces);
        let u_next = problem.mech.solve(&rhs)?;
        last_flow = Some(p_sol);
        Ok(u_next)
    };

    let (u_star, fp_stats) = newton_krylov_fixed_point(g, &state.u, &problem.fixed_point_cfg)?;
    stats.nk_outer_iters = fp_stats.outer_iters;
    stats.gmres_nk_iters = fp_stats.inner_gmres_iters;
    stats.g_evaluations = fp_stats.g_evaluations;

    let p_new = last_flow.expect("fixed point evaluated G at least once");
    // Store the consistent set at the fixed point: the flow was solved with
    // the closures of u_star, so the stored state satisfies the flow
    // equations and the closure identities simultaneously.
    let d_f = problem.aperture(&u_star);
    let phi_d = problem.porosity(&p_new, &u_star);
    if let Some(phi_min) = problem.assert_phi_min {
        if let Some(bad) = phi_d.iter().find(|v| **v < phi_min) {
            return Err(FracporeError::Abort(format!(
                "porosity lower-bound assertion violated: {bad} < {phi_min}"
            )));
        }
    }
    if let Some(d0) = problem.assert_d0 {
        if let Some(bad) = d_f.iter().find(|v| **v < d0) {
            return Err(FracporeError::Abort(format!(
                "aperture lower-bound assertion violated: {bad} < {d0}"
            )));
        }
    }
    let p_e_cells = problem.flow.equivalent_pressure_cells(&p_new);
    let p_e_faces = problem.flow.equivalent_pressure_faces(&p_new);
    Ok((
        CoupledState {
            t: state.t + dt,
            p: p_new,
            u: u_star,
            phi_d,
            d_f,
            p_e_cells,
            p_e_faces,
        },
        stats,
    ))
}

/// Builds the per-step record (diagnostics, means, energy monitors).
pub fn record_step(
    problem: &CoupledProblem,
    state_prev: &CoupledState,
    state: &CoupledState,
    dt: f64,
    stats: StepStats,
    cumulative_dissipation: &mut f64,
) -> StepRecord {
    let closures = closures_of_state(problem, state);
    let diag = problem.flow.diagnostics(&state.p, &closures);
    let masses = problem.flow.total_mass(&state.p, &closures);

    let flow = &problem.flow;
    let total_cell_meas: f64 = flow.cell_measure.iter().sum();
    let s_m = flow.cell_saturation(&state.p, Phase::NonWetting);
    let mean_s_nw_matrix = flow
        .cell_measure
        .iter()
        .zip(&s_m)
        .map(|(m, s)| m * s)
        .sum::<f64>()
        / total_cell_meas;
    let total_face_meas: f64 = flow.face_measure.iter().sum();
    let (mean_s_nw_fracture, mean_aperture) = if flow.map.n_faces > 0 {
        let s_f = flow.face_saturation(&state.p, Phase::NonWetting);
        (
            flow.face_measure
                .iter()
                .zip(&s_f)
                .map(|(m, s)| m * s)
                .sum::<f64>()
                / total_face_meas,
            flow.face_measure
                .iter()
                .zip(&state.d_f)
                .map(|(m, d)| m * d)
                .sum::<f64>()
                / total_face_meas,
        )
    } else {
        (0.0, 0.0)
    };

    // chord inequality margin over all entities carrying a saturation law
    let mut chord_margin = f64::INFINITY;
    {
        let rocks = &flow.setup.rocks;
        let mut check = |law: &crate::rockphys::SaturationLaw, pc_new: f64, pc_old: f64| {
            let lhs = pc_new * (law.sat_nw(pc_new) - law.sat_nw(pc_old));
            let rhs = law.capillary_energy(pc_new) - law.capillary_energy(pc_old);
            let scale = pc_new.abs().max(pc_old.abs()).max(1.0);
            chord_margin = chord_margin.min((lhs - rhs) / scale);
        };
        for k in 0..flow.map.n_cells {
            let e = flow.map.cell(k);
            check(
                &rocks.matrix.saturation,
                flow.pc(&state.p, e),
                flow.pc(&state_prev.p, e),
            );
        }
        for f in 0..flow.map.n_faces {
            let e = flow.map.face(f);
            check(
                &rocks.fracture.saturation,
                flow.pc(&state.p, e),
                flow.pc(&state_prev.p, e),
            );
            for s in SIDES {
                let es = flow.map.side(f, s);
                check(
                    &flow.rock_of_side(s).saturation,
                    flow.pc(&state.p, es),
                    flow.pc(&state_prev.p, es),
                );
            }
        }
    }

    let dissipation_rate: f64 = PHASES
        .iter()
        .map(|ph| {
            diag.grad_energy[ph.idx()]
                + diag.frac_tangential_energy[ph.idx()]
                + diag.interface_dissipation[ph.idx()]
        })
        .sum();
    *cumulative_dissipation += dt * dissipation_rate;

    let p_e_norm = (0..flow.map.n_cells)
        .map(|k| flow.cell_measure[k] * state.p_e_cells[k] * state.p_e_cells[k])
        .sum::<f64>()
        .sqrt();
    let d_f_l4 = flow
        .face_measure
        .iter()
        .zip(&state.d_f)
        .map(|(m, d)| m * d.powi(4))
        .sum::<f64>()
        .powf(0.25);

    StepRecord {
        t: state.t,
        dt,
        stats,
        diagnostics: diag,
        masses,
        mean_s_nw_matrix,
        mean_s_nw_fracture,
        mean_aperture,
        min_phi: state.phi_d.iter().copied().fold(f64::INFINITY, f64::min),
        min_d_f: state.d_f.iter().copied().fold(f64::INFINITY, f64::min),
        strain_energy: problem.mech.strain_energy_form(&state.u),
        p_e_norm,
        d_f_l4,
        chord_margin,
        cumulative_dissipation: *cumulative_dissipation,
    }
}

/// Runs the adaptive time loop from `state0` to `controller.t_final`,
/// invoking `on_accepted` after every accepted step.
pub fn run<F>(
    problem: &CoupledProblem,
    state0: CoupledState,
    controller: &TimeController,
    opts: &RunOptions,
    mut on_accepted: F,
) -> Result<(CoupledState, SimulationReport)>
where
    F: FnMut(&CoupledState, &StepRecord) -> Result<()>,
{
    let wall_start = std::time::Instant::now();
    let mut report = SimulationReport {
        nb_cells: problem.mesh.n_cells(),
        n_steps: 0,
        n_chops: 0,
        n_newton: 0,
        n_gmres_flow: 0,
        n_nk: 0,
        n_gmres_nk: 0,
        wall_seconds: 0.0,
        final_time: 0.0,
    };
    let mut state = state0;
    let mut dt = controller.dt_init;
    let mut cumulative_dissipation = 0.0f64;

    while state.t < controller.t_final * (1.0 - 1e-14) {
        if let Some(max) = opts.max_steps {
            if report.n_steps >= max {
                break;
            }
        }
        let dt_step = dt.min(controller.t_final - state.t);
        match advance_step(problem, &state, dt_step) {
            Ok((new_state, stats)) => {
                report.n_steps += 1;
                report.n_newton += stats.newton_iters;
                report.n_gmres_flow += stats.gmres_flow_iters;
                report.n_nk += stats.nk_outer_iters;
                report.n_gmres_nk += stats.gmres_nk_iters;
                let rec = record_step(
                    problem,
                    &state,
                    &new_state,
                    dt_step,
                    stats,
                    &mut cumulative_dissipation,
                );
                if !rec.diagnostics.all_finite() || !rec.masses.iter().all(|m| m.is_finite()) {
                    return Err(FracporeError::Abort(format!(
                        "non-finite diagnostics at t = {}",
                        new_state.t
                    )));
                }
                if std::env::var_os("FRACPORE_RUN_TRACE").is_some() {
                    eprintln!(
                        "step {} t {:.5e} dt {:.5e}: newton {} gmres {} nk {} gevals {}",
                        report.n_steps, new_state.t, dt_step, stats.newton_iters,
                        stats.gmres_flow_iters, stats.nk_outer_iters, stats.g_evaluations
                    );
                }
                state = new_state;
                on_accepted(&state, &rec)?;
                dt = (dt * controller.growth).min(controller.dt_max);
            }
            Err(FracporeError::NonConvergence(ref msg))
            | Err(FracporeError::OuterNonConvergence(ref msg))
            | Err(FracporeError::Closure(ref msg)) => {
                if std::env::var_os("FRACPORE_RUN_TRACE").is_some() {
                    eprintln!("chop at t {:.5e}, dt {:.5e}: {msg}", state.t, dt_step);
                }
                report.n_chops += 1;
                dt /= controller.chop_factor;
                if dt < controller.dt_floor {
                    return Err(FracporeError::Abort(format!(
                        "time step underflow at t = {}: dt = {dt}",
                        state.t
                    )));
                }
            }
            Err(e) => return Err(e),
        }
    }
    report.wall_seconds = wall_start.elapsed().as_secs_f64();
    report.final_time = state.t;
    Ok((state, report))
}

#[cfg(test)]
mod tests;
