//! CSV time series (RFC-4180-style, '.' decimal, UTF-8), legacy ASCII VTK
//! snapshots and the plain-text performance report.

use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::coupling::{CoupledProblem, CoupledState, SimulationReport, StepRecord};
use crate::error::Result;
use crate::rockphys::Phase;

pub const SERIES_HEADER: &str = "t,dt,mean_s_nw_matrix,mean_s_nw_fracture,mean_aperture,mass_nw,mass_w,\
grad_energy_nw,grad_energy_w,frac_tangential_energy_nw,frac_tangential_energy_w,\
jump_energy_nw,jump_energy_w,interface_dissipation_nw,interface_dissipation_w,\
cumulative_dissipation,u_l1_matrix,u_l1_fracture,u_l1_damaged,p_e_norm,strain_energy,\
d_f_l4,min_phi,min_d_f,chord_margin,newton_iters,nk_iters";

pub fn series_row(rec: &StepRecord) -> String {
    let d = &rec.diagnostics;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        rec.t,
        rec.dt,
        rec.mean_s_nw_matrix,
        rec.mean_s_nw_fracture,
        rec.mean_aperture,
        rec.masses[0],
        rec.masses[1],
        d.grad_energy[0],
        d.grad_energy[1],
        d.frac_tangential_energy[0],
        d.frac_tangential_energy[1],
        d.jump_energy[0],
        d.jump_energy[1],
        d.interface_dissipation[0],
        d.interface_dissipation[1],
        rec.cumulative_dissipation,
        d.u_l1_matrix,
        d.u_l1_fracture,
        d.u_l1_damaged,
        rec.p_e_norm,
        rec.strain_energy,
        rec.d_f_l4,
        rec.min_phi,
        rec.min_d_f,
        rec.chord_margin,
        rec.stats.newton_iters,
        rec.stats.nk_outer_iters,
    )
}

pub fn write_series_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut s = String::with_capacity(256 * (records.len() + 1));
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for rec in records {
        s.push_str(&series_row(rec));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

/// Matrix-field snapshot: triangles with cell data.
pub fn write_matrix_snapshot_vtk(
    path: &Path,
    problem: &CoupledProblem,
    state: &CoupledState,
) -> Result<()> {
    let mesh = problem.mesh;
    let flow = &problem.flow;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "fracpore matrix fields t={}", state.t);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.n_cells(), 4 * mesh.n_cells());
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c.v[0], c.v[1], c.v[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.n_cells());
    for _ in 0..mesh.n_cells() {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
    let mut scalar = |name: &str, values: &dyn Fn(usize) -> f64| {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for k in 0..mesh.n_cells() {
            let _ = writeln!(s, "{}", values(k));
        }
    };
    let s_nw = flow.cell_saturation(&state.p, Phase::NonWetting);
    scalar("s_nw", &|k| s_nw[k]);
    scalar("p_nw", &|k| state.p[2 * flow.map.cell(k)]);
    scalar("p_w", &|k| state.p[2 * flow.map.cell(k) + 1]);
    scalar("p_equivalent", &|k| state.p_e_cells[k]);
    scalar("porosity", &|k| state.phi_d[k]);
    let stress = problem.mech.total_stress(
        mesh,
        &state.u,
        &state.p_e_cells,
        problem.b_biot,
        problem.sigma0,
    );
    scalar("sigma_xx", &|k| stress[k][0]);
    scalar("sigma_yy_rr", &|k| stress[k][1]);
    scalar("sigma_zz_theta", &|k| stress[k][2]);
    scalar("sigma_shear", &|k| stress[k][3]);
    write_atomic(path, s.as_bytes())
}

/// Fracture-line snapshot: line cells with face data.
pub fn write_fracture_snapshot_vtk(
    path: &Path,
    problem: &CoupledProblem,
    state: &CoupledState,
) -> Result<()> {
    let mesh = problem.mesh;
    let flow = &problem.flow;
    let n = mesh.fracture_edges.len();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "fracpore fracture fields t={}", state.t);
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", n, 3 * n);
    for fe in &mesh.fracture_edges {
        let e = &mesh.edges[fe.edge];
        let _ = writeln!(s, "2 {} {}", e.v[0], e.v[1]);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(s, "3");
    }
    if n > 0 {
        let _ = writeln!(s, "CELL_DATA {n}");
        let mut scalar = |name: &str, values: &dyn Fn(usize) -> f64| {
            let _ = writeln!(s, "SCALARS {name} double 1");
            let _ = writeln!(s, "LOOKUP_TABLE default");
            for f in 0..n {
                let _ = writeln!(s, "{}", values(f));
            }
        };
        let s_f = flow.face_saturation(&state.p, Phase::NonWetting);
        scalar("s_f_nw", &|f| s_f[f]);
        scalar("p_f_nw", &|f| state.p[2 * flow.map.face(f)]);
        scalar("p_f_w", &|f| state.p[2 * flow.map.face(f) + 1]);
        scalar("p_f_equivalent", &|f| state.p_e_faces[f]);
        scalar("aperture", &|f| state.d_f[f]);
    }
    write_atomic(path, s.as_bytes())
}

/// Plain-text performance report mirroring the iteration-count tables.
pub fn write_performance_report(path: &Path, report: &SimulationReport) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "NbCells    {}", report.nb_cells);
    let _ = writeln!(s, "N_dt       {}", report.n_steps);
    let _ = writeln!(s, "N_Chops    {}", report.n_chops);
    let _ = writeln!(s, "N_Newton   {}", report.n_newton);
    let _ = writeln!(s, "N_GMRes    {}", report.n_gmres_flow);
    let _ = writeln!(s, "N_NK       {}", report.n_nk);
    let _ = writeln!(s, "N_GMRes_NK {}", report.n_gmres_nk);
    let _ = writeln!(s, "CPU[s]     {:.1}", report.wall_seconds);
    write_atomic(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_have_same_arity() {
        let cols = SERIES_HEADER.split(',').count();
        let rec = StepRecord {
            t: 1.0,
            dt: 0.5,
            stats: Default::default(),
            diagnostics: Default::default(),
            masses: [1.0, 2.0],
            mean_s_nw_matrix: 0.0,
            mean_s_nw_fracture: 0.0,
            mean_aperture: 0.0,
            min_phi: 0.2,
            min_d_f: 1e-4,
            strain_energy: 0.0,
            p_e_norm: 0.0,
            d_f_l4: 0.0,
            chord_margin: 0.0,
            cumulative_dissipation: 0.0,
        };
        assert_eq!(series_row(&rec).split(',').count(), cols);
    }
}
