//! Command-line front end: run scenarios to CSV/VTK/report files, export
//! meshes, run the verification checks.
//!
//! Exit codes: 0 completed, 2 solver abort, 3 config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fracpore::coupling::{run, solve_initial_state, RunOptions, StepRecord};
use fracpore::error::FracporeError;
use fracpore::output;
use fracpore::scenario::{builtin_scenario, parse_config, ModelKind, Scenario};
use fracpore::verify;

#[derive(Parser)]
#[command(
    name = "fracpore",
    about = "Two-phase flow in fractured poro-elastic media (TPFA + quadratic finite elements)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (a builtin name or a config file path).
    Simulate {
        /// `gas_injection_cross`, `tunnel_desaturation`, or a TOML/JSON file.
        scenario: String,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the pressure model.
        #[arg(long)]
        model: Option<String>,
        /// Override the mesh refinement (blocks per base block).
        #[arg(long)]
        refine: Option<u32>,
        /// Stop after this many accepted steps.
        #[arg(long)]
        max_steps: Option<usize>,
        /// Enable the lower-bound assertions: `phi_min,d0`.
        #[arg(long)]
        assert_bounds: Option<String>,
    },
    /// Build the scenario mesh and write it (text format, plus legacy VTK).
    ExportMesh {
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        refine: Option<u32>,
    },
    /// Run the verification checks and write a machine-readable report.
    Verify {
        /// Report file (JSON); also printed as text.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_scenario(spec: &str) -> Result<Scenario, FracporeError> {
    if spec.ends_with(".toml") || spec.ends_with(".json") || Path::new(spec).exists() {
        parse_config(Path::new(spec))
    } else {
        builtin_scenario(spec)
    }
}

fn exit_code_for(err: &FracporeError) -> ExitCode {
    match err {
        FracporeError::Parse(_)
        | FracporeError::Validation(_)
        | FracporeError::UnknownScenario(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            model,
            refine,
            max_steps,
            assert_bounds,
        } => simulate(&scenario, &out, model, refine, max_steps, assert_bounds),
        Command::ExportMesh { scenario, out, refine } => export_mesh(&scenario, &out, refine),
        Command::Verify { out } => run_verify(out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn apply_overrides(
    scenario: &mut Scenario,
    model: Option<String>,
    refine: Option<u32>,
) -> Result<(), FracporeError> {
    if let Some(m) = model {
        scenario.model = match m.as_str() {
            "discontinuous" => ModelKind::Discontinuous,
            "continuous" => ModelKind::Continuous,
            other => {
                return Err(FracporeError::Validation(format!(
                    "unknown model '{other}' (use discontinuous or continuous)"
                )))
            }
        };
    }
    if let Some(r) = refine {
        scenario.mesh.refine = r;
    }
    scenario.validate()
}

fn simulate(
    spec: &str,
    out_dir: &Path,
    model: Option<String>,
    refine: Option<u32>,
    max_steps: Option<usize>,
    assert_bounds: Option<String>,
) -> Result<(), FracporeError> {
    let mut scenario = load_scenario(spec)?;
    apply_overrides(&mut scenario, model, refine)?;
    std::fs::create_dir_all(out_dir)?;

    let mesh = scenario.build_mesh()?;
    let mut problem = scenario.build_problem(&mesh)?;
    if let Some(spec) = assert_bounds {
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() != 2 {
            return Err(FracporeError::Validation(
                "--assert-bounds expects 'phi_min,d0'".into(),
            ));
        }
        problem.assert_phi_min = Some(parts[0].trim().parse().map_err(|_| {
            FracporeError::Validation(format!("bad phi_min '{}'", parts[0]))
        })?);
        problem.assert_d0 = Some(parts[1].trim().parse().map_err(|_| {
            FracporeError::Validation(format!("bad d0 '{}'", parts[1]))
        })?);
    }

    fracpore::mesh::write_mesh_text(&mesh, &out_dir.join("mesh.txt"))?;
    fracpore::mesh::write_mesh_vtk(&mesh, &out_dir.join("mesh.vtk"))?;

    let p0 = scenario.initial_pressures(&problem.flow);
    let state0 = solve_initial_state(&mut problem, p0)?;

    let controller = scenario.controller();
    let mut records: Vec<StepRecord> = Vec::new();
    let mut cum0 = 0.0;
    records.push(fracpore::coupling::record_step(
        &problem,
        &state0,
        &state0,
        0.0,
        Default::default(),
        &mut cum0,
    ));
    output::write_matrix_snapshot_vtk(&out_dir.join("matrix_0000.vtk"), &problem, &state0)?;
    output::write_fracture_snapshot_vtk(&out_dir.join("fracture_0000.vtk"), &problem, &state0)?;

    let n_snapshots = scenario.output.snapshots.max(1);
    let snapshot_times: Vec<f64> = (1..=n_snapshots)
        .map(|k| controller.t_final * k as f64 / n_snapshots as f64)
        .collect();
    let mut next_snapshot = 0usize;
    let opts = RunOptions { max_steps };

    let (final_state, report) = run(&problem, state0, &controller, &opts, |state, rec| {
        records.push(rec.clone());
        while next_snapshot < snapshot_times.len()
            && state.t >= snapshot_times[next_snapshot] * (1.0 - 1e-12)
        {
            next_snapshot += 1;
            output::write_matrix_snapshot_vtk(
                &out_dir.join(format!("matrix_{next_snapshot:04}.vtk")),
                &problem,
                state,
            )?;
            output::write_fracture_snapshot_vtk(
                &out_dir.join(format!("fracture_{next_snapshot:04}.vtk")),
                &problem,
                state,
            )?;
        }
        Ok(())
    })?;

    output::write_series_csv(&out_dir.join("series.csv"), &records)?;
    output::write_performance_report(&out_dir.join("performance.txt"), &report)?;
    // final state, separately from the scheduled snapshots (max_steps may
    // have cut the run short)
    output::write_matrix_snapshot_vtk(&out_dir.join("matrix_final.vtk"), &problem, &final_state)?;
    output::write_fracture_snapshot_vtk(
        &out_dir.join("fracture_final.vtk"),
        &problem,
        &final_state,
    )?;

    println!(
        "completed: {} steps ({} chops), t = {:.6e} s, outputs in {}",
        report.n_steps,
        report.n_chops,
        report.final_time,
        out_dir.display()
    );
    println!(
        "counters: N_Newton {} N_GMRes {} N_NK {} N_GMRes_NK {} CPU {:.1}s",
        report.n_newton, report.n_gmres_flow, report.n_nk, report.n_gmres_nk, report.wall_seconds
    );
    Ok(())
}

fn export_mesh(spec: &str, out: &Path, refine: Option<u32>) -> Result<(), FracporeError> {
    let mut scenario = load_scenario(spec)?;
    apply_overrides(&mut scenario, None, refine)?;
    let mesh = scenario.build_mesh()?;
    fracpore::mesh::write_mesh_text(&mesh, out)?;
    fracpore::mesh::write_mesh_vtk(&mesh, &out.with_extension("vtk"))?;
    let report = fracpore::mesh::validate_admissibility(&mesh);
    println!(
        "mesh: {} cells, {} fracture edges; orthogonality defect {:.3e} rad, min center-edge distance {:.3e} m",
        mesh.n_cells(),
        mesh.fracture_edges.len(),
        report.max_orthogonality_defect,
        report.min_center_edge_distance
    );
    Ok(())
}

fn run_verify(out: Option<&Path>) -> Result<(), FracporeError> {
    let mut checks = Vec::new();

    let errs = verify::darcy_mms_errors(&[0.5, 0.25, 0.125])?;
    let (h, e): (Vec<f64>, Vec<f64>) = errs.iter().copied().unzip();
    let order = verify::convergence_order(&h, &e);
    checks.push(verify::CheckResult {
        name: "darcy_mms_l2_order".into(),
        passed: order >= 1.8,
        value: order,
        details: format!("errors {e:?}"),
    });

    let errs = verify::elasticity_mms_errors(&[0.5, 0.25], true)?;
    let worst = errs.iter().map(|(_, e)| *e).fold(0.0f64, f64::max);
    checks.push(verify::CheckResult {
        name: "elasticity_quadratic_exactness".into(),
        passed: worst <= 1e-10,
        value: worst,
        details: "degree-2 field reproduced".into(),
    });

    let errs = verify::elasticity_mms_errors(&[0.5, 0.25, 0.125], false)?;
    let (h, e): (Vec<f64>, Vec<f64>) = errs.iter().copied().unzip();
    let order = verify::convergence_order(&h, &e);
    checks.push(verify::CheckResult {
        name: "elasticity_mms_l2_order".into(),
        passed: order >= 2.7,
        value: order,
        details: format!("errors {e:?}"),
    });

    let barrier = verify::barrier_effect_demo()?;
    checks.push(verify::CheckResult {
        name: "barrier_effect".into(),
        passed: barrier.barrier_captured(),
        value: barrier.liquid_flux_cont / barrier.liquid_flux_disc,
        details: format!(
            "liquid jump {:.3e} Pa, flux discontinuous {:.3e}, continuous {:.3e}",
            barrier.liquid_jump_disc, barrier.liquid_flux_disc, barrier.liquid_flux_cont
        ),
    });

    print!("{}", verify::render_report_text(&checks));
    if let Some(path) = out {
        output::write_atomic(path, verify::render_report(&checks).as_bytes())?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(FracporeError::Abort("verification checks failed".into()))
    }
}
