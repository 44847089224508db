use super::*;
use crate::flow::{FlowRocks, FlowSetup, FlowSystem, PressureModel};
use crate::mech::{MechMode, MechSystem};
use crate::mesh::{build_mesh, Geometry};
use crate::rockphys::{MobilityLaw, RockType, SaturationLaw};
use crate::units::{DAY, YEAR};

fn cross_geometry() -> Geometry {
    Geometry::rectangle(0.0, 0.0, 100.0, 100.0)
        .with_fracture(vec![[37.5, 50.0], [50.0, 50.0]])
        .with_fracture(vec![[50.0, 50.0], [62.5, 50.0]])
        .with_fracture(vec![[50.0, 37.5], [50.0, 50.0]])
        .with_fracture(vec![[50.0, 50.0], [50.0, 62.5]])
}

fn small_problem(mesh: &Mesh) -> CoupledProblem<'_> {
    let matrix = RockType::new(
        SaturationLaw::corey(1e4),
        MobilityLaw::QuadraticOverMu { mu: 1.851e-5 },
        MobilityLaw::QuadraticOverMu { mu: 1e-3 },
    );
    let fracture = RockType::new(
        SaturationLaw::corey(10.0),
        MobilityLaw::LinearOverMu { mu: 1.851e-5 },
        MobilityLaw::LinearOverMu { mu: 1e-3 },
    );
    let rocks = FlowRocks {
        matrix,
        fracture,
        damaged_plus: matrix.with_damaged(1e-3, 0.2),
        damaged_minus: matrix.with_damaged(1e-3, 0.2),
    };
    let setup = FlowSetup {
        permeability: 3e-15,
        t_normal: 1e-8,
        rocks,
        model: PressureModel::Discontinuous,
        axisymmetric: false,
        matrix_bc: vec![],
        fracture_bc: vec![],
    };
    let flow = FlowSystem::new(mesh, setup).unwrap();
    let mut mech = MechSystem::new(mesh, MechMode::Plane, 833e6, 1250e6).unwrap();
    mech.clamp_all_boundaries(mesh);
    mech.factorize().unwrap();
    let rhs_const = mech.zero_loads();
    let n_cells = mesh.n_cells();
    CoupledProblem {
        mesh,
        flow,
        mech,
        b_biot: 0.81,
        inv_m: 1.0 / 18.4e9,
        phi0: 0.2,
        sigma0: [0.0; 4],
        rhs_const,
        d_offset: None,
        newton_cfg: NewtonConfig::default(),
        fixed_point_cfg: FixedPointConfig::default(),
        assert_phi_min: None,
        assert_d0: None,
        u0: vec![],
        div_u0: vec![0.0; n_cells],
        pe0_cells: vec![0.0; n_cells],
        aperture0_geo: vec![],
    }
}

#[test]
fn schedule_matches_reference_counts() {
    // gas-injection schedule: 0.001 d start, factor 1.1, cap 10 d, 1000 d end
    let c = TimeController::new(1000.0 * DAY, 10.0 * DAY);
    assert_eq!(c.schedule_step_count(), 187);
    // suction schedule: cap 10 yr, 200 yr end
    let c2 = TimeController::new(200.0 * YEAR, 10.0 * YEAR);
    let n2 = c2.schedule_step_count();
    assert!((160..=180).contains(&n2), "suction schedule count {n2}");
}

#[test]
fn zero_final_time_takes_no_steps() {
    let mesh = build_mesh(&cross_geometry(), 12.5).unwrap();
    let mut problem = small_problem(&mesh);
    let p0 = problem.flow.uniform_state(1e5, 1e5);
    let state0 = solve_initial_state(&mut problem, p0).unwrap();
    let controller = TimeController::new(0.0, 10.0 * DAY);
    let (state, report) = run(&problem, state0, &controller, &RunOptions::default(), |_, _| Ok(()))
        .unwrap();
    assert_eq!(report.n_steps, 0);
    assert_eq!(report.n_newton, 0);
    assert_eq!(state.t, 0.0);
}

#[test]
fn initial_aperture_positive_without_offset() {
    // with p_f_E = p_m_E = 1e5 and b < 1, the net fracture load pries the
    // walls open: the geometric aperture must already be positive at t = 0
    let mesh = build_mesh(&cross_geometry(), 12.5).unwrap();
    let mut problem = small_problem(&mesh);
    let p0 = problem.flow.uniform_state(1e5, 1e5);
    let state0 = solve_initial_state(&mut problem, p0).unwrap();
    for (f, d) in state0.d_f.iter().enumerate() {
        assert!(*d > 0.0, "face {f}: d_f = {d}");
    }
    // closure identity holds exactly at t = 0
    let phi = problem.porosity(&state0.p, &state0.u);
    for (a, b) in phi.iter().zip(&state0.phi_d) {
        assert_eq!(a, b);
    }
}

#[test]
fn equilibrium_state_is_a_fixed_point() {
    let mesh = build_mesh(&cross_geometry(), 12.5).unwrap();
    let mut problem = small_problem(&mesh);
    let p0 = problem.flow.uniform_state(1e5, 1e5);
    let state0 = solve_initial_state(&mut problem, p0).unwrap();
    let (state1, stats) = advance_step(&problem, &state0, 86.4).unwrap();
    assert_eq!(stats.nk_outer_iters, 0, "already a fixed point");
    let dp: f64 = state1
        .p
        .iter()
        .zip(&state0.p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let du: f64 = state1
        .u
        .iter()
        .zip(&state0.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(dp <= 1e-7 * 1e5, "pressures moved by {dp}");
    assert!(du <= 1e-12, "displacements moved by {du}");
}

#[test]
fn injection_run_is_deterministic_and_closure_exact() {
    let mesh = build_mesh(&cross_geometry(), 12.5).unwrap();
    let run_once = || {
        let mut problem = small_problem(&mesh);
        // small fracture gas source
        let rate = 4e-7;
        for f in 0..problem.flow.map.n_faces {
            problem.flow.set_face_source(f, Phase::NonWetting, rate);
        }
        let p0 = problem.flow.uniform_state(1e5, 1e5);
        let state0 = solve_initial_state(&mut problem, p0).unwrap();
        let controller = TimeController::new(0.02 * DAY, 10.0 * DAY);
        let mut records = Vec::new();
        let (state, report) = run(
            &problem,
            state0,
            &controller,
            &RunOptions::default(),
            |_, rec| {
                records.push(rec.clone());
                Ok(())
            },
        )
        .unwrap();
        // closure exactness on the final state
        let phi = problem.porosity(&state.p, &state.u);
        for (a, b) in phi.iter().zip(&state.phi_d) {
            let rel = (a - b).abs() / a.abs().max(1e-300);
            assert!(rel <= 1e-14, "porosity closure drift {rel}");
        }
        let d = problem.aperture(&state.u);
        for (a, b) in d.iter().zip(&state.d_f) {
            assert_eq!(a, b);
        }
        (state, report, records)
    };
    let (s1, r1, rec1) = run_once();
    let (s2, r2, rec2) = run_once();
    assert_eq!(r1.n_steps, r2.n_steps);
    assert_eq!(r1.n_newton, r2.n_newton);
    assert_eq!(s1.p, s2.p);
    assert_eq!(s1.u, s2.u);
    assert_eq!(rec1.len(), rec2.len());
    for (a, b) in rec1.iter().zip(&rec2) {
        assert_eq!(a.masses, b.masses);
        assert_eq!(a.mean_aperture, b.mean_aperture);
    }
    // energy monitors finite, interface dissipation nonnegative, chord holds
    for rec in &rec1 {
        assert!(rec.diagnostics.all_finite());
        assert!(rec.diagnostics.min_jump_dissipation >= -1e-18);
        assert!(rec.chord_margin >= -1e-12, "chord margin {}", rec.chord_margin);
    }
    assert_eq!(r1.n_chops, 0);
    assert_eq!(
        r1.n_steps,
        TimeController::new(0.02 * DAY, 10.0 * DAY).schedule_step_count()
    );
}
