//! Scenario definitions: geometry, rock parameters, laws, boundary and
//! initial conditions, sources, solver settings and the output plan; the two
//! builtin datasets (plane gas injection into a cross-shaped fracture
//! network, axisymmetric desaturation by suction at a tunnel wall); config
//! parsing (TOML, with JSON accepted) and validation.
//!
//! All config values are SI or `"<value> <unit>"` strings (`MPa`, `d`, `yr`,
//! ...), converted once at parse time.

mod config;

pub use config::{dump_config, parse_config, parse_config_str};

use serde::{Deserialize, Serialize};

use crate::coupling::{CoupledProblem, TimeController};
use crate::error::{FracporeError, Result};
use crate::flow::{FlowRocks, FlowSetup, FlowSystem, PressureModel};
use crate::mech::{MechMode, MechSystem};
use crate::mesh::{build_mesh, BoundarySide, Geometry, Mesh};
use crate::rockphys::{MobilityLaw, Phase, RockType, SaturationLaw};
use crate::solvers::{FixedPointConfig, NewtonConfig};
use crate::units::DAY;

/// A quantity that deserializes from a plain number (SI) or a `"value unit"`
/// string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qty(pub f64);

impl Serialize for Qty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Qty {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Qty(v)),
            Raw::Text(t) => crate::units::parse_quantity(&t)
                .map(Qty)
                .map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Plane,
    Axisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Discontinuous,
    Continuous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshParams {
    /// Base block size (m); the actual size is `base_h / refine`.
    pub base_h: Qty,
    pub refine: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RockParams {
    pub permeability: Qty,
    pub porosity0: f64,
    pub lame_lambda: Qty,
    pub lame_mu: Qty,
    pub biot_coefficient: f64,
    pub biot_modulus: Qty,
    /// Normal fracture transmissivity `T_f` (m).
    pub normal_transmissivity: Qty,
    pub damaged_width: Qty,
    pub damaged_porosity: f64,
    /// Initial aperture handling: absent = geometric jump only; present =
    /// this aperture at t0 plus the jump change since.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_aperture: Option<Qty>,
    /// Pre-stress magnitudes, compression positive: (axial/x, radial/y, hoop).
    pub pre_stress: [Qty; 3],
    /// Optional mobility floor for analysis-compliant runs (default 0).
    #[serde(default)]
    pub eta_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSet {
    pub saturation: SaturationLaw,
    pub mobility_nw: MobilityLaw,
    pub mobility_w: MobilityLaw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Laws {
    pub matrix: LawSet,
    pub fracture: LawSet,
    /// Damaged interface layers; default to the matrix laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damaged: Option<LawSet>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBcEntry {
    pub side: BoundarySide,
    pub p_nw: Qty,
    pub p_w: Qty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechDirichletEntry {
    pub side: BoundarySide,
    /// 0 = first coordinate (x), 1 = second (y or r).
    pub component: usize,
    pub value: Qty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechTractionEntry {
    pub side: BoundarySide,
    pub traction: [Qty; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConditions {
    /// Matrix Dirichlet data; unlisted sides are impervious.
    #[serde(default)]
    pub flow_matrix: Vec<FlowBcEntry>,
    /// Fracture-node Dirichlet data for fracture endpoints on the boundary.
    #[serde(default)]
    pub flow_fracture: Vec<FlowBcEntry>,
    #[serde(default)]
    pub clamp_all: bool,
    #[serde(default)]
    pub mech_dirichlet: Vec<MechDirichletEntry>,
    #[serde(default)]
    pub mech_traction: Vec<MechTractionEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum SourceConfig {
    None,
    /// Gaussian-in-space injection over the fracture network, normalized so
    /// the total injected volume over the run equals
    /// `pore_volume_fraction * phi0 * domain_area`.
    FractureGaussian {
        phase: Phase,
        beta: f64,
        center: [f64; 2],
        pore_volume_fraction: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeParams {
    pub t_final: Qty,
    pub dt_init: Qty,
    pub dt_max: Qty,
    pub growth: f64,
    pub chop_factor: f64,
    pub dt_floor: Qty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub newton_max_iters: usize,
    pub newton_rel_residual_tol: f64,
    pub newton_max_increment_tol: f64,
    pub newton_polish_iters: usize,
    pub gmres_tol: f64,
    pub gmres_restart: usize,
    pub gmres_max_iters: usize,
    pub fixed_point_tol: f64,
    pub fixed_point_max_outer: usize,
    pub fixed_point_inner_tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        let n = NewtonConfig::default();
        let f = FixedPointConfig::default();
        SolverParams {
            newton_max_iters: n.max_iters,
            newton_rel_residual_tol: n.rel_residual_tol,
            newton_max_increment_tol: n.max_increment_tol,
            newton_polish_iters: n.polish_iters,
            gmres_tol: n.gmres.tol,
            gmres_restart: n.gmres.restart,
            gmres_max_iters: n.gmres.max_iters,
            fixed_point_tol: f.rel_increment_tol,
            fixed_point_max_outer: f.max_outer,
            fixed_point_inner_tol: f.inner_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPlan {
    /// Number of evenly spaced field snapshots (plus the final one).
    pub snapshots: usize,
}

impl Default for OutputPlan {
    fn default() -> Self {
        OutputPlan { snapshots: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: SimMode,
    pub model: ModelKind,
    pub geometry: Geometry,
    pub mesh: MeshParams,
    pub rock: RockParams,
    pub laws: Laws,
    pub bc: BoundaryConditions,
    /// Uniform initial phase pressures (nw, w).
    pub initial_pressure: [Qty; 2],
    pub source: SourceConfig,
    pub time: TimeParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub output: OutputPlan,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(FracporeError::Validation(msg));
        if self.rock.permeability.0 <= 0.0 {
            return err("matrix permeability must be strictly positive".into());
        }
        if self.rock.porosity0 <= 0.0 || self.rock.porosity0 >= 1.0 {
            return err(format!("initial porosity {} outside (0,1)", self.rock.porosity0));
        }
        if self.rock.lame_lambda.0 <= 0.0 || self.rock.lame_mu.0 <= 0.0 {
            return err("Lame coefficients must be strictly positive".into());
        }
        if !(0.0..=1.0).contains(&self.rock.biot_coefficient) {
            return err(format!(
                "Biot coefficient {} outside [0,1]",
                self.rock.biot_coefficient
            ));
        }
        if self.rock.biot_modulus.0 <= 0.0 {
            return err("Biot modulus must be strictly positive".into());
        }
        if self.model == ModelKind::Discontinuous && self.rock.normal_transmissivity.0 <= 0.0 {
            return err(
                "normal fracture transmissivity must be strictly positive in the discontinuous-pressure model"
                    .into(),
            );
        }
        if self.rock.damaged_width.0 <= 0.0 || self.rock.damaged_porosity <= 0.0 {
            return err("damaged layer width and porosity must be strictly positive".into());
        }
        if self.mesh.refine == 0 || self.mesh.base_h.0 <= 0.0 {
            return err("mesh refinement must be >= 1 and base_h positive".into());
        }
        if self.time.t_final.0 < 0.0 || self.time.dt_init.0 <= 0.0 || self.time.dt_max.0 <= 0.0 {
            return err("time parameters must be positive".into());
        }
        if self.time.growth < 1.0 || self.time.chop_factor <= 1.0 {
            return err("growth must be >= 1 and chop factor > 1".into());
        }
        let [x0, y0, x1, y1] = self.geometry.domain;
        if !(x1 > x0 && y1 > y0) {
            return err("empty domain".into());
        }
        if self.mode == SimMode::Axisymmetric && y0 <= 0.0 {
            return err("axisymmetric domains need strictly positive radii".into());
        }
        let mut seen = Vec::new();
        for e in &self.bc.flow_matrix {
            if seen.contains(&e.side) {
                return err(format!("duplicate matrix flow boundary condition on {:?}", e.side));
            }
            seen.push(e.side);
        }
        Ok(())
    }

    pub fn target_h(&self) -> f64 {
        self.mesh.base_h.0 / self.mesh.refine as f64
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        build_mesh(&self.geometry, self.target_h())
    }

    pub fn controller(&self) -> TimeController {
        TimeController {
            dt_init: self.time.dt_init.0,
            growth: self.time.growth,
            dt_max: self.time.dt_max.0,
            chop_factor: self.time.chop_factor,
            dt_floor: self.time.dt_floor.0,
            t_final: self.time.t_final.0,
        }
    }

    fn rock_types(&self) -> FlowRocks {
        let mk = |set: &LawSet| {
            let mut rt = RockType::new(set.saturation, set.mobility_nw, set.mobility_w);
            rt.eta_min = self.rock.eta_min;
            rt
        };
        let damaged_set = self.laws.damaged.as_ref().unwrap_or(&self.laws.matrix);
        let damaged = mk(damaged_set)
            .with_damaged(self.rock.damaged_width.0, self.rock.damaged_porosity);
        FlowRocks {
            matrix: mk(&self.laws.matrix),
            fracture: mk(&self.laws.fracture),
            damaged_plus: damaged,
            damaged_minus: damaged,
        }
    }

    /// Instantiates the coupled problem on a mesh built from this scenario.
    pub fn build_problem<'m>(&self, mesh: &'m Mesh) -> Result<CoupledProblem<'m>> {
        self.validate()?;
        let axisymmetric = self.mode == SimMode::Axisymmetric;
        let model = match self.model {
            ModelKind::Discontinuous => PressureModel::Discontinuous,
            ModelKind::Continuous => PressureModel::Continuous,
        };
        let setup = FlowSetup {
            permeability: self.rock.permeability.0,
            t_normal: self.rock.normal_transmissivity.0,
            rocks: self.rock_types(),
            model,
            axisymmetric,
            matrix_bc: self
                .bc
                .flow_matrix
                .iter()
                .map(|e| (e.side, [e.p_nw.0, e.p_w.0]))
                .collect(),
            fracture_bc: self
                .bc
                .flow_fracture
                .iter()
                .map(|e| (e.side, [e.p_nw.0, e.p_w.0]))
                .collect(),
        };
        let mut flow = FlowSystem::new(mesh, setup)?;
        flow.set_row_weight_porosity(self.rock.porosity0);
        self.install_sources(&mut flow)?;

        let mech_mode = if axisymmetric {
            MechMode::Axisymmetric
        } else {
            MechMode::Plane
        };
        let mut mech = MechSystem::new(mesh, mech_mode, self.rock.lame_lambda.0, self.rock.lame_mu.0)?;
        if self.bc.clamp_all {
            mech.clamp_all_boundaries(mesh);
        }
        for e in &self.bc.mech_dirichlet {
            let value = e.value.0;
            mech.dirichlet_on_side(mesh, e.side, e.component, |_| value);
        }
        mech.factorize()?;
        // constant loads: pre-stress (tension-positive internally) + tractions
        let s0 = self.sigma0_tensor();
        let mut rhs_const = mech.zero_loads();
        mech.add_prestress_loads(mesh, s0, &mut rhs_const);
        for e in &self.bc.mech_traction {
            mech.add_traction_loads(mesh, e.side, [e.traction[0].0, e.traction[1].0], &mut rhs_const);
        }

        let n_cells = mesh.n_cells();
        Ok(CoupledProblem {
            mesh,
            flow,
            mech,
            b_biot: self.rock.biot_coefficient,
            inv_m: 1.0 / self.rock.biot_modulus.0,
            phi0: self.rock.porosity0,
            sigma0: s0,
            rhs_const,
            d_offset: self.rock.initial_aperture.map(|q| q.0),
            newton_cfg: NewtonConfig {
                max_iters: self.solver.newton_max_iters,
                rel_residual_tol: self.solver.newton_rel_residual_tol,
                max_increment_tol: self.solver.newton_max_increment_tol,
                polish_iters: self.solver.newton_polish_iters,
                gmres: crate::solvers::newton::GmresParams {
                    tol: self.solver.gmres_tol,
                    restart: self.solver.gmres_restart,
                    max_iters: self.solver.gmres_max_iters,
                },
            },
            fixed_point_cfg: FixedPointConfig {
                rel_increment_tol: self.solver.fixed_point_tol,
                max_outer: self.solver.fixed_point_max_outer,
                inner_tol: self.solver.fixed_point_inner_tol,
                ..FixedPointConfig::default()
            },
            assert_phi_min: None,
            assert_d0: None,
            u0: vec![],
            div_u0: vec![0.0; n_cells],
            pe0_cells: vec![0.0; n_cells],
            aperture0_geo: vec![],
        })
    }

    /// Pre-stress tensor (tension positive) from the compression-positive
    /// config magnitudes.
    pub fn sigma0_tensor(&self) -> [f64; 4] {
        [
            -self.rock.pre_stress[0].0,
            -self.rock.pre_stress[1].0,
            -self.rock.pre_stress[2].0,
            0.0,
        ]
    }

    pub fn initial_pressures(&self, flow: &FlowSystem) -> Vec<f64> {
        flow.uniform_state(self.initial_pressure[0].0, self.initial_pressure[1].0)
    }

    fn install_sources(&self, flow: &mut FlowSystem) -> Result<()> {
        match &self.source {
            SourceConfig::None => Ok(()),
            SourceConfig::FractureGaussian {
                phase,
                beta,
                center,
                pore_volume_fraction,
            } => {
                if flow.map.n_faces == 0 {
                    return Err(FracporeError::Validation(
                        "fracture source requires a fracture network".into(),
                    ));
                }
                let [x0, y0, x1, y1] = self.geometry.domain;
                let scale = (x1 - x0).max(y1 - y0);
                let area = (x1 - x0) * (y1 - y0);
                let pore_volume = self.rock.porosity0 * area;
                let total_rate = pore_volume * pore_volume_fraction / self.time.t_final.0;
                // face weights g(x) integrated with face measures
                let mesh = flow.mesh;
                let weights: Vec<f64> = (0..flow.map.n_faces)
                    .map(|f| {
                        let m = mesh.edges[mesh.fracture_edges[f].edge].midpoint;
                        let d2 = ((m[0] - center[0]).powi(2) + (m[1] - center[1]).powi(2))
                            / (scale * scale);
                        (-beta * d2).exp() * flow.face_measure[f]
                    })
                    .collect();
                let total_w: f64 = weights.iter().sum();
                for (f, w) in weights.iter().enumerate() {
                    flow.set_face_source(f, *phase, w / total_w * total_rate);
                }
                Ok(())
            }
        }
    }
}

/// The builtin datasets.
pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    match name {
        "gas_injection_cross" => Ok(gas_injection_cross()),
        "tunnel_desaturation" => Ok(tunnel_desaturation()),
        other => Err(FracporeError::UnknownScenario(format!(
            "'{other}' (available: gas_injection_cross, tunnel_desaturation)"
        ))),
    }
}

/// Plane-strain gas injection at the center of a cross-shaped fracture
/// network in an initially water-saturated square.
fn gas_injection_cross() -> Scenario {
    let l = 100.0;
    let c = l / 2.0;
    let arm = l / 8.0;
    let geometry = Geometry::rectangle(0.0, 0.0, l, l)
        .with_fracture(vec![[c - arm, c], [c, c]])
        .with_fracture(vec![[c, c], [c + arm, c]])
        .with_fracture(vec![[c, c - arm], [c, c]])
        .with_fracture(vec![[c, c], [c, c + arm]]);
    let matrix = LawSet {
        saturation: SaturationLaw::corey(1e4),
        mobility_nw: MobilityLaw::QuadraticOverMu { mu: 1.851e-5 },
        mobility_w: MobilityLaw::QuadraticOverMu { mu: 1e-3 },
    };
    let fracture = LawSet {
        saturation: SaturationLaw::corey(10.0),
        mobility_nw: MobilityLaw::LinearOverMu { mu: 1.851e-5 },
        mobility_w: MobilityLaw::LinearOverMu { mu: 1e-3 },
    };
    Scenario {
        name: "gas_injection_cross".into(),
        mode: SimMode::Plane,
        model: ModelKind::Discontinuous,
        geometry,
        mesh: MeshParams {
            base_h: Qty(12.5),
            refine: 1,
        },
        rock: RockParams {
            permeability: Qty(3e-15),
            porosity0: 0.2,
            lame_lambda: Qty(833e6),
            lame_mu: Qty(1250e6),
            biot_coefficient: 0.81,
            biot_modulus: Qty(18.4e9),
            normal_transmissivity: Qty(1e-8),
            damaged_width: Qty(1e-3),
            damaged_porosity: 0.2,
            initial_aperture: None,
            pre_stress: [Qty(0.0), Qty(0.0), Qty(0.0)],
            eta_min: 0.0,
        },
        laws: Laws {
            matrix,
            fracture,
            damaged: None,
        },
        bc: BoundaryConditions {
            // wetting saturation 1 imposed on the top side (pc = 0 at the
            // initial pressure level); the rest is impervious
            flow_matrix: vec![FlowBcEntry {
                side: BoundarySide::Top,
                p_nw: Qty(1e5),
                p_w: Qty(1e5),
            }],
            flow_fracture: vec![],
            clamp_all: true,
            mech_dirichlet: vec![],
            mech_traction: vec![],
        },
        initial_pressure: [Qty(1e5), Qty(1e5)],
        source: SourceConfig::FractureGaussian {
            phase: Phase::NonWetting,
            beta: 1000.0,
            center: [c, c],
            pore_volume_fraction: 0.2,
        },
        time: TimeParams {
            t_final: Qty(1000.0 * DAY),
            dt_init: Qty(0.001 * DAY),
            dt_max: Qty(10.0 * DAY),
            growth: 1.1,
            chop_factor: 2.0,
            dt_floor: Qty(1e-9 * DAY),
        },
        solver: SolverParams::default(),
        output: OutputPlan::default(),
    }
}

/// Axisymmetric desaturation by suction at the inner wall of a hollow
/// cylinder of low-permeability rock. The fracture network is a documented
/// reconstruction: seven radial fractures spaced 1.25 m reaching from the
/// tunnel wall to r = 10 m, crossed by a ring fracture at r = 7.5 m (the
/// published geometry gives only the spacing, not coordinates).
fn tunnel_desaturation() -> Scenario {
    let (length, r_int, r_ext) = (10.0, 5.0, 35.0);
    let mut geometry = Geometry::rectangle(0.0, r_int, length, r_ext);
    let ring_r = 7.5;
    for i in 1..=7 {
        let x = 1.25 * i as f64;
        geometry = geometry
            .with_fracture(vec![[x, r_int], [x, ring_r]])
            .with_fracture(vec![[x, ring_r], [x, 10.0]]);
    }
    for i in 1..7 {
        let xa = 1.25 * i as f64;
        geometry = geometry.with_fracture(vec![[xa, ring_r], [xa + 1.25, ring_r]]);
    }

    let r_m = 2e8;
    let r_f = 1e2;
    // inner-wall data: gas at atmospheric pressure, liquid in strong suction
    // consistent with the imposed saturations through the Corey laws
    let s_nw_matrix_wall = 0.35;
    let pc_matrix_wall = -r_m * f64::ln(1.0 - s_nw_matrix_wall);
    let s_nw_frac_wall = 1.0 - 1e-8;
    let pc_frac_wall = -r_f * (1.0f64 - s_nw_frac_wall).ln();
    let p_atm = 1e5;

    let vg = |phase: Phase| MobilityLaw::VanGenuchtenOverMu {
        mu: match phase {
            Phase::NonWetting => 1.851e-5,
            Phase::Wetting => 1e-3,
        },
        q: 0.328,
        s_lr: 0.40,
        s_gr: 0.0,
        phase,
    };
    let matrix = LawSet {
        saturation: SaturationLaw::corey(r_m),
        mobility_nw: vg(Phase::NonWetting),
        mobility_w: vg(Phase::Wetting),
    };
    let fracture = LawSet {
        saturation: SaturationLaw::corey(r_f),
        mobility_nw: MobilityLaw::LinearOverMu { mu: 1.851e-5 },
        mobility_w: MobilityLaw::LinearOverMu { mu: 1e-3 },
    };
    Scenario {
        name: "tunnel_desaturation".into(),
        mode: SimMode::Axisymmetric,
        model: ModelKind::Discontinuous,
        geometry,
        mesh: MeshParams {
            base_h: Qty(1.25),
            refine: 1,
        },
        rock: RockParams {
            permeability: Qty(5e-20),
            porosity0: 0.15,
            lame_lambda: Qty(1.5e9),
            lame_mu: Qty(2e9),
            biot_coefficient: 1.0,
            biot_modulus: Qty(1e9),
            normal_transmissivity: Qty(1e-9),
            damaged_width: Qty(1e-3),
            damaged_porosity: 0.15,
            initial_aperture: Some(Qty(1e-2)),
            pre_stress: [Qty(16e6), Qty(12e6), Qty(12e6)],
            eta_min: 0.0,
        },
        laws: Laws {
            matrix,
            fracture,
            damaged: None,
        },
        bc: BoundaryConditions {
            flow_matrix: vec![
                FlowBcEntry {
                    side: BoundarySide::Bottom,
                    p_nw: Qty(p_atm),
                    p_w: Qty(p_atm - pc_matrix_wall),
                },
                FlowBcEntry {
                    side: BoundarySide::Top,
                    p_nw: Qty(4e6),
                    p_w: Qty(4e6),
                },
            ],
            flow_fracture: vec![FlowBcEntry {
                side: BoundarySide::Bottom,
                p_nw: Qty(p_atm),
                p_w: Qty(p_atm - pc_frac_wall),
            }],
            clamp_all: false,
            mech_dirichlet: vec![
                MechDirichletEntry {
                    side: BoundarySide::Left,
                    component: 0,
                    value: Qty(0.0),
                },
                MechDirichletEntry {
                    side: BoundarySide::Right,
                    component: 0,
                    value: Qty(0.0),
                },
            ],
            mech_traction: vec![
                // inner wall r = R_int: g = -p_atm n with n = -e_r
                MechTractionEntry {
                    side: BoundarySide::Bottom,
                    traction: [Qty(0.0), Qty(p_atm)],
                },
                // outer wall r = R_ext: g = -sigma_N n with n = +e_r
                MechTractionEntry {
                    side: BoundarySide::Top,
                    traction: [Qty(0.0), Qty(-10.95e6)],
                },
            ],
        },
        initial_pressure: [Qty(4e6), Qty(4e6)],
        source: SourceConfig::None,
        time: TimeParams {
            t_final: Qty(200.0 * crate::units::YEAR),
            dt_init: Qty(0.001 * DAY),
            dt_max: Qty(10.0 * crate::units::YEAR),
            growth: 1.1,
            chop_factor: 2.0,
            dt_floor: Qty(1e-9 * DAY),
        },
        solver: SolverParams::default(),
        output: OutputPlan::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rockphys::Phase;

    #[test]
    fn builtin_names() {
        assert!(builtin_scenario("gas_injection_cross").is_ok());
        assert!(builtin_scenario("tunnel_desaturation").is_ok());
        assert!(matches!(
            builtin_scenario("nope"),
            Err(FracporeError::UnknownScenario(_))
        ));
    }

    #[test]
    fn gas_injection_dataset_values() {
        let s = builtin_scenario("gas_injection_cross").unwrap();
        assert_eq!(s.rock.biot_coefficient, 0.81);
        assert_eq!(s.rock.permeability.0, 3e-15);
        assert_eq!(s.rock.biot_modulus.0, 18.4e9);
        assert_eq!(s.time.t_final.0, 1000.0 * DAY);
        s.validate().unwrap();
    }

    #[test]
    fn tunnel_dataset_values() {
        let s = builtin_scenario("tunnel_desaturation").unwrap();
        assert_eq!(s.rock.biot_coefficient, 1.0);
        // outer traction magnitude
        let outer = s
            .bc
            .mech_traction
            .iter()
            .find(|t| t.side == BoundarySide::Top)
            .unwrap();
        assert_eq!(outer.traction[1].0, -10.95e6);
        assert_eq!(s.rock.initial_aperture.unwrap().0, 1e-2);
        assert_eq!(s.rock.pre_stress[0].0, 16e6);
        s.validate().unwrap();
    }

    #[test]
    fn source_normalization_is_exact() {
        // total discrete injection rate equals V_por / (5 T) to 1e-12
        let s = builtin_scenario("gas_injection_cross").unwrap();
        let mesh = s.build_mesh().unwrap();
        let problem = s.build_problem(&mesh).unwrap();
        let total = problem.flow.total_source(Phase::NonWetting);
        let expect = 0.2 * 100.0 * 100.0 / 5.0 / s.time.t_final.0;
        assert!(
            ((total - expect) / expect).abs() <= 1e-12,
            "total {total} vs {expect}"
        );
        // integrated over the schedule: V_por / 5 = 400 m^3 per unit thickness
        assert!((total * s.time.t_final.0 - 400.0).abs() <= 400.0 * 1e-12);
    }

    #[test]
    fn validation_rejects_bad_data() {
        let mut s = builtin_scenario("gas_injection_cross").unwrap();
        s.rock.permeability = Qty(-1.0);
        assert!(matches!(s.validate(), Err(FracporeError::Validation(_))));

        let mut s = builtin_scenario("gas_injection_cross").unwrap();
        s.rock.normal_transmissivity = Qty(0.0);
        assert!(matches!(s.validate(), Err(FracporeError::Validation(_))));

        let mut s = builtin_scenario("gas_injection_cross").unwrap();
        s.rock.biot_coefficient = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn tunnel_mesh_builds_admissible() {
        let s = builtin_scenario("tunnel_desaturation").unwrap();
        let mesh = s.build_mesh().unwrap();
        // 8 x (10/1.25) x (30/2.5) cells
        assert_eq!(mesh.n_cells(), 8 * 8 * 12);
        let report = crate::mesh::validate_admissibility(&mesh);
        assert!(report.ok());
        // seven radial fractures reach the inner wall
        let boundary_nodes = mesh
            .fracture_nodes
            .iter()
            .filter(|n| n.kind == crate::mesh::FractureNodeKind::Boundary)
            .count();
        assert_eq!(boundary_nodes, 7);
        // ring-radial crossings are intersections
        let intersections = mesh
            .fracture_nodes
            .iter()
            .filter(|n| n.kind == crate::mesh::FractureNodeKind::Intersection)
            .count();
        assert_eq!(intersections, 7);
    }
}
