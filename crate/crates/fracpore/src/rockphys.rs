//! Constitutive laws: saturation vs. capillary pressure, phase mobilities,
//! capillary energy density and equivalent pressure, for the four rock roles
//! (matrix, fracture and the two damaged interface layers).
//!
//! Conventions: capillary pressure `p_c = p_nw - p_w` (Pa); the non-wetting
//! saturation law `S_nw(p_c)` is non-decreasing, Lipschitz, valued in [0, 1],
//! and `S_w = 1 - S_nw` identically. The capillary energy density
//! `U(p_c) = ∫_0^{p_c} q S_nw'(q) dq` enters the equivalent pressure
//! `p_E = p_nw S_nw + p_w S_w - U`, the quantity a two-phase mixture exerts on
//! the solid skeleton. A useful identity used throughout the Jacobians:
//! `∂p_E/∂p_nw = S_nw` and `∂p_E/∂p_w = S_w`.

use serde::{Deserialize, Serialize};

use crate::error::{FracporeError, Result};

/// Fluid phase. Indexes arrays of per-phase quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NonWetting = 0,
    Wetting = 1,
}

pub const PHASES: [Phase; 2] = [Phase::NonWetting, Phase::Wetting];

impl Phase {
    pub fn idx(self) -> usize {
        self as usize
    }
}

/// Saturation-capillary pressure relation.
///
/// `Corey { r }`: `S_nw(p_c) = max(1 - exp(-p_c / r), 0)` with entry-pressure
/// scale `r` in Pa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SaturationLaw {
    Corey { r: f64 },
}

impl SaturationLaw {
    pub fn corey(r: f64) -> Self {
        assert!(r > 0.0, "Corey scale must be positive");
        SaturationLaw::Corey { r }
    }

    /// Non-wetting saturation at capillary pressure `pc`. Total on all of R.
    pub fn sat_nw(&self, pc: f64) -> f64 {
        match *self {
            SaturationLaw::Corey { r } => {
                if pc <= 0.0 {
                    0.0
                } else {
                    -f64::exp_m1(-pc / r)
                }
            }
        }
    }

    /// Saturation of `phase` at `pc`. `S_w = 1 - S_nw` exactly.
    pub fn sat(&self, phase: Phase, pc: f64) -> f64 {
        let s_nw = self.sat_nw(pc);
        match phase {
            Phase::NonWetting => s_nw,
            Phase::Wetting => 1.0 - s_nw,
        }
    }

    /// dS_nw/dp_c. At the kink `pc = 0` the right-sided value `1/r` is used,
    /// consistently with the `>= 0` branch convention of the interface
    /// upwinding. Below the entry pressure the exact derivative is 0; the
    /// Newton assembly uses [`SaturationLaw::sat_nw_deriv_smooth`] there
    /// instead, which keeps the accumulation diagonals alive.
    pub fn sat_nw_deriv(&self, pc: f64) -> f64 {
        match *self {
            SaturationLaw::Corey { r } => {
                if pc < 0.0 {
                    0.0
                } else {
                    f64::exp(-pc / r) / r
                }
            }
        }
    }

    /// Derivative of the smooth extension `1 - e^{-pc/r}` (no clamping),
    /// equal to [`SaturationLaw::sat_nw_deriv`] for `pc >= 0`. Jacobians use
    /// it so that absent-phase unknowns keep a nonzero diagonal: the Newton
    /// update for them is then `d pc = 0` instead of an unconstrained drift.
    pub fn sat_nw_deriv_smooth(&self, pc: f64) -> f64 {
        match *self {
            // the exponent is clamped on both sides: fully drained entities
            // (pc >> r) must keep a tiny but representable slope, or their
            // rows underflow to an exactly singular system
            SaturationLaw::Corey { r } => f64::exp(-(pc / r).clamp(-2.0, 30.0)) / r,
        }
    }

    /// Capillary energy density `U(pc) = ∫_0^{pc} q S_nw'(q) dq`, in Pa.
    ///
    /// Closed form for Corey: `U = r (1 - e^{-x} (1 + x))` with `x = pc / r`
    /// for `pc >= 0`, and `U = 0` for `pc < 0` (the integrand vanishes there).
    /// Satisfies `0 <= U(pc) <= 2 |pc|` and `U' = pc S_nw'`.
    pub fn capillary_energy(&self, pc: f64) -> f64 {
        match *self {
            SaturationLaw::Corey { r } => {
                if pc <= 0.0 {
                    0.0
                } else {
                    let x = pc / r;
                    if x < 0.01 {
                        // Series of 1 - e^{-x}(1+x); the direct form loses all
                        // relative accuracy to cancellation for small x.
                        let s = 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0
                            + x * x * x * x / 144.0;
                        r * x * x * s
                    } else {
                        r * (-f64::exp_m1(-x) - x * f64::exp(-x))
                    }
                }
            }
        }
    }

    /// dU/dp_c = pc * S_nw'(pc).
    pub fn capillary_energy_deriv(&self, pc: f64) -> f64 {
        pc.max(0.0) * self.sat_nw_deriv(pc)
    }

    /// Equivalent pressure `p_E = p_nw S_nw + p_w S_w - U`, the pressure
    /// loading the mechanics.
    pub fn equivalent_pressure(&self, p_nw: f64, p_w: f64) -> f64 {
        let pc = p_nw - p_w;
        let s_nw = self.sat_nw(pc);
        p_nw * s_nw + p_w * (1.0 - s_nw) - self.capillary_energy(pc)
    }

    /// Gradient of the equivalent pressure: `(∂p_E/∂p_nw, ∂p_E/∂p_w) = (S_nw, S_w)`.
    pub fn equivalent_pressure_grad(&self, p_nw: f64, p_w: f64) -> (f64, f64) {
        let s_nw = self.sat_nw(p_nw - p_w);
        (s_nw, 1.0 - s_nw)
    }
}

/// Phase mobility `η(s) = k_r(s) / μ`, in 1/(Pa·s), as a function of the
/// phase's own saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobilityLaw {
    /// Saturation-independent mobility; handy for single-phase verification
    /// problems.
    Constant { value: f64 },
    /// `η = s² / μ` (matrix law of the gas-injection test).
    QuadraticOverMu { mu: f64 },
    /// `η = s / μ` (fracture law of both tests).
    LinearOverMu { mu: f64 },
    /// Van Genuchten relative permeability over viscosity. `phase` selects the
    /// wetting or non-wetting branch; `q`, `s_lr`, `s_gr` are the exponent and
    /// residual saturations. Clamps to 0 below residual and 1 above `1 - (other
    /// residual)`.
    VanGenuchtenOverMu {
        mu: f64,
        q: f64,
        s_lr: f64,
        s_gr: f64,
        phase: Phase,
    },
}

impl MobilityLaw {
    /// Mobility at saturation `s ∈ [0, 1]` (validated to 1e-12 slack).
    pub fn value(&self, s: f64) -> Result<f64> {
        self.check_domain(s)?;
        Ok(self.eval(s.clamp(0.0, 1.0)).0)
    }

    /// Mobility and its derivative d η / d s.
    pub fn value_and_deriv(&self, s: f64) -> Result<(f64, f64)> {
        self.check_domain(s)?;
        Ok(self.eval(s.clamp(0.0, 1.0)))
    }

    fn check_domain(&self, s: f64) -> Result<()> {
        if !(-1e-12..=1.0 + 1e-12).contains(&s) {
            return Err(FracporeError::Domain(format!(
                "saturation {s} outside [0,1]"
            )));
        }
        Ok(())
    }

    /// Core evaluation; `s` must already lie in [0, 1].
    pub(crate) fn eval(&self, s: f64) -> (f64, f64) {
        match *self {
            MobilityLaw::Constant { value } => (value, 0.0),
            MobilityLaw::QuadraticOverMu { mu } => (s * s / mu, 2.0 * s / mu),
            MobilityLaw::LinearOverMu { mu } => (s / mu, 1.0 / mu),
            MobilityLaw::VanGenuchtenOverMu {
                mu,
                q,
                s_lr,
                s_gr,
                phase,
            } => {
                let (kr, dkr) = van_genuchten_kr(phase, s, q, s_lr, s_gr);
                (kr / mu, dkr / mu)
            }
        }
    }
}

/// Van Genuchten relative permeability `k_r` and `dk_r/ds` for `phase` at its
/// own saturation `s`, with normalized wetting saturation
/// `sb = (s_w - s_lr) / (1 - s_lr - s_gr)`:
///
/// wetting:      `k_r = sqrt(sb) (1 - (1 - sb^{1/q})^q)^2`
/// non-wetting:  `k_r = sqrt(1 - sb) (1 - sb^{1/q})^{2q}`
///
/// clamped to 0 below the phase's residual saturation and to 1 above
/// `1 - (other phase residual)`.
fn van_genuchten_kr(phase: Phase, s: f64, q: f64, s_lr: f64, s_gr: f64) -> (f64, f64) {
    let denom = 1.0 - s_lr - s_gr;
    // Normalized wetting saturation and its derivative w.r.t. this phase's s.
    let (sb, dsb_ds) = match phase {
        Phase::Wetting => ((s - s_lr) / denom, 1.0 / denom),
        Phase::NonWetting => ((1.0 - s - s_lr) / denom, -1.0 / denom),
    };
    const EPS: f64 = 1e-14;
    match phase {
        Phase::Wetting => {
            if sb <= EPS {
                return (0.0, 0.0);
            }
            if sb >= 1.0 - EPS {
                return (1.0, 0.0);
            }
            let t = sb.powf(1.0 / q);
            let omt = 1.0 - t;
            if omt <= EPS {
                return (1.0, 0.0);
            }
            let a = omt.powf(q);
            let b = 1.0 - a;
            let kr = sb.sqrt() * b * b;
            // d/dsb [ sqrt(sb) b^2 ]
            let db_dsb = omt.powf(q - 1.0) * sb.powf(1.0 / q - 1.0);
            let dkr_dsb = 0.5 / sb.sqrt() * b * b + 2.0 * sb.sqrt() * b * db_dsb;
            (kr.clamp(0.0, 1.0), dkr_dsb * dsb_ds)
        }
        Phase::NonWetting => {
            // s = s_nw; sb is still the normalized wetting saturation.
            if sb >= 1.0 - EPS {
                return (0.0, 0.0);
            }
            if sb <= EPS {
                return (1.0, 0.0);
            }
            let t = sb.powf(1.0 / q);
            let omt = 1.0 - t;
            let kr = (1.0 - sb).sqrt() * omt.powf(2.0 * q);
            let dkr_dsb = -0.5 / (1.0 - sb).sqrt() * omt.powf(2.0 * q)
                - 2.0 * (1.0 - sb).sqrt() * omt.powf(2.0 * q - 1.0) * sb.powf(1.0 / q - 1.0);
            (kr.clamp(0.0, 1.0), dkr_dsb * dsb_ds)
        }
    }
}

/// Damaged interface-layer geometry: a thin rock skin of constant width and
/// porosity on each side of a fracture, adding interface accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamagedParams {
    /// Layer width (m), strictly positive.
    pub width: f64,
    /// Layer porosity (-), strictly positive.
    pub porosity: f64,
}

/// Bundle of laws for one rock role (matrix `m`, fracture `f`, or the damaged
/// sides `+`/`-`). Damaged roles carry the layer geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RockType {
    pub saturation: SaturationLaw,
    pub mobility_nw: MobilityLaw,
    pub mobility_w: MobilityLaw,
    /// Optional mobility floor (1/(Pa·s)); 0 reproduces the test-case laws as
    /// written, a positive value restores a strictly positive lower bound.
    pub eta_min: f64,
    pub damaged: Option<DamagedParams>,
}

impl RockType {
    pub fn new(saturation: SaturationLaw, mobility_nw: MobilityLaw, mobility_w: MobilityLaw) -> Self {
        RockType {
            saturation,
            mobility_nw,
            mobility_w,
            eta_min: 0.0,
            damaged: None,
        }
    }

    pub fn with_damaged(mut self, width: f64, porosity: f64) -> Self {
        assert!(width > 0.0 && porosity > 0.0, "damaged layer parameters must be positive");
        self.damaged = Some(DamagedParams { width, porosity });
        self
    }

    pub fn mobility_law(&self, phase: Phase) -> &MobilityLaw {
        match phase {
            Phase::NonWetting => &self.mobility_nw,
            Phase::Wetting => &self.mobility_w,
        }
    }

    /// Mobility of `phase` at its saturation, with the optional floor applied.
    pub fn mobility(&self, phase: Phase, s: f64) -> f64 {
        let (v, _) = self.mobility_law(phase).eval(s.clamp(0.0, 1.0));
        v.max(self.eta_min)
    }

    /// Mobility and derivative; the derivative is zero in the floored region.
    pub fn mobility_and_deriv(&self, phase: Phase, s: f64) -> (f64, f64) {
        let (v, d) = self.mobility_law(phase).eval(s.clamp(0.0, 1.0));
        if v <= self.eta_min {
            (self.eta_min, 0.0)
        } else {
            (v, d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent oracle: adaptive Simpson quadrature of `∫_0^pc q S'(q) dq`.
    fn capillary_energy_quadrature(law: &SaturationLaw, pc: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 1e-14 * whole.abs().max(1e-6) {
                left + right
            } else {
                adapt(f, a, m, left, depth - 1) + adapt(f, m, b, right, depth - 1)
            }
        }
        if pc <= 0.0 {
            return 0.0;
        }
        let f = |q: f64| q * law.sat_nw_deriv(q);
        adapt(&f, 0.0, pc, simpson(&f, 0.0, pc), 40)
    }

    #[test]
    fn corey_saturation_examples() {
        let law = SaturationLaw::corey(1e4);
        assert_eq!(law.sat_nw(0.0), 0.0);
        assert_eq!(law.sat_nw(-5e3), 0.0);
        assert_relative_eq!(law.sat_nw(1e4), 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
        // Derivative check against quadrature of itself: S(pc) = ∫_0^pc S'.
        let pc = 1e4;
        let mut acc = 0.0;
        let n = 20_000;
        let h = pc / n as f64;
        for i in 0..n {
            let q0 = i as f64 * h;
            acc += h / 6.0
                * (law.sat_nw_deriv(q0)
                    + 4.0 * law.sat_nw_deriv(q0 + 0.5 * h)
                    + law.sat_nw_deriv(q0 + h));
        }
        assert_relative_eq!(acc, law.sat_nw(pc), max_relative = 1e-12);
    }

    #[test]
    fn capillary_energy_matches_quadrature_oracle() {
        let law = SaturationLaw::corey(1e4);
        assert_eq!(law.capillary_energy(0.0), 0.0);
        assert_eq!(law.capillary_energy(-2e3), 0.0);

        let u = law.capillary_energy(1e4);
        assert_relative_eq!(u, 1e4 * (1.0 - 2.0 * (-1.0f64).exp()), max_relative = 1e-14);
        assert_relative_eq!(u, capillary_energy_quadrature(&law, 1e4), max_relative = 1e-10);

        let u10 = law.capillary_energy(1e5);
        assert_relative_eq!(
            u10,
            1e4 * (1.0 - 11.0 * (-10.0f64).exp()),
            max_relative = 1e-14
        );
        assert_relative_eq!(u10, capillary_energy_quadrature(&law, 1e5), max_relative = 1e-10);

        // Bound used by the energy estimate: 0 <= U <= 2 |pc|.
        for &pc in &[1.0, 1e2, 1e4, 3e4, 1e6] {
            let u = law.capillary_energy(pc);
            assert!(u >= 0.0 && u <= 2.0 * pc);
        }
    }

    #[test]
    fn energy_derivative_identity_at_random_points() {
        // U'(pc) = pc S'(pc), finite-difference check at 20 points.
        let law = SaturationLaw::corey(1e4);
        let mut x = 137.0_f64;
        for _ in 0..20 {
            // simple deterministic LCG over (0, 5e4)
            x = (x * 16807.0) % 2147483647.0;
            let pc = 10.0 + 5e4 * (x / 2147483647.0);
            let h = 1e-4 * pc;
            let fd = (law.capillary_energy(pc + h) - law.capillary_energy(pc - h)) / (2.0 * h);
            assert_relative_eq!(fd, law.capillary_energy_deriv(pc), max_relative = 1e-6);
        }
    }

    #[test]
    fn equivalent_pressure_examples() {
        let law = SaturationLaw::corey(1e4);
        // Single-phase limit.
        assert_relative_eq!(law.equivalent_pressure(1e5, 1e5), 1e5, max_relative = 1e-14);
        // Composition of the three oracles.
        let p_e = law.equivalent_pressure(2e4, 1e4);
        let s_nw = law.sat_nw(1e4);
        let expect =
            2e4 * s_nw + 1e4 * (1.0 - s_nw) - capillary_energy_quadrature(&law, 1e4);
        assert_relative_eq!(p_e, expect, max_relative = 1e-10);
        assert_relative_eq!(p_e, 13_678.794411714423, max_relative = 1e-12);
        // Large-pc limit: p_E -> p_nw - r.
        let p_w = 1e4;
        let p_nw = p_w + 50.0 * 1e4;
        assert_relative_eq!(
            law.equivalent_pressure(p_nw, p_w),
            p_nw - 1e4,
            max_relative = 1e-10
        );
        let (gn, gw) = law.equivalent_pressure_grad(2e4, 1e4);
        assert_relative_eq!(gn, s_nw, max_relative = 1e-14);
        assert_relative_eq!(gw, 1.0 - s_nw, max_relative = 1e-14);
    }

    #[test]
    fn mobility_examples() {
        let quad = MobilityLaw::QuadraticOverMu { mu: 1e-3 };
        assert_relative_eq!(quad.value(1.0).unwrap(), 1000.0, max_relative = 1e-14);
        assert!(quad.value(1.5).is_err());
        assert!(quad.value(-0.5).is_err());

        let vg_w = MobilityLaw::VanGenuchtenOverMu {
            mu: 1e-3,
            q: 0.328,
            s_lr: 0.40,
            s_gr: 0.0,
            phase: Phase::Wetting,
        };
        assert_eq!(vg_w.value(0.40).unwrap(), 0.0);
        assert_relative_eq!(vg_w.value(1.0).unwrap(), 1e3, max_relative = 1e-12);

        let vg_nw = MobilityLaw::VanGenuchtenOverMu {
            mu: 1.851e-5,
            q: 0.328,
            s_lr: 0.40,
            s_gr: 0.0,
            phase: Phase::NonWetting,
        };
        assert_eq!(vg_nw.value(0.0).unwrap(), 0.0);
        assert_relative_eq!(vg_nw.value(0.6).unwrap(), 1.0 / 1.851e-5, max_relative = 1e-12);
    }

    #[test]
    fn van_genuchten_derivative_consistency() {
        for phase in [Phase::Wetting, Phase::NonWetting] {
            let law = MobilityLaw::VanGenuchtenOverMu {
                mu: 1.0,
                q: 0.328,
                s_lr: 0.40,
                s_gr: 0.0,
                phase,
            };
            for i in 1..40 {
                let s = 0.41 + (0.59 - 0.02) * i as f64 / 40.0;
                let s = s.min(0.985);
                let (_, d) = law.value_and_deriv(s).unwrap();
                let h = 1e-7;
                let fd = (law.value(s + h).unwrap() - law.value(s - h).unwrap()) / (2.0 * h);
                assert_relative_eq!(d, fd, max_relative = 1e-4, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn mobility_floor_applies() {
        let mut rt = RockType::new(
            SaturationLaw::corey(1e4),
            MobilityLaw::QuadraticOverMu { mu: 1e-3 },
            MobilityLaw::QuadraticOverMu { mu: 1e-3 },
        );
        assert_eq!(rt.mobility(Phase::Wetting, 0.0), 0.0);
        rt.eta_min = 1e-6;
        assert_eq!(rt.mobility(Phase::Wetting, 0.0), 1e-6);
        let (v, d) = rt.mobility_and_deriv(Phase::Wetting, 0.0);
        assert_eq!((v, d), (1e-6, 0.0));
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn saturations_sum_to_one(pc in -1e6_f64..1e6, r in 1.0_f64..1e9) {
            let law = SaturationLaw::corey(r);
            let s_nw = law.sat(Phase::NonWetting, pc);
            let s_w = law.sat(Phase::Wetting, pc);
            prop_assert!(s_nw + s_w == 1.0);
            prop_assert!((0.0..=1.0).contains(&s_nw));
        }

        /// Chord inequality behind the discrete energy estimate:
        /// p2 (S(p2) - S(p1)) >= U(p2) - U(p1) for any pair of capillary pressures.
        #[test]
        fn chord_inequality(p1 in -1e6_f64..1e6, p2 in -1e6_f64..1e6, r in 10.0_f64..1e8) {
            let law = SaturationLaw::corey(r);
            let lhs = p2 * (law.sat_nw(p2) - law.sat_nw(p1));
            let rhs = law.capillary_energy(p2) - law.capillary_energy(p1);
            let scale = p2.abs().max(r).max(1.0);
            prop_assert!(lhs >= rhs - 1e-12 * scale, "lhs={lhs} rhs={rhs}");
        }

        #[test]
        fn mobility_monotone(s1 in 0.0_f64..1.0, s2 in 0.0_f64..1.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let laws = [
                MobilityLaw::QuadraticOverMu { mu: 1e-3 },
                MobilityLaw::LinearOverMu { mu: 1e-3 },
                MobilityLaw::VanGenuchtenOverMu { mu: 1e-3, q: 0.328, s_lr: 0.4, s_gr: 0.0, phase: Phase::Wetting },
                MobilityLaw::VanGenuchtenOverMu { mu: 1e-3, q: 0.328, s_lr: 0.4, s_gr: 0.0, phase: Phase::NonWetting },
            ];
            for law in laws {
                prop_assert!(law.value(lo).unwrap() <= law.value(hi).unwrap() + 1e-15);
            }
        }

        #[test]
        fn energy_nonneg_nondecreasing(pc in 0.0_f64..1e7, dp in 0.0_f64..1e5) {
            let law = SaturationLaw::corey(1e4);
            prop_assert!(law.capillary_energy(pc) >= 0.0);
            prop_assert!(law.capillary_energy(pc + dp) >= law.capillary_energy(pc));
        }
    }
}
