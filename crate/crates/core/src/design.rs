//! Experiment design: detection constraint, coupling and mass windows,
//! validity of the quadratic expansion, noise budgets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{G, HBAR, MU_0, MU_B};
use crate::dynamics::{open_qrdm, final_phase};
use crate::entanglement::{witness_negativity, NegativityResult};
use crate::error::{non_negative, positive, Error, Result};
use crate::phase_space::final_time;
use crate::potentials::{zero_point_length, NVParams, PhysicalParams, UnitlessParams};

/// Phase that makes the entanglement detectable.
pub const DETECTABLE_PHASE: f64 = PI / 20.0;
/// Largest `<H4>/<H2>` for which the Gaussian treatment is trusted.
pub const QUARTIC_VALIDITY: f64 = 0.1;
/// Prefactor of the thermal deflection bound on `g`.
pub const THERMAL_PREFACTOR: f64 = 0.8;
/// Prefactor of the squeezed thermal bound on `g`.
pub const SQUEEZED_PREFACTOR: f64 = 0.45;

/// Ideal negativity at the detection constraint, `sin(pi / 20)`.
pub fn ideal_negativity() -> f64 {
    DETECTABLE_PHASE.sin()
}

/// `f_q^R = 1 / sqrt(120 g)`.
pub fn required_force(g: f64) -> Result<f64> {
    Ok(1.0 / (120.0 * positive("g", g)?).sqrt())
}

/// Leading-order phase `6 pi g f^2`.
pub fn leading_phase(f_q: f64, g: f64) -> f64 {
    6.0 * PI * g * f_q * f_q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConstraint {
    pub target_phase: f64,
    pub required_force: f64,
}

impl DetectionConstraint {
    /// The default `pi / 20` target.
    pub fn new(g: f64) -> Result<Self> {
        Ok(Self {
            target_phase: DETECTABLE_PHASE,
            required_force: required_force(g)?,
        })
    }

    pub fn with_target(g: f64, target_phase: f64) -> Result<Self> {
        let g = positive("g", g)?;
        let t = positive("target_phase", target_phase)?;
        Ok(Self {
            target_phase: t,
            required_force: (t / (6.0 * PI * g)).sqrt(),
        })
    }

    /// Physical force achieving the target: `sqrt(hbar d^3 omega^5 / (120 G))`
    /// for the default target.
    pub fn physical_force(&self, omega: f64, d: f64) -> Result<f64> {
        let (w, d) = (positive("omega", omega)?, positive("d", d)?);
        Ok((self.target_phase * HBAR * d.powi(3) * w.powi(5) / (6.0 * PI * G)).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Quartic,
    Deflection,
    Squeezing,
    Diffusion,
    Stability,
}

/// One candidate bound with the mechanism it comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub mechanism: Mechanism,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub g_min: Bound,
    pub g_max: Bound,
    /// Every lower-bound candidate considered.
    pub lower_candidates: Vec<Bound>,
    /// Every upper-bound candidate considered.
    pub upper_candidates: Vec<Bound>,
    /// Diffusion lower bound in its short form `Gamma_x / 2`, reported
    /// alongside the full expression used for `g_min`.
    pub diffusion_short_form: f64,
    /// Whether the squeezed bound replaced the thermal one.
    pub squeezed_regime: bool,
    pub m_min: f64,
    pub m_max: f64,
    pub feasible: bool,
    /// Witness negativity at `(f_q^R(g), g)` for each end of the window.
    pub negativity_at_g_min: Option<f64>,
    pub negativity_at_g_max: Option<f64>,
    pub note: String,
}

/// Lower bound `2 (x0 / d)^2` from the quartic term.
pub fn quartic_g_min(x0: f64, d: f64) -> Result<f64> {
    Ok(2.0 * (x0 / positive("d", d)?).powi(2))
}

/// Diffusion lower bound `pi Gamma_x (1 + N_I) / (40 N_I)`.
pub fn diffusion_g_min(gamma_x: f64, n_i: f64) -> f64 {
    PI * gamma_x * (1.0 + n_i) / (40.0 * n_i)
}

/// Thermal deflection bound `0.8 / (1 + 2 n_p)`.
pub fn thermal_g_max(n_p: f64) -> f64 {
    THERMAL_PREFACTOR / (1.0 + 2.0 * n_p)
}

/// Squeezed deflection bound `0.45 (s / (1 + 2 n_p))^(1/3)`.
pub fn squeezed_g_max(s: f64, n_p: f64) -> f64 {
    SQUEEZED_PREFACTOR * (s / (1.0 + 2.0 * n_p)).cbrt()
}

/// Whether the squeezing term `pi^2 g^2 (1/s - s)` of the common-mode
/// contrast dominates its thermal part `s` at coupling `g`.
pub fn squeezing_dominates(g: f64, s: f64) -> bool {
    PI * PI * g * g * (1.0 / s - s) > s
}

/// Witness negativity at closure with the force set by the constraint.
pub fn constrained_negativity(p: &UnitlessParams) -> Result<f64> {
    let f = required_force(p.g)?;
    let q = UnitlessParams { f_q: f, ..*p };
    let e = open_qrdm(&q, final_time(q.g)?)?;
    Ok(witness_negativity(e.phase, &e.contrasts))
}

/// Coupling and mass window for the physical setup and its noise.
///
/// `g_min` is the larger of the quartic and diffusion bounds; `g_max` the
/// smallest of stability, deflection and (where it dominates) squeezing.
/// Formulas are leading order; the negativity at each end is evaluated in
/// full as a sharper check.
pub fn g_bounds(phys: &PhysicalParams, p: &UnitlessParams, n_i: f64) -> Result<BoundsReport> {
    phys.validate()?;
    let x0 = zero_point_length(phys.m, phys.omega)?;
    let n_i = positive("N_I", n_i)?;
    let quartic = Bound {
        value: quartic_g_min(x0, phys.d)?,
        mechanism: Mechanism::Quartic,
    };
    let diffusion = Bound {
        value: diffusion_g_min(p.gamma_x, n_i),
        mechanism: Mechanism::Diffusion,
    };
    let lower_candidates = vec![quartic, diffusion];
    let g_min = *lower_candidates
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("two candidates");

    let stability = Bound {
        value: 0.5,
        mechanism: Mechanism::Stability,
    };
    let thermal = Bound {
        value: thermal_g_max(p.n_p),
        mechanism: Mechanism::Deflection,
    };
    let squeezed = Bound {
        value: squeezed_g_max(p.s, p.n_p),
        mechanism: Mechanism::Squeezing,
    };
    let squeezed_regime = p.s < 1.0 && squeezing_dominates(squeezed.value, p.s);
    let upper_candidates = vec![stability, thermal, squeezed];
    let mut g_max = if thermal.value < stability.value { thermal } else { stability };
    if squeezed_regime && squeezed.value < g_max.value {
        g_max = squeezed;
    }
    let feasible = g_min.value <= g_max.value;
    let m_of = |g: f64| g * phys.d.powi(3) * phys.omega.powi(2) / G;
    let probe = |g: f64| -> Option<f64> {
        let q = UnitlessParams {
            g: g.min(0.5 - 1e-9),
            ..*p
        };
        if q.g <= 0.0 {
            return None;
        }
        constrained_negativity(&q).ok()
    };
    Ok(BoundsReport {
        g_min,
        g_max,
        lower_candidates,
        upper_candidates,
        diffusion_short_form: 0.5 * p.gamma_x,
        squeezed_regime,
        m_min: m_of(g_min.value),
        m_max: m_of(g_max.value),
        feasible,
        negativity_at_g_min: probe(g_min.value),
        negativity_at_g_max: probe(g_max.value),
        note: if feasible {
            "order-of-magnitude bounds".into()
        } else {
            "order-of-magnitude bounds; the window is empty".into()
        },
    })
}

/// Mass window `sqrt(hbar d omega / G) <= M <= d^3 omega^2 / (2 G)` of the
/// noise-free experiment.
pub fn mass_bounds(d: f64, omega: f64) -> Result<(f64, f64)> {
    let (d, w) = (positive("d", d)?, positive("omega", omega)?);
    Ok(((HBAR * d * w / G).sqrt(), d.powi(3) * w * w / (2.0 * G)))
}

/// Mass window with force noise `s_ff` (N^2/Hz) and a squeezed thermal start.
///
/// The upper end keeps the `1/2` of the stability bound rather than the
/// `0.45` of the squeezed bound, so `s = 1, n_p = 0` returns the noise-free
/// value.
pub fn mass_bounds_noisy(d: f64, omega: f64, s_ff: f64, s: f64, n_p: f64) -> Result<(f64, f64)> {
    let (d, w) = (positive("d", d)?, positive("omega", omega)?);
    let s_ff = non_negative("s_ff", s_ff)?;
    let s = positive("s", s)?;
    let n_p = non_negative("n_p", n_p)?;
    Ok((
        (PI * d.powi(3) * s_ff / (2.0 * G * HBAR)).sqrt(),
        (s / (1.0 + 2.0 * n_p)).cbrt() * d.powi(3) * w * w / (2.0 * G),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCheck {
    pub ratio: f64,
    pub valid: bool,
}

/// `<H4>/<H2> ~ x0^2 / (5 d^2 g)`.
pub fn quartic_ratio(g: f64, x0: f64, d: f64) -> Result<QuarticCheck> {
    let g = non_negative("g", g)?;
    let d = positive("d", d)?;
    let ratio = if g == 0.0 {
        f64::INFINITY
    } else {
        x0 * x0 / (5.0 * d * d * g)
    };
    Ok(QuarticCheck {
        ratio,
        valid: ratio <= QUARTIC_VALIDITY,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalResult {
    /// Branch separation `2 sqrt2 F_q / (M omega^2)`, m.
    pub delta_x: f64,
    /// Phase per unit of dimensionless time `omega t`.
    pub phase_rate: f64,
    pub phase_at_2pi: f64,
    /// Phase accumulated after `tau_phys` seconds.
    pub phase: f64,
}

/// Two static superpositions of size `delta_x`: the relative phase grows as
/// `16 G F_q^2 t / (hbar d^3 omega^4)`, independent of the mass.
pub fn semiclassical_phase(
    m: f64,
    f_q: f64,
    omega: f64,
    d: f64,
    tau_phys: f64,
) -> Result<SemiclassicalResult> {
    let m = positive("M", m)?;
    let f = non_negative("F_q", f_q)?;
    let w = positive("omega", omega)?;
    let d = positive("d", d)?;
    let t = non_negative("tau_phys", tau_phys)?;
    let per_second = 16.0 * G * f * f / (HBAR * d.powi(3) * w.powi(4));
    Ok(SemiclassicalResult {
        delta_x: 2.0 * 2f64.sqrt() * f / (m * w * w),
        phase_rate: per_second / w,
        phase_at_2pi: 2.0 * PI * per_second / w,
        phase: per_second * t,
    })
}

/// Unitful leading-order phase `6 pi G F_q^2 / (hbar d^3 omega^5)`.
pub fn unitful_phase(f_q: f64, omega: f64, d: f64) -> f64 {
    6.0 * PI * G * f_q * f_q / (HBAR * d.powi(3) * omega.powi(5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Boundary,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DephasingBudget {
    pub budget: f64,
    pub c_x: f64,
    pub c_z: f64,
    pub used: f64,
    pub slack: f64,
    pub verdict: Verdict,
}

/// Checks `C_{s,n_p} + C_x + C_z < N_I / (1 + N_I)` with `C_x ~ 3 pi Gamma_x f^2`
/// and `C_z ~ 2 pi Gamma_z`.
pub fn dephasing_budget(gamma_z: f64, gamma_x: f64, f_q: f64, c_s_np: f64) -> Result<DephasingBudget> {
    let gz = non_negative("gamma_z", gamma_z)?;
    let gx = non_negative("gamma_x", gamma_x)?;
    let c = non_negative("contrast", c_s_np)?;
    let n_i = ideal_negativity();
    let budget = n_i / (1.0 + n_i);
    let c_x = 3.0 * PI * gx * f_q * f_q;
    let c_z = 2.0 * PI * gz;
    let used = c + c_x + c_z;
    let slack = budget - used;
    let verdict = if slack > 0.0 {
        Verdict::Feasible
    } else if slack == 0.0 {
        Verdict::Boundary
    } else {
        Verdict::Infeasible
    };
    Ok(DephasingBudget {
        budget,
        c_x,
        c_z,
        used,
        slack,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvDetection {
    /// `omega d` at the detection constraint, m/s.
    pub omega_d: f64,
    /// Trap frequency at the requested separation, rad/s.
    pub omega: f64,
    /// Gradient producing that frequency, T/m.
    pub grad_b: f64,
    /// Spin force at that gradient, N.
    pub f_q: f64,
}

/// Detection point of an NV-doped diamond, where the trap frequency and
/// the spin force both come from one gradient:
/// `omega d = (120 G g^2 mu_B^2 mu_0 / (hbar |chi_m|))^(1/3)`.
pub fn nv_detection(nv: &NVParams, d: f64) -> Result<NvDetection> {
    let d = positive("d", d)?;
    let k = nv.frequency_per_gradient()?;
    let omega_d = (120.0 * G * (nv.g_factor * MU_B).powi(2) * MU_0 / (HBAR * nv.chi_m.abs())).cbrt();
    let omega = omega_d / d;
    let grad_b = omega / k;
    Ok(NvDetection {
        omega_d,
        omega,
        grad_b,
        f_q: nv.g_factor * MU_B * grad_b,
    })
}

/// Phase at closure against the leading order, for checking the constraint.
pub fn constraint_phase_error(g: f64) -> Result<f64> {
    let f = required_force(g)?;
    Ok(final_phase(f, g)? - DETECTABLE_PHASE)
}

/// Full negativity estimates at the constraint for the given noise.
pub fn constrained_result(p: &UnitlessParams) -> Result<NegativityResult> {
    let f = required_force(p.g)?;
    let q = UnitlessParams { f_q: f, ..*p };
    let e = open_qrdm(&q, final_time(q.g)?)?;
    NegativityResult::evaluate(&e.qrdm, e.phase, e.contrasts)
}

impl std::str::FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "quartic" => Self::Quartic,
            "deflection" => Self::Deflection,
            "squeezing" => Self::Squeezing,
            "diffusion" => Self::Diffusion,
            "stability" => Self::Stability,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "mechanism",
                    value: f64::NAN,
                    reason: "unknown mechanism",
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn required_force_examples() {
        assert!((required_force(1.0 / 120.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((required_force(0.01).unwrap() - 0.912_870_929).abs() < 1e-9);
        assert!(required_force(0.0).is_err());
        let c = DetectionConstraint::with_target(0.01, DETECTABLE_PHASE).unwrap();
        assert!(rel(c.required_force, required_force(0.01).unwrap()) < 1e-15);
    }

    #[test]
    fn ground_state_window_is_stability_limited() {
        let phys = PhysicalParams::new(1e-14, 0.1, 30e-6);
        let r = g_bounds(&phys, &UnitlessParams::ideal(1.0, 0.1), ideal_negativity()).unwrap();
        assert_eq!(r.g_max.mechanism, Mechanism::Stability);
        assert_eq!(r.g_max.value, 0.5);
        assert_eq!(r.g_min.mechanism, Mechanism::Quartic);
        assert!(!r.squeezed_regime);
        let (lo, hi) = mass_bounds(phys.d, phys.omega).unwrap();
        assert!(rel(r.m_max, hi) < 1e-12);
        // quartic g_min translated to mass depends on M through x0; at
        // M = M_min the two agree
        let at = PhysicalParams::new(lo, 0.1, 30e-6);
        let r = g_bounds(&at, &UnitlessParams::ideal(1.0, 0.1), ideal_negativity()).unwrap();
        assert!(rel(r.m_min, lo) < 1e-12);
    }

    #[test]
    fn thermal_bound() {
        let phys = PhysicalParams::new(1e-14, 0.1, 30e-6);
        let mut p = UnitlessParams::ideal(1.0, 0.01);
        p.n_p = 10.0;
        let r = g_bounds(&phys, &p, ideal_negativity()).unwrap();
        assert_eq!(r.g_max.mechanism, Mechanism::Deflection);
        assert!(rel(r.g_max.value, 0.8 / 21.0) < 1e-15);
    }

    #[test]
    fn squeezed_bound_takes_over() {
        let phys = PhysicalParams::new(1e-14, 0.1, 30e-6);
        let mut p = UnitlessParams::ideal(1.0, 0.001);
        p.n_p = 10.0;
        p.s = 1e-4;
        let r = g_bounds(&phys, &p, ideal_negativity()).unwrap();
        assert!(r.squeezed_regime);
        assert_eq!(r.g_max.mechanism, Mechanism::Squeezing);
        assert!(rel(r.g_max.value, 0.45 * (1e-4f64 / 21.0).cbrt()) < 1e-15);
    }

    #[test]
    fn diffusion_bound() {
        let phys = PhysicalParams::new(1e-14, 0.1, 30e-6);
        let mut p = UnitlessParams::ideal(1.0, 0.1);
        p.gamma_x = 0.1;
        let r = g_bounds(&phys, &p, ideal_negativity()).unwrap();
        assert_eq!(r.g_min.mechanism, Mechanism::Diffusion);
        assert!((r.g_min.value - 0.058).abs() < 1e-3);
        assert!((r.diffusion_short_form - 0.05).abs() < 1e-15);
    }

    #[test]
    fn empty_window_is_reported() {
        let phys = PhysicalParams::new(1e-14, 0.1, 30e-6);
        let mut p = UnitlessParams::ideal(1.0, 0.1);
        p.gamma_x = 10.0;
        let r = g_bounds(&phys, &p, ideal_negativity()).unwrap();
        assert!(!r.feasible);
    }

    #[test]
    fn mass_bound_scaling() {
        let (a, b) = mass_bounds(30e-6, 0.1).unwrap();
        let (a4, b4) = mass_bounds(30e-6, 0.4).unwrap();
        assert!(rel(a4, 2.0 * a) < 1e-14 && rel(b4, 16.0 * b) < 1e-14);
        let (a2, b2) = mass_bounds(60e-6, 0.1).unwrap();
        assert!(rel(a2, 2f64.sqrt() * a) < 1e-14 && rel(b2, 8.0 * b) < 1e-14);
    }

    #[test]
    fn noisy_mass_bounds() {
        let (lo, _) = mass_bounds_noisy(30e-6, 0.1, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = mass_bounds_noisy(30e-6, 0.1, 0.0, 1.0, 0.0).unwrap();
        assert!(rel(hi, mass_bounds(30e-6, 0.1).unwrap().1) < 1e-15);
        let (l1, h1) = mass_bounds_noisy(30e-6, 0.1, 1e-64, 1e-4, 10.0).unwrap();
        let (l2, h2) = mass_bounds_noisy(30e-6, 0.1, 2e-64, 1e-4, 20.0).unwrap();
        assert!(l2 > l1 && h2 < h1);
        let (_, h3) = mass_bounds_noisy(30e-6, 0.1, 1e-64, 1e-3, 10.0).unwrap();
        assert!(h3 > h1);
    }

    #[test]
    fn quartic_ratio_edges() {
        let x0 = 1e-4;
        let g = 2.0 * x0 * x0;
        let q = quartic_ratio(g, x0, 1.0).unwrap();
        assert!((q.ratio - 0.1).abs() < 1e-15 && q.valid);
        assert!((quartic_ratio(0.01, 1e-4, 1.0).unwrap().ratio - 2e-7).abs() < 1e-20);
        assert!(!quartic_ratio(0.0, 1e-4, 1.0).unwrap().valid);
    }

    #[test]
    fn semiclassical_is_mass_independent() {
        let a = semiclassical_phase(1e-14, 1e-15, 0.1, 30e-6, 10.0).unwrap();
        let b = semiclassical_phase(3e-11, 1e-15, 0.1, 30e-6, 10.0).unwrap();
        assert_eq!(a.phase, b.phase);
        assert_eq!(a.phase_at_2pi, b.phase_at_2pi);
        assert!(a.delta_x != b.delta_x);
        assert_eq!(semiclassical_phase(1e-14, 1e-15, 0.1, 30e-6, 0.0).unwrap().phase, 0.0);
        for (f, w, d) in [(1e-15, 0.1, 30e-6), (3e-16, 0.5, 1e-4), (2e-14, 1.0, 5e-5)] {
            let s = semiclassical_phase(1e-14, f, w, d, 1.0).unwrap();
            assert!(rel(s.phase_at_2pi / unitful_phase(f, w, d), 16.0 / 3.0) < 1e-13);
        }
    }

    #[test]
    fn dephasing_budget_examples() {
        let b = dephasing_budget(0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(b.verdict, Verdict::Feasible);
        assert!((b.slack - 0.1353).abs() < 1e-4);
        assert_eq!(dephasing_budget(1.0, 0.0, 1.0, 0.0).unwrap().verdict, Verdict::Infeasible);
        let full = dephasing_budget(0.0, 0.0, 1.0, b.budget).unwrap();
        assert_eq!(full.slack, 0.0);
        assert_eq!(full.verdict, Verdict::Boundary);
    }

    #[test]
    fn nv_point() {
        let nv = NVParams::diamond(1.0);
        let p = nv_detection(&nv, 30e-6).unwrap();
        // same frequency, through the map
        let (w, f) = crate::potentials::nv_map(&NVParams::diamond(p.grad_b)).unwrap();
        assert!(rel(w, p.omega) < 1e-12 && rel(f, p.f_q) < 1e-12);
        // and the phase sits on the constraint
        assert!(rel(unitful_phase(p.f_q, p.omega, 30e-6), DETECTABLE_PHASE) < 1e-12);
    }
}
