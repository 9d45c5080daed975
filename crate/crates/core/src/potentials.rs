//! Two-body potentials, their Gaussian expansion, and unit conversions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{C, EPSILON_0, G, HBAR, K_B, MU_0, MU_B};
use crate::error::{non_negative, positive, Error, Result};

/// Ratio `x0 / d` above which the expansion is not trusted.
pub const EXPANSION_VALIDITY: f64 = 0.1;

/// `g` values this close to 1/2 are treated as unstable when converting
/// from physical units, where rounding can land on either side of the edge.
pub const STABILITY_MARGIN: f64 = 1e-12;

/// `V(r) = -A / r^n` with the masses separated by `d` along a line at angle
/// `theta` to the trap axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub a: f64,
    pub n: u32,
    pub theta: f64,
    pub d: f64,
}

impl PotentialSpec {
    pub fn new(a: f64, n: u32, theta: f64, d: f64) -> Result<Self> {
        positive("d", d)?;
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: f64::from(n),
                reason: "interaction power must be at least 1",
            });
        }
        Ok(Self { a, n, theta, d })
    }

    pub fn newton(mass: f64, theta: f64, d: f64) -> Result<Self> {
        Self::new(G * mass * mass, 1, theta, d)
    }

    pub fn coulomb(charge: f64, theta: f64, d: f64) -> Result<Self> {
        Self::new(-charge * charge / (4.0 * PI * EPSILON_0), 1, theta, d)
    }

    /// Casimir-Polder interaction of two dielectric spheres of mass `mass`.
    pub fn casimir(mass: f64, epsilon: f64, density: f64, theta: f64, d: f64) -> Result<Self> {
        positive("rho_m", density)?;
        let k = clausius_mossotti(epsilon);
        let a = 207.0 / (64.0 * PI.powi(3)) * k * k * C * HBAR * mass * mass / (density * density);
        Self::new(a, 7, theta, d)
    }

    /// Exact potential energy (J) when the relative displacement along the
    /// trap axis is `delta` (m).
    pub fn energy(&self, delta: f64) -> f64 {
        let (s, c) = self.theta.sin_cos();
        let along = delta - self.d * c;
        let across = self.d * s;
        let r2 = along * along + across * across;
        -self.a / r2.powf(0.5 * f64::from(self.n))
    }
}

fn clausius_mossotti(epsilon: f64) -> f64 {
    (epsilon - 1.0) / (epsilon + 2.0)
}

/// Coefficients of `2V / (hbar omega) = -f y - g y^2 - h y^3 - p y^4`
/// with `y = x1 - x2` in unitless quadratures; the constant is dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub p: f64,
}

impl ExpansionCoefficients {
    pub fn as_array(&self) -> [f64; 4] {
        [self.f, self.g, self.h, self.p]
    }
}

/// Zero-point length `x0 = sqrt(hbar / (2 M omega))`.
pub fn zero_point_length(mass: f64, omega: f64) -> Result<f64> {
    Ok((HBAR / (2.0 * positive("M", mass)? * positive("omega", omega)?)).sqrt())
}

/// Expands the potential to fourth order in the relative displacement.
///
/// The expansion assumes `x0 / d` is small; see [`expansion_parameter`].
pub fn expand_potential(spec: &PotentialSpec, mass: f64, omega: f64) -> Result<ExpansionCoefficients> {
    let x0 = zero_point_length(mass, omega)?;
    let d = positive("d", spec.d)?;
    let n = f64::from(spec.n);
    let a = spec.a;
    let c = axial_cos(spec.theta);
    let c2 = c * c;
    let e = HBAR * omega;
    let dn = d.powf(n);
    let f = 2.0 * 2f64.sqrt() * n * a * x0 * c / (e * dn * d);
    let g = a * x0.powi(2) * n * (n + (n + 2.0) * (2.0 * c2 - 1.0)) / (e * dn * d.powi(2));
    let h = 2.0 * 2f64.sqrt() * n * (n + 2.0) / 3.0 * a * x0.powi(3) * c * ((n + 4.0) * c2 - 3.0)
        / (e * dn * d.powi(3));
    let p = n * (n + 2.0) / 3.0
        * a
        * x0.powi(4)
        * ((n + 4.0) * c2 * ((n + 6.0) * c2 - 6.0) + 3.0)
        / (e * dn * d.powi(4));
    Ok(ExpansionCoefficients { f, g, h, p })
}

// cos(pi/2) rounds to 6e-17; snap it so perpendicular geometries drop the
// odd terms exactly.
fn axial_cos(theta: f64) -> f64 {
    let c = theta.cos();
    if c.abs() < 4.0 * f64::EPSILON {
        0.0
    } else {
        c
    }
}

/// `x0 / d` for the given mass and frequency.
pub fn expansion_parameter(spec: &PotentialSpec, mass: f64, omega: f64) -> Result<f64> {
    Ok(zero_point_length(mass, omega)? / positive("d", spec.d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Coulomb,
    Casimir,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Linear,
    Parallel,
}

impl std::str::FromStr for InteractionKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "coulomb" => Ok(Self::Coulomb),
            "casimir" => Ok(Self::Casimir),
            "newton" => Ok(Self::Newton),
            _ => Err(format!("unknown interaction {s:?}")),
        }
    }
}

impl std::str::FromStr for Orientation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(Self::Linear),
            "parallel" => Ok(Self::Parallel),
            _ => Err(format!("unknown orientation {s:?}")),
        }
    }
}

/// SI inputs. Field names double as configuration keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Mass, kg.
    pub m: f64,
    /// Trap angular frequency, rad/s.
    pub omega: f64,
    /// Trap separation, m.
    pub d: f64,
    /// Qubit-dependent force, N.
    #[serde(default)]
    pub f_q: f64,
    /// Force-noise power spectral density, N^2/Hz.
    #[serde(default)]
    pub s_ff: f64,
    /// Qubit dephasing rate, 1/s.
    #[serde(default)]
    pub gamma_z: f64,
    /// Frequency of the preparation trap, rad/s.
    #[serde(default)]
    pub omega_t: Option<f64>,
    /// Initial phonon number; derived from `omega_t` and `t_m` when absent.
    #[serde(default)]
    pub n_p: Option<f64>,
    /// Temperature of the preparation stage, K.
    #[serde(default)]
    pub t_m: Option<f64>,
    /// Charge, C.
    #[serde(default)]
    pub q: Option<f64>,
    /// Relative permittivity.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Mass density, kg/m^3.
    #[serde(default)]
    pub rho_m: Option<f64>,
}

impl PhysicalParams {
    pub fn new(m: f64, omega: f64, d: f64) -> Self {
        Self {
            m,
            omega,
            d,
            f_q: 0.0,
            s_ff: 0.0,
            gamma_z: 0.0,
            omega_t: None,
            n_p: None,
            t_m: None,
            q: None,
            epsilon: None,
            rho_m: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("omega", self.omega)?;
        positive("d", self.d)?;
        non_negative("f_q", self.f_q)?;
        non_negative("s_ff", self.s_ff)?;
        non_negative("gamma_z", self.gamma_z)?;
        if let Some(w) = self.omega_t {
            positive("omega_t", w)?;
        }
        if let Some(n) = self.n_p {
            non_negative("n_p", n)?;
        }
        if let Some(t) = self.t_m {
            positive("t_m", t)?;
        }
        if let Some(r) = self.rho_m {
            positive("rho_m", r)?;
        }
        Ok(())
    }

    pub fn zero_point_length(&self) -> Result<f64> {
        zero_point_length(self.m, self.omega)
    }

    /// Initial phonon number: explicit, thermal at `t_m` in the preparation
    /// trap, or zero.
    pub fn phonon_number(&self) -> f64 {
        if let Some(n) = self.n_p {
            return n;
        }
        match (self.omega_t, self.t_m) {
            (Some(w), Some(t)) => {
                let coth = 1.0 / (HBAR * w / (2.0 * K_B * t)).tanh();
                0.5 * (coth - 1.0)
            }
            _ => 0.0,
        }
    }
}

/// Dimensionless parameters of the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitlessParams {
    pub f_q: f64,
    pub g: f64,
    pub s: f64,
    pub n_p: f64,
    pub gamma_x: f64,
    pub gamma_z: f64,
}

impl UnitlessParams {
    /// Ground-state masses, no noise.
    pub fn ideal(f_q: f64, g: f64) -> Self {
        Self {
            f_q,
            g,
            s: 1.0,
            n_p: 0.0,
            gamma_x: 0.0,
            gamma_z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("f_q", self.f_q)?;
        crate::phase_space::check_coupling(self.g)?;
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "s",
                value: self.s,
                reason: "squeezing must lie in (0, 1]",
            });
        }
        non_negative("n_p", self.n_p)?;
        non_negative("gamma_x", self.gamma_x)?;
        non_negative("gamma_z", self.gamma_z)?;
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.s == 1.0 && self.n_p == 0.0 && self.gamma_x == 0.0 && self.gamma_z == 0.0
    }
}

/// Maps SI inputs onto the dimensionless parameters.
pub fn to_unitless(p: &PhysicalParams) -> Result<UnitlessParams> {
    p.validate()?;
    let g = G * p.m / (p.d.powi(3) * p.omega.powi(2));
    if g >= 0.5 - STABILITY_MARGIN {
        return Err(Error::UnstableCoupling(g));
    }
    Ok(UnitlessParams {
        f_q: p.f_q / (HBAR * p.m * p.omega.powi(3)).sqrt(),
        g,
        s: p.omega_t.map_or(1.0, |w| p.omega / w),
        n_p: p.phonon_number(),
        gamma_x: PI * p.s_ff / (HBAR * p.m * p.omega.powi(2)),
        gamma_z: p.gamma_z / p.omega,
    })
}

/// Inverse of the `(f_q, g)` part of [`to_unitless`]: returns `(M, F_q)`.
pub fn from_unitless(f_q: f64, g: f64, omega: f64, d: f64) -> Result<(f64, f64)> {
    let m = g * d.powi(3) * omega.powi(2) / G;
    positive("M", m)?;
    Ok((m, f_q * (HBAR * m * omega.powi(3)).sqrt()))
}

/// Table I couplings `(f, g)` for the selected interaction and orientation.
pub fn table_coupling(
    kind: InteractionKind,
    orientation: Orientation,
    p: &PhysicalParams,
) -> Result<(f64, f64)> {
    let m = positive("m", p.m)?;
    let w = positive("omega", p.omega)?;
    let d = positive("d", p.d)?;
    let (f_lin, g_lin, g_par) = match kind {
        InteractionKind::Newton => (
            2.0 * G * m.powf(1.5) / ((HBAR * w.powi(3)).sqrt() * d * d),
            2.0 * G * m / (d.powi(3) * w * w),
            G * m / (d.powi(3) * w * w),
        ),
        InteractionKind::Coulomb => {
            let q2 = p.q.ok_or(Error::MissingParameter("q"))?.powi(2);
            (
                -q2 / (2.0 * PI * EPSILON_0 * (HBAR * m * w.powi(3)).sqrt() * d * d),
                -q2 / (2.0 * PI * EPSILON_0 * m * w * w * d.powi(3)),
                -q2 / (4.0 * PI * EPSILON_0 * m * w * w * d.powi(3)),
            )
        }
        InteractionKind::Casimir => {
            let k = clausius_mossotti(p.epsilon.ok_or(Error::MissingParameter("epsilon"))?);
            let rho = positive("rho_m", p.rho_m.ok_or(Error::MissingParameter("rho_m"))?)?;
            let base = k * k * C / (PI.powi(3) * rho * rho);
            (
                1449.0 / 32.0 * base * HBAR.sqrt() / d.powi(8) * (m / w).powf(1.5),
                1449.0 / 8.0 * base * HBAR * m / (w * w * d.powi(9)),
                1449.0 / 64.0 * base * HBAR * m / (w * w * d.powi(9)),
            )
        }
    };
    Ok(match orientation {
        Orientation::Linear => (f_lin, g_lin),
        Orientation::Parallel => (0.0, g_par),
    })
}

/// Magnetic trap and spin coupling of an NV-doped diamond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NVParams {
    /// Magnetic field gradient, T/m.
    pub grad_b: f64,
    /// Electron g-factor.
    #[serde(default = "NVParams::default_g_factor")]
    pub g_factor: f64,
    /// Mass magnetic susceptibility, m^3/kg.
    #[serde(default = "NVParams::default_chi_m")]
    pub chi_m: f64,
}

impl NVParams {
    /// Mass susceptibility of diamond.
    pub const DIAMOND_CHI_M: f64 = -6.2e-9;

    fn default_g_factor() -> f64 {
        2.0
    }

    fn default_chi_m() -> f64 {
        Self::DIAMOND_CHI_M
    }

    pub fn diamond(grad_b: f64) -> Self {
        Self {
            grad_b,
            g_factor: 2.0,
            chi_m: Self::DIAMOND_CHI_M,
        }
    }

    /// `omega / grad_b`, the trap frequency per unit gradient.
    pub fn frequency_per_gradient(&self) -> Result<f64> {
        if !(self.chi_m < 0.0) {
            return Err(Error::InvalidParameter {
                name: "chi_m",
                value: self.chi_m,
                reason: "diamagnetic trapping needs a negative susceptibility",
            });
        }
        Ok((self.chi_m.abs() / MU_0).sqrt())
    }
}

/// Trap frequency and spin force produced by one magnetic gradient.
/// Both are linear in `grad_b`.
pub fn nv_map(nv: &NVParams) -> Result<(f64, f64)> {
    let grad = positive("grad_b", nv.grad_b)?;
    let k = nv.frequency_per_gradient()?;
    Ok((k * grad, nv.g_factor * MU_B * grad))
}
