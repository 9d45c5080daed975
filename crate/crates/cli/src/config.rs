//! Flat key-value configuration files (TOML).

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use sgi_core::design::{ideal_negativity, required_force};
use sgi_core::potentials::{to_unitless, NVParams, PhysicalParams, UnitlessParams};

pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.parse::<toml::Table>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn from_table<T: DeserializeOwned>(table: toml::Table, path: &Path) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .with_context(|| format!("invalid configuration in {}", path.display()))
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_table(read_table(path)?, path)
}

/// Dimensionless point. `constraint = true` replaces `f_q` by the force
/// that puts the leading phase on the detection threshold.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitlessConfig {
    pub f_q: Option<f64>,
    pub g: f64,
    #[serde(default = "one")]
    pub s: f64,
    #[serde(default)]
    pub n_p: f64,
    #[serde(default)]
    pub gamma_x: f64,
    #[serde(default)]
    pub gamma_z: f64,
    #[serde(default)]
    pub constraint: bool,
}

fn one() -> f64 {
    1.0
}

impl UnitlessConfig {
    pub fn resolve(&self) -> Result<UnitlessParams> {
        let f_q = match (self.constraint, self.f_q) {
            (true, None) => required_force(self.g)?,
            (true, Some(_)) => bail!("give either f_q or constraint = true, not both"),
            (false, Some(f)) => f,
            (false, None) => bail!("missing f_q (or set constraint = true)"),
        };
        let p = UnitlessParams {
            f_q,
            g: self.g,
            s: self.s,
            n_p: self.n_p,
            gamma_x: self.gamma_x,
            gamma_z: self.gamma_z,
        };
        p.validate()?;
        Ok(p)
    }
}

/// A point given either in SI units (recognised by the `m` key) or
/// dimensionless.
pub fn load_point(path: &Path) -> Result<UnitlessParams> {
    let table = read_table(path)?;
    if table.contains_key("m") {
        let phys: PhysicalParams = from_table(table, path)?;
        Ok(to_unitless(&phys)?)
    } else {
        from_table::<UnitlessConfig>(table, path)?.resolve()
    }
}

/// Physical configuration for mass and coupling windows. The NV keys are
/// optional; with `grad_b` absent the trap frequency and force may be
/// left out and are taken at the detection point.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub m: f64,
    pub omega: Option<f64>,
    pub d: f64,
    pub f_q: Option<f64>,
    #[serde(default)]
    pub s_ff: f64,
    #[serde(default)]
    pub gamma_z: f64,
    pub omega_t: Option<f64>,
    pub n_p: Option<f64>,
    pub t_m: Option<f64>,
    pub q: Option<f64>,
    pub epsilon: Option<f64>,
    pub rho_m: Option<f64>,
    pub grad_b: Option<f64>,
    pub g_factor: Option<f64>,
    pub chi_m: Option<f64>,
    /// Target negativity; defaults to the small-coupling value.
    pub n_i: Option<f64>,
}

impl BoundsConfig {
    pub fn nv(&self) -> Option<NVParams> {
        if self.grad_b.is_none() && self.g_factor.is_none() && self.chi_m.is_none() {
            return None;
        }
        let base = NVParams::diamond(self.grad_b.unwrap_or(0.0));
        Some(NVParams {
            g_factor: self.g_factor.unwrap_or(base.g_factor),
            chi_m: self.chi_m.unwrap_or(base.chi_m),
            ..base
        })
    }

    pub fn target(&self) -> f64 {
        self.n_i.unwrap_or_else(ideal_negativity)
    }

    pub fn physical(&self, omega: f64, f_q: f64) -> PhysicalParams {
        PhysicalParams {
            f_q,
            s_ff: self.s_ff,
            gamma_z: self.gamma_z,
            omega_t: self.omega_t,
            n_p: self.n_p,
            t_m: self.t_m,
            q: self.q,
            epsilon: self.epsilon,
            rho_m: self.rho_m,
            ..PhysicalParams::new(self.m, omega, self.d)
        }
    }
}
