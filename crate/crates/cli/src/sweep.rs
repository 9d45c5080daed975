//! Grid sweeps over the dimensionless parameters.

use std::collections::BTreeSet;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use sgi_core::design::required_force;
use sgi_core::dynamics::{open_qrdm, TimeConvention};
use sgi_core::entanglement::NegativityResult;
use sgi_core::potentials::UnitlessParams;

use crate::output::num;
use crate::Estimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    FQ,
    G,
    S,
    NP,
    GammaX,
    GammaZ,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::FQ => "f_q",
            Param::G => "g",
            Param::S => "s",
            Param::NP => "n_p",
            Param::GammaX => "gamma_x",
            Param::GammaZ => "gamma_z",
        }
    }

    fn set(self, p: &mut UnitlessParams, v: f64) {
        match self {
            Param::FQ => p.f_q = v,
            Param::G => p.g = v,
            Param::S => p.s = v,
            Param::NP => p.n_p = v,
            Param::GammaX => p.gamma_x = v,
            Param::GammaZ => p.gamma_z = v,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: Param,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            bail!("axis {}: need at least 2 points", self.name.name());
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            bail!("axis {}: bounds must be finite", self.name.name());
        }
        let n = (self.points - 1) as f64;
        Ok(match self.scale {
            Scale::Linear => (0..self.points)
                .map(|i| self.min + (self.max - self.min) * i as f64 / n)
                .collect(),
            Scale::Log => {
                if !(self.min > 0.0 && self.max > 0.0) {
                    bail!("axis {}: log scale needs positive bounds", self.name.name());
                }
                let ratio = self.max / self.min;
                (0..self.points)
                    .map(|i| match i {
                        0 => self.min,
                        i if i + 1 == self.points => self.max,
                        i => self.min * ratio.powf(i as f64 / n),
                    })
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Ground,
    Thermal,
    SqueezedThermal,
}

/// Axes plus fixed values. A parameter is either on an axis or fixed.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub state: Option<InitialState>,
    pub f_q: Option<f64>,
    pub g: Option<f64>,
    pub s: Option<f64>,
    pub n_p: Option<f64>,
    #[serde(default)]
    pub gamma_x: f64,
    #[serde(default)]
    pub gamma_z: f64,
    /// Ties `f_q` to the detection constraint at each `g`.
    #[serde(default)]
    pub constraint: bool,
    pub tau: Option<String>,
    pub negativity: Option<Estimator>,
    pub axis: Vec<Axis>,
}

pub struct Grid {
    pub axes: Vec<Param>,
    pub points: Vec<UnitlessParams>,
    pub constraint: bool,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Grid> {
        if self.axis.is_empty() {
            bail!("a sweep needs at least one [[axis]]");
        }
        let names: BTreeSet<Param> = self.axis.iter().map(|a| a.name).collect();
        if names.len() != self.axis.len() {
            bail!("an axis is listed twice");
        }
        let on_axis = |p: Param| names.contains(&p);
        let fixed = |p: Param, v: Option<f64>| -> Result<()> {
            if on_axis(p) && v.is_some() {
                bail!("{} is both fixed and on an axis", p.name());
            }
            Ok(())
        };
        fixed(Param::FQ, self.f_q)?;
        fixed(Param::G, self.g)?;
        fixed(Param::S, self.s)?;
        fixed(Param::NP, self.n_p)?;
        if self.constraint && (on_axis(Param::FQ) || self.f_q.is_some()) {
            bail!("constraint = true sets f_q; do not give it");
        }
        match self.state {
            Some(InitialState::Ground) if on_axis(Param::S) || on_axis(Param::NP) || self.s.is_some() || self.n_p.is_some() => {
                bail!("a ground state takes neither s nor n_p")
            }
            Some(InitialState::Thermal) if on_axis(Param::S) || self.s.is_some() => {
                bail!("a thermal state takes no s")
            }
            _ => {}
        }

        let base = UnitlessParams {
            f_q: match (self.constraint, self.f_q) {
                (true, _) => 0.0,
                (false, Some(f)) => f,
                (false, None) if on_axis(Param::FQ) => 0.0,
                (false, None) => bail!("missing f_q (fixed, on an axis, or constraint = true)"),
            },
            g: match self.g {
                Some(g) => g,
                None if on_axis(Param::G) => 0.0,
                None => bail!("missing g"),
            },
            s: self.s.unwrap_or(1.0),
            n_p: self.n_p.unwrap_or(0.0),
            gamma_x: self.gamma_x,
            gamma_z: self.gamma_z,
        };

        let values: Vec<Vec<f64>> = self.axis.iter().map(Axis::values).collect::<Result<_>>()?;
        let total: usize = values.iter().map(Vec::len).product();
        let mut points = Vec::with_capacity(total);
        for flat in 0..total {
            let mut p = base;
            let mut rest = flat;
            for (axis, vals) in self.axis.iter().zip(&values).rev() {
                axis.name.set(&mut p, vals[rest % vals.len()]);
                rest /= vals.len();
            }
            points.push(p);
        }
        Ok(Grid {
            axes: self.axis.iter().map(|a| a.name).collect(),
            points,
            constraint: self.constraint,
        })
    }
}

pub const HEADER: [&str; 19] = [
    "f_q",
    "g",
    "s",
    "n_p",
    "gamma_x",
    "gamma_z",
    "tau",
    "phase",
    "c1",
    "c2",
    "c_s_np_1",
    "c_s_np_2",
    "c_gamma_1",
    "c_gamma_2",
    "c_z",
    "negativity_exact",
    "negativity_closed",
    "witness_trace",
    "negativity",
];

/// Phase, contrasts and negativities at one point.
pub fn evaluate(p: &UnitlessParams, constraint: bool, tau: TimeConvention) -> Result<(UnitlessParams, f64, NegativityResult)> {
    let mut p = *p;
    if constraint {
        p.f_q = required_force(p.g)?;
    }
    p.validate()?;
    let t = tau.resolve(p.g)?;
    let e = open_qrdm(&p, t)?;
    Ok((p, t, NegativityResult::evaluate(&e.qrdm, e.phase, e.contrasts)?))
}

fn row(p: &UnitlessParams, tau: f64, r: &NegativityResult, est: Estimator) -> Vec<String> {
    let k = &r.contrasts;
    [
        p.f_q,
        p.g,
        p.s,
        p.n_p,
        p.gamma_x,
        p.gamma_z,
        tau,
        r.phase,
        k.c1,
        k.c2,
        k.c_s_np_1,
        k.c_s_np_2,
        k.c_gamma_1,
        k.c_gamma_2,
        k.c_z,
        r.exact,
        r.closed_form,
        r.witness_trace,
        est.pick(r),
    ]
    .iter()
    .map(|&x| num(x))
    .collect()
}

/// Rows in row-major axis order, whatever order the workers finish in.
pub fn run(grid: &Grid, tau: TimeConvention, est: Estimator, workers: Option<usize>) -> Result<Vec<Vec<String>>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().context("starting workers")?;
    pool.install(|| {
        grid.points
            .par_iter()
            .map(|p| {
                evaluate(p, grid.constraint, tau)
                    .map(|(q, t, r)| row(&q, t, &r, est))
                    .map_err(|e| anyhow!("at f_q={} g={} s={} n_p={}: {e}", p.f_q, p.g, p.s, p.n_p))
            })
            .collect()
    })
}

pub fn axis_names(grid: &Grid) -> String {
    grid.axes.iter().map(|a| a.name()).collect::<Vec<_>>().join(",")
}
