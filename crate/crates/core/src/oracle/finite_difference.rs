//! Taylor coefficients of the exact pair potential by Richardson-extrapolated
//! central differences.

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::Result;
use crate::potentials::{zero_point_length, ExpansionCoefficients, PotentialSpec};

/// Coarsest step as a fraction of the separation; each level halves it.
pub const COARSE_STEP: f64 = 0.1;
pub const LEVELS: usize = 4;

fn central(v: &dyn Fn(f64) -> f64, order: usize, h: f64) -> f64 {
    match order {
        1 => (v(h) - v(-h)) / (2.0 * h),
        2 => (v(h) - 2.0 * v(0.0) + v(-h)) / (h * h),
        3 => (v(2.0 * h) - 2.0 * v(h) + 2.0 * v(-h) - v(-2.0 * h)) / (2.0 * h.powi(3)),
        4 => (v(2.0 * h) - 4.0 * v(h) + 6.0 * v(0.0) - 4.0 * v(-h) + v(-2.0 * h)) / h.powi(4),
        _ => unreachable!("orders 1 to 4 only"),
    }
}

/// `order`-th derivative at 0, Richardson-extrapolated over `LEVELS` halvings
/// of a step starting at `COARSE_STEP * scale`.
pub fn derivative(v: &dyn Fn(f64) -> f64, order: usize, scale: f64) -> f64 {
    let mut table: Vec<f64> = (0..LEVELS)
        .map(|i| central(v, order, COARSE_STEP * scale / f64::from(1u32 << i)))
        .collect();
    // the central stencils above have errors in even powers of h
    for j in 1..LEVELS {
        let k = 4f64.powi(j as i32);
        for i in (j..LEVELS).rev() {
            table[i] = (k * table[i] - table[i - 1]) / (k - 1.0);
        }
    }
    table[LEVELS - 1]
}

/// Numerical counterpart of `expand_potential`.
pub fn numerical_coefficients(
    spec: &PotentialSpec,
    mass: f64,
    omega: f64,
) -> Result<ExpansionCoefficients> {
    let x0 = zero_point_length(mass, omega)?;
    let d = spec.d;
    // work in units of d so the stencil sees O(1) arguments
    let v = |u: f64| spec.energy(u * d);
    let c: Vec<f64> = (1..=4)
        .map(|k| {
            let dk = derivative(&v, k, 1.0) / d.powi(k as i32);
            let fact = [1.0, 1.0, 2.0, 6.0, 24.0][k];
            -2.0 / (HBAR * omega) * (2f64.sqrt() * x0).powi(k as i32) * dk / fact
        })
        .collect();
    Ok(ExpansionCoefficients {
        f: c[0],
        g: c[1],
        h: c[2],
        p: c[3],
    })
}

/// Natural size of the `k`-th coefficient, `2 A (sqrt2 x0 / d)^k / (hbar omega d^n)`.
pub fn coefficient_scale(spec: &PotentialSpec, mass: f64, omega: f64, k: i32) -> Result<f64> {
    let x0 = zero_point_length(mass, omega)?;
    Ok(2.0 * spec.a.abs() * (2f64.sqrt() * x0 / spec.d).powi(k)
        / (HBAR * omega * spec.d.powf(f64::from(spec.n))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub analytic: [f64; 4],
    pub numerical: [f64; 4],
    /// Deviation relative to the coefficient, floored at its natural scale so
    /// that coefficients vanishing by symmetry are measured sensibly.
    pub relative: [f64; 4],
}

impl ExpansionCheck {
    pub fn worst(&self) -> f64 {
        self.relative.iter().copied().fold(0.0, f64::max)
    }
}

pub fn check_expansion(spec: &PotentialSpec, mass: f64, omega: f64) -> Result<ExpansionCheck> {
    let analytic = crate::potentials::expand_potential(spec, mass, omega)?.as_array();
    let numerical = numerical_coefficients(spec, mass, omega)?.as_array();
    let mut relative = [0.0; 4];
    for k in 0..4 {
        let floor = coefficient_scale(spec, mass, omega, k as i32 + 1)?;
        relative[k] = (analytic[k] - numerical[k]).abs() / analytic[k].abs().max(floor);
    }
    Ok(ExpansionCheck {
        analytic,
        numerical,
        relative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives_are_exact() {
        let v = |x: f64| 3.0 + 2.0 * x - x * x + 0.5 * x.powi(3) + 0.25 * x.powi(4);
        let want = [2.0, -2.0, 3.0, 6.0];
        for (k, w) in want.iter().enumerate() {
            assert!((derivative(&v, k + 1, 1.0) - w).abs() < 1e-7, "order {}: {}", k + 1, derivative(&v, k + 1, 1.0));
        }
    }

    #[test]
    fn exponential_derivatives() {
        let v = |x: f64| (2.0 * x).exp();
        for k in 1..=4 {
            let d = derivative(&v, k, 1.0);
            assert!((d / 2f64.powi(k as i32) - 1.0).abs() < 1e-8, "order {k}: {d}");
        }
    }
}
