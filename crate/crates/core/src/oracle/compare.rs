//! Deviation tables between closed-form and oracle time series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grids closer than this are treated as identical.
pub const GRID_TOL: f64 = 1e-12;

/// One named real quantity sampled on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub name: String,
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, tau: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            tau,
            values,
        }
    }

    pub fn from_fn(name: impl Into<String>, tau: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self::new(name, tau.to_vec(), tau.iter().map(|&t| f(t)).collect())
    }
}

/// Absolute tolerance per quantity, with a fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub default: f64,
    pub per_quantity: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            default: tol,
            per_quantity: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, tol: f64) -> Self {
        self.per_quantity.insert(name.into(), tol);
        self
    }

    pub fn for_quantity(&self, name: &str) -> f64 {
        self.per_quantity.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityComparison {
    pub name: String,
    pub max_abs: f64,
    /// Largest `|a - b| / max(|a|, |b|)` over points where either is nonzero.
    pub max_rel: f64,
    pub worst_tau: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub suite: String,
    pub quantities: Vec<QuantityComparison>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            quantities: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn failures(&self) -> Vec<&str> {
        self.quantities
            .iter()
            .filter(|q| !q.pass)
            .map(|q| q.name.as_str())
            .collect()
    }

    pub fn push(&mut self, q: QuantityComparison) {
        self.pass &= q.pass;
        self.quantities.push(q);
    }

    pub fn merge(&mut self, other: ComparisonReport) {
        for q in other.quantities {
            self.push(q);
        }
        self.notes.extend(other.notes);
        self.pass &= other.pass;
    }

    /// Fails the report with a named quantity, for checks that are not
    /// time series.
    pub fn push_check(&mut self, name: impl Into<String>, deviation: f64, tolerance: f64) {
        self.push(QuantityComparison {
            name: name.into(),
            max_abs: deviation,
            max_rel: f64::NAN,
            worst_tau: f64::NAN,
            tolerance,
            pass: deviation <= tolerance,
        });
    }
}

/// Compares two series sharing a name and grid.
pub fn compare_series(closed: &TimeSeries, oracle: &TimeSeries, tol: f64) -> Result<QuantityComparison> {
    if closed.name != oracle.name {
        return Err(Error::GridMismatch(format!(
            "quantity '{}' compared against '{}'",
            closed.name, oracle.name
        )));
    }
    if closed.tau.len() != oracle.tau.len()
        || closed.values.len() != closed.tau.len()
        || oracle.values.len() != oracle.tau.len()
    {
        return Err(Error::GridMismatch(format!("'{}': series lengths differ", closed.name)));
    }
    if let Some((a, b)) = closed
        .tau
        .iter()
        .zip(&oracle.tau)
        .find(|(a, b)| (*a - *b).abs() > GRID_TOL * a.abs().max(1.0))
    {
        return Err(Error::GridMismatch(format!(
            "'{}': grid point {a} does not match {b}",
            closed.name
        )));
    }
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut worst_tau = closed.tau.first().copied().unwrap_or(0.0);
    let mut finite = true;
    for ((t, a), b) in closed.tau.iter().zip(&closed.values).zip(&oracle.values) {
        let d = (a - b).abs();
        if !d.is_finite() {
            finite = false;
            worst_tau = *t;
            max_abs = f64::INFINITY;
            continue;
        }
        if d > max_abs {
            max_abs = d;
            worst_tau = *t;
        }
        let scale = a.abs().max(b.abs());
        if scale > 0.0 {
            max_rel = max_rel.max(d / scale);
        }
    }
    Ok(QuantityComparison {
        name: closed.name.clone(),
        max_abs,
        max_rel,
        worst_tau,
        tolerance: tol,
        pass: finite && max_abs <= tol,
    })
}

/// Compares matching series pairwise, in the order of `closed`.
pub fn compare(
    suite: &str,
    closed: &[TimeSeries],
    oracle: &[TimeSeries],
    tol: &Tolerances,
) -> Result<ComparisonReport> {
    if closed.len() != oracle.len() {
        return Err(Error::GridMismatch(format!(
            "{} closed-form series against {} oracle series",
            closed.len(),
            oracle.len()
        )));
    }
    let mut report = ComparisonReport::new(suite);
    for (c, o) in closed.iter().zip(oracle) {
        report.push(compare_series(c, o, tol.for_quantity(&c.name))?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, v: &[f64]) -> TimeSeries {
        TimeSeries::new(name, (0..v.len()).map(|i| i as f64).collect(), v.to_vec())
    }

    #[test]
    fn identical_inputs_pass_with_zero_deviation() {
        let a = vec![series("x", &[1.0, 2.0, 3.0]), series("y", &[0.0, -1.0, 0.5])];
        let r = compare("t", &a, &a, &Tolerances::uniform(0.0)).unwrap();
        assert!(r.pass);
        assert!(r.quantities.iter().all(|q| q.max_abs == 0.0 && q.max_rel == 0.0));
    }

    #[test]
    fn failure_names_the_quantity_and_time() {
        let a = vec![series("x", &[1.0, 2.0, 3.0]), series("y", &[0.0, 1.0, 2.0])];
        let b = vec![series("x", &[1.0, 2.0, 3.0]), series("y", &[0.0, 1.5, 2.0])];
        let r = compare("t", &a, &b, &Tolerances::uniform(1e-3).with("x", 0.0)).unwrap();
        assert!(!r.pass);
        assert_eq!(r.failures(), vec!["y"]);
        assert_eq!(r.quantities[1].worst_tau, 1.0);
        assert!((r.quantities[1].max_rel - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = series("x", &[1.0, 2.0]);
        let mut b = a.clone();
        b.tau[1] = 1.5;
        assert!(matches!(compare_series(&a, &b, 1.0), Err(Error::GridMismatch(_))));
        let c = series("x", &[1.0]);
        assert!(matches!(compare_series(&a, &c, 1.0), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn nan_fails() {
        let a = series("x", &[1.0, f64::NAN]);
        let q = compare_series(&a, &series("x", &[1.0, 1.0]), 1.0).unwrap();
        assert!(!q.pass);
    }
}
