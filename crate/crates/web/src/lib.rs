//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; the layouts are documented
//! on the plain Rust functions, which are also usable natively.

use sgi_core::design::required_force;
use sgi_core::dynamics::{open_qrdm, sample_trajectories, TimeConvention};
use sgi_core::entanglement::NegativityResult;
use sgi_core::potentials::UnitlessParams;
use wasm_bindgen::prelude::*;

/// Values per trajectory row.
pub const TRAJECTORY_STRIDE: usize = 17;
/// Values in a QRDM report.
pub const REPORT_LEN: usize = 37;

fn estimate(p: &UnitlessParams, tau: TimeConvention) -> sgi_core::Result<NegativityResult> {
    p.validate()?;
    let e = open_qrdm(p, tau.resolve(p.g)?)?;
    NegativityResult::evaluate(&e.qrdm, e.phase, e.contrasts)
}

fn log_axis(min: f64, max: f64, n: usize) -> Vec<f64> {
    let (a, b) = (min.ln(), max.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

/// Ground-state negativity on a log grid, `g` outer and `f_q` inner, so
/// cell `(i, j)` is at index `i * nf + j`. `estimator` is `exact`,
/// `closed` or `witness`; `tau` is `final`, `2pi` or a number.
#[allow(clippy::too_many_arguments)]
pub fn landscape(
    f_min: f64,
    f_max: f64,
    nf: usize,
    g_min: f64,
    g_max: f64,
    ng: usize,
    estimator: &str,
    tau: &str,
) -> Result<Vec<f64>, String> {
    if !(f_min > 0.0 && f_max > 0.0 && g_min > 0.0 && g_max > 0.0) {
        return Err("log axes need positive bounds".into());
    }
    let tau: TimeConvention = tau.parse()?;
    let pick = picker(estimator)?;
    let mut out = Vec::with_capacity(nf * ng);
    for g in log_axis(g_min, g_max, ng) {
        for f in log_axis(f_min, f_max, nf) {
            let r = estimate(&UnitlessParams::ideal(f, g), tau).map_err(|e| e.to_string())?;
            out.push(pick(&r));
        }
    }
    Ok(out)
}

fn picker(name: &str) -> Result<fn(&NegativityResult) -> f64, String> {
    Ok(match name {
        "exact" => |r| r.exact,
        "closed" => |r| r.closed_form,
        "witness" => |r| r.witness_trace,
        _ => return Err(format!("unknown estimator {name:?}")),
    })
}

/// Rows of `tau` followed by `(x1, p1, x2, p2)` for `++, +-, -+, --`.
pub fn branch_rows(f_q: f64, g: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    let rows = sample_trajectories(f_q, g, tau_max, steps).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(rows.len() * TRAJECTORY_STRIDE);
    for (t, b) in rows {
        out.push(t);
        for (_, r) in b.iter() {
            out.extend(r.iter());
        }
    }
    Ok(out)
}

/// `[tau, phase, exact, closed, witness, re(rho) row-major, im(rho) row-major]`.
pub fn qrdm_report(p: &UnitlessParams, tau: &str) -> Result<Vec<f64>, String> {
    let tau: TimeConvention = tau.parse()?;
    p.validate().map_err(|e| e.to_string())?;
    let t = tau.resolve(p.g).map_err(|e| e.to_string())?;
    let e = open_qrdm(p, t).map_err(|e| e.to_string())?;
    let r = NegativityResult::evaluate(&e.qrdm, e.phase, e.contrasts).map_err(|e| e.to_string())?;
    let m = e.qrdm.matrix();
    let mut out = vec![t, e.phase, r.exact, r.closed_form, r.witness_trace];
    out.extend((0..16).map(|k| m[(k / 4, k % 4)].re));
    out.extend((0..16).map(|k| m[(k / 4, k % 4)].im));
    Ok(out)
}

#[wasm_bindgen(js_name = negativityLandscape)]
#[allow(clippy::too_many_arguments)]
pub fn negativity_landscape(
    f_min: f64,
    f_max: f64,
    nf: usize,
    g_min: f64,
    g_max: f64,
    ng: usize,
    estimator: &str,
    tau: &str,
) -> Result<Vec<f64>, JsError> {
    landscape(f_min, f_max, nf, g_min, g_max, ng, estimator, tau).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectories(f_q: f64, g: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    branch_rows(f_q, g, tau_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = qrdmWithNoise)]
#[allow(clippy::too_many_arguments)]
pub fn qrdm_with_noise(
    f_q: f64,
    g: f64,
    s: f64,
    n_p: f64,
    gamma_x: f64,
    gamma_z: f64,
    tau: &str,
) -> Result<Vec<f64>, JsError> {
    let p = UnitlessParams {
        f_q,
        g,
        s,
        n_p,
        gamma_x,
        gamma_z,
    };
    qrdm_report(&p, tau).map_err(|e| JsError::new(&e))
}

/// Force that puts the leading-order phase at the detection threshold.
#[wasm_bindgen(js_name = constraintForce)]
pub fn constraint_force(g: f64) -> Result<f64, JsError> {
    required_force(g).map_err(|e| JsError::new(&e.to_string()))
}
