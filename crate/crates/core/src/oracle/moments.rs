//! Fixed-step RK4 integration of the first- and second-moment equations.

use nalgebra::{Complex, Vector4};
use serde::Serialize;

use crate::entanglement::C64;
use crate::error::{Error, Result};
use crate::phase_space::{
    symplectic_form, CovarianceMatrix, DiffusionMatrix, DriftSpec, Mat4, QuadraticForm, Vec4,
};

/// Largest change allowed when the step is halved.
pub const HALVING_TOL: f64 = 1e-10;
const INITIAL_STEP: f64 = 0.01;
const MAX_HALVINGS: u32 = 8;

/// Moment equations `d sigma = A sigma + sigma A^T + D` and
/// `d r = A r + Omega u` with `A = Omega H_m`.
#[derive(Debug, Clone)]
pub struct MomentOdeProblem {
    pub h: QuadraticForm,
    pub drift: DriftSpec,
    pub diffusion: DiffusionMatrix,
    pub sigma0: CovarianceMatrix,
    pub r0: Vec4,
    pub tau_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentTrajectory {
    pub tau: Vec<f64>,
    pub sigma: Vec<Mat4>,
    /// Diagonal branches in `++, +-, -+, --` order at each grid time.
    pub branches: Vec<[Vec4; 4]>,
    /// Step that met the halving criterion.
    pub step: f64,
    /// Largest change observed at the final halving.
    pub halving_change: f64,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(Error::GridMismatch("time grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::GridMismatch("time grid must be ascending".into()));
    }
    Ok(())
}

fn rk4<T, F>(y: T, dt: f64, f: &F) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(T) -> T,
{
    let k1 = f(y);
    let k2 = f(y + k1 * (0.5 * dt));
    let k3 = f(y + k2 * (0.5 * dt));
    let k4 = f(y + k3 * dt);
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Integrates between grid points with steps no longer than `max_step`.
fn march<T, F>(y0: T, grid: &[f64], max_step: f64, f: F) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(T) -> T,
{
    let mut out = Vec::with_capacity(grid.len());
    let mut y = y0;
    out.push(y);
    for w in grid.windows(2) {
        let span = w[1] - w[0];
        let n = (span / max_step).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        if span > 0.0 {
            for _ in 0..n {
                y = rk4(y, dt, &f);
            }
        }
        out.push(y);
    }
    out
}

fn run(p: &MomentOdeProblem, step: f64) -> (Vec<Mat4>, Vec<[Vec4; 4]>) {
    let a = symplectic_form().matrix() * p.h.matrix();
    let d = *p.diffusion.matrix();
    let sigma = march(*p.sigma0.matrix(), &p.tau_grid, step, |s: Mat4| {
        a * s + s * a.transpose() + d
    });
    let om = *symplectic_form().matrix();
    let forces = [(1, 1), (1, -1), (-1, 1), (-1, -1)].map(|(j, m)| om * p.drift.branch_force(j, m));
    let per_branch: Vec<Vec<Vec4>> = forces
        .iter()
        .map(|&push| march(p.r0, &p.tau_grid, step, |r: Vec4| a * r + push))
        .collect();
    let branches = (0..p.tau_grid.len())
        .map(|i| [0, 1, 2, 3].map(|b| per_branch[b][i]))
        .collect();
    (sigma, branches)
}

fn max_change(a: &(Vec<Mat4>, Vec<[Vec4; 4]>), b: &(Vec<Mat4>, Vec<[Vec4; 4]>)) -> f64 {
    let s = a
        .0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y).amax() / x.amax().max(1.0))
        .fold(0.0, f64::max);
    let r = a
        .1
        .iter()
        .zip(&b.1)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).amax() / u.amax().max(1.0)))
        .fold(0.0, f64::max);
    s.max(r)
}

/// Integrates with successive step halving until the results settle.
pub fn integrate_moments(p: &MomentOdeProblem) -> Result<MomentTrajectory> {
    integrate_moments_with(p, HALVING_TOL)
}

pub fn integrate_moments_with(p: &MomentOdeProblem, tol: f64) -> Result<MomentTrajectory> {
    check_grid(&p.tau_grid)?;
    let mut step = INITIAL_STEP;
    let mut prev = run(p, step);
    for _ in 0..MAX_HALVINGS {
        let next = run(p, 0.5 * step);
        let change = max_change(&prev, &next);
        step *= 0.5;
        if change < tol {
            return Ok(MomentTrajectory {
                tau: p.tau_grid.clone(),
                sigma: next.0,
                branches: next.1,
                step,
                halving_change: change,
            });
        }
        prev = next;
    }
    Err(Error::NonConvergence(format!(
        "moment equations did not settle to {tol:e} at step {step:e}"
    )))
}

/// Fixed-step error at `step` and `step / 2` against a reference, for
/// measuring the convergence order.
pub fn step_errors(p: &MomentOdeProblem, step: f64, reference: &MomentTrajectory) -> (f64, f64) {
    let r = (reference.sigma.clone(), reference.branches.clone());
    (max_change(&r, &run(p, step)), max_change(&r, &run(p, 0.5 * step)))
}

/// Complex moments, log-norm and covariance of one off-diagonal block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockState {
    pub sigma: Mat4,
    pub r: Vector4<C64>,
    /// `ln Tr rho_block` relative to its initial value.
    pub log_norm: C64,
}

impl std::ops::Add for BlockState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            sigma: self.sigma + o.sigma,
            r: self.r + o.r,
            log_norm: self.log_norm + o.log_norm,
        }
    }
}

impl std::ops::Mul<f64> for BlockState {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self {
            sigma: self.sigma * k,
            r: self.r * Complex::new(k, 0.0),
            log_norm: self.log_norm * k,
        }
    }
}

/// Integrates the block equations
/// `d r = A r + Omega (u_a + u_b)/2 - (i/2) sigma (u_a - u_b)` and
/// `d ln N = -i (u_a - u_b)^T r` for ket forces `u_a` and bra forces `u_b`.
pub fn integrate_block(
    p: &MomentOdeProblem,
    ket: (i8, i8),
    bra: (i8, i8),
    step: f64,
) -> Result<Vec<BlockState>> {
    check_grid(&p.tau_grid)?;
    let om = *symplectic_form().matrix();
    let a = om * p.h.matrix();
    let d = *p.diffusion.matrix();
    let ua = p.drift.branch_force(ket.0, ket.1);
    let ub = p.drift.branch_force(bra.0, bra.1);
    let push = (om * (0.5 * (ua + ub))).map(|x| Complex::new(x, 0.0));
    let delta = ua - ub;
    let a_c = a.map(|x| Complex::new(x, 0.0));
    let i = Complex::new(0.0, 1.0);
    let y0 = BlockState {
        sigma: *p.sigma0.matrix(),
        r: p.r0.map(|x| Complex::new(x, 0.0)),
        log_norm: Complex::new(0.0, 0.0),
    };
    Ok(march(y0, &p.tau_grid, step, |y: BlockState| {
        let sd = (y.sigma * delta).map(|x| Complex::new(0.0, -0.5 * x));
        let dn = y
            .r
            .iter()
            .zip(delta.iter())
            .fold(Complex::new(0.0, 0.0), |acc, (z, d)| acc + z * *d);
        BlockState {
            sigma: a * y.sigma + y.sigma * a.transpose() + d,
            r: a_c * y.r + push + sd,
            log_norm: -i * dn,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::sgi_hamiltonian_matrix;

    fn problem(g: f64, f: f64) -> MomentOdeProblem {
        MomentOdeProblem {
            h: sgi_hamiltonian_matrix(g).unwrap(),
            drift: DriftSpec::sgi(f),
            diffusion: DiffusionMatrix::zero(),
            sigma0: CovarianceMatrix::vacuum(),
            r0: Vec4::zeros(),
            tau_grid: (0..=10).map(|i| i as f64 * 0.5).collect(),
        }
    }

    #[test]
    fn vacuum_stays_put() {
        let t = integrate_moments(&problem(0.0, 0.0)).unwrap();
        for s in &t.sigma {
            assert!((s - Mat4::identity()).amax() < 1e-12);
        }
    }

    #[test]
    fn grid_must_start_at_zero() {
        let mut p = problem(0.1, 1.0);
        p.tau_grid = vec![0.5, 1.0];
        assert!(matches!(integrate_moments(&p), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn diagonal_branch_matches_closed_form() {
        let t = integrate_moments(&problem(0.1, 1.0)).unwrap();
        for (tau, b) in t.tau.iter().zip(&t.branches) {
            let c = crate::dynamics::branch_trajectories(1.0, 0.1, *tau).unwrap();
            assert!((b[0] - c.plus_plus).amax() < 1e-9);
            assert!((b[1] - c.plus_minus).amax() < 1e-9);
        }
    }
}
