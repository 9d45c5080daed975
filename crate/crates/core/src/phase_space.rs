//! Symplectic linear algebra for two modes in the `(x1, p1, x2, p2)` ordering.
//!
//! Everything here is expressed in trap units: quadratures in units of
//! `sqrt(2) x0` (positions) and `hbar / (sqrt(2) x0)` (momenta), time in
//! units of `1 / omega`. Covariance matrices use the symmetrised convention
//! in which the vacuum is the identity.

use nalgebra::{Complex, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{non_negative, Error, Result};
use crate::quadrature;

pub type Mat4 = Matrix4<f64>;
pub type Vec4 = Vector4<f64>;

/// Tolerance used by [`heisenberg_ok`].
pub const HEISENBERG_TOL: f64 = 1e-10;

/// Relative tolerance of the adaptive quadrature behind [`lyapunov_integral_quadrature`].
pub const LYAPUNOV_REL_TOL: f64 = 1e-11;

/// The two-mode symplectic form `Omega = Omega_1 (+) Omega_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticForm(Mat4);

impl SymplecticForm {
    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }
}

/// Hamiltonian matrix `H_m` of the quadratic part `r^T H_m r / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm(Mat4);

impl QuadraticForm {
    pub fn new(m: Mat4) -> Result<Self> {
        let asym = (m - m.transpose()).amax();
        if asym > 1e-14 {
            return Err(Error::InvalidParameter {
                name: "H_m",
                value: asym,
                reason: "quadratic form must be symmetric",
            });
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn inverse(&self) -> Result<Mat4> {
        self.0.try_inverse().ok_or(Error::Singular)
    }
}

/// Linear force terms of the Hamiltonian: `-r_f^T r - sum_i r_q^(i)T r sigma_z^(i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub qubit1: Vec4,
    pub qubit2: Vec4,
    pub constant: Vec4,
}

impl DriftSpec {
    /// Qubit forces along `x1` and `x2` of strength `f_q`, no constant force.
    pub fn sgi(f_q: f64) -> Self {
        Self {
            qubit1: Vector4::new(f_q, 0.0, 0.0, 0.0),
            qubit2: Vector4::new(0.0, 0.0, f_q, 0.0),
            constant: Vec4::zeros(),
        }
    }

    /// Total force `r_j^m = j r_q1 + m r_q2 + r_f` felt by the branch with
    /// qubit eigenvalues `(j, m)`.
    pub fn branch_force(&self, j: i8, m: i8) -> Vec4 {
        self.qubit1 * f64::from(j) + self.qubit2 * f64::from(m) + self.constant
    }
}

/// A symmetric 4x4 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix(Mat4);

impl CovarianceMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: asym,
                reason: "covariance matrix must be symmetric",
            });
        }
        Ok(Self(0.5 * (m + m.transpose())))
    }

    /// Two uncorrelated vacua.
    pub fn vacuum() -> Self {
        Self(Mat4::identity())
    }

    /// `(1 + 2 n_p) diag(s, 1/s, s, 1/s)`: identical squeezed thermal states.
    pub fn squeezed_thermal(s: f64, n_p: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "s",
                value: s,
                reason: "squeezing must be positive",
            });
        }
        let n_p = non_negative("n_p", n_p)?;
        let t = 1.0 + 2.0 * n_p;
        Ok(Self(Mat4::from_diagonal(&Vector4::new(
            t * s,
            t / s,
            t * s,
            t / s,
        ))))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_inner(self) -> Mat4 {
        self.0
    }
}

/// Symmetric positive semidefinite diffusion matrix `D` of the Lyapunov equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMatrix(Mat4);

impl DiffusionMatrix {
    pub fn new(m: Mat4) -> Result<Self> {
        let asym = (m - m.transpose()).amax();
        if asym > 1e-14 {
            return Err(Error::InvalidParameter {
                name: "D",
                value: asym,
                reason: "diffusion matrix must be symmetric",
            });
        }
        let min_eig = SymmetricEigen::new(m).eigenvalues.min();
        if min_eig < -1e-14 * m.amax().max(1.0) {
            return Err(Error::InvalidParameter {
                name: "D",
                value: min_eig,
                reason: "diffusion matrix must be positive semidefinite",
            });
        }
        Ok(Self(m))
    }

    pub fn zero() -> Self {
        Self(Mat4::zeros())
    }

    /// Momentum diffusion `Gamma_x diag(0, 1, 0, 1)` generated by position
    /// dephasing of both masses.
    pub fn position_dephasing(gamma_x: f64) -> Result<Self> {
        let gamma_x = non_negative("gamma_x", gamma_x)?;
        Ok(Self(Mat4::from_diagonal(&Vector4::new(
            0.0, gamma_x, 0.0, gamma_x,
        ))))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.amax() == 0.0
    }

    /// `Some((a, b))` when `D = diag(a, b, a, b)`.
    fn mode_symmetric_diagonal(&self) -> Option<(f64, f64)> {
        let m = &self.0;
        let off = m - Mat4::from_diagonal(&m.diagonal());
        if off.amax() == 0.0 && m[(0, 0)] == m[(2, 2)] && m[(1, 1)] == m[(3, 3)] {
            Some((m[(0, 0)], m[(1, 1)]))
        } else {
            None
        }
    }
}

/// A 4x4 real symplectic matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticMatrix(Mat4);

impl SymplecticMatrix {
    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn into_inner(self) -> Mat4 {
        self.0
    }

    /// `max |S^T Omega S - Omega|`.
    pub fn symplectic_defect(&self) -> f64 {
        let om = symplectic_form().0;
        (self.0.transpose() * om * self.0 - om).amax()
    }
}

pub fn symplectic_form() -> SymplecticForm {
    #[rustfmt::skip]
    let m = Mat4::new(
        0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 1.0,
        0.0, 0.0, -1.0, 0.0,
    );
    SymplecticForm(m)
}

pub(crate) fn check_coupling(g: f64) -> Result<f64> {
    if (0.0..0.5).contains(&g) {
        Ok(g)
    } else {
        Err(Error::UnstableCoupling(g))
    }
}

/// Frequency of the relative mode, `omega_g = sqrt(1 - 2g)`.
pub fn relative_frequency(g: f64) -> Result<f64> {
    Ok((1.0 - 2.0 * check_coupling(g)?).sqrt())
}

/// Interferometer closing time `tau_f = 2 pi / omega_g`.
pub fn final_time(g: f64) -> Result<f64> {
    Ok(2.0 * std::f64::consts::PI / relative_frequency(g)?)
}

/// `H_m` for two harmonically trapped masses coupled by `g x1 x2`
/// with the on-site softening `(1 - g)`.
pub fn sgi_hamiltonian_matrix(g: f64) -> Result<QuadraticForm> {
    let g = check_coupling(g)?;
    #[rustfmt::skip]
    let m = Mat4::new(
        1.0 - g, 0.0, g, 0.0,
        0.0, 1.0, 0.0, 0.0,
        g, 0.0, 1.0 - g, 0.0,
        0.0, 0.0, 0.0, 1.0,
    );
    Ok(QuadraticForm(m))
}

/// `S_g(tau) = exp(tau Omega H_m)` in closed form.
pub fn propagator(g: f64, tau: f64) -> Result<SymplecticMatrix> {
    let w = relative_frequency(g)?;
    let (c, s) = (tau.cos(), tau.sin());
    let (cw, sw) = ((w * tau).cos(), (w * tau).sin());
    let a = 0.5 * (c + cw);
    let b = 0.5 * (c - cw);
    let sp = 0.5 * (s + sw / w);
    let sm = 0.5 * (s - sw / w);
    let qp = 0.5 * (-s - w * sw);
    let qm = 0.5 * (-s + w * sw);
    #[rustfmt::skip]
    let m = Mat4::new(
        a,  sp, b,  sm,
        qp, a,  qm, b,
        b,  sm, a,  sp,
        qm, b,  qp, a,
    );
    Ok(SymplecticMatrix(m))
}

/// `exp(tau Omega H)` for an arbitrary quadratic form, by scaling and squaring.
pub fn exp_propagator(h: &QuadraticForm, tau: f64) -> SymplecticMatrix {
    SymplecticMatrix((symplectic_form().0 * h.0 * tau).exp())
}

/// `sigma(tau) = S sigma0 S^T + int_0^tau S(t) D S(t)^T dt`.
pub fn evolve_covariance(
    sigma0: &CovarianceMatrix,
    g: f64,
    tau: f64,
    diffusion: &DiffusionMatrix,
) -> Result<CovarianceMatrix> {
    non_negative("tau", tau)?;
    let check = heisenberg_ok(sigma0);
    if !check.ok {
        return Err(Error::Heisenberg(check.margin));
    }
    let s = propagator(g, tau)?.0;
    let mut out = s * sigma0.0 * s.transpose();
    if !diffusion.is_zero() {
        out += lyapunov_integral(g, tau, diffusion)?;
    }
    CovarianceMatrix::new(out)
}

/// `int_0^tau S(tau - t) D S(tau - t)^T dt`.
///
/// Closed form when `D = diag(a, b, a, b)` (which covers position dephasing),
/// adaptive Gauss-Legendre quadrature otherwise.
pub fn lyapunov_integral(g: f64, tau: f64, diffusion: &DiffusionMatrix) -> Result<Mat4> {
    non_negative("tau", tau)?;
    if diffusion.is_zero() {
        check_coupling(g)?;
        return Ok(Mat4::zeros());
    }
    match diffusion.mode_symmetric_diagonal() {
        Some((a, b)) => lyapunov_closed_form(g, tau, a, b),
        None => lyapunov_integral_quadrature(g, tau, diffusion),
    }
}

pub fn lyapunov_integral_quadrature(
    g: f64,
    tau: f64,
    diffusion: &DiffusionMatrix,
) -> Result<Mat4> {
    check_coupling(g)?;
    let d = diffusion.0;
    let integrand = |t: f64| {
        // g already validated
        let s = propagator(g, t).expect("validated coupling").0;
        s * d * s.transpose()
    };
    Ok(quadrature::integrate(
        integrand,
        0.0,
        tau,
        LYAPUNOV_REL_TOL,
        1e-15,
    ))
}

// The common mode (x1 + x2)/sqrt2 oscillates at frequency 1 and the relative
// mode (x1 - x2)/sqrt2 at omega_g; a mode-symmetric diagonal D stays diagonal
// in that basis, so each mode contributes a 2x2 block.
fn lyapunov_closed_form(g: f64, tau: f64, a: f64, b: f64) -> Result<Mat4> {
    let w = relative_frequency(g)?;
    let common = oscillator_lyapunov(1.0, tau, a, b);
    let relative = oscillator_lyapunov(w, tau, a, b);
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let plus = 0.5 * (common[i][j] + relative[i][j]);
            let minus = 0.5 * (common[i][j] - relative[i][j]);
            out[(i, j)] = plus;
            out[(i + 2, j + 2)] = plus;
            out[(i, j + 2)] = minus;
            out[(i + 2, j)] = minus;
        }
    }
    Ok(out)
}

fn oscillator_lyapunov(w: f64, tau: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    let cc = 0.5 * tau + (2.0 * w * tau).sin() / (4.0 * w);
    let ss = 0.5 * tau - (2.0 * w * tau).sin() / (4.0 * w);
    let sc = (w * tau).sin().powi(2) / (2.0 * w);
    let xx = a * cc + b * ss / (w * w);
    let xp = -a * w * sc + b * sc / w;
    let pp = a * w * w * ss + b * cc;
    [[xx, xp], [xp, pp]]
}

/// Covariance of two initial vacua evolved without noise, written out entry by entry.
pub fn vacuum_covariance_closed_form(g: f64, tau: f64) -> Result<Mat4> {
    let w = relative_frequency(g)?;
    let s2 = (2.0 * w * tau).sin();
    let c2 = (2.0 * w * tau).cos();
    let sq = (w * tau).sin().powi(2);
    let xx = (2.0 - g * (3.0 + c2)) / (2.0 * w * w);
    let xp = g * s2 / (2.0 * w);
    let x1x2 = -g * sq / (w * w);
    let pp = 0.5 * (g * c2 - g + 2.0);
    let p1p2 = g * sq;
    #[rustfmt::skip]
    let m = Mat4::new(
        xx,   xp,   x1x2, -xp,
        xp,   pp,   -xp,  p1p2,
        x1x2, -xp,  xx,   xp,
        -xp,  p1p2, xp,   pp,
    );
    Ok(m)
}

/// Result of the uncertainty-relation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergCheck {
    pub ok: bool,
    /// Smallest eigenvalue of `sigma + i Omega`.
    pub margin: f64,
}

/// Checks `sigma + i Omega >= 0` up to [`HEISENBERG_TOL`].
pub fn heisenberg_ok(sigma: &CovarianceMatrix) -> HeisenbergCheck {
    let om = symplectic_form().0;
    let m = Matrix4::<Complex<f64>>::from_fn(|i, j| Complex::new(sigma.0[(i, j)], om[(i, j)]));
    let margin = SymmetricEigen::new(m).eigenvalues.min();
    HeisenbergCheck {
        ok: margin >= -HEISENBERG_TOL,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn form_entries() {
        let om = *symplectic_form().matrix();
        assert_eq!(om[(0, 1)], 1.0);
        assert_eq!(om[(1, 0)], -1.0);
        assert_eq!(om * om, -Mat4::identity());
        assert_eq!(om.transpose(), -om);
    }

    #[test]
    fn hamiltonian_matrix() {
        assert_eq!(*sgi_hamiltonian_matrix(0.0).unwrap().matrix(), Mat4::identity());
        let h = *sgi_hamiltonian_matrix(0.1).unwrap().matrix();
        assert_eq!(h.diagonal(), Vector4::new(0.9, 1.0, 0.9, 1.0));
        assert_eq!(h[(0, 2)], 0.1);
        assert_eq!(sgi_hamiltonian_matrix(0.5), Err(Error::UnstableCoupling(0.5)));
        assert!(sgi_hamiltonian_matrix(-0.1).is_err());
    }

    #[test]
    fn propagator_identity_at_zero() {
        for g in [0.0, 0.2, 0.45] {
            assert!((propagator(g, 0.0).unwrap().0 - Mat4::identity()).amax() < 1e-15);
        }
    }

    #[test]
    fn propagator_decoupled_is_rotation() {
        let tau = 1.234;
        let s = propagator(0.0, tau).unwrap().0;
        let (c, sn) = (tau.cos(), tau.sin());
        #[rustfmt::skip]
        let r = Mat4::new(
            c, sn, 0.0, 0.0,
            -sn, c, 0.0, 0.0,
            0.0, 0.0, c, sn,
            0.0, 0.0, -sn, c,
        );
        assert!((s - r).amax() < 1e-15);
    }

    #[test]
    fn propagator_matches_exponential() {
        let h = sgi_hamiltonian_matrix(0.1).unwrap();
        let a = propagator(0.1, 1.0).unwrap().0;
        let b = exp_propagator(&h, 1.0).0;
        assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn vacuum_is_stationary_without_coupling() {
        for tau in [0.3, 2.0, 9.0] {
            let s = evolve_covariance(&CovarianceMatrix::vacuum(), 0.0, tau, &DiffusionMatrix::zero())
                .unwrap();
            assert!((s.0 - Mat4::identity()).amax() < 1e-14);
        }
    }

    #[test]
    fn lyapunov_zero_diffusion() {
        assert_eq!(lyapunov_integral(0.1, 3.0, &DiffusionMatrix::zero()).unwrap(), Mat4::zeros());
    }

    #[test]
    fn heisenberg_examples() {
        let v = heisenberg_ok(&CovarianceMatrix::vacuum());
        assert!(v.ok);
        assert!(v.margin.abs() < 1e-15);
        let bad = CovarianceMatrix::new(Mat4::from_diagonal(&Vector4::new(0.5, 0.5, 1.0, 1.0)))
            .unwrap();
        assert!(!heisenberg_ok(&bad).ok);
        let err = evolve_covariance(&bad, 0.1, 1.0, &DiffusionMatrix::zero());
        assert!(matches!(err, Err(Error::Heisenberg(_))));
    }

    #[test]
    fn diffusion_matrix_validation() {
        assert!(DiffusionMatrix::new(Mat4::from_diagonal(&Vector4::new(0.0, -1.0, 0.0, 0.0))).is_err());
        assert!(DiffusionMatrix::position_dephasing(-0.1).is_err());
    }
}
