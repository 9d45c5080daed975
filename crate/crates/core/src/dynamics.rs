//! Evolution of the Gaussian-branched cat state produced by two
//! interferometers: branch trajectories, covariance, qubit phases and
//! contrasts, in closed form and through a general matrix route.
//!
//! Branch `(j, m)` denotes sigma_z eigenvalues of the two qubits. Its
//! Hamiltonian is `r^T H_m r / 2 + u^T r` with `u = j r_q1 + m r_q2 + r_f`,
//! so a `+` qubit pushes its mass towards negative `x`.

use std::f64::consts::PI;

use nalgebra::{Complex, Vector4};
use serde::{Deserialize, Serialize};

use crate::entanglement::{Qrdm, C64};
use crate::error::{non_negative, Error, Result};
use crate::phase_space::{
    evolve_covariance, lyapunov_integral, propagator, relative_frequency, sgi_hamiltonian_matrix,
    symplectic_form, CovarianceMatrix, DiffusionMatrix, DriftSpec, Mat4, Vec4,
};
use crate::potentials::UnitlessParams;
use crate::quadrature;

/// Relative tolerance of the quadratures used by the general route.
pub const GENERAL_REL_TOL: f64 = 1e-12;

/// Which time the interferometer is read out at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeConvention {
    /// `tau_f = 2 pi / omega_g`, when the relative mode closes.
    Final,
    /// `tau = 2 pi`, when the common mode closes.
    TwoPi,
    Value(f64),
}

impl TimeConvention {
    pub fn resolve(self, g: f64) -> Result<f64> {
        match self {
            TimeConvention::Final => crate::phase_space::final_time(g),
            TimeConvention::TwoPi => {
                crate::phase_space::check_coupling(g)?;
                Ok(2.0 * PI)
            }
            TimeConvention::Value(t) => non_negative("tau", t),
        }
    }

    pub fn name(self) -> String {
        match self {
            TimeConvention::Final => "final".into(),
            TimeConvention::TwoPi => "2pi".into(),
            TimeConvention::Value(t) => format!("{t}"),
        }
    }
}

impl std::str::FromStr for TimeConvention {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "final" => Ok(Self::Final),
            "2pi" => Ok(Self::TwoPi),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|t| *t >= 0.0 && t.is_finite())
                .map(Self::Value)
                .ok_or_else(|| format!("expected final, 2pi or a non-negative time, got {v:?}")),
        }
    }
}

/// Qubit labels `(j, k)` of the first qubit and `(m, n)` of the second, for
/// the operator block `<j m| rho |k n>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchLabel {
    pub j: i8,
    pub k: i8,
    pub m: i8,
    pub n: i8,
}

fn check_sign(v: i8) -> Result<i8> {
    if v == 1 || v == -1 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name: "branch label",
            value: f64::from(v),
            reason: "qubit eigenvalues are +1 or -1",
        })
    }
}

fn basis_index(first: i8, second: i8) -> usize {
    2 * usize::from(first < 0) + usize::from(second < 0)
}

fn sign_char(v: i8) -> char {
    if v > 0 {
        '+'
    } else {
        '-'
    }
}

impl BranchLabel {
    pub fn new(j: i8, k: i8, m: i8, n: i8) -> Result<Self> {
        Ok(Self {
            j: check_sign(j)?,
            k: check_sign(k)?,
            m: check_sign(m)?,
            n: check_sign(n)?,
        })
    }

    pub fn diagonal(j: i8, m: i8) -> Result<Self> {
        Self::new(j, j, m, m)
    }

    /// All sixteen blocks in row-major `(ket, bra)` order.
    pub fn all() -> [BranchLabel; 16] {
        let s = [1i8, -1];
        let mut out = [BranchLabel { j: 1, k: 1, m: 1, n: 1 }; 16];
        for (a, &(j, m)) in [(s[0], s[0]), (s[0], s[1]), (s[1], s[0]), (s[1], s[1])]
            .iter()
            .enumerate()
        {
            for (b, &(k, n)) in [(s[0], s[0]), (s[0], s[1]), (s[1], s[0]), (s[1], s[1])]
                .iter()
                .enumerate()
            {
                out[4 * a + b] = BranchLabel { j, k, m, n };
            }
        }
        out
    }

    pub fn diagonals() -> [BranchLabel; 4] {
        [(1, 1), (1, -1), (-1, 1), (-1, -1)].map(|(j, m)| BranchLabel { j, k: j, m, n: m })
    }

    pub fn is_diagonal(&self) -> bool {
        self.j == self.k && self.m == self.n
    }

    pub fn ket_index(&self) -> usize {
        basis_index(self.j, self.m)
    }

    pub fn bra_index(&self) -> usize {
        basis_index(self.k, self.n)
    }

    /// Number of qubits whose ket and bra labels differ.
    pub fn flips(&self) -> u8 {
        u8::from(self.j != self.k) + u8::from(self.m != self.n)
    }

    /// `jm` for diagonal blocks, `jm|kn` otherwise, with `+`/`-` symbols.
    pub fn name(&self) -> String {
        if self.is_diagonal() {
            format!("{}{}", sign_char(self.j), sign_char(self.m))
        } else {
            format!(
                "{}{}|{}{}",
                sign_char(self.j),
                sign_char(self.m),
                sign_char(self.k),
                sign_char(self.n)
            )
        }
    }

    fn forces(&self, drift: &DriftSpec) -> (Vec4, Vec4) {
        (
            drift.branch_force(self.j, self.m),
            drift.branch_force(self.k, self.n),
        )
    }
}

/// Complex first moments `Tr[r rho_block] / Tr[rho_block]` of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchMoments(pub Vector4<C64>);

impl BranchMoments {
    pub fn zero() -> Self {
        Self(Vector4::zeros())
    }

    pub fn from_real(v: Vec4) -> Self {
        Self(v.map(|x| Complex::new(x, 0.0)))
    }

    pub fn real(&self) -> Vec4 {
        self.0.map(|z| z.re)
    }

    pub fn imag(&self) -> Vec4 {
        self.0.map(|z| z.im)
    }
}

/// Decay exponents of the qubit coherences.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ContrastSet {
    /// Relative-mode contrast of ground-state masses.
    pub c1: f64,
    /// Common-mode contrast of ground-state masses.
    pub c2: f64,
    /// Relative-mode contrast of the squeezed thermal input.
    pub c_s_np_1: f64,
    /// Common-mode contrast of the squeezed thermal input.
    pub c_s_np_2: f64,
    pub c_gamma_1: f64,
    pub c_gamma_2: f64,
    /// Qubit dephasing per flipped qubit.
    pub c_z: f64,
}

impl ContrastSet {
    /// Exponent on coherences where one qubit differs between ket and bra.
    pub fn single_flip(&self) -> f64 {
        self.c_s_np_1 + self.c_s_np_2 + self.c_gamma_1 + self.c_gamma_2 + self.c_z
    }

    /// Exponent on `|++><--|`, which probes the common mode.
    pub fn common_flip(&self) -> f64 {
        4.0 * (self.c_s_np_2 + self.c_gamma_2) + 2.0 * self.c_z
    }

    /// Exponent on `|+-><-+|`, which probes the relative mode.
    pub fn relative_flip(&self) -> f64 {
        4.0 * (self.c_s_np_1 + self.c_gamma_1) + 2.0 * self.c_z
    }

    pub fn all_non_negative(&self) -> bool {
        [
            self.c1,
            self.c2,
            self.c_s_np_1,
            self.c_s_np_2,
            self.c_gamma_1,
            self.c_gamma_2,
            self.c_z,
        ]
        .iter()
        .all(|c| *c >= 0.0)
    }
}

/// A QRDM with the phase and exponents it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QrdmEvaluation {
    pub tau: f64,
    pub phase: f64,
    pub contrasts: ContrastSet,
    pub qrdm: Qrdm,
}

/// The four diagonal branch trajectories at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalBranches {
    pub plus_plus: Vec4,
    pub plus_minus: Vec4,
    pub minus_plus: Vec4,
    pub minus_minus: Vec4,
}

impl DiagonalBranches {
    pub fn iter(&self) -> impl Iterator<Item = (BranchLabel, Vec4)> + '_ {
        BranchLabel::diagonals()
            .into_iter()
            .zip([self.plus_plus, self.plus_minus, self.minus_plus, self.minus_minus])
    }
}

/// Diagonal branch first moments.
pub fn branch_trajectories(f_q: f64, g: f64, tau: f64) -> Result<DiagonalBranches> {
    let w = relative_frequency(g)?;
    let (c, s) = (tau.cos(), tau.sin());
    let (cw, sw) = ((w * tau).cos(), (w * tau).sin());
    let plus_plus = Vector4::new(c - 1.0, -s, c - 1.0, -s) * f_q;
    let plus_minus = Vector4::new((cw - 1.0) / (w * w), -sw / w, -(cw - 1.0) / (w * w), sw / w) * f_q;
    Ok(DiagonalBranches {
        plus_plus,
        plus_minus,
        minus_plus: -plus_minus,
        minus_minus: -plus_plus,
    })
}

/// Position gap `4 f_q sin^2(pi / omega_g)` between the `++` and `--`
/// branches when the relative mode closes.
pub fn residual_separation(f_q: f64, g: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    Ok(4.0 * f_q * (PI / w).sin().powi(2))
}

/// Entangling phase `f^2 (sin tau + 2 g tau / omega_g^2 - sin(omega_g tau) / omega_g^3)`.
pub fn entangling_phase(f_q: f64, g: f64, tau: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    Ok(f_q * f_q * (tau.sin() + 2.0 * g * tau / (w * w) - (w * tau).sin() / w.powi(3)))
}

/// Phase at `tau_f`: `4 pi g f^2 / omega_g^3 + f^2 sin(2 pi / omega_g)`.
pub fn final_phase(f_q: f64, g: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    Ok(4.0 * PI * g * f_q * f_q / w.powi(3) + f_q * f_q * (2.0 * PI / w).sin())
}

/// Single-flip contrast at `tau_f`: `2 f^2 sin^2(pi / omega_g)`.
pub fn final_contrast(f_q: f64, g: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    Ok(2.0 * f_q * f_q * (PI / w).sin().powi(2))
}

/// Relative-mode contrast of ground-state masses.
pub fn contrast_relative(f_q: f64, g: f64, tau: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    let v = 2.0 * f_q * f_q / w.powi(4)
        * (0.5 * tau * w).sin().powi(2)
        * (1.0 - g * (1.0 + (tau * w).cos()));
    Ok(v.max(0.0))
}

/// Common-mode contrast of ground-state masses: `f^2 (1 - cos tau)`.
pub fn contrast_common(f_q: f64, tau: f64) -> f64 {
    (f_q * f_q * (1.0 - tau.cos())).max(0.0)
}

pub fn squeezed_contrast_relative(f_q: f64, g: f64, s: f64, n_p: f64, tau: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    let sw2 = s * s * w * w;
    let v = (1.0 + 2.0 * n_p) * f_q * f_q / (4.0 * w.powi(4) * s)
        * ((1.0 - sw2) * (2.0 * tau * w).cos() + sw2 - 4.0 * (tau * w).cos() + 3.0);
    Ok(v.max(0.0))
}

pub fn squeezed_contrast_common(f_q: f64, s: f64, n_p: f64, tau: f64) -> f64 {
    let v = (1.0 + 2.0 * n_p)
        * f_q
        * f_q
        * (0.5 * tau).sin().powi(2)
        * ((s - 1.0 / s) * tau.cos() + s + 1.0 / s);
    v.max(0.0)
}

/// Common-mode contrast at `tau_f` for the squeezed thermal input.
pub fn squeezed_contrast_final(f_q: f64, g: f64, s: f64, n_p: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    Ok((1.0 + 2.0 * n_p)
        * f_q
        * f_q
        * (PI / w).sin().powi(2)
        * ((s - 1.0 / s) * (2.0 * PI / w).cos() + s + 1.0 / s))
}

pub fn diffusion_contrast_relative(f_q: f64, g: f64, gamma_x: f64, tau: f64) -> Result<f64> {
    let w = relative_frequency(g)?;
    let v = gamma_x * f_q * f_q / (8.0 * w.powi(5))
        * (6.0 * tau * w - 8.0 * (tau * w).sin() + (2.0 * tau * w).sin());
    Ok(v.max(0.0))
}

pub fn diffusion_contrast_common(f_q: f64, gamma_x: f64, tau: f64) -> f64 {
    let v = gamma_x * f_q * f_q / 4.0 * (3.0 * tau + tau.sin() * (tau.cos() - 4.0));
    v.max(0.0)
}

fn qrdm_from_contrasts(phase: f64, contrasts: &ContrastSet) -> Qrdm {
    Qrdm::from_coherences(
        Complex::from_polar((-contrasts.single_flip()).exp(), phase),
        (-contrasts.common_flip()).exp(),
        (-contrasts.relative_flip()).exp(),
    )
}

/// QRDM of ground-state masses and `|++>` qubits after time `tau`.
pub fn unitary_qrdm(f_q: f64, g: f64, tau: f64) -> Result<QrdmEvaluation> {
    non_negative("f_q", f_q)?;
    non_negative("tau", tau)?;
    let c1 = contrast_relative(f_q, g, tau)?;
    let c2 = contrast_common(f_q, tau);
    let contrasts = ContrastSet {
        c1,
        c2,
        c_s_np_1: c1,
        c_s_np_2: c2,
        ..ContrastSet::default()
    };
    let phase = entangling_phase(f_q, g, tau)?;
    Ok(QrdmEvaluation {
        tau,
        phase,
        contrasts,
        qrdm: qrdm_from_contrasts(phase, &contrasts),
    })
}

/// All closed-form exponents for the noisy, squeezed thermal setting.
pub fn contrast_set(p: &UnitlessParams, tau: f64) -> Result<ContrastSet> {
    p.validate()?;
    non_negative("tau", tau)?;
    Ok(ContrastSet {
        c1: contrast_relative(p.f_q, p.g, tau)?,
        c2: contrast_common(p.f_q, tau),
        c_s_np_1: squeezed_contrast_relative(p.f_q, p.g, p.s, p.n_p, tau)?,
        c_s_np_2: squeezed_contrast_common(p.f_q, p.s, p.n_p, tau),
        c_gamma_1: diffusion_contrast_relative(p.f_q, p.g, p.gamma_x, tau)?,
        c_gamma_2: diffusion_contrast_common(p.f_q, p.gamma_x, tau),
        c_z: p.gamma_z * tau,
    })
}

/// QRDM for squeezed thermal masses under momentum diffusion and qubit
/// dephasing. The phase is the unitary one.
pub fn open_qrdm(p: &UnitlessParams, tau: f64) -> Result<QrdmEvaluation> {
    let contrasts = contrast_set(p, tau)?;
    let phase = entangling_phase(p.f_q, p.g, tau)?;
    Ok(QrdmEvaluation {
        tau,
        phase,
        contrasts,
        qrdm: qrdm_from_contrasts(phase, &contrasts),
    })
}

/// Initial covariance `(1 + 2 n_p) diag(s, 1/s, s, 1/s)`.
pub fn initial_covariance(p: &UnitlessParams) -> Result<CovarianceMatrix> {
    CovarianceMatrix::squeezed_thermal(p.s, p.n_p)
}

pub fn diffusion_matrix(p: &UnitlessParams) -> Result<DiffusionMatrix> {
    DiffusionMatrix::position_dephasing(p.gamma_x)
}

/// `sigma_s(tau_f)`: unitary covariance of squeezed vacua at `tau_f`.
pub fn squeezed_covariance_final(g: f64, s: f64) -> Result<Mat4> {
    let w = relative_frequency(g)?;
    let ds2 = 1.0 - s * s;
    let c4 = (4.0 * PI / w).cos();
    let s4 = (4.0 * PI / w).sin();
    let sq = (2.0 * PI / w).sin().powi(2);
    let xx = 3.0 * s * s + 1.0 - ds2 * c4;
    let pp = s * s + 3.0 + ds2 * c4;
    let xp = ds2 * s4;
    let x1x2 = 2.0 * ds2 * sq;
    let p1p2 = -2.0 * ds2 * sq;
    #[rustfmt::skip]
    let m = Mat4::new(
        xx,   xp,   x1x2, xp,
        xp,   pp,   xp,   p1p2,
        x1x2, xp,   xx,   xp,
        xp,   p1p2, xp,   pp,
    );
    Ok(m / (4.0 * s))
}

/// `sigma~(tau_f)`: covariance injected by unit-rate momentum diffusion up to `tau_f`.
pub fn diffusion_covariance_final(g: f64) -> Result<Mat4> {
    let w = relative_frequency(g)?;
    let s4 = (4.0 * PI / w).sin() / 8.0;
    let sq = (2.0 * PI / w).sin().powi(2) / 4.0;
    let xx = PI * (1.0 - g) / w.powi(3) - s4;
    let x1x2 = -PI * g / w.powi(3) - s4;
    let pp = PI / w + s4;
    #[rustfmt::skip]
    let m = Mat4::new(
        xx,   sq, x1x2, sq,
        sq,   pp, sq,   s4,
        x1x2, sq, xx,   sq,
        sq,   s4, sq,   pp,
    );
    Ok(m)
}

/// `(sigma_s(tau), sigma~(tau))` with `Sigma = (1 + 2 n_p) sigma_s + Gamma_x sigma~`.
pub fn covariance_decomposition(p: &UnitlessParams, tau: f64) -> Result<(Mat4, Mat4)> {
    let s = propagator(p.g, tau)?.into_inner();
    let sig = CovarianceMatrix::squeezed_thermal(p.s, 0.0)?.into_inner();
    let unit = DiffusionMatrix::position_dephasing(1.0)?;
    Ok((s * sig * s.transpose(), lyapunov_integral(p.g, tau, &unit)?))
}

/// Matrix-route evaluation of the block moments for arbitrary `H_m`-based
/// dynamics. Works for any initial covariance and diffusion; the closed
/// forms above are special cases.
#[derive(Debug, Clone)]
pub struct GeneralModel {
    g: f64,
    h_inv: Mat4,
    omega: Mat4,
    drift: DriftSpec,
    sigma0: CovarianceMatrix,
    diffusion: DiffusionMatrix,
    gamma_z: f64,
}

/// Phase and contrast of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockDecay {
    pub phase: f64,
    /// Part of the contrast present without diffusion.
    pub coherent: f64,
    pub diffusive: f64,
    pub dephasing: f64,
}

impl BlockDecay {
    pub fn total(&self) -> f64 {
        self.coherent + self.diffusive + self.dephasing
    }
}

impl GeneralModel {
    pub fn new(
        g: f64,
        drift: DriftSpec,
        sigma0: CovarianceMatrix,
        diffusion: DiffusionMatrix,
        gamma_z: f64,
    ) -> Result<Self> {
        let h = sgi_hamiltonian_matrix(g)?;
        Ok(Self {
            g,
            h_inv: h.inverse()?,
            omega: *symplectic_form().matrix(),
            drift,
            sigma0,
            diffusion,
            gamma_z: non_negative("gamma_z", gamma_z)?,
        })
    }

    pub fn from_params(p: &UnitlessParams) -> Result<Self> {
        p.validate()?;
        Self::new(
            p.g,
            DriftSpec::sgi(p.f_q),
            initial_covariance(p)?,
            diffusion_matrix(p)?,
            p.gamma_z,
        )
    }

    /// Same model with another diffusion matrix.
    pub fn with_diffusion(mut self, diffusion: DiffusionMatrix) -> Self {
        self.diffusion = diffusion;
        self
    }

    fn s(&self, t: f64) -> Mat4 {
        // coupling validated in `new`
        propagator(self.g, t).expect("validated coupling").into_inner()
    }

    /// `K(t) = int_0^t S(u)^T du = Omega H^-1 (S(t)^T - I)`.
    fn k(&self, t: f64) -> Mat4 {
        self.omega * self.h_inv * (self.s(t).transpose() - Mat4::identity())
    }

    /// `int_0^t S(u) du`.
    fn s_integral(&self, t: f64) -> Mat4 {
        -(self.s(t) - Mat4::identity()) * self.h_inv * self.omega
    }

    fn lambda(&self, t: f64) -> Mat4 {
        lyapunov_integral(self.g, t, &self.diffusion).expect("validated coupling")
    }

    fn mean_and_difference(&self, label: &BranchLabel) -> (Vec4, Vec4) {
        let (ua, ub) = label.forces(&self.drift);
        (0.5 * (ua + ub), ua - ub)
    }

    /// Block first moments at `tau` starting from centred Gaussians.
    pub fn first_moments(&self, label: &BranchLabel, tau: f64) -> Result<BranchMoments> {
        self.first_moments_from(label, &BranchMoments::zero(), tau)
    }

    fn first_moments_from(
        &self,
        label: &BranchLabel,
        r0: &BranchMoments,
        tau: f64,
    ) -> Result<BranchMoments> {
        non_negative("tau", tau)?;
        let (mean, delta) = self.mean_and_difference(label);
        let s = self.s(tau);
        let re = (s - Mat4::identity()) * self.h_inv * mean;
        let mut im = s * self.sigma0.matrix() * self.k(tau) * delta;
        if !self.diffusion.is_zero() && delta.amax() > 0.0 {
            let m = quadrature::integrate(
                |t| self.s(tau - t) * self.lambda(t),
                0.0,
                tau,
                GENERAL_REL_TOL,
                1e-300,
            );
            im += m * delta;
        }
        let drift = Vector4::from_fn(|i, _| Complex::new(re[i], -0.5 * im[i]));
        let s_c = s.map(|x| Complex::new(x, 0.0));
        Ok(BranchMoments(s_c * r0.0 + drift))
    }

    /// Phase and contrast of block `label` at `tau`, for centred initial Gaussians.
    pub fn block_decay(&self, label: &BranchLabel, tau: f64) -> Result<BlockDecay> {
        non_negative("tau", tau)?;
        let (mean, delta) = self.mean_and_difference(label);
        let phase = (delta.transpose()
            * (tau * Mat4::identity() - self.s_integral(tau))
            * self.h_inv
            * mean)[0];
        let kd = self.k(tau) * delta;
        let coherent = 0.25 * (kd.transpose() * self.sigma0.matrix() * kd)[0];
        let diffusive = if self.diffusion.is_zero() || delta.amax() == 0.0 {
            0.0
        } else {
            let d = *self.diffusion.matrix();
            0.5 * quadrature::integrate_scalar(
                |u| (tau - u) * (delta.transpose() * self.s(u) * d * self.k(u) * delta)[0],
                0.0,
                tau,
                GENERAL_REL_TOL,
                1e-300,
            )
        };
        Ok(BlockDecay {
            phase,
            coherent,
            diffusive,
            dephasing: self.gamma_z * tau * f64::from(label.flips()),
        })
    }

    /// QRDM at `tau` from `|++>` qubits and centred Gaussians.
    pub fn qrdm(&self, tau: f64) -> Result<Qrdm> {
        let mut m = *Qrdm::plus_plus().matrix();
        for label in BranchLabel::all() {
            let d = self.block_decay(&label, tau)?;
            m[(label.ket_index(), label.bra_index())] *= Complex::from_polar((-d.total()).exp(), d.phase);
        }
        Qrdm::new(m)
    }
}

/// Block first moments through the general matrix route.
pub fn general_first_moments(
    label: &BranchLabel,
    p: &UnitlessParams,
    tau: f64,
    diffusion: &DiffusionMatrix,
) -> Result<BranchMoments> {
    GeneralModel::from_params(p)?
        .with_diffusion(*diffusion)
        .first_moments(label, tau)
}

/// Covariance, block first moments and QRDM of the cat state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCatState {
    pub tau: f64,
    pub sigma: CovarianceMatrix,
    pub branches: [(BranchLabel, BranchMoments); 16],
    pub qrdm: Qrdm,
}

impl GaussianCatState {
    /// Centred squeezed thermal masses and `|++>` qubits.
    pub fn initial(p: &UnitlessParams) -> Result<Self> {
        Ok(Self {
            tau: 0.0,
            sigma: initial_covariance(p)?,
            branches: BranchLabel::all().map(|l| (l, BranchMoments::zero())),
            qrdm: Qrdm::plus_plus(),
        })
    }

    pub fn branch(&self, label: &BranchLabel) -> BranchMoments {
        self.branches[4 * label.ket_index() + label.bra_index()].1
    }
}

/// Evolves a cat state by `tau` under the forces, coupling and noise of `p`.
/// The initial state's `s` and `n_p` are ignored in favour of its own covariance.
pub fn evolve_cat_state(
    initial: &GaussianCatState,
    p: &UnitlessParams,
    tau: f64,
) -> Result<GaussianCatState> {
    p.validate()?;
    non_negative("tau", tau)?;
    let diffusion = diffusion_matrix(p)?;
    let model = GeneralModel::new(
        p.g,
        DriftSpec::sgi(p.f_q),
        initial.sigma,
        diffusion,
        p.gamma_z,
    )?;
    let sigma = evolve_covariance(&initial.sigma, p.g, tau, &diffusion)?;
    let s_int = model.s_integral(tau);
    let mut branches = initial.branches;
    let mut rho = *initial.qrdm.matrix();
    for (label, moments) in branches.iter_mut() {
        let (_, delta) = model.mean_and_difference(label);
        let decay = model.block_decay(label, tau)?;
        // drift of the initial displacement: -i Delta^T int S r0
        let carried = (s_int.map(|x| Complex::new(x, 0.0)) * moments.0)
            .iter()
            .zip(delta.iter())
            .fold(C64::new(0.0, 0.0), |acc, (z, d)| acc + z * *d);
        let factor = (C64::new(-decay.total(), decay.phase) - C64::new(0.0, 1.0) * carried).exp();
        rho[(label.ket_index(), label.bra_index())] *= factor;
        *moments = model.first_moments_from(label, moments, tau)?;
    }
    Ok(GaussianCatState {
        tau: initial.tau + tau,
        sigma,
        branches,
        qrdm: Qrdm::new(rho)?,
    })
}

/// Diagonal branch trajectories on an even grid `0..=tau_max`.
pub fn sample_trajectories(
    f_q: f64,
    g: f64,
    tau_max: f64,
    n_steps: usize,
) -> Result<Vec<(f64, DiagonalBranches)>> {
    non_negative("tau_max", tau_max)?;
    if n_steps == 0 {
        return Err(Error::InvalidParameter {
            name: "n_steps",
            value: 0.0,
            reason: "need at least one step",
        });
    }
    (0..=n_steps)
        .map(|i| {
            let t = tau_max * (i as f64 / n_steps as f64);
            Ok((t, branch_trajectories(f_q, g, t)?))
        })
        .collect()
}
