//! Two-qubit reduced states, PPT negativity and Pauli witnesses.
//!
//! Basis order is `|++>, |+->, |-+>, |-->` in sigma_z eigenvalues, i.e. the
//! computational states `|00>, |01>, |10>, |11>`.

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::ContrastSet;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat4 = Matrix4<C64>;

/// Hermiticity accepted when constructing a [`Qrdm`].
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Trace deviation accepted when constructing a [`Qrdm`].
pub const TRACE_TOL: f64 = 1e-8;
/// Imaginary part tolerated in a witness expectation value.
pub const IMAGINARY_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A two-qubit density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qrdm(CMat4);

impl Qrdm {
    pub fn new(m: CMat4) -> Result<Self> {
        let dev = hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidParameter {
                name: "trace",
                value: tr.re,
                reason: "density matrix must have unit trace",
            });
        }
        Ok(Self(m))
    }

    /// `|++><++|` in the sigma_x basis, the interferometer input.
    pub fn plus_plus() -> Self {
        Self(CMat4::from_element(c(0.25, 0.0)))
    }

    pub fn maximally_mixed() -> Self {
        Self(CMat4::identity() * c(0.25, 0.0))
    }

    /// `(|00> + |11>) / sqrt 2`.
    pub fn bell_phi_plus() -> Self {
        let mut m = CMat4::zeros();
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            m[(i, j)] = c(0.5, 0.0);
        }
        Self(m)
    }

    /// The symmetric pattern produced by the interferometers from `|++>`:
    /// `a` on single-qubit coherences (with the phase sign set by the
    /// spectator qubit), `b` on `|00><11|` and `c` on `|01><10|`.
    pub fn from_coherences(a: C64, b: f64, cc: f64) -> Self {
        let q = c(0.25, 0.0);
        let one = c(1.0, 0.0);
        let ac = a.conj();
        let (b, cc) = (c(b, 0.0), c(cc, 0.0));
        #[rustfmt::skip]
        let m = CMat4::new(
            one, ac,  ac,  b,
            a,   one, cc,  a,
            a,   cc,  one, a,
            b,   ac,  ac,  one,
        );
        Self(m * q)
    }

    /// Coherences `exp(-C +/- i phi)` on single flips, `exp(-4C)` on `|00><11|`,
    /// full coherence between `|01>` and `|10>`.
    pub fn ideal(phi: f64, contrast: f64) -> Self {
        Self::from_coherences(
            C64::from_polar((-contrast).exp(), phi),
            (-4.0 * contrast).exp(),
            1.0,
        )
    }

    pub fn matrix(&self) -> &CMat4 {
        &self.0
    }

    pub fn into_inner(self) -> CMat4 {
        self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        hermitian_deviation(&self.0)
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        sorted_eigenvalues(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Partial transpose on the second qubit.
    pub fn partial_transpose(&self) -> CMat4 {
        partial_transpose(&self.0)
    }
}

fn hermitian_deviation(m: &CMat4) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sorted_eigenvalues(m: &CMat4) -> [f64; 4] {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2], ev[3]]
}

/// Transposes the second tensor factor of a two-qubit operator.
pub fn partial_transpose(m: &CMat4) -> CMat4 {
    CMat4::from_fn(|r, col| {
        let (i1, i2) = (r / 2, r % 2);
        let (j1, j2) = (col / 2, col % 2);
        m[(2 * i1 + j2, 2 * j1 + i2)]
    })
}

/// Smallest eigenvalue of the partial transpose.
pub fn min_pt_eigenvalue(rho: &Qrdm) -> f64 {
    sorted_eigenvalues(&rho.partial_transpose())[0]
}

/// `max(0, -2 lambda_min)` of the partially transposed state.
pub fn negativity_exact(rho: &Qrdm) -> Result<f64> {
    let dev = rho.hermitian_deviation();
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian(dev));
    }
    Ok((-2.0 * min_pt_eigenvalue(rho)).max(0.0))
}

/// `f(C) = exp(-C) sinh(2C) / 2`.
pub fn contrast_factor(contrast: f64) -> f64 {
    0.5 * (-contrast).exp() * (2.0 * contrast).sinh()
}

/// `(exp(-C)/2) [sqrt(sin^2 phi + f(C)^2) - f(C)]`, the magnitude of the
/// negative partial-transpose eigenvalue of [`Qrdm::ideal`].
pub fn negativity_closed_form(phi: f64, contrast: f64) -> f64 {
    let f = contrast_factor(contrast);
    0.5 * (-contrast).exp() * ((phi.sin().powi(2) + f * f).sqrt() - f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<C64> {
        let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
        match self {
            Pauli::I => Matrix2::new(o, z, z, o),
            Pauli::X => Matrix2::new(z, o, o, z),
            Pauli::Y => Matrix2::new(z, -i, i, z),
            Pauli::Z => Matrix2::new(o, z, z, -o),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// `P (x) Q`.
pub fn pauli_product(p: Pauli, q: Pauli) -> CMat4 {
    let a = p.matrix();
    let b = q.matrix();
    CMat4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

/// One term `coefficient * P (x) Q` of a Pauli expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub first: Pauli,
    pub second: Pauli,
}

impl PauliTerm {
    pub fn label(&self) -> String {
        format!("{}{}", self.first.symbol(), self.second.symbol())
    }
}

/// Real Pauli coefficients `Tr[(P (x) Q) M] / 4` of a Hermitian operator;
/// terms below `1e-15` are dropped.
pub fn pauli_decompose(m: &CMat4) -> Vec<PauliTerm> {
    let mut out = Vec::new();
    for p in Pauli::ALL {
        for q in Pauli::ALL {
            let coefficient = (pauli_product(p, q) * m).trace().re / 4.0;
            if coefficient.abs() > 1e-15 {
                out.push(PauliTerm {
                    coefficient,
                    first: p,
                    second: q,
                });
            }
        }
    }
    out
}

pub fn pauli_sum(terms: &[PauliTerm]) -> CMat4 {
    terms.iter().fold(CMat4::zeros(), |acc, t| {
        acc + pauli_product(t.first, t.second) * c(t.coefficient, 0.0)
    })
}

/// A Hermitian witness together with its local-measurement expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessOperator {
    matrix: CMat4,
    pauli_terms: Vec<PauliTerm>,
}

impl WitnessOperator {
    fn from_terms(pauli_terms: Vec<PauliTerm>) -> Self {
        Self {
            matrix: pauli_sum(&pauli_terms),
            pauli_terms,
        }
    }

    fn from_matrix(matrix: CMat4) -> Self {
        Self {
            pauli_terms: pauli_decompose(&matrix),
            matrix,
        }
    }

    pub fn matrix(&self) -> &CMat4 {
        &self.matrix
    }

    pub fn pauli_terms(&self) -> &[PauliTerm] {
        &self.pauli_terms
    }

    /// `max |matrix - sum of Pauli terms|`.
    pub fn decomposition_error(&self) -> f64 {
        (self.matrix - pauli_sum(&self.pauli_terms))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        sorted_eigenvalues(&self.matrix)
    }
}

/// `(XX + YZ + ZY - II) / 2`.
pub fn small_coupling_witness() -> WitnessOperator {
    let t = |coefficient, first, second| PauliTerm {
        coefficient,
        first,
        second,
    };
    WitnessOperator::from_terms(vec![
        t(0.5, Pauli::X, Pauli::X),
        t(0.5, Pauli::Y, Pauli::Z),
        t(0.5, Pauli::Z, Pauli::Y),
        t(-0.5, Pauli::I, Pauli::I),
    ])
}

/// Negativity witness `-2 (|l><l|)^PT` built from the negative
/// partial-transpose eigenvector of [`Qrdm::ideal`], parameterised by its
/// amplitude ratio `w`. `None` gives the `w -> 1` limit.
pub fn witness_operator(w: Option<f64>) -> Result<WitnessOperator> {
    let Some(w) = w else {
        return Ok(small_coupling_witness());
    };
    if !(w > 0.0 && w.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "w",
            value: w,
            reason: "witness ratio must be positive",
        });
    }
    let (o, iw, w2) = (c(1.0, 0.0), c(0.0, w), c(w * w, 0.0));
    #[rustfmt::skip]
    let m = CMat4::new(
        o,    iw,  iw,  -w2,
        -iw,  w2,  -o,  -iw,
        -iw,  -o,  w2,  -iw,
        -w2,  iw,  iw,  o,
    );
    Ok(WitnessOperator::from_matrix(m * c(-1.0 / (1.0 + w * w), 0.0)))
}

/// Optimal `w` for [`Qrdm::ideal`] at `(phi, C)`.
pub fn optimal_witness_ratio(phi: f64, contrast: f64) -> f64 {
    let f = contrast_factor(contrast);
    let s = phi.sin();
    if s == 0.0 {
        return 1.0;
    }
    ((s * s + f * f).sqrt() - f) / s
}

/// The `w = 1` witness matrix written out entry by entry, with the overall
/// factor `-1/4` of the published appendix.
pub fn appendix_witness_matrix() -> CMat4 {
    let (o, i) = (c(1.0, 0.0), c(0.0, 1.0));
    #[rustfmt::skip]
    let m = CMat4::new(
        o,  i,  i,  -o,
        -i, o,  -o, -i,
        -i, -o, o,  -i,
        -o, i,  i,  o,
    );
    m * c(-0.25, 0.0)
}

/// `Re Tr[W rho]`.
pub fn witness_trace(rho: &Qrdm, w: &WitnessOperator) -> Result<f64> {
    let t = (w.matrix * rho.0).trace();
    if t.im.abs() > IMAGINARY_TOL {
        return Err(Error::ImaginaryResidue(t.im));
    }
    Ok(t.re)
}

/// `Tr[W rho]` for the small-coupling witness evaluated on the interferometer
/// output, written in terms of the phase and the decay exponents:
/// `exp(-C_single) sin phi - (2 - exp(-C_common) - exp(-C_relative)) / 4`.
pub fn witness_negativity(phi: f64, contrasts: &ContrastSet) -> f64 {
    (-contrasts.single_flip()).exp() * phi.sin()
        - 0.25 * (2.0 - (-contrasts.common_flip()).exp() - (-contrasts.relative_flip()).exp())
}

/// The three negativity estimates side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    /// `max(0, -2 lambda_min)` from the eigensolver.
    pub exact: f64,
    /// Closed form evaluated with the single-flip contrast.
    pub closed_form: f64,
    /// `Tr[W rho]` with the small-coupling witness.
    pub witness_trace: f64,
    /// Raw smallest eigenvalue of the partial transpose.
    pub lambda_min: f64,
    pub phase: f64,
    pub contrasts: ContrastSet,
}

impl NegativityResult {
    pub fn evaluate(rho: &Qrdm, phase: f64, contrasts: ContrastSet) -> Result<Self> {
        Ok(Self {
            exact: negativity_exact(rho)?,
            closed_form: negativity_closed_form(phase, contrasts.single_flip()),
            witness_trace: witness_trace(rho, &small_coupling_witness())?,
            lambda_min: min_pt_eigenvalue(rho),
            phase,
            contrasts,
        })
    }

    /// Whether any estimator certifies entanglement.
    pub fn entangled(&self) -> bool {
        self.exact > 0.0 || self.witness_trace > 0.0
    }
}
