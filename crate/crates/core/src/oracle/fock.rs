//! Truncated Fock-space propagation of two qubits and two oscillators.
//!
//! The qubit Hamiltonian is diagonal in sigma_z, so the state splits into
//! sixteen oscillator blocks `<a| rho |b>`; each evolves under
//! `d rho_ab = -i (H_a rho_ab - rho_ab H_b) + noise`. Noise-free runs with
//! few thermal components propagate wavefunctions instead of blocks.

use nalgebra::{Complex, DMatrix, Matrix4, SymmetricEigen, Vector4};

use crate::dynamics::{BranchLabel, BranchMoments};
use crate::entanglement::{Qrdm, C64};
use crate::error::{Error, Result};
use crate::phase_space::Mat4;
use crate::potentials::UnitlessParams;

/// Population allowed in the top two Fock levels of either mode.
pub const LEAKAGE_LIMIT: f64 = 1e-6;
/// Diagonal blocks drifting further than this from Hermitian are repaired.
pub const HERMITIAN_DRIFT: f64 = 1e-9;
/// Smallest cutoff accepted.
pub const MIN_CUTOFF: usize = 8;
const WEIGHT_CUTOFF: f64 = 1e-13;
const MAX_PURE_COMPONENTS: usize = 16;
/// Largest block dimension the density route will allocate.
const MAX_DENSITY_DIM: usize = 400;

#[derive(Debug, Clone)]
pub struct FockProblem {
    /// Highest Fock number kept in each mode.
    pub n_max: usize,
    pub params: UnitlessParams,
    pub tau_grid: Vec<f64>,
    /// Initial qubit amplitudes in the `|++>, |+->, |-+>, |-->` basis.
    pub qubits: Vector4<C64>,
    /// Largest RK4 step.
    pub step: f64,
}

impl FockProblem {
    pub fn new(n_max: usize, params: UnitlessParams, tau_grid: Vec<f64>) -> Self {
        Self {
            n_max,
            params,
            tau_grid,
            qubits: Vector4::from_element(Complex::new(0.5, 0.0)),
            step: 0.01,
        }
    }

    /// Cutoff suggested for a given force: `10 (2 f_q)^2 + 10`.
    pub fn suggested_cutoff(f_q: f64) -> usize {
        ((10.0 * (2.0 * f_q).powi(2) + 10.0).ceil() as usize).max(MIN_CUTOFF)
    }
}

#[derive(Debug, Clone)]
pub struct FockSnapshot {
    pub tau: f64,
    pub qrdm: Qrdm,
    /// `Tr rho` before normalising the QRDM.
    pub trace: f64,
    pub leakage: f64,
    /// `Tr[r rho_ab] / Tr[rho_ab]` in `BranchLabel::all()` order.
    pub moments: [BranchMoments; 16],
    /// Covariance of the `++` block.
    pub covariance: Mat4,
}

#[derive(Debug, Clone)]
pub struct FockResult {
    pub snapshots: Vec<FockSnapshot>,
    pub max_leakage: f64,
    pub max_trace_deviation: f64,
    pub hermitian_repairs: usize,
    /// Whether wavefunctions (true) or density blocks were propagated.
    pub pure_route: bool,
}

impl FockResult {
    pub fn moments(&self, index: usize, label: &BranchLabel) -> BranchMoments {
        self.snapshots[index].moments[4 * label.ket_index() + label.bra_index()]
    }
}

/// Real sparse matrix in compressed rows, scaled by a complex constant.
#[derive(Debug, Clone)]
struct Sparse {
    n: usize,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Sparse {
    fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|e| (e.0, e.1));
        let mut ptr = vec![0; n + 1];
        let mut col = Vec::with_capacity(t.len());
        let mut val: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *val.last_mut().expect("merged entry") += v;
                continue;
            }
            col.push(c);
            val.push(v);
            ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            ptr[i + 1] += ptr[i];
        }
        Self { n, ptr, col, val }
    }

    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.val.len());
        for r in 0..self.n {
            for k in self.ptr[r]..self.ptr[r + 1] {
                out.push((r, self.col[k], self.val[k]));
            }
        }
        out
    }

    fn combine(n: usize, parts: &[(f64, &Sparse)]) -> Self {
        let t = parts
            .iter()
            .flat_map(|(s, m)| m.triplets().into_iter().map(move |(r, c, v)| (r, c, s * v)))
            .collect();
        Self::from_triplets(n, t)
    }

    fn matvec(&self, x: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (self.ptr[r]..self.ptr[r + 1])
                .map(|k| x[self.col[k]] * self.val[k])
                .sum();
        }
    }

    /// `out = A rho` for a dense row-major `rho`.
    fn left(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        out.fill(Complex::new(0.0, 0.0));
        for r in 0..n {
            let dst = &mut out[r * n..(r + 1) * n];
            for k in self.ptr[r]..self.ptr[r + 1] {
                let v = self.val[k];
                let src = &rho[self.col[k] * n..(self.col[k] + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * v;
                }
            }
        }
    }

    /// `out = rho A` for a dense row-major `rho`.
    fn right(&self, rho: &[C64], out: &mut [C64]) {
        let n = self.n;
        out.fill(Complex::new(0.0, 0.0));
        for r in 0..n {
            let src = &rho[r * n..(r + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            for (k, s) in src.iter().enumerate() {
                if *s == Complex::new(0.0, 0.0) {
                    continue;
                }
                for q in self.ptr[k]..self.ptr[k + 1] {
                    dst[self.col[q]] += s * self.val[q];
                }
            }
        }
    }
}

/// Single-mode operators on `0..=n_max`.
struct Mode {
    dim: usize,
}

impl Mode {
    fn x(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim - 1)
            .flat_map(|n| {
                let v = ((n + 1) as f64 / 2.0).sqrt();
                [(n, n + 1, v), (n + 1, n, v)]
            })
            .collect()
    }

    /// Real matrix `P` with `p = -i P`.
    fn p_real(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim - 1)
            .flat_map(|n| {
                let v = ((n + 1) as f64 / 2.0).sqrt();
                [(n, n + 1, v), (n + 1, n, -v)]
            })
            .collect()
    }

    /// Projection of `x^2`, or of `p^2` when `sign = -1`.
    fn square(&self, sign: f64) -> Vec<(usize, usize, f64)> {
        let mut t: Vec<_> = (0..self.dim).map(|n| (n, n, n as f64 + 0.5)).collect();
        for n in 0..self.dim.saturating_sub(2) {
            let v = sign * (((n + 1) * (n + 2)) as f64).sqrt() / 2.0;
            t.push((n, n + 2, v));
            t.push((n + 2, n, v));
        }
        t
    }

    fn number_plus_half(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim).map(|n| (n, n, n as f64 + 0.5)).collect()
    }
}

/// Calls back with `(ket column, bra column, weight)` triples whose sum
/// `sum w |ket><bra|` reproduces one block.
type BlockVisitor<'a> = &'a mut dyn FnMut(&[C64], &[C64], f64);

struct Operators {
    dim: usize,
    /// `x1, p1 (real part P), x2, p2`, with `p = -i P`.
    quad: [Sparse; 4],
    x2sum: Sparse,
    branch_h: [Sparse; 4],
}

fn embed(dim1: usize, t: &[(usize, usize, f64)], first: bool) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(t.len() * dim1);
    for &(r, c, v) in t {
        for o in 0..dim1 {
            if first {
                out.push((r * dim1 + o, c * dim1 + o, v));
            } else {
                out.push((o * dim1 + r, o * dim1 + c, v));
            }
        }
    }
    out
}

fn product(dim1: usize, a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(r1, c1, v1) in a {
        for &(r2, c2, v2) in b {
            out.push((r1 * dim1 + r2, c1 * dim1 + c2, v1 * v2));
        }
    }
    out
}

fn qubit_signs(a: usize) -> (i8, i8) {
    (if a < 2 { 1 } else { -1 }, if a.is_multiple_of(2) { 1 } else { -1 })
}

impl Operators {
    fn new(n_max: usize, g: f64, f_q: f64) -> Self {
        let mode = Mode { dim: n_max + 1 };
        let d1 = mode.dim;
        let dim = d1 * d1;
        let sp = |t: Vec<(usize, usize, f64)>| Sparse::from_triplets(dim, t);
        let x1 = sp(embed(d1, &mode.x(), true));
        let x2 = sp(embed(d1, &mode.x(), false));
        let p1 = sp(embed(d1, &mode.p_real(), true));
        let p2 = sp(embed(d1, &mode.p_real(), false));
        let xx1 = sp(embed(d1, &mode.square(1.0), true));
        let xx2 = sp(embed(d1, &mode.square(1.0), false));
        let n1 = sp(embed(d1, &mode.number_plus_half(), true));
        let n2 = sp(embed(d1, &mode.number_plus_half(), false));
        let x1x2 = sp(product(d1, &mode.x(), &mode.x()));
        let x2sum = Sparse::combine(dim, &[(1.0, &xx1), (1.0, &xx2)]);
        // (1 - g) x^2 / 2 + p^2 / 2 = (n + 1/2) - g x^2 / 2
        let base = Sparse::combine(
            dim,
            &[(1.0, &n1), (1.0, &n2), (-0.5 * g, &x2sum), (g, &x1x2)],
        );
        let branch_h = [0, 1, 2, 3].map(|a| {
            let (j, m) = qubit_signs(a);
            Sparse::combine(
                dim,
                &[(1.0, &base), (f_q * f64::from(j), &x1), (f_q * f64::from(m), &x2)],
            )
        });
        Self {
            dim,
            quad: [x1, p1, x2, p2],
            x2sum,
            branch_h,
        }
    }

    /// `r_k v` for quadrature `k`.
    fn apply_quadrature(&self, k: usize, v: &[C64], out: &mut [C64]) {
        self.quad[k].matvec(v, out);
        if k % 2 == 1 {
            for z in out.iter_mut() {
                *z *= Complex::new(0.0, -1.0);
            }
        }
    }
}

/// Eigenvectors and weights of a single-mode squeezed thermal state,
/// from the truncated Hamiltonian `(p^2 + x^2 / s^2) / 2`.
fn single_mode_state(n_max: usize, s: f64, n_p: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mode = Mode { dim: n_max + 1 };
    let d = mode.dim;
    let mut h = DMatrix::<f64>::zeros(d, d);
    for (r, c, v) in mode.square(1.0) {
        h[(r, c)] += 0.5 * v / (s * s);
    }
    for (r, c, v) in mode.square(-1.0) {
        h[(r, c)] += 0.5 * v;
    }
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = n_p / (1.0 + n_p);
    let vecs = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    let weights = (0..d).map(|k| (1.0 - q) * q.powi(k as i32)).collect();
    (vecs, weights)
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    // <a|b>
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn top_levels(n_max: usize) -> Vec<usize> {
    let d1 = n_max + 1;
    (0..d1 * d1)
        .filter(|i| i / d1 + 1 >= n_max || i % d1 + 1 >= n_max)
        .collect()
}

/// Propagates the full qubit-oscillator state and reads out the QRDM,
/// block moments and the `++` covariance on `tau_grid`.
pub fn fock_propagate(p: &FockProblem) -> Result<FockResult> {
    p.params.validate()?;
    if p.n_max < MIN_CUTOFF {
        return Err(Error::InvalidParameter {
            name: "n_max",
            value: p.n_max as f64,
            reason: "Fock cutoff must be at least 8",
        });
    }
    if p.tau_grid.first() != Some(&0.0) || p.tau_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::GridMismatch("time grid must start at 0 and ascend".into()));
    }
    if !(p.step > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: p.step,
            reason: "step must be positive",
        });
    }
    let norm: f64 = p.qubits.iter().map(|z| z.norm_sqr()).sum();
    let qubits = p.qubits / Complex::new(norm.sqrt(), 0.0);
    let ops = Operators::new(p.n_max, p.params.g, p.params.f_q);
    let (vecs, weights) = single_mode_state(p.n_max, p.params.s, p.params.n_p);

    let mut components = Vec::new();
    let mut kept = 0.0;
    for (k1, w1) in weights.iter().enumerate() {
        for (k2, w2) in weights.iter().enumerate() {
            if w1 * w2 > WEIGHT_CUTOFF {
                components.push((k1, k2, w1 * w2));
                kept += w1 * w2;
            }
        }
    }
    let pure = p.params.gamma_x == 0.0 && components.len() <= MAX_PURE_COMPONENTS && 1.0 - kept < 1e-12;
    let d1 = p.n_max + 1;
    let product_state = |k1: usize, k2: usize| -> Vec<C64> {
        (0..ops.dim)
            .map(|i| Complex::new(vecs[k1][i / d1] * vecs[k2][i % d1], 0.0))
            .collect()
    };
    let top = top_levels(p.n_max);
    let run = if pure {
        let members: Vec<(f64, Vec<C64>)> = components
            .iter()
            .map(|&(k1, k2, w)| (w / kept, product_state(k1, k2)))
            .collect();
        propagate_pure(p, &ops, &qubits, &members, &top)?
    } else {
        if ops.dim > MAX_DENSITY_DIM {
            return Err(Error::InvalidParameter {
                name: "n_max",
                value: p.n_max as f64,
                reason: "cutoff too large for density-matrix propagation",
            });
        }
        let mut rho1 = DMatrix::<f64>::zeros(d1, d1);
        for (k, w) in weights.iter().enumerate() {
            let v = nalgebra::DVector::from_vec(vecs[k].clone());
            rho1 += &v * v.transpose() * *w;
        }
        let tr = rho1.trace();
        rho1 /= tr;
        let rho0: Vec<C64> = (0..ops.dim * ops.dim)
            .map(|idx| {
                let (r, c) = (idx / ops.dim, idx % ops.dim);
                Complex::new(rho1[(r / d1, c / d1)] * rho1[(r % d1, c % d1)], 0.0)
            })
            .collect();
        propagate_density(p, &ops, &qubits, &rho0, &top)?
    };
    if run.max_leakage > LEAKAGE_LIMIT {
        return Err(Error::Leakage {
            leakage: run.max_leakage,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(FockResult { pure_route: pure, ..run })
}

fn steps_between(span: f64, step: f64) -> (usize, f64) {
    let n = (span / step).ceil().max(1.0) as usize;
    (n, span / n as f64)
}

fn moments_and_covariance(
    ops: &Operators,
    blocks: &dyn Fn(usize, usize, BlockVisitor),
) -> ([BranchMoments; 16], Mat4, [[C64; 4]; 4]) {
    // accumulates Tr rho_ab, Tr[r_k rho_ab] and, for the ++ block, Tr[r_k r_l rho]
    let mut traces = [[Complex::new(0.0, 0.0); 4]; 4];
    let mut firsts = [[Vector4::<C64>::zeros(); 4]; 4];
    let mut second = Matrix4::<C64>::zeros();
    let mut tmp = vec![Complex::new(0.0, 0.0); ops.dim];
    let mut rv: Vec<Vec<C64>> = vec![vec![Complex::new(0.0, 0.0); ops.dim]; 4];
    for a in 0..4 {
        for b in 0..4 {
            blocks(a, b, &mut |ket, bra, w| {
                traces[a][b] += dot(bra, ket) * w;
                for (k, first) in firsts[a][b].iter_mut().enumerate() {
                    ops.apply_quadrature(k, ket, &mut tmp);
                    *first += dot(bra, &tmp) * w;
                }
                if a == 0 && b == 0 {
                    for (k, v) in rv.iter_mut().enumerate() {
                        ops.apply_quadrature(k, ket, v);
                    }
                    for k in 0..4 {
                        for l in 0..4 {
                            second[(k, l)] += dot(&rv[k], &rv[l]) * w;
                        }
                    }
                }
            });
        }
    }
    let mut moments = [BranchMoments::zero(); 16];
    for a in 0..4 {
        for b in 0..4 {
            moments[4 * a + b] = BranchMoments(firsts[a][b] / traces[a][b]);
        }
    }
    let t = traces[0][0];
    let mean = firsts[0][0] / t;
    let cov = Mat4::from_fn(|k, l| {
        let sym = (second[(k, l)] + second[(l, k)]) / t;
        (sym - mean[k] * mean[l] * 2.0).re
    });
    (moments, cov, traces)
}

fn propagate_pure(
    p: &FockProblem,
    ops: &Operators,
    qubits: &Vector4<C64>,
    members: &[(f64, Vec<C64>)],
    top: &[usize],
) -> Result<FockResult> {
    let dim = ops.dim;
    // psi[a][member]
    let mut psi: Vec<Vec<Vec<C64>>> = (0..4)
        .map(|_| members.iter().map(|(_, v)| v.clone()).collect())
        .collect();
    let mut k = vec![vec![Complex::new(0.0, 0.0); dim]; 4];
    let mut y = vec![Complex::new(0.0, 0.0); dim];
    let minus_i = Complex::new(0.0, -1.0);
    let mut snapshots = Vec::with_capacity(p.tau_grid.len());
    let mut max_leakage: f64 = 0.0;
    let mut max_trace_dev: f64 = 0.0;
    let mut prev = 0.0;
    for &tau in &p.tau_grid {
        let (n, dt) = steps_between(tau - prev, p.step);
        if tau > prev {
            for (a, branch) in psi.iter_mut().enumerate() {
                let h = &ops.branch_h[a];
                for v in branch.iter_mut() {
                    for _ in 0..n {
                        h.matvec(v, &mut k[0]);
                        for z in k[0].iter_mut() {
                            *z *= minus_i;
                        }
                        for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
                            for i in 0..dim {
                                y[i] = v[i] + k[stage - 1][i] * (frac * dt);
                            }
                            h.matvec(&y, &mut k[stage]);
                            for z in k[stage].iter_mut() {
                                *z *= minus_i;
                            }
                        }
                        for i in 0..dim {
                            v[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (dt / 6.0);
                        }
                    }
                }
            }
        }
        prev = tau;
        let blocks = |a: usize, b: usize, f: BlockVisitor| {
            for (m, (w, _)) in members.iter().enumerate() {
                f(&psi[a][m], &psi[b][m], *w);
            }
        };
        let (moments, covariance, traces) = moments_and_covariance(ops, &blocks);
        let mut rho = Matrix4::<C64>::zeros();
        let mut leak = 0.0;
        for a in 0..4 {
            let pop = qubits[a].norm_sqr();
            for (m, (w, _)) in members.iter().enumerate() {
                leak += pop * w * top.iter().map(|&i| psi[a][m][i].norm_sqr()).sum::<f64>();
            }
            for b in 0..4 {
                let flips = (qubit_signs(a).0 != qubit_signs(b).0) as i32
                    + (qubit_signs(a).1 != qubit_signs(b).1) as i32;
                let deph = (-p.params.gamma_z * tau * f64::from(flips)).exp();
                rho[(a, b)] = qubits[a] * qubits[b].conj() * traces[a][b] * deph;
            }
        }
        let (qrdm, trace) = finish_qrdm(rho)?;
        max_leakage = max_leakage.max(leak);
        max_trace_dev = max_trace_dev.max((trace - 1.0).abs());
        snapshots.push(FockSnapshot {
            tau,
            qrdm,
            trace,
            leakage: leak,
            moments,
            covariance,
        });
    }
    Ok(FockResult {
        snapshots,
        max_leakage,
        max_trace_deviation: max_trace_dev,
        hermitian_repairs: 0,
        pure_route: true,
    })
}

fn finish_qrdm(rho: Matrix4<C64>) -> Result<(Qrdm, f64)> {
    let trace = rho.trace().re;
    let h = (rho + rho.adjoint()) * Complex::new(0.5 / trace, 0.0);
    Ok((Qrdm::new(h)?, trace))
}

struct Scratch {
    t: [Vec<C64>; 3],
}

impl Scratch {
    fn new(len: usize) -> Self {
        Self {
            t: std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); len]),
        }
    }
}

/// `out = -i (H_a rho - rho H_b) - gx/4 sum [x_i,[x_i,rho]] - gz flips rho`.
#[allow(clippy::too_many_arguments)]
fn block_rhs(
    ops: &Operators,
    a: usize,
    b: usize,
    flips: f64,
    gx: f64,
    gz: f64,
    rho: &[C64],
    out: &mut [C64],
    s: &mut Scratch,
) {
    let [t0, t1, t2] = &mut s.t;
    ops.branch_h[a].left(rho, t0);
    ops.branch_h[b].right(rho, t1);
    let minus_i = Complex::new(0.0, -1.0);
    for i in 0..out.len() {
        out[i] = (t0[i] - t1[i]) * minus_i - rho[i] * (gz * flips);
    }
    if gx > 0.0 {
        let gamma = 0.25 * gx;
        ops.x2sum.left(rho, t0);
        ops.x2sum.right(rho, t1);
        for i in 0..out.len() {
            out[i] -= (t0[i] + t1[i]) * gamma;
        }
        for x in [&ops.quad[0], &ops.quad[2]] {
            x.left(rho, t0);
            x.right(t0, t2);
            for i in 0..out.len() {
                out[i] += t2[i] * (2.0 * gamma);
            }
        }
    }
}

fn propagate_density(
    p: &FockProblem,
    ops: &Operators,
    qubits: &Vector4<C64>,
    rho0: &[C64],
    top: &[usize],
) -> Result<FockResult> {
    let dim = ops.dim;
    let len = dim * dim;
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|a| (a..4).map(move |b| (a, b))).collect();
    let mut blocks: Vec<Vec<C64>> = pairs
        .iter()
        .map(|&(a, b)| {
            let q = qubits[a] * qubits[b].conj();
            rho0.iter().map(|z| z * q).collect()
        })
        .collect();
    let mut k: [Vec<C64>; 4] = std::array::from_fn(|_| vec![Complex::new(0.0, 0.0); len]);
    let mut y = vec![Complex::new(0.0, 0.0); len];
    let mut scratch = Scratch::new(len);
    let (gx, gz) = (p.params.gamma_x, p.params.gamma_z);
    let mut snapshots = Vec::with_capacity(p.tau_grid.len());
    let mut max_leakage: f64 = 0.0;
    let mut max_trace_dev: f64 = 0.0;
    let mut repairs = 0;
    let mut prev = 0.0;
    for &tau in &p.tau_grid {
        let (n, dt) = steps_between(tau - prev, p.step);
        if tau > prev {
            for (block, &(a, b)) in blocks.iter_mut().zip(&pairs) {
                let flips = f64::from(u8::from(qubit_signs(a).0 != qubit_signs(b).0) + u8::from(qubit_signs(a).1 != qubit_signs(b).1));
                for _ in 0..n {
                    block_rhs(ops, a, b, flips, gx, gz, block, &mut k[0], &mut scratch);
                    for (stage, frac) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
                        for i in 0..len {
                            y[i] = block[i] + k[stage - 1][i] * (frac * dt);
                        }
                        let (done, rest) = k.split_at_mut(stage);
                        let _ = done;
                        block_rhs(ops, a, b, flips, gx, gz, &y, &mut rest[0], &mut scratch);
                    }
                    for i in 0..len {
                        block[i] += (k[0][i] + (k[1][i] + k[2][i]) * 2.0 + k[3][i]) * (dt / 6.0);
                    }
                    if a == b && repair_hermitian(block, dim) {
                        repairs += 1;
                    }
                }
            }
        }
        prev = tau;
        let block_of = |a: usize, b: usize| -> (usize, bool) {
            let (lo, hi, adj) = if a <= b { (a, b, false) } else { (b, a, true) };
            (pairs.iter().position(|&q| q == (lo, hi)).expect("pair"), adj)
        };
        // Tr[O rho_ab] through columns: rho_ab = sum_c |col_c><e_c|
        let visit = |a: usize, b: usize, f: BlockVisitor| {
            let (idx, adj) = block_of(a, b);
            let m = &blocks[idx];
            let mut col = vec![Complex::new(0.0, 0.0); dim];
            let mut unit = vec![Complex::new(0.0, 0.0); dim];
            for c in 0..dim {
                for r in 0..dim {
                    col[r] = if adj { m[c * dim + r].conj() } else { m[r * dim + c] };
                }
                unit.fill(Complex::new(0.0, 0.0));
                unit[c] = Complex::new(1.0, 0.0);
                f(&col, &unit, 1.0);
            }
        };
        let (moments, covariance, traces) = moments_and_covariance(ops, &visit);
        let mut rho = Matrix4::<C64>::zeros();
        let mut leak = 0.0;
        for a in 0..4 {
            let (idx, _) = block_of(a, a);
            leak += top.iter().map(|&i| blocks[idx][i * dim + i].re).sum::<f64>();
            for b in 0..4 {
                rho[(a, b)] = traces[a][b];
            }
        }
        let (qrdm, trace) = finish_qrdm(rho)?;
        max_leakage = max_leakage.max(leak);
        max_trace_dev = max_trace_dev.max((trace - 1.0).abs());
        snapshots.push(FockSnapshot {
            tau,
            qrdm,
            trace,
            leakage: leak,
            moments,
            covariance,
        });
    }
    Ok(FockResult {
        snapshots,
        max_leakage,
        max_trace_deviation: max_trace_dev,
        hermitian_repairs: repairs,
        pure_route: false,
    })
}

fn repair_hermitian(m: &mut [C64], dim: usize) -> bool {
    let mut worst: f64 = 0.0;
    for r in 0..dim {
        for c in r..dim {
            worst = worst.max((m[r * dim + c] - m[c * dim + r].conj()).norm());
        }
    }
    if worst <= HERMITIAN_DRIFT {
        return false;
    }
    for r in 0..dim {
        for c in r..dim {
            let avg = (m[r * dim + c] + m[c * dim + r].conj()) * 0.5;
            m[r * dim + c] = avg;
            m[c * dim + r] = avg.conj();
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_products() {
        let a = Sparse::from_triplets(2, vec![(0, 1, 2.0), (1, 0, 3.0), (0, 1, 1.0)]);
        let rho: Vec<C64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&x| Complex::new(x, 0.0)).collect();
        let mut out = vec![Complex::new(0.0, 0.0); 4];
        a.left(&rho, &mut out);
        // [[0,3],[3,0]] * [[1,2],[3,4]]
        assert_eq!(out.iter().map(|z| z.re).collect::<Vec<_>>(), vec![9.0, 12.0, 3.0, 6.0]);
        a.right(&rho, &mut out);
        assert_eq!(out.iter().map(|z| z.re).collect::<Vec<_>>(), vec![6.0, 3.0, 12.0, 9.0]);
    }

    #[test]
    fn top_levels_cover_both_modes() {
        let t = top_levels(8);
        // 9x9 grid minus the 7x7 interior
        assert_eq!(t.len(), 81 - 49);
    }

    #[test]
    fn uncoupled_qubits_stay_put() {
        let p = FockProblem::new(8, UnitlessParams::ideal(0.0, 0.0), vec![0.0, 1.0, 2.0]);
        let r = fock_propagate(&p).unwrap();
        for s in &r.snapshots {
            let d = (s.qrdm.matrix() - Qrdm::plus_plus().matrix())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn squeezed_ground_state_variance() {
        let (vecs, w) = single_mode_state(30, 0.5, 0.0);
        assert_eq!(w[0], 1.0);
        let v = &vecs[0];
        let mode = Mode { dim: 31 };
        let x2: f64 = mode
            .square(1.0)
            .iter()
            .map(|&(r, c, val)| v[r] * val * v[c])
            .sum();
        assert!((2.0 * x2 - 0.5).abs() < 1e-10);
    }
}

#[cfg(test)]
mod agreement {
    use super::*;
    use crate::dynamics::{open_qrdm, unitary_qrdm};
    use crate::phase_space::final_time;

    fn max_diff(a: &Qrdm, b: &Qrdm) -> f64 {
        (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn unitary_pure_route() {
        let (f, g) = (1.0, 0.1);
        let tf = final_time(g).unwrap();
        let mut p = FockProblem::new(30, UnitlessParams::ideal(f, g), vec![0.0, 0.5 * tf, tf]);
        p.step = 0.005;
        let r = fock_propagate(&p).unwrap();
        assert!(r.pure_route);
        assert!(r.max_trace_deviation < 1e-8);
        for s in &r.snapshots {
            let c = unitary_qrdm(f, g, s.tau).unwrap();
            assert!(max_diff(&s.qrdm, &c.qrdm) < 1e-8);
        }
    }

    #[test]
    fn noisy_density_route() {
        let mut u = UnitlessParams::ideal(0.3, 0.1);
        u.gamma_x = 0.02;
        u.gamma_z = 0.01;
        u.n_p = 0.1;
        u.s = 0.8;
        let tf = final_time(u.g).unwrap();
        let mut p = FockProblem::new(12, u, vec![0.0, 0.5 * tf, tf]);
        p.step = 0.02;
        let r = fock_propagate(&p).unwrap();
        assert!(!r.pure_route);
        for s in &r.snapshots {
            let c = open_qrdm(&u, s.tau).unwrap();
            assert!(max_diff(&s.qrdm, &c.qrdm) < 1e-6);
        }
    }

    #[test]
    fn leakage_is_reported() {
        let p = FockProblem::new(8, UnitlessParams::ideal(2.0, 0.1), vec![0.0, 3.0]);
        assert!(matches!(fock_propagate(&p), Err(Error::Leakage { .. })));
    }

    #[test]
    fn small_cutoff_rejected() {
        let p = FockProblem::new(7, UnitlessParams::ideal(0.0, 0.0), vec![0.0]);
        assert!(fock_propagate(&p).is_err());
    }
}
