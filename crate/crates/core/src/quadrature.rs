//! Adaptive Gauss-Legendre quadrature for small fixed-size matrix integrands.

use std::sync::OnceLock;

use nalgebra::SMatrix;

const ORDER: usize = 20;
const MAX_DEPTH: u32 = 40;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

// Newton iteration on P_n from the Chebyshev initial guess.
fn legendre_rule(n: usize) -> Rule {
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    Rule { nodes, weights }
}

fn fixed<const R: usize, const C: usize, F>(f: &F, a: f64, b: f64) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    let rule = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    let mut acc = SMatrix::<f64, R, C>::zeros();
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
        acc += f(mid + half * x) * (w * half);
    }
    acc
}

/// Integrates `f` over `[a, b]`, bisecting until each panel agrees with its
/// two halves to `max(rel_tol * |I|, abs_tol)` in the max norm.
pub fn integrate<const R: usize, const C: usize, F>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    if a == b {
        return SMatrix::zeros();
    }
    let whole = fixed(&f, a, b);
    refine(&f, a, b, whole, rel_tol, abs_tol, 0)
}

fn refine<const R: usize, const C: usize, F>(
    f: &F,
    a: f64,
    b: f64,
    whole: SMatrix<f64, R, C>,
    rel_tol: f64,
    abs_tol: f64,
    depth: u32,
) -> SMatrix<f64, R, C>
where
    F: Fn(f64) -> SMatrix<f64, R, C>,
{
    let m = 0.5 * (a + b);
    let left = fixed(f, a, m);
    let right = fixed(f, m, b);
    let split = left + right;
    let err = (split - whole).amax();
    if depth >= MAX_DEPTH || err <= (rel_tol * split.amax()).max(abs_tol) {
        return split;
    }
    refine(f, a, m, left, rel_tol, 0.5 * abs_tol, depth + 1)
        + refine(f, m, b, right, rel_tol, 0.5 * abs_tol, depth + 1)
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    integrate(|t| SMatrix::<f64, 1, 1>::new(f(t)), a, b, rel_tol, abs_tol)[(0, 0)]
}
