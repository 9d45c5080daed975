use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;
use sgi_core::dynamics::diffusion_covariance_final;
use sgi_core::oracle::moments::{integrate_moments, MomentOdeProblem};
use sgi_core::phase_space::*;
use sgi_core::Error;

fn coupling() -> impl Strategy<Value = f64> {
    0.0..0.499f64
}

proptest! {
    #[test]
    fn propagator_is_symplectic(g in coupling(), tau in 0.0..20.0f64) {
        prop_assert!(propagator(g, tau).unwrap().symplectic_defect() < 1e-12);
    }

    #[test]
    fn propagator_group_law(g in coupling(), t1 in 0.0..10.0f64, t2 in 0.0..10.0f64) {
        let a = propagator(g, t1).unwrap().into_inner();
        let b = propagator(g, t2).unwrap().into_inner();
        let ab = propagator(g, t1 + t2).unwrap().into_inner();
        prop_assert!((ab - a * b).amax() < 1e-12);
    }

    #[test]
    fn closed_form_matches_exponential(g in coupling(), tau in 0.0..4.0 * PI) {
        let h = sgi_hamiltonian_matrix(g).unwrap();
        let d = propagator(g, tau).unwrap().into_inner() - exp_propagator(&h, tau).into_inner();
        prop_assert!(d.amax() < 1e-12);
    }

    #[test]
    fn noiseless_evolution_keeps_purity(
        g in coupling(),
        tau in 0.0..15.0f64,
        s in 0.05..1.0f64,
        n_p in 0.0..3.0f64,
    ) {
        let sigma0 = CovarianceMatrix::squeezed_thermal(s, n_p).unwrap();
        let sigma = evolve_covariance(&sigma0, g, tau, &DiffusionMatrix::zero()).unwrap();
        let d0 = sigma0.matrix().determinant();
        prop_assert!((sigma.matrix().determinant() / d0 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn uncertainty_survives_diffusion(
        g in coupling(),
        tau in 0.0..12.0f64,
        s in 0.05..1.0f64,
        a in 0.0..0.2f64,
        b in 0.0..0.2f64,
        c in -1.0..1.0f64,
    ) {
        // a PSD diffusion with position-momentum and cross-mode parts
        let v = Vector4::new(1.0, c, -c, 0.5);
        let d = Matrix4::from_diagonal(&Vector4::new(a, b, a * 0.5, b)) + v * v.transpose() * 0.01;
        let d = DiffusionMatrix::new(d).unwrap();
        let sigma0 = CovarianceMatrix::squeezed_thermal(s, 0.0).unwrap();
        let sigma = evolve_covariance(&sigma0, g, tau, &d).unwrap();
        prop_assert!(heisenberg_ok(&sigma).ok);
    }
}

#[test]
fn unstable_couplings_are_rejected() {
    for g in [0.5, 0.7, -0.1, f64::NAN] {
        assert!(matches!(sgi_hamiltonian_matrix(g), Err(Error::UnstableCoupling(_))));
        assert!(propagator(g, 1.0).is_err());
    }
}

#[test]
fn coupling_enters_the_quadratic_form() {
    let h = *sgi_hamiltonian_matrix(0.1).unwrap().matrix();
    assert_eq!(h.diagonal(), Vector4::new(0.9, 1.0, 0.9, 1.0));
    assert_eq!(h[(0, 2)], 0.1);
    assert_eq!(*sgi_hamiltonian_matrix(0.0).unwrap().matrix(), Matrix4::identity());
}

#[test]
fn explicit_vacuum_covariance() {
    for g in [0.0, 0.1, 0.25, 0.45] {
        for k in 0..30 {
            let tau = 0.37 * f64::from(k);
            let s = propagator(g, tau).unwrap().into_inner();
            let closed = vacuum_covariance_closed_form(g, tau).unwrap();
            assert!((closed - s * s.transpose()).amax() < 1e-12, "g {g} tau {tau}");
        }
    }
    let w2: f64 = 1.0 - 0.2;
    let tau = 1.3;
    let s00 = (2.0 - 0.1 * (3.0 + (2.0 * w2.sqrt() * tau).cos())) / (2.0 * w2);
    assert!((vacuum_covariance_closed_form(0.1, tau).unwrap()[(0, 0)] - s00).abs() < 1e-15);
}

#[test]
fn free_rotation_leaves_vacuum_alone() {
    for tau in [0.1, 1.0, 7.5] {
        let s = evolve_covariance(&CovarianceMatrix::vacuum(), 0.0, tau, &DiffusionMatrix::zero()).unwrap();
        assert!((s.matrix() - Matrix4::identity()).amax() < 1e-15);
    }
}

#[test]
fn diffusive_covariance_matches_moment_equations() {
    let (g, gamma_x) = (0.1, 0.01);
    let d = DiffusionMatrix::position_dephasing(gamma_x).unwrap();
    let problem = MomentOdeProblem {
        h: sgi_hamiltonian_matrix(g).unwrap(),
        drift: DriftSpec::sgi(0.0),
        diffusion: d,
        sigma0: CovarianceMatrix::vacuum(),
        r0: Vector4::zeros(),
        tau_grid: vec![0.0, PI, 2.0 * PI],
    };
    let ode = integrate_moments(&problem).unwrap();
    let closed = evolve_covariance(&CovarianceMatrix::vacuum(), g, 2.0 * PI, &d).unwrap();
    assert!((closed.matrix() - ode.sigma[2]).amax() < 1e-8);
}

#[test]
fn lyapunov_closed_form_matches_quadrature() {
    let d = DiffusionMatrix::position_dephasing(0.05).unwrap();
    let closed = lyapunov_integral(0.1, 3.0, &d).unwrap();
    let quad = lyapunov_integral_quadrature(0.1, 3.0, &d).unwrap();
    assert!((closed - quad).amax() < 1e-9);
    assert_eq!(lyapunov_integral(0.1, 3.0, &DiffusionMatrix::zero()).unwrap(), Matrix4::zeros());
}

// The printed diffusion covariance is labelled with 2 pi but matches the
// closing time 2 pi / omega_g.
#[test]
fn printed_diffusion_covariance_is_at_closing_time() {
    let unit = DiffusionMatrix::position_dephasing(1.0).unwrap();
    for g in [0.05, 0.1, 0.3] {
        let printed = diffusion_covariance_final(g).unwrap();
        let at_tf = lyapunov_integral(g, final_time(g).unwrap(), &unit).unwrap();
        let at_2pi = lyapunov_integral(g, 2.0 * PI, &unit).unwrap();
        assert!((printed - at_tf).amax() < 1e-12, "g {g}");
        assert!((printed - at_2pi).amax() > 1e-2, "g {g}");
    }
    let w = relative_frequency(0.1).unwrap();
    let pp = PI / w + (4.0 * PI / w).sin() / 8.0;
    assert!((diffusion_covariance_final(0.1).unwrap()[(1, 1)] - pp).abs() < 1e-14);
}

#[test]
fn uncertainty_check_examples() {
    let h = heisenberg_ok(&CovarianceMatrix::vacuum());
    assert!(h.ok && h.margin.abs() < 1e-14);
    let squeezed = CovarianceMatrix::new(Matrix4::from_diagonal(&Vector4::new(0.5, 0.5, 1.0, 1.0))).unwrap();
    assert!(!heisenberg_ok(&squeezed).ok);
    assert!(matches!(
        evolve_covariance(&squeezed, 0.1, 1.0, &DiffusionMatrix::zero()),
        Err(Error::Heisenberg(_))
    ));
    let d = DiffusionMatrix::position_dephasing(0.1).unwrap();
    let open = evolve_covariance(&CovarianceMatrix::vacuum(), 0.1, final_time(0.1).unwrap(), &d).unwrap();
    assert!(heisenberg_ok(&open).ok);
}

#[test]
fn diffusion_must_be_positive() {
    let mut m = Matrix4::zeros();
    m[(1, 1)] = -0.1;
    assert!(DiffusionMatrix::new(m).is_err());
    assert!(DiffusionMatrix::position_dephasing(-1.0).is_err());
}
