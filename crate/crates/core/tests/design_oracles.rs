mod common;

use approx::assert_relative_eq;
use nalgebra::{dmatrix, DVector};
use qdelay::design::{design, KappaChain};
use qdelay::systems::{self, make_pendulum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Reference values computed independently in 30-digit arithmetic.
const ALPHA_R: f64 = 3.2050551440259385;
const GAMMA_R: f64 = 11.876824076673472;
const BEB: f64 = 240.8820360045923;
const OMEGA_R: f64 = 29.677913352594594;
// sup |z| on the circle of radius omega from 10^6 boundary points, plus 1.
const U0_R: f64 = 75.02665188996662;

#[test]
fn pendulum_chain_matches_reference() {
    let p = make_pendulum(0.1).unwrap();
    let c = KappaChain::new(&p, 3e-3).unwrap();
    assert_relative_eq!(c.alpha(1.0), ALPHA_R, max_relative = 1e-9);
    assert_relative_eq!(c.gamma_r(1.0), GAMMA_R, max_relative = 1e-9);
    assert_relative_eq!(c.beb(1.0), BEB, max_relative = 1e-9);
    assert_relative_eq!(c.omega(1.0), OMEGA_R, max_relative = 1e-9);
    assert!((c.u0(1.0) - U0_R).abs() < 1e-3, "u0 = {}", c.u0(1.0));
}

#[test]
fn pendulum_constants() {
    let p = make_pendulum(0.1).unwrap();
    assert_relative_eq!(p.gamma().unwrap(), 32.71575306878397, max_relative = 1e-12);
    assert_relative_eq!(
        systems::pendulum_alpha(0.1),
        0.17777777777777777,
        max_relative = 1e-14
    );
    assert_relative_eq!(
        systems::tau_max(&p).unwrap(),
        0.00317670201314991,
        max_relative = 1e-12
    );
    let p0 = make_pendulum(0.0).unwrap();
    assert_relative_eq!(
        systems::tau_max(&p0).unwrap(),
        4.143203796014927e-3,
        max_relative = 1e-12
    );
    assert_relative_eq!(
        systems::pendulum_tau_tilde(0.01),
        0.24712519684630097,
        max_relative = 1e-12
    );
}

#[test]
fn double_integrator_constants() {
    let (s, ex) = common::double_integrator(0.1);
    let q = dmatrix![1.5, 0.5; 0.5, 0.5];
    assert!((&ex.q - q).norm() < 1e-12);
    assert!(ex.lyapunov_residual() <= 1e-10);
    assert_relative_eq!(ex.k[0], -1.0555555555555556, max_relative = 1e-12);
    assert_relative_eq!(ex.k[1], -2.055555555555556, max_relative = 1e-12);
    assert_relative_eq!(s.gamma().unwrap(), 22.31445185901818, max_relative = 1e-12);
    assert_relative_eq!(
        s.lyapunov().lambda_min(),
        1.0 - 0.5f64.sqrt(),
        max_relative = 1e-12
    );
    assert_relative_eq!(
        systems::tau_max(&s).unwrap(),
        8.155979865894142e-3,
        max_relative = 1e-12
    );
}

#[test]
fn lyapunov_sandwich_at_random_states() {
    let p = make_pendulum(0.1).unwrap();
    let (l, _) = common::double_integrator(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for sys in [&p, &l] {
        for _ in 0..10_000 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-50.0..50.0));
            let (v, r) = (sys.v(&x), x.norm());
            assert!(sys.kappa1(r) <= v * (1.0 + 1e-12) && v <= sys.kappa2(r) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn design_postconditions() {
    let p = make_pendulum(0.1).unwrap();
    let tau = 0.9 * systems::tau_max(&p).unwrap();
    let d = design(&p, tau, 1.0, 0.3).unwrap();
    assert!(d.omega_r >= d.gamma_r && d.gamma_r >= d.alpha_r && d.alpha_r >= 1.0);
    assert!(d.a2 <= d.a1);
    assert_eq!(d.mu, d.a1.min(d.a2));
    let q = &d.quantizer;
    assert_eq!(q.j(), d.j_min);
    assert!(q.main_level(d.j_min) / 1.1 <= d.mu);
    // Smallest j solving u0 rho^j <= mu (1 + delta) by direct search.
    let rho = q.rho();
    let smallest = (0..).find(|&j| d.u0_r * rho.powi(j) <= d.mu * 1.1).unwrap() as usize;
    let estimate = ((d.mu * 1.1 / d.u0_r).ln() / rho.ln()).abs().ceil() as usize + 1;
    assert_eq!(d.j_min, estimate.max(smallest));
    assert!(d.j_min <= smallest + 1);
    assert!(q.range() >= d.u0_r);
}

#[test]
fn levels_grow_with_the_initial_ball() {
    let p = make_pendulum(0.1).unwrap();
    let tau = 0.9 * systems::tau_max(&p).unwrap();
    let js: Vec<usize> = (1..=20)
        .map(|i| design(&p, tau, 0.5 * f64::from(i), 0.2).unwrap().j_min)
        .collect();
    assert!(js.windows(2).all(|w| w[0] <= w[1]), "{js:?}");
}

#[test]
fn design_rejects_bad_targets() {
    let p = make_pendulum(0.1).unwrap();
    assert!(design(&p, 2e-3, 1.0, 1.0).is_err());
    assert!(design(&p, 2e-3, 1.0, 0.0).is_err());
    assert!(design(&make_pendulum(0.0).unwrap(), 2e-3, 1.0, 0.3).is_err());
}
