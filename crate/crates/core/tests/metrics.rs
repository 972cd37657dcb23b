use nalgebra::RowDVector;
use qdelay::design::design;
use qdelay::metrics::{entry_time, krasovskii_u, verify_bounds};
use qdelay::quantizer::QuantizerParams;
use qdelay::sim::{simulate, InitialFunction, SimOptions, Trajectory};
use qdelay::systems::{self, ControlSystem, Feedback};

fn open_loop_pendulum(phi: &[f64], horizon: f64) -> (ControlSystem, Trajectory) {
    let p = systems::make_pendulum(0.1)
        .unwrap()
        .with_feedback(Feedback::Linear(RowDVector::from_vec(vec![0.0, 0.0])));
    let q = QuantizerParams::new(10.0, 0.1, 1).unwrap();
    let tr = simulate(
        &p,
        &q,
        &InitialFunction::constant(phi),
        0.05,
        horizon,
        &SimOptions::default(),
    )
    .unwrap();
    (p, tr)
}

/// Composite Simpson on `panels` equal panels of `[t - 2 tau, t]`, reading
/// the state from the dense history.
fn brute_u(tr: &Trajectory, sys: &ControlSystem, t: f64, panels: usize) -> f64 {
    let tau = tr.tau();
    let a = t - 2.0 * tau;
    let h = 2.0 * tau / panels as f64;
    let f = |l: f64| (l - a) * sys.w(&tr.eval(l).unwrap());
    let mut s = f(a) + f(t);
    for i in 1..panels {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + h * i as f64);
    }
    sys.v(&tr.eval(t).unwrap()) + s * h / 3.0 / (8.0 * tau)
}

#[test]
fn functional_matches_refined_quadrature() {
    let (p, tr) = open_loop_pendulum(&[1.0, 0.0], 2.0);
    for t in [0.1, 0.77, 1.5, 2.0] {
        let got = krasovskii_u(&tr, &p, t).unwrap();
        // Ten times as many nodes as the knot-based rule uses.
        let reference = brute_u(&tr, &p, t, 2 * 10 * 100);
        assert!(
            (got - reference).abs() <= 1e-10 * reference.abs(),
            "t {t}: {got} vs {reference}"
        );
    }
}

#[test]
fn functional_dominates_lyapunov_value() {
    let p = systems::make_pendulum(0.1).unwrap();
    let tau = 0.9 * systems::tau_max(&p).unwrap();
    let d = design(&p, tau, 1.0, 0.3).unwrap();
    let tr = simulate(
        &p,
        &d.quantizer,
        &InitialFunction::constant(&[-1.0, 0.0]),
        tau,
        2.0,
        &SimOptions::default(),
    )
    .unwrap();
    for k in (0..tr.len())
        .step_by(53)
        .filter(|&k| tr.time(k) >= 2.0 * tau)
    {
        let x = tr.state(k);
        let u = krasovskii_u(&tr, &p, tr.time(k)).unwrap();
        let v = p.v(&x);
        assert!(u >= v && v >= p.kappa1(x.norm()) * (1.0 - 1e-12));
    }
}

#[test]
fn entry_time_matches_brute_force_scan() {
    // The free pendulum swings in and out of the ball |x| <= 0.4992.
    let (_, tr) = open_loop_pendulum(&[0.5, 0.0], 8.0);
    let norms: Vec<f64> = (0..tr.len()).map(|k| tr.state(k).norm()).collect();
    for eps in [0.4992, 0.4999, 0.6, 0.1] {
        let brute = match norms.iter().rposition(|&n| n > eps) {
            None => Some(tr.time(0)),
            Some(k) if k + 1 == norms.len() => None,
            Some(k) => Some(tr.time(k + 1)),
        };
        assert_eq!(entry_time(&tr, eps), brute, "eps {eps}");
        assert_eq!(entry_time(&tr, eps), entry_time(&tr, eps));
    }
    let crossings = norms
        .windows(2)
        .filter(|w| (w[0] > 0.4992) != (w[1] > 0.4992))
        .count();
    assert!(
        crossings >= 3,
        "path should leave and re-enter, got {crossings}"
    );
}

#[test]
fn report_for_designed_run() {
    let p = systems::make_pendulum(0.1).unwrap();
    let tau = 0.9 * systems::tau_max(&p).unwrap();
    let d = design(&p, tau, 1.0, 0.3).unwrap();
    let tr = simulate(
        &p,
        &d.quantizer,
        &InitialFunction::constant(&[0.6, 0.8]),
        tau,
        8.0,
        &SimOptions::default(),
    )
    .unwrap();
    let r = verify_bounds(&tr, &d, &p, 20).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!(r.u_trace.iter().all(|&(t, _)| t >= 2.0 * tau));
    assert_eq!(r.switch_count, tr.switches().len());
    assert!(r.dwell_min.unwrap() > 0.0);
}

#[test]
fn zero_state_passes_trivially() {
    let p = systems::make_pendulum(0.1).unwrap();
    let d = design(&p, 2.5e-3, 1.0, 0.3).unwrap();
    let tr = simulate(
        &p,
        &d.quantizer,
        &InitialFunction::constant(&[0.0, 0.0]),
        2.5e-3,
        0.5,
        &SimOptions::default(),
    )
    .unwrap();
    let r = verify_bounds(&tr, &d, &p, 1).unwrap();
    assert!(r.passed());
    assert_eq!(r.u_max, Some(0.0));
    assert_eq!(r.entry_time, Some(0.0));
}
