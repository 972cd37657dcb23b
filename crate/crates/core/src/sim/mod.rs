//! Method-of-steps simulation of `x'(t) = f(x) + g(x) Psi(z(x(t - tau)))`
//! with the hysteretic quantizer switching at the exact crossing instants
//! of the delayed feedback signal.

pub mod events;
mod history;
mod initial;

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use history::HistoryBuffer;
pub use initial::InitialFunction;

use crate::error::{invalid, Error, Result};
use crate::quantizer::{QuantizerParams, QuantizerState};
use crate::systems::ControlSystem;

/// Integration settings. `None` selects the defaults `dt = tau/100` and
/// `event_tol = 1e-10 tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: Option<f64>,
    pub event_tol: Option<f64>,
    /// Samples of the delayed signal per step when looking for crossings.
    pub event_substeps: usize,
    /// Largest number of switches tolerated within `10 event_tol`. The
    /// default `4 (j + 1)` is one full sweep of the level chain, from the
    /// top level through the dead zone to the top level of opposite sign.
    pub accumulation_cap: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: None,
            event_tol: None,
            event_substeps: 4,
            accumulation_cap: None,
        }
    }
}

impl SimOptions {
    pub fn with_dt(dt: f64) -> Self {
        SimOptions {
            dt: Some(dt),
            ..Self::default()
        }
    }

    pub fn dt(&self, tau: f64) -> f64 {
        self.dt.unwrap_or(tau / 100.0)
    }

    pub fn event_tol(&self, tau: f64) -> f64 {
        self.event_tol.unwrap_or(1e-10 * tau)
    }
}

/// One quantizer transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Switch {
    pub t: f64,
    /// Delayed feedback value at the switch.
    pub u: f64,
    /// Distance between `|u|` and the trigger that fired.
    pub residual: f64,
    pub from: QuantizerState,
    pub to: QuantizerState,
    pub output: f64,
}

/// Switched solution with its dense history and per-knot input records.
#[derive(Debug, Clone)]
pub struct Trajectory {
    history: HistoryBuffer,
    u: Vec<f64>,
    psi: Vec<f64>,
    initial_state: QuantizerState,
    initial_output: f64,
    switches: Vec<Switch>,
    horizon: f64,
    dt: f64,
    event_tol: f64,
}

impl Trajectory {
    pub fn history(&self) -> &HistoryBuffer {
        &self.history
    }

    pub fn tau(&self) -> f64 {
        self.history.tau()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn event_tol(&self) -> f64 {
        self.event_tol
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.history.time(k)
    }

    pub fn state(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(self.history.state(k))
    }

    /// Delayed feedback `z(x(t_k - tau))` at knot `k`.
    pub fn u(&self, k: usize) -> f64 {
        self.u[k]
    }

    /// Quantizer output driving the plant on the interval after knot `k`.
    pub fn psi(&self, k: usize) -> f64 {
        self.psi[k]
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    pub fn initial_state(&self) -> (QuantizerState, f64) {
        (self.initial_state, self.initial_output)
    }

    /// Whether knot `k` is the post-switch copy of a switching instant.
    pub fn is_switch_knot(&self, k: usize) -> bool {
        k > 0 && self.history.time(k - 1) == self.history.time(k) && self.psi[k - 1] != self.psi[k]
    }

    /// Quantizer state in force at `t` (right-continuous).
    pub fn quantizer_state_at(&self, t: f64) -> QuantizerState {
        let i = self.switches.partition_point(|s| s.t <= t);
        if i == 0 {
            self.initial_state
        } else {
            self.switches[i - 1].to
        }
    }

    pub fn final_state(&self) -> DVector<f64> {
        self.state(self.len() - 1)
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        self.history.eval(t)
    }
}

fn rk4(sys: &ControlSystem, x: &DVector<f64>, psi: f64, h: f64) -> DVector<f64> {
    let k1 = sys.rhs(x, psi);
    let k2 = sys.rhs(&(x + &k1 * (0.5 * h)), psi);
    let k3 = sys.rhs(&(x + &k2 * (0.5 * h)), psi);
    let k4 = sys.rhs(&(x + &k3 * h), psi);
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

/// Magnitude compared against the triggers of `state`.
fn magnitude(state: QuantizerState, u: f64) -> f64 {
    if state.sign() == 0 {
        u.abs()
    } else {
        f64::from(state.sign()) * u
    }
}

struct Recorder {
    history: HistoryBuffer,
    u: Vec<f64>,
    psi: Vec<f64>,
}

impl Recorder {
    fn push(&mut self, t: f64, x: &DVector<f64>, dx: &DVector<f64>, u: f64, psi: f64) {
        self.history.push(t, x, dx);
        self.u.push(u);
        self.psi.push(psi);
    }
}

/// Integrates the quantized delayed loop on `[0, horizon]`.
///
/// The quantizer starts from the initial value rule at `z(phi(-tau))` and
/// the transition law is applied again at `t = 0+`. Between switches the
/// input is constant and the plant is advanced by fixed-step RK4; the
/// delayed signal on a step is read from already stored history, sampled
/// `event_substeps` times, and the first crossing is bisected to
/// `event_tol`.
pub fn simulate(
    system: &ControlSystem,
    quantizer: &QuantizerParams,
    phi: &InitialFunction,
    tau: f64,
    horizon: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau", format!("must be positive, got {tau}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(
            "horizon",
            format!("must be positive, got {horizon}"),
        ));
    }
    let dt = opts.dt(tau);
    let tol = opts.event_tol(tau);
    if !(dt > 0.0 && dt < tau / 10.0) {
        return Err(invalid("dt", format!("need 0 < dt < tau/10, got {dt}")));
    }
    if !(tol > 0.0 && tol < dt) {
        return Err(invalid(
            "event_tol",
            format!("need 0 < event_tol < dt, got {tol}"),
        ));
    }
    phi.validate(system.n())?;

    let range = quantizer.range();
    let out_of_range = |t: f64, value: f64| Error::QuantizerOutOfRange { t, value, range };
    let est_knots = (horizon / dt).ceil() as usize + 16;
    let mut rec = Recorder {
        history: HistoryBuffer::with_capacity(phi.clone(), tau, est_knots),
        u: Vec::with_capacity(est_knots),
        psi: Vec::with_capacity(est_knots),
    };

    let u_init = system.z(&phi.eval(-tau));
    let (mut state, mut psi) = quantizer
        .init(u_init)
        .map_err(|_| out_of_range(0.0, u_init))?;
    let initial = (state, psi);
    let mut x = phi.eval(0.0);
    let mut t = 0.0;
    rec.push(t, &x, &system.rhs(&x, psi), u_init, psi);

    let mut switches: Vec<Switch> = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::new();
    let mut buf = DVector::zeros(system.n());
    let window = 10.0 * tol;
    let cap = opts.accumulation_cap.unwrap_or(4 * (quantizer.j() + 1));

    loop {
        // Transition check at the current instant; more than one transition
        // can fire in a row only if the quantizer lands on a level whose
        // trigger is already passed.
        loop {
            let u = delayed(system, &rec.history, t, tau, &mut buf)?;
            let tr = quantizer.step(state, u).map_err(|_| out_of_range(t, u))?;
            if !tr.switched {
                break;
            }
            let mag = magnitude(state, u);
            let residual = quantizer
                .triggers(state)
                .iter()
                .map(|tg| (mag - tg.value).abs())
                .fold(f64::INFINITY, f64::min);
            switches.push(Switch {
                t,
                u,
                residual,
                from: state,
                to: tr.state,
                output: tr.output,
            });
            state = tr.state;
            psi = tr.output;
            rec.push(t, &x, &system.rhs(&x, psi), u, psi);
            recent.push_back(t);
            while recent.front().is_some_and(|&s| s < t - window) {
                recent.pop_front();
            }
            if recent.len() > cap {
                return Err(Error::EventAccumulation {
                    t,
                    count: recent.len(),
                    window,
                });
            }
        }
        if t >= horizon {
            break;
        }
        let t_next = if horizon - t <= dt * (1.0 + 1e-9) {
            horizon
        } else {
            t + dt
        };

        // Scan the delayed signal on (t, t_next].
        let triggers = quantizer.triggers(state);
        let mut event = None;
        let mut prev = t;
        let substeps = opts.event_substeps.max(1);
        for i in 1..=substeps {
            let s = if i == substeps {
                t_next
            } else {
                t + (t_next - t) * i as f64 / substeps as f64
            };
            let u = delayed(system, &rec.history, s, tau, &mut buf)?;
            let mag = magnitude(state, u);
            let mut best: Option<f64> = None;
            for tg in triggers.iter() {
                if events::hit(mag, tg) {
                    let m = |r: f64| {
                        let mut b = DVector::zeros(system.n());
                        delayed(system, &rec.history, r, tau, &mut b)
                            .map(|u| magnitude(state, u))
                            .unwrap_or(f64::NAN)
                    };
                    let te = events::refine(m, prev, s, tg, tol);
                    best = Some(best.map_or(te, |b: f64| b.min(te)));
                }
            }
            if best.is_some() {
                event = best;
                break;
            }
            if !(u.abs() <= range) {
                return Err(out_of_range(s, u));
            }
            prev = s;
        }

        let t_target = event.unwrap_or(t_next);
        let h = t_target - t;
        if h > 0.0 {
            x = rk4(system, &x, psi, h);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: t_target });
            }
            let u = delayed(system, &rec.history, t_target, tau, &mut buf)?;
            rec.push(t_target, &x, &system.rhs(&x, psi), u, psi);
        }
        t = t_target;
    }

    Ok(Trajectory {
        history: rec.history,
        u: rec.u,
        psi: rec.psi,
        initial_state: initial.0,
        initial_output: initial.1,
        switches,
        horizon,
        dt,
        event_tol: tol,
    })
}

fn delayed(
    system: &ControlSystem,
    history: &HistoryBuffer,
    t: f64,
    tau: f64,
    buf: &mut DVector<f64>,
) -> Result<f64> {
    history.eval_into(t - tau, buf)?;
    Ok(system.z(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_pendulum;

    #[test]
    fn equilibrium_stays_put() {
        let p = make_pendulum(0.1).unwrap();
        let q = QuantizerParams::new(5.0, 0.1, 10).unwrap();
        let tau = 0.01;
        let tr = simulate(
            &p,
            &q,
            &InitialFunction::constant(&[0.0, 0.0]),
            tau,
            1.0,
            &SimOptions::default(),
        )
        .unwrap();
        assert!(tr.switches().is_empty());
        for k in 0..tr.len() {
            assert_eq!(tr.state(k), DVector::zeros(2));
            assert_eq!(tr.psi(k), 0.0);
        }
        assert_eq!(tr.time(tr.len() - 1), 1.0);
    }

    #[test]
    fn rejects_coarse_steps() {
        let p = make_pendulum(0.1).unwrap();
        let q = QuantizerParams::new(5.0, 0.1, 10).unwrap();
        let phi = InitialFunction::constant(&[0.0, 0.0]);
        let r = simulate(&p, &q, &phi, 0.01, 1.0, &SimOptions::with_dt(0.001));
        assert!(matches!(r, Err(Error::InvalidParameter { name: "dt", .. })));
        assert!(simulate(&p, &q, &phi, 0.01, 1.0, &SimOptions::with_dt(0.0009)).is_ok());
    }

    #[test]
    fn small_range_is_reported() {
        let p = make_pendulum(0.1).unwrap();
        let q = QuantizerParams::new(0.5, 0.1, 4).unwrap();
        let phi = InitialFunction::constant(&[3.0, 0.0]);
        let r = simulate(&p, &q, &phi, 0.01, 1.0, &SimOptions::default());
        assert!(matches!(r, Err(Error::QuantizerOutOfRange { t, .. }) if t == 0.0));
    }
}
