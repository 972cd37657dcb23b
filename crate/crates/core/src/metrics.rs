//! Functional values along trajectories, entry times and bound checks.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::DesignOutput;
use crate::error::{Error, Result};
use crate::sim::Trajectory;
use crate::systems::ControlSystem;

/// `U(t) = V(x(t)) + 1/(8 tau) int_{t-2tau}^t int_s^t W(x(l)) dl ds`.
///
/// The double integral equals `int_{t-2tau}^t (l - t + 2tau) W(x(l)) dl`,
/// evaluated by Simpson's rule on every knot interval of the window.
pub fn krasovskii_u(traj: &Trajectory, system: &ControlSystem, t: f64) -> Result<f64> {
    let tau = traj.tau();
    let h = traj.history();
    if !(t >= 2.0 * tau && t <= h.end()) {
        return Err(Error::OutOfDomain {
            t,
            start: 2.0 * tau,
            end: h.end(),
        });
    }
    let a = t - 2.0 * tau;
    let times = h.times();
    let integrand = |l: f64, x: &DVector<f64>| (l - a) * system.w(x);
    let mut buf = DVector::zeros(system.n());
    let mut at = |l: f64| -> Result<f64> {
        h.eval_into(l, &mut buf)?;
        Ok(integrand(l, &buf))
    };
    let first = times.partition_point(|&s| s <= a);
    let last = times.partition_point(|&s| s < t);
    let mut nodes = Vec::with_capacity(last.saturating_sub(first) + 2);
    nodes.push(a);
    nodes.extend(times[first..last].iter().copied().filter(|&s| s > a));
    nodes.push(t);
    nodes.dedup();
    let mut total = 0.0;
    let mut f_lo = at(nodes[0])?;
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let f_mid = at(0.5 * (lo + hi))?;
        let f_hi = at(hi)?;
        total += (hi - lo) / 6.0 * (f_lo + 4.0 * f_mid + f_hi);
        f_lo = f_hi;
    }
    let x = h.eval(t)?;
    Ok(system.v(&x) + total / (8.0 * tau))
}

/// Smallest recorded time after which every recorded state satisfies
/// `|x| <= eps`, or `None` if the last recorded state is outside.
pub fn entry_time(traj: &Trajectory, eps: f64) -> Option<f64> {
    let h = traj.history();
    let norm = |k: usize| h.state(k).iter().map(|v| v * v).sum::<f64>().sqrt();
    let n = h.len();
    if n == 0 || norm(n - 1) > eps {
        return None;
    }
    let mut k = n - 1;
    while k > 0 && norm(k - 1) <= eps {
        k -= 1;
    }
    Some(h.time(k))
}

/// Smallest positive time between consecutive switching instants. Several
/// transitions can share one instant when the delayed signal passes more
/// than one trigger within the event tolerance; see [`max_burst`].
pub fn dwell_min(traj: &Trajectory) -> Option<f64> {
    traj.switches()
        .windows(2)
        .map(|w| w[1].t - w[0].t)
        .filter(|&d| d > 0.0)
        .min_by(f64::total_cmp)
}

/// Largest number of transitions fired at a single instant.
pub fn max_burst(traj: &Trajectory) -> usize {
    traj.switches()
        .chunk_by(|a, b| a.t == b.t)
        .map(<[_]>::len)
        .max()
        .unwrap_or(0)
}

/// Verdicts for one run against the design bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub horizon: f64,
    pub eps: f64,
    pub entry_time: Option<f64>,
    pub sup_norm: f64,
    pub omega_bound: f64,
    pub omega_bound_ok: bool,
    pub u_bound: f64,
    pub u_max: Option<f64>,
    pub u_bound_ok: bool,
    /// `(t, U(t))` samples for `t >= 2 tau`.
    pub u_trace: Vec<(f64, f64)>,
    pub dwell_min: Option<f64>,
    pub max_burst: usize,
    pub switch_count: usize,
    pub max_event_residual: Option<f64>,
    /// Simulation error, when the run did not complete.
    pub failure: Option<String>,
}

impl SimReport {
    /// All bounds hold, no failure, and the target ball is reached.
    pub fn passed(&self) -> bool {
        self.failure.is_none()
            && self.omega_bound_ok
            && self.u_bound_ok
            && self.entry_time.is_some()
    }

    /// Report for a run that stopped with `err`.
    pub fn failed(design: &DesignOutput, horizon: f64, err: &Error) -> Self {
        SimReport {
            horizon,
            eps: design.eps,
            entry_time: None,
            sup_norm: f64::NAN,
            omega_bound: design.omega_r,
            omega_bound_ok: false,
            u_bound: design.beb,
            u_max: None,
            u_bound_ok: false,
            u_trace: Vec::new(),
            dwell_min: None,
            max_burst: 0,
            switch_count: 0,
            max_event_residual: None,
            failure: Some(err.to_string()),
        }
    }
}

/// Relative slack allowed on the functional bound for quadrature error.
pub const U_BOUND_RTOL: f64 = 1e-6;

/// Checks `sup |x| <= omega(R)` and `U(t) <= beb` for `t >= 2 tau`,
/// evaluating `U` at every `stride`-th knot and at the last one.
pub fn verify_bounds(
    traj: &Trajectory,
    design: &DesignOutput,
    system: &ControlSystem,
    stride: usize,
) -> Result<SimReport> {
    let h = traj.history();
    let stride = stride.max(1);
    let mut sup_norm: f64 = 0.0;
    for k in 0..h.len() {
        let nrm = h.state(k).iter().map(|v| v * v).sum::<f64>().sqrt();
        sup_norm = sup_norm.max(nrm);
    }
    let tau = traj.tau();
    let mut u_trace = Vec::new();
    let last = h.len() - 1;
    for k in (0..h.len()).filter(|&k| k % stride == 0 || k == last) {
        let t = h.time(k);
        if t >= 2.0 * tau && u_trace.last().is_none_or(|&(s, _)| s < t) {
            u_trace.push((t, krasovskii_u(traj, system, t)?));
        }
    }
    let u_max = u_trace.iter().map(|&(_, u)| u).max_by(f64::total_cmp);
    let u_bound = design.beb;
    Ok(SimReport {
        horizon: traj.horizon(),
        eps: design.eps,
        entry_time: entry_time(traj, design.eps),
        sup_norm,
        omega_bound: design.omega_r,
        omega_bound_ok: sup_norm <= design.omega_r,
        u_bound,
        u_max,
        u_bound_ok: u_max.is_none_or(|m| m <= u_bound * (1.0 + U_BOUND_RTOL)),
        u_trace,
        dwell_min: dwell_min(traj),
        max_burst: max_burst(traj),
        switch_count: traj.switches().len(),
        max_event_residual: traj
            .switches()
            .iter()
            .map(|s| s.residual)
            .max_by(f64::total_cmp),
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::QuantizerParams;
    use crate::sim::{simulate, InitialFunction, SimOptions};
    use crate::systems::make_pendulum;
    use crate::systems::Feedback;
    use approx::assert_relative_eq;
    use nalgebra::RowDVector;

    fn open_loop(phi: &[f64], horizon: f64) -> (ControlSystem, Trajectory) {
        let p = make_pendulum(0.1)
            .unwrap()
            .with_feedback(Feedback::Linear(RowDVector::from_vec(vec![0.0, 0.0])));
        let q = QuantizerParams::new(10.0, 0.1, 1).unwrap();
        let tr = simulate(
            &p,
            &q,
            &InitialFunction::constant(phi),
            0.01,
            horizon,
            &SimOptions::default(),
        );
        (p, tr.unwrap())
    }

    #[test]
    fn zero_trajectory_has_zero_functional() {
        let (p, tr) = open_loop(&[0.0, 0.0], 0.2);
        assert_eq!(krasovskii_u(&tr, &p, 0.1).unwrap(), 0.0);
        assert_eq!(entry_time(&tr, 0.1), Some(0.0));
        assert!(krasovskii_u(&tr, &p, 0.01).is_err());
    }

    #[test]
    fn entry_time_none_when_outside() {
        let (_, tr) = open_loop(&[0.5, 0.0], 2.0);
        assert_eq!(entry_time(&tr, 0.1), None);
    }

    #[test]
    fn constant_state_functional() {
        // Upright equilibrium, W = 3/4 |x|^2: U = V + (tau/4) W.
        let pi = std::f64::consts::PI;
        let tau = 0.01;
        let (p, tr) = open_loop(&[pi, 0.0], 0.1);
        let x = DVector::from_vec(vec![pi, 0.0]);
        let expect = p.v(&x) + tau / 4.0 * p.w(&x);
        let got = krasovskii_u(&tr, &p, 0.05).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-9);
    }
}
