//! Feedback synthesis and the design constants of the quantized loop.

mod chain;
pub mod lemmas;

use std::sync::Arc;

use nalgebra::DVector;

pub use chain::{design, levels_needed, DesignOutput, KappaChain};

use crate::error::{invalid, Error, Result};
use crate::systems::{ControlSystem, Dissipation, Feedback, InputChannel};

/// Regularization added to `W~` when the redesign gain is computed pointwise.
pub const REDESIGN_ETA: f64 = 1e-9;

/// How the redesign gain `alpha(x)` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RedesignGain {
    /// A constant known to dominate `delta^2/(1-delta) |zeta|^2 / W~`.
    Constant(f64),
    /// `delta^2/(1-delta) |zeta(x)|^2 / (W~(x) + eta)`.
    Pointwise,
}

/// A feedback together with the dissipation rate it certifies.
#[derive(Clone)]
pub struct Redesign {
    pub feedback: Feedback,
    pub dissipation: Dissipation,
}

fn lf_v(sys: &ControlSystem, x: &DVector<f64>) -> f64 {
    sys.grad_v(x).dot(&sys.f(x))
}

fn lg_v(sys: &ControlSystem, x: &DVector<f64>) -> f64 {
    sys.grad_v(x).dot(&sys.g(x))
}

/// Robustifies a nominal law `zeta` with `L_f V + L_g V zeta = -W~` against
/// the multiplicative uncertainty `(1 + p)`, `|p| <= delta`:
/// `z = zeta - alpha L_g V`, certified with `W = 3 W~ / 4`.
///
/// `system` supplies `f`, `g`, `V` and `delta`; its own feedback is ignored.
/// Preconditions are checked on `grid`.
pub fn lyapunov_redesign(
    system: &ControlSystem,
    zeta: Feedback,
    w_tilde: Dissipation,
    gain: RedesignGain,
    grid: &[DVector<f64>],
) -> Result<Redesign> {
    let delta = system.delta();
    let factor = delta * delta / (1.0 - delta);
    for x in grid {
        let zx = zeta.eval(x);
        let wx = w_tilde.eval(x);
        if wx <= 0.0 && zx != 0.0 {
            return Err(Error::DegenerateW);
        }
        let resid = lf_v(system, x) + lg_v(system, x) * zx + wx;
        if resid > 1e-9 * (1.0 + x.norm_squared()) {
            return Err(invalid("zeta", format!("L_fV + L_gV zeta > -W~ at {x:?}")));
        }
        if let RedesignGain::Constant(a) = gain {
            if wx > 0.0 && a < factor * zx * zx / wx * (1.0 - 1e-12) {
                return Err(invalid(
                    "alpha",
                    format!("{a} below the required gain at {x:?}"),
                ));
            }
        }
    }
    let dissipation = match &w_tilde {
        Dissipation::Quadratic { c } => Dissipation::Quadratic { c: 0.75 * c },
        Dissipation::Custom(w) => {
            let w = w.clone();
            Dissipation::Custom(Arc::new(move |x| 0.75 * w(x)))
        }
    };
    let feedback = match (gain, &zeta, system.input()) {
        (RedesignGain::Constant(a), Feedback::Linear(k), InputChannel::Constant(b)) => {
            let lg_row = (system.lyapunov().q() * b).transpose() * 2.0;
            Feedback::Linear(k - lg_row * a)
        }
        _ => {
            let sys = system.clone();
            Feedback::Custom(Arc::new(move |x| {
                let zx = zeta.eval(x);
                let a = match gain {
                    RedesignGain::Constant(a) => a,
                    RedesignGain::Pointwise => factor * zx * zx / (w_tilde.eval(x) + REDESIGN_ETA),
                };
                zx - a * lg_v(&sys, x)
            }))
        }
    };
    Ok(Redesign {
        feedback,
        dissipation,
    })
}

/// Sontag's formula with the gain `K = 2 / (1 - delta)`:
/// `z = K (-a - sqrt(a^2 + b^4)) / b` where `a = L_f V`, `b = L_g V`, and
/// `z = 0` where `b = 0`. Fails with `NotClf` if `b = 0` and `a >= 0` at a
/// nonzero grid point.
pub fn sontag_feedback(system: &ControlSystem, grid: &[DVector<f64>]) -> Result<Feedback> {
    for x in grid {
        if x.norm() == 0.0 {
            continue;
        }
        let b = lg_v(system, x);
        let a = lf_v(system, x);
        if b == 0.0 && a >= 0.0 {
            return Err(Error::NotClf { a });
        }
    }
    let k = 2.0 / (1.0 - system.delta());
    let sys = system.clone();
    Ok(Feedback::Custom(Arc::new(move |x| {
        let b = lg_v(&sys, x);
        if b == 0.0 {
            return 0.0;
        }
        let a = lf_v(&sys, x);
        k * (-a - (a * a + b.powi(4)).sqrt()) / b
    })))
}

/// Damping feedback `z = -xi L_g V` for a Lyapunov stable plant
/// (`L_f V <= 0`), certified with `W = -L_f V + (1 - delta) xi (L_g V)^2`.
pub fn damping_feedback(system: &ControlSystem, xi: f64) -> Result<Redesign> {
    if !(xi > 0.0) {
        return Err(invalid("xi", "must be positive"));
    }
    let feedback = match system.input() {
        InputChannel::Constant(b) => {
            Feedback::Linear((system.lyapunov().q() * b).transpose() * (-2.0 * xi))
        }
        InputChannel::StateDependent(_) => {
            let sys = system.clone();
            Feedback::Custom(Arc::new(move |x| -xi * lg_v(&sys, x)))
        }
    };
    let sys = system.clone();
    let delta = system.delta();
    let dissipation = Dissipation::Custom(Arc::new(move |x| {
        let b = lg_v(&sys, x);
        -lf_v(&sys, x) + (1.0 - delta) * xi * b * b
    }));
    Ok(Redesign {
        feedback,
        dissipation,
    })
}

/// Result of checking the dissipation inequality on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HjiReport {
    pub pass: bool,
    /// Largest `L_f V - (1 - delta^2)/4 (L_g V)^2 + W~` found.
    pub worst_residual: f64,
}

/// `z = -L_g V / 2` for a plant satisfying
/// `L_f V - (1 - delta^2)/4 (L_g V)^2 <= -W~`; the inequality is checked on
/// `grid` and reported.
pub fn dissipation_feedback(
    system: &ControlSystem,
    w_tilde: &Dissipation,
    grid: &[DVector<f64>],
) -> (Feedback, HjiReport) {
    let delta = system.delta();
    let mut worst = f64::NEG_INFINITY;
    for x in grid {
        let b = lg_v(system, x);
        let r = lf_v(system, x) - 0.25 * (1.0 - delta * delta) * b * b + w_tilde.eval(x);
        worst = worst.max(r);
    }
    let pass = grid.is_empty() || worst <= 1e-12;
    let feedback = match system.input() {
        InputChannel::Constant(b) => Feedback::Linear(-(system.lyapunov().q() * b).transpose()),
        InputChannel::StateDependent(_) => {
            let sys = system.clone();
            Feedback::Custom(Arc::new(move |x| -0.5 * lg_v(&sys, x)))
        }
    };
    (
        feedback,
        HjiReport {
            pass,
            worst_residual: worst,
        },
    )
}
