//! Constructive design constants: bounds on the state, the quantizer range
//! `u0(R)`, the dead-zone size `mu(eps, R)` and the number of levels.

use serde::{Deserialize, Serialize};

use super::lemmas::Kappa7;
use crate::error::{invalid, Error, Result};
use crate::quantizer::{density, QuantizerParams};
use crate::systems::{self, ControlSystem, InputChannel};

/// Comparison functions for a system and a delay `tau`.
#[derive(Debug, Clone)]
pub struct KappaChain<'a> {
    system: &'a ControlSystem,
    tau: f64,
    gamma: f64,
    qb_norm: f64,
}

impl<'a> KappaChain<'a> {
    pub fn new(system: &'a ControlSystem, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(invalid("tau", format!("must be positive, got {tau}")));
        }
        let gamma = system.gamma().ok_or(Error::Unsupported("kappa_3 slope"))?;
        let qb_norm = match system.input() {
            InputChannel::Constant(b) => (system.lyapunov().q() * b).norm(),
            InputChannel::StateDependent(_) => return Err(Error::Unsupported("kappa_5 bound")),
        };
        Ok(KappaChain {
            system,
            tau,
            gamma,
            qb_norm,
        })
    }

    pub fn system(&self) -> &ControlSystem {
        self.system
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn kappa3(&self, l: f64) -> f64 {
        self.gamma * (l + 1.0)
    }

    pub fn kappa4(&self, l: f64) -> f64 {
        2.0 * self.kappa3(l)
    }

    /// `|L_g V(x)| <= kappa5(V(x))` with `kappa5(v) = 2 |QB| sqrt(v / lambda_min)`.
    pub fn kappa5(&self, v: f64) -> f64 {
        2.0 * self.qb_norm * (v.max(0.0) / self.system.lyapunov().lambda_min()).sqrt()
    }

    pub fn kappa6(&self, r: f64) -> f64 {
        self.kappa5(self.system.kappa2(self.omega(r)))
    }

    /// `alpha(R) = kappa1^-1(exp(kappa4(R) tau) (kappa2(R) + 1) - 1)`.
    pub fn alpha(&self, r: f64) -> f64 {
        let s = self.system;
        s.kappa1_inv((self.kappa4(r) * self.tau).exp() * (s.kappa2(r) + 1.0) - 1.0)
    }

    pub fn gamma_r(&self, r: f64) -> f64 {
        self.alpha(self.alpha(r))
    }

    /// Bound on the functional: `kappa2(gamma) + (tau/4) sup_{|a| <= gamma} W(a)`.
    pub fn beb(&self, r: f64) -> f64 {
        let g = self.gamma_r(r);
        self.system.kappa2(g) + 0.25 * self.tau * systems::sup_w(self.system, g)
    }

    pub fn omega(&self, r: f64) -> f64 {
        self.system.kappa1_inv(self.beb(r)) + r
    }

    pub fn u0(&self, r: f64) -> f64 {
        systems::sup_abs_z(self.system, self.omega(r)) + 1.0
    }

    /// Bound on the integral part of the functional on `|x| <= omega(R)`.
    pub fn z_r(&self, r: f64) -> f64 {
        0.25 * self.tau * systems::sup_w(self.system, self.omega(r))
    }

    pub fn mbar(&self, r: f64) -> f64 {
        self.omega(r) + self.z_r(r)
    }

    pub fn kappa7(&self, r: f64) -> Kappa7 {
        Kappa7::new(self.system, self.tau, self.mbar(r))
    }
}

/// Every constant of the construction, for one `(R, eps, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOutput {
    pub r: f64,
    pub eps: f64,
    pub delta: f64,
    pub tau: f64,
    pub tau_max: Option<f64>,
    pub gamma_slope: f64,
    pub alpha_r: f64,
    pub gamma_r: f64,
    pub omega_r: f64,
    pub u0_r: f64,
    pub beb: f64,
    pub z_r: f64,
    pub mbar: f64,
    pub kappa6: f64,
    pub a1: f64,
    pub a2: f64,
    pub mu: f64,
    pub j_min: usize,
    pub quantizer: QuantizerParams,
}

/// Smallest `j` with `u0 rho^j <= mu (1 + delta)`, starting from the
/// logarithmic estimate.
pub fn levels_needed(u0: f64, mu: f64, delta: f64) -> usize {
    let rho = density(delta);
    let est = ((mu * (1.0 + delta) / u0).ln() / rho.ln()).abs().ceil();
    let mut j = (est as usize + 1).max(1);
    while u0 * rho.powi(j as i32) / (1.0 + delta) > mu {
        j += 1;
    }
    j
}

/// Runs the whole construction for initial radius `r` and target radius `eps`.
pub fn design(system: &ControlSystem, tau: f64, r: f64, eps: f64) -> Result<DesignOutput> {
    if !(eps > 0.0 && eps < r && r.is_finite()) {
        return Err(Error::InvalidTarget { eps, r });
    }
    let delta = system.delta();
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    let chain = KappaChain::new(system, tau)?;
    let k7 = chain.kappa7(r);
    let kappa6 = chain.kappa6(r);
    let beb = chain.beb(r);
    let a1 = k7.eval(beb) / (4.0 * kappa6);
    let a2 = k7.eval(system.kappa1(eps)) / (4.0 * kappa6);
    let mu = a1.min(a2);
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("degenerate dead-zone size {mu}")));
    }
    let u0 = chain.u0(r);
    let j_min = levels_needed(u0, mu, delta);
    let quantizer = QuantizerParams::new(u0, delta, j_min)?;
    Ok(DesignOutput {
        r,
        eps,
        delta,
        tau,
        tau_max: systems::tau_max(system).ok(),
        gamma_slope: chain.gamma,
        alpha_r: chain.alpha(r),
        gamma_r: chain.gamma_r(r),
        omega_r: chain.omega(r),
        u0_r: u0,
        beb,
        z_r: chain.z_r(r),
        mbar: chain.mbar(r),
        kappa6,
        a1,
        a2,
        mu,
        j_min,
        quantizer,
    })
}
