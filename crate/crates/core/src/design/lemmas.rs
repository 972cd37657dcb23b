//! Comparison functions that lower-bound the augmented dissipation
//! `Wbar(x, z) = W(x)/2 + |z|/(4 tau)` in terms of `|(x, z)|` or of
//! `V(x) + |z|`.

use nalgebra::DVector;

use crate::sampling;
use crate::systems::{ControlSystem, Dissipation};

/// Panels of the composite trapezoid rule used when no closed form exists.
pub const TRAPEZOID_PANELS: usize = 128;
const SHELL_SAMPLES: usize = 512;

/// Augmented dissipation on `R^{n+1}`.
#[derive(Clone)]
pub struct WBar {
    dissipation: Dissipation,
    n: usize,
    tau: f64,
}

impl WBar {
    pub fn new(system: &ControlSystem, tau: f64) -> Self {
        WBar {
            dissipation: system.dissipation().clone(),
            n: system.n(),
            tau,
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn eval(&self, x: &DVector<f64>, z: f64) -> f64 {
        0.5 * self.dissipation.eval(x) + z.abs() / (4.0 * self.tau)
    }

    /// Evaluates at `xi = (x, z)` with `z` the last component.
    pub fn eval_joint(&self, xi: &DVector<f64>) -> f64 {
        let x = xi.rows(0, self.n).into_owned();
        self.eval(&x, xi[self.n])
    }

    /// `min_{lo <= |xi| <= hi} Wbar(xi)`. For `W = c |x|^2` the minimum over
    /// a sphere of radius `r` is `min(c r^2/2, r/(4 tau))` and grows with `r`.
    pub fn shell_min(&self, lo: f64, hi: f64) -> f64 {
        match &self.dissipation {
            Dissipation::Quadratic { c } => self.sphere_min(*c, lo),
            Dissipation::Custom(_) => {
                sampling::min_over_shell(self.n + 1, lo, hi, SHELL_SAMPLES, |xi| {
                    self.eval_joint(xi)
                })
            }
        }
    }

    fn sphere_min(&self, c: f64, r: f64) -> f64 {
        (0.5 * c * r * r).min(r / (4.0 * self.tau))
    }

    /// `int_0^m min_{l <= |xi| <= hi} Wbar(xi) dl` for `m <= hi`.
    pub fn shell_integral(&self, m: f64, hi: f64) -> f64 {
        let m = m.clamp(0.0, hi);
        match &self.dissipation {
            Dissipation::Quadratic { c } => {
                // c l^2/2 below l* = 1/(2 c tau), l/(4 tau) above.
                let ls = 1.0 / (2.0 * c * self.tau);
                if m <= ls {
                    c * m.powi(3) / 6.0
                } else {
                    c * ls.powi(3) / 6.0 + (m * m - ls * ls) / (8.0 * self.tau)
                }
            }
            Dissipation::Custom(_) => {
                trapezoid(|l| self.shell_min(l, hi), 0.0, m, TRAPEZOID_PANELS)
            }
        }
    }
}

/// Composite trapezoid rule on `[a, b]` with `panels` panels.
pub fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let inner: f64 = (1..panels).map(|i| f(a + h * i as f64)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// `K_a` and `K_b` with `K_a(|xi|) / K_b(|xi|) <= Wbar(xi)` for every `xi`.
#[derive(Clone)]
pub struct LemmaOne {
    wbar: WBar,
}

impl LemmaOne {
    pub fn new(wbar: WBar) -> Self {
        LemmaOne { wbar }
    }

    pub fn ka(&self, m: f64) -> f64 {
        self.wbar.shell_integral(m.min(1.0), 1.0) + (m - 1.0).max(0.0)
    }

    pub fn kb(&self, m: f64) -> f64 {
        1.0 + self.ka(m) / self.wbar.shell_min(1.0, m.max(1.0))
    }
}

/// `K_c(s) = K_a(B_S(s))`, `K_d(s) = K_b(B_L(s))`, so that
/// `K_c(V + |z|) / K_d(V + |z|) <= Wbar(x, z)`.
#[derive(Clone)]
pub struct LemmaTwo {
    one: LemmaOne,
    lambda_min: f64,
    lambda_max: f64,
}

impl LemmaTwo {
    pub fn new(system: &ControlSystem, tau: f64) -> Self {
        LemmaTwo {
            one: LemmaOne::new(WBar::new(system, tau)),
            lambda_min: system.lyapunov().lambda_min(),
            lambda_max: system.lyapunov().lambda_max(),
        }
    }

    /// Lower bound of `|(x, z)|` given `V(x) + |z| = l`.
    pub fn b_s(&self, l: f64) -> f64 {
        b_s(self.lambda_max, l)
    }

    /// Upper bound of `|(x, z)|` given `V(x) + |z| = l`.
    pub fn b_l(&self, l: f64) -> f64 {
        (l.max(0.0) / self.lambda_min).sqrt() + l
    }

    pub fn kc(&self, s: f64) -> f64 {
        self.one.ka(self.b_s(s))
    }

    pub fn kd(&self, s: f64) -> f64 {
        self.one.kb(self.b_l(s))
    }
}

fn b_s(lambda_max: f64, l: f64) -> f64 {
    let l = l.max(0.0);
    (0.5 * l / lambda_max).sqrt().min(0.5 * l)
}

/// Single comparison function valid on the bounded region
/// `|x| <= omega`, `0 <= z <= z_R`: `kappa_7(s) = K_e(B_S(s)/2)` with
/// `K_e(m) = (1/mbar) int_0^m min_{l <= |xi| <= mbar} Wbar dl`.
#[derive(Clone)]
pub struct Kappa7 {
    wbar: WBar,
    mbar: f64,
    lambda_max: f64,
}

impl Kappa7 {
    pub fn new(system: &ControlSystem, tau: f64, mbar: f64) -> Self {
        Kappa7 {
            wbar: WBar::new(system, tau),
            mbar,
            lambda_max: system.lyapunov().lambda_max(),
        }
    }

    pub fn mbar(&self) -> f64 {
        self.mbar
    }

    pub fn wbar(&self) -> &WBar {
        &self.wbar
    }

    pub fn ke(&self, m: f64) -> f64 {
        self.wbar.shell_integral(m.min(self.mbar), self.mbar) / self.mbar
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.ke(0.5 * b_s(self.lambda_max, s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::make_pendulum;
    use approx::assert_relative_eq;

    fn lemma_one() -> LemmaOne {
        LemmaOne::new(WBar::new(&make_pendulum(0.1).unwrap(), 0.05))
    }

    #[test]
    fn ka_kb_at_zero() {
        let l = lemma_one();
        assert_eq!(l.ka(0.0), 0.0);
        assert_eq!(l.kb(0.0), 1.0);
    }

    #[test]
    fn ka_has_unit_slope_past_one() {
        let l = lemma_one();
        for m in [1.5, 2.0, 10.0] {
            assert_relative_eq!(l.ka(m), l.ka(1.0) + (m - 1.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_form_integral_matches_trapezoid() {
        let w = WBar::new(&make_pendulum(0.1).unwrap(), 0.4);
        for m in [0.1, 1.0, 1.6, 3.0] {
            let trap = trapezoid(|l| w.shell_min(l, 5.0), 0.0, m, 20_000);
            assert_relative_eq!(w.shell_integral(m, 5.0), trap, max_relative = 1e-7);
        }
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        assert_relative_eq!(
            trapezoid(|x| 2.0 * x + 1.0, 0.0, 3.0, 7),
            12.0,
            epsilon = 1e-12
        );
        assert_eq!(trapezoid(|x| x, 1.0, 1.0, 4), 0.0);
    }

    #[test]
    fn kappa7_vanishes_at_zero() {
        let p = make_pendulum(0.1).unwrap();
        let k = Kappa7::new(&p, 3e-3, 30.0);
        assert_eq!(k.eval(0.0), 0.0);
        assert!(k.eval(1.0) > 0.0);
    }
}
