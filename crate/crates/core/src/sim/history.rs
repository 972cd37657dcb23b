use nalgebra::DVector;

use super::initial::InitialFunction;
use crate::error::{Error, Result};

/// Dense record of the solution: the initial function on `[-2 tau, 0)`
/// followed by knots `(t, x, x')` from `t = 0` on, joined by cubic Hermite
/// interpolation. A switch is stored as two knots at the same time carrying
/// the one-sided derivatives.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    n: usize,
    tau: f64,
    phi: InitialFunction,
    times: Vec<f64>,
    // x then x' per knot, stride 2n.
    data: Vec<f64>,
}

impl HistoryBuffer {
    pub fn new(phi: InitialFunction, tau: f64) -> Self {
        HistoryBuffer {
            n: phi.dim(),
            tau,
            phi,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn with_capacity(phi: InitialFunction, tau: f64, knots: usize) -> Self {
        let mut h = Self::new(phi, tau);
        h.times.reserve(knots);
        h.data.reserve(knots * 2 * h.n);
        h
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn initial_function(&self) -> &InitialFunction {
        &self.phi
    }

    pub fn start(&self) -> f64 {
        -2.0 * self.tau
    }

    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a knot. Times must be nondecreasing.
    pub fn push(&mut self, t: f64, x: &DVector<f64>, dx: &DVector<f64>) {
        debug_assert!(self.times.last().is_none_or(|&l| t >= l));
        self.times.push(t);
        self.data.extend_from_slice(x.as_slice());
        self.data.extend_from_slice(dx.as_slice());
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let o = 2 * self.n * k;
        &self.data[o..o + self.n]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        let o = 2 * self.n * k + self.n;
        &self.data[o..o + self.n]
    }

    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.n);
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// State at time `t`, exact at knots.
    pub fn eval_into(&self, t: f64, out: &mut DVector<f64>) -> Result<()> {
        let slack = 1e-12 * self.tau;
        if !(t >= self.start() - slack && t <= self.end()) || (t >= 0.0 && self.times.is_empty()) {
            return Err(Error::OutOfDomain {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        if t < 0.0 {
            self.phi.eval_into(t, out);
            return Ok(());
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let t0 = self.times[k];
        if t == t0 || k + 1 == self.times.len() {
            out.copy_from_slice(self.state(k));
            return Ok(());
        }
        let t1 = self.times[k + 1];
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (x0, d0) = (self.state(k), self.derivative(k));
        let (x1, d1) = (self.state(k + 1), self.derivative(k + 1));
        for i in 0..self.n {
            out[i] = h00 * x0[i] + h * h10 * d0[i] + h01 * x1[i] + h * h11 * d1[i];
        }
        Ok(())
    }
}
