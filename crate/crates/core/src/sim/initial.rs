use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Initial function on `[-2 tau, 0]`, with its derivative in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialFunction {
    Constant {
        value: Vec<f64>,
    },
    /// `sum_k c_k t^k`; `coefficients[k]` is the vector `c_k`.
    Polynomial {
        coefficients: Vec<Vec<f64>>,
    },
    /// `offset + amplitude * sin(frequency t + phase)`, componentwise.
    Sinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        frequency: f64,
        phase: f64,
    },
}

impl InitialFunction {
    pub fn constant(value: &[f64]) -> Self {
        InitialFunction::Constant {
            value: value.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialFunction::Constant { value } => value.len(),
            InitialFunction::Polynomial { coefficients } => {
                coefficients.first().map_or(0, Vec::len)
            }
            InitialFunction::Sinusoid { offset, .. } => offset.len(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = match self {
            InitialFunction::Constant { value } => value.len() == n,
            InitialFunction::Polynomial { coefficients } => {
                !coefficients.is_empty() && coefficients.iter().all(|c| c.len() == n)
            }
            InitialFunction::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                offset.len() == n
                    && amplitude.len() == n
                    && frequency.is_finite()
                    && phase.is_finite()
            }
        };
        if !ok {
            return Err(invalid(
                "initial_function",
                format!("must have dimension {n}"),
            ));
        }
        let finite = match self {
            InitialFunction::Constant { value } => value.iter().all(|v| v.is_finite()),
            InitialFunction::Polynomial { coefficients } => {
                coefficients.iter().flatten().all(|v| v.is_finite())
            }
            InitialFunction::Sinusoid {
                offset, amplitude, ..
            } => offset.iter().chain(amplitude).all(|v| v.is_finite()),
        };
        if !finite {
            return Err(invalid("initial_function", "non-finite coefficient"));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut DVector<f64>) {
        match self {
            InitialFunction::Constant { value } => out.copy_from_slice(value),
            InitialFunction::Polynomial { coefficients } => {
                out.fill(0.0);
                for c in coefficients.iter().rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * t + ci;
                    }
                }
            }
            InitialFunction::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                let s = (frequency * t + phase).sin();
                for ((o, a), b) in out.iter_mut().zip(offset).zip(amplitude) {
                    *o = a + b * s;
                }
            }
        }
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        let n = self.dim();
        match self {
            InitialFunction::Constant { .. } => DVector::zeros(n),
            InitialFunction::Polynomial { coefficients } => {
                let mut out = DVector::zeros(n);
                for (k, c) in coefficients.iter().enumerate().skip(1).rev() {
                    for (o, ci) in out.iter_mut().zip(c) {
                        *o = *o * t + k as f64 * ci;
                    }
                }
                out
            }
            InitialFunction::Sinusoid {
                amplitude,
                frequency,
                phase,
                ..
            } => {
                let c = frequency * (frequency * t + phase).cos();
                DVector::from_iterator(n, amplitude.iter().map(|b| b * c))
            }
        }
    }

    /// `sup_{-2 tau <= t <= 0} |phi(t)|`; exact for constants, sampled on
    /// 4001 points otherwise.
    pub fn sup_norm(&self, tau: f64) -> f64 {
        match self {
            InitialFunction::Constant { value } => DVector::from_column_slice(value).norm(),
            _ => (0..=4000)
                .map(|i| self.eval(-2.0 * tau * f64::from(i) / 4000.0).norm())
                .fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_derivative() {
        let p = InitialFunction::Polynomial {
            coefficients: vec![vec![1.0, 0.0], vec![2.0, -1.0], vec![0.0, 3.0]],
        };
        let x = p.eval(-0.5);
        assert_relative_eq!(x[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], 0.5 + 0.75, epsilon = 1e-15);
        let d = p.derivative(-0.5);
        assert_relative_eq!(d[0], 2.0, epsilon = 1e-15);
        assert_relative_eq!(d[1], -1.0 - 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sinusoid_derivative_matches_differences() {
        let s = InitialFunction::Sinusoid {
            offset: vec![0.1, 0.0],
            amplitude: vec![0.5, -0.2],
            frequency: 30.0,
            phase: 0.3,
        };
        let h = 1e-6;
        let fd = (s.eval(-0.01 + h) - s.eval(-0.01 - h)) / (2.0 * h);
        assert!((fd - s.derivative(-0.01)).norm() < 1e-6);
        assert!(s.sup_norm(0.1) <= 0.1 + 0.29f64.sqrt() + 1e-12);
    }

    #[test]
    fn constant_norm_and_validation() {
        let c = InitialFunction::constant(&[0.6, 0.8]);
        assert_relative_eq!(c.sup_norm(1.0), 1.0, epsilon = 1e-15);
        assert!(c.validate(2).is_ok());
        assert!(c.validate(3).is_err());
        assert!(InitialFunction::constant(&[f64::NAN, 0.0])
            .validate(2)
            .is_err());
        assert_eq!(c.derivative(-0.3), DVector::zeros(2));
    }
}
