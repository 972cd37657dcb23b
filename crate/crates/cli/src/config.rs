//! Run configuration file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector, RowDVector};
use qdelay::sim::{InitialFunction, SimOptions};
use qdelay::systems::{self, ControlSystem, Feedback};
use qdelay::verify;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Pendulum,
    Linear {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        k_tilde: Vec<f64>,
    },
}

/// Either `"auto"` (0.9 of the closed-form bound) or an explicit delay.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSpec {
    Auto(AutoTag),
    Value(f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl Default for TauSpec {
    fn default() -> Self {
        TauSpec::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// `count` constants of norm `radius` (default `r`) on a circle.
    Ring {
        count: usize,
        radius: Option<f64>,
    },
    Constant {
        value: Vec<f64>,
    },
    Polynomial {
        coefficients: Vec<Vec<f64>>,
    },
    Sinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        frequency: f64,
        phase: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_sweep_start")]
    pub start: f64,
    #[serde(default = "default_sweep_stop")]
    pub stop: f64,
    #[serde(default = "default_sweep_points")]
    pub points: usize,
    /// Adds the delay bound of the configured linear system per row.
    #[serde(default)]
    pub include_linear: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            start: default_sweep_start(),
            stop: default_sweep_stop(),
            points: default_sweep_points(),
            include_linear: false,
        }
    }
}

fn default_sweep_start() -> f64 {
    0.01
}
fn default_sweep_stop() -> f64 {
    0.99
}
fn default_sweep_points() -> usize {
    99
}
fn default_horizon() -> f64 {
    50.0
}
fn default_stride() -> usize {
    10
}
fn default_scale() -> f64 {
    1.0
}
fn default_paths() -> usize {
    100_000
}
fn default_samples() -> usize {
    10_000
}
fn default_initial() -> Vec<InitialSpec> {
    vec![InitialSpec::Ring {
        count: 8,
        radius: None,
    }]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub delta: f64,
    #[serde(default)]
    pub tau: TauSpec,
    pub r: f64,
    pub eps: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub dt: Option<f64>,
    pub event_tol: Option<f64>,
    #[serde(default = "default_initial")]
    pub initial_functions: Vec<InitialSpec>,
    #[serde(default)]
    pub sweep: SweepSpec,
    /// Every `output_stride`-th knot is written and checked against the
    /// functional bound.
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default)]
    pub seed: u64,
    /// Multiplies the feedback law; values other than 1 inject faults.
    #[serde(default = "default_scale")]
    pub feedback_scale: f64,
    #[serde(default = "default_paths")]
    pub quantizer_paths: usize,
    #[serde(default = "default_samples")]
    pub lemma_samples: usize,
}

/// Parsed configuration together with the hash of its file contents.
pub struct Loaded {
    pub config: RunConfig,
    pub hash: String,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid config {}", path.display()))?;
    config.validate()?;
    Ok(Loaded {
        config,
        hash: hex::encode(Sha256::digest(&bytes)),
    })
}

fn check(ok: bool, field: &str, msg: impl std::fmt::Display) -> Result<()> {
    if !ok {
        bail!("config field `{field}`: {msg}");
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.delta;
        check(
            d > 0.0 && d < 1.0,
            "delta",
            format!("must lie in (0, 1), got {d}"),
        )?;
        check(
            self.r.is_finite() && self.r > 0.0,
            "r",
            format!("must be positive, got {}", self.r),
        )?;
        check(
            self.eps > 0.0 && self.eps < self.r,
            "eps",
            format!(
                "must satisfy 0 < eps < r, got eps = {} and r = {}",
                self.eps, self.r
            ),
        )?;
        check(
            self.horizon.is_finite() && self.horizon > 0.0,
            "horizon",
            "must be positive",
        )?;
        if let TauSpec::Value(t) = self.tau {
            check(
                t.is_finite() && t > 0.0,
                "tau",
                format!("must be positive or \"auto\", got {t}"),
            )?;
        }
        if let Some(dt) = self.dt {
            check(dt.is_finite() && dt > 0.0, "dt", "must be positive")?;
        }
        if let Some(tol) = self.event_tol {
            check(
                tol.is_finite() && tol > 0.0,
                "event_tol",
                "must be positive",
            )?;
        }
        check(
            self.output_stride >= 1,
            "output_stride",
            "must be at least 1",
        )?;
        check(
            self.feedback_scale.is_finite(),
            "feedback_scale",
            "must be finite",
        )?;
        check(
            !self.initial_functions.is_empty(),
            "initial_functions",
            "must not be empty",
        )?;
        let s = &self.sweep;
        check(
            s.points >= 2 && s.start > 0.0 && s.start < s.stop && s.stop < 1.0,
            "sweep",
            "need 0 < start < stop < 1 and at least 2 points",
        )?;
        if let SystemSpec::Linear { a, b, k_tilde } = &self.system {
            let n = a.len();
            check(
                n > 0 && a.iter().all(|r| r.len() == n),
                "system.a",
                "must be a square matrix",
            )?;
            check(b.len() == n, "system.b", format!("must have length {n}"))?;
            check(
                k_tilde.len() == n,
                "system.k_tilde",
                format!("must have length {n}"),
            )?;
        }
        let n = self.dim();
        for (i, spec) in self.initial_functions.iter().enumerate() {
            if let InitialSpec::Ring { count, radius } = spec {
                check(
                    *count > 0,
                    &format!("initial_functions[{i}].count"),
                    "must be positive",
                )?;
                if let Some(r) = radius {
                    check(
                        *r >= 0.0,
                        &format!("initial_functions[{i}].radius"),
                        "must be nonnegative",
                    )?;
                }
            } else {
                for phi in self.expand(spec) {
                    phi.validate(n).map_err(|e| {
                        anyhow::anyhow!("config field `initial_functions[{i}]`: {e}")
                    })?;
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.system {
            SystemSpec::Pendulum => 2,
            SystemSpec::Linear { a, .. } => a.len(),
        }
    }

    fn expand(&self, spec: &InitialSpec) -> Vec<InitialFunction> {
        match spec.clone() {
            InitialSpec::Ring { count, radius } => {
                verify::ring(self.dim(), count, radius.unwrap_or(self.r))
            }
            InitialSpec::Constant { value } => vec![InitialFunction::Constant { value }],
            InitialSpec::Polynomial { coefficients } => {
                vec![InitialFunction::Polynomial { coefficients }]
            }
            InitialSpec::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => vec![InitialFunction::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            }],
        }
    }

    /// Initial functions in configuration order, rings expanded.
    pub fn initial_functions(&self) -> Vec<InitialFunction> {
        self.initial_functions
            .iter()
            .flat_map(|s| self.expand(s))
            .collect()
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt,
            event_tol: self.event_tol,
            ..SimOptions::default()
        }
    }

    /// Builds the configured system with the feedback scale applied.
    pub fn build_system(&self) -> Result<ControlSystem> {
        let sys = build(&self.system, self.delta)?;
        Ok(scale_feedback(sys, self.feedback_scale))
    }

    /// Delay to use and the closed-form bound it is compared against.
    pub fn resolve_tau(&self, system: &ControlSystem) -> Result<(f64, f64)> {
        let bound = systems::tau_max(system)?;
        let tau = match self.tau {
            TauSpec::Auto(_) => 0.9 * bound,
            TauSpec::Value(t) => t,
        };
        Ok((tau, bound))
    }

    pub fn sweep_deltas(&self) -> Vec<f64> {
        let s = &self.sweep;
        let n = s.points - 1;
        (0..=n)
            .map(|i| s.start + (s.stop - s.start) * i as f64 / n as f64)
            .collect()
    }
}

pub fn build(spec: &SystemSpec, delta: f64) -> Result<ControlSystem> {
    Ok(match spec {
        SystemSpec::Pendulum => systems::make_pendulum(delta)?,
        SystemSpec::Linear { a, b, k_tilde } => {
            let n = a.len();
            let a = DMatrix::from_row_iterator(n, n, a.iter().flatten().copied());
            systems::make_linear(
                a,
                DVector::from_column_slice(b),
                RowDVector::from_row_slice(k_tilde),
                delta,
            )?
            .0
        }
    })
}

fn scale_feedback(sys: ControlSystem, scale: f64) -> ControlSystem {
    if scale == 1.0 {
        return sys;
    }
    let fb = match sys.feedback().clone() {
        Feedback::Linear(k) => Feedback::Linear(k * scale),
        other => Feedback::Custom(std::sync::Arc::new(move |x| scale * other.eval(x))),
    };
    sys.with_feedback(fb)
}

/// Double integrator used when the configured system is not linear.
pub fn stock_linear() -> SystemSpec {
    SystemSpec::Linear {
        a: vec![vec![0.0, 1.0], vec![0.0, 0.0]],
        b: vec![0.0, 1.0],
        k_tilde: vec![-1.0, -2.0],
    }
}
