//! Property suites shared by the command-line `verify` command.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::lemmas::{LemmaOne, LemmaTwo, WBar};
use crate::design::{DesignOutput, KappaChain};
use crate::error::Result;
use crate::metrics::{verify_bounds, SimReport};
use crate::quantizer::{drive_piecewise_linear, Emission, QuantizerParams};
use crate::sim::{simulate, InitialFunction, SimOptions};
use crate::systems::{self, ControlSystem};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        CheckResult {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Recovers `lambda` from an emitted output and checks it lies in the range
/// of the envelope branch for `u`, up to `tol`.
pub fn sector_lambda_ok(q: &QuantizerParams, e: &Emission, tol: f64) -> bool {
    let d = q.delta();
    let (u, v) = (e.u, e.output);
    if u == 0.0 {
        return v == 0.0;
    }
    if u.abs() > q.dead_zone_edge() {
        let lambda = (v / u - 1.0) / d;
        (-1.0 - tol..=1.0 + tol).contains(&lambda)
    } else {
        let lambda = v / ((1.0 + d) * u);
        (-tol..=1.0 + tol).contains(&lambda)
    }
}

/// Random bounded-slope piecewise-linear path inside the quantizer range.
pub fn random_path(
    rng: &mut impl Rng,
    q: &QuantizerParams,
    knots: usize,
    max_slope: f64,
) -> Vec<(f64, f64)> {
    let range = q.range();
    let mut t = 0.0;
    let mut u = rng.random_range(-range..=range);
    let mut out = Vec::with_capacity(knots);
    out.push((t, u));
    for _ in 1..knots {
        let dt = rng.random_range(0.01..1.0);
        let slope = rng.random_range(-max_slope..=max_slope);
        t += dt;
        u = (u + slope * dt).clamp(-range, range);
        out.push((t, u));
    }
    out
}

/// Quantizer parameter sets exercised by the property suites.
pub fn suite_quantizers() -> Vec<QuantizerParams> {
    [
        (1.0, 1.0 / 3.0, 1),
        (2.0, 0.1, 6),
        (5.0, 0.6, 3),
        (1.0, 0.05, 12),
    ]
    .into_iter()
    .map(|(u0, d, j)| QuantizerParams::new(u0, d, j).expect("valid suite parameters"))
    .collect()
}

/// Every emitted output lies in the set of levels and in the envelope.
pub fn quantizer_sector_suite(paths: usize, seed: u64) -> CheckResult {
    let qs = suite_quantizers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut emitted = 0usize;
    let mut bad = 0usize;
    for i in 0..paths {
        let q = &qs[i % qs.len()];
        let path = random_path(&mut rng, q, 24, 2.0 * q.range());
        match drive_piecewise_linear(q, &path) {
            Ok(em) => {
                for e in &em {
                    emitted += 1;
                    let sign_ok = e.output == 0.0 || e.output.signum() == e.u.signum();
                    if !(q.is_output(e.output) && sign_ok && sector_lambda_ok(q, e, 1e-12)) {
                        bad += 1;
                    }
                }
            }
            Err(_) => bad += 1,
        }
    }
    CheckResult::new(
        "quantizer_sector",
        bad == 0,
        format!("{paths} paths, {emitted} outputs, {bad} violations"),
    )
}

/// Smallest time between switches along a triangle wave of slope `slope`
/// sweeping the whole range `periods` times.
pub fn ramp_dwell(q: &QuantizerParams, slope: f64, periods: usize) -> Option<f64> {
    let r = q.range();
    let half = 2.0 * r / slope;
    let mut knots = vec![(0.0, -r)];
    for p in 0..periods {
        let t0 = 2.0 * half * p as f64;
        knots.push((t0 + half, r));
        knots.push((t0 + 2.0 * half, -r));
    }
    let em = drive_piecewise_linear(q, &knots).ok()?;
    em.iter()
        .filter(|e| e.switched)
        .map(|e| e.t)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1] - w[0])
        .min_by(f64::total_cmp)
}

/// Dwell time along ramps is at least the minimum trigger gap over the slope.
pub fn dwell_suite() -> CheckResult {
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for q in suite_quantizers() {
        for slope in [0.1, 1.0, 10.0] {
            let bound = q.min_trigger_gap() / slope;
            match ramp_dwell(&q, slope, 3) {
                Some(d) => {
                    worst = worst.min(d - bound);
                    pass &= d >= bound - 1e-9;
                }
                None => pass = false,
            }
        }
    }
    CheckResult::new(
        "quantizer_dwell",
        pass,
        format!("smallest dwell - bound = {worst:.3e}"),
    )
}

/// Decrease condition on a grid of the given radius.
pub fn a1_suite(system: &ControlSystem, radius: f64) -> CheckResult {
    let grid = systems::ball_grid(system.n(), radius, 61);
    let rep = systems::check_a1(system, &grid);
    CheckResult::new(
        "decrease_condition",
        rep.pass,
        format!(
            "{} points, worst margin {:.3e} at {:?} (p = {})",
            rep.points,
            rep.worst_margin,
            rep.worst_point.as_ref().map(|x| x.as_slice().to_vec()),
            rep.worst_p
        ),
    )
}

fn random_direction(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Sampled inequalities of the comparison-function constructions.
pub fn lemma_suite(
    system: &ControlSystem,
    design: &DesignOutput,
    samples: usize,
    seed: u64,
) -> Result<CheckResult> {
    let tau = design.tau;
    let chain = KappaChain::new(system, tau)?;
    let wbar = WBar::new(system, tau);
    let one = LemmaOne::new(wbar.clone());
    let two = LemmaTwo::new(system, tau);
    let k7 = chain.kappa7(design.r);
    let n = system.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fails = [0usize; 4];
    let rel = |lhs: f64, rhs: f64| lhs <= rhs * (1.0 + 1e-12) + 1e-300;
    for _ in 0..samples {
        // Norms spread over several decades around the unit shell.
        let r = 10f64.powf(rng.random_range(-3.0..2.0));
        let xi = random_direction(&mut rng, n + 1) * r;
        if !rel(one.ka(r) / one.kb(r), wbar.eval_joint(&xi)) {
            fails[0] += 1;
        }
        let x = xi.rows(0, n).into_owned();
        let z = xi[n];
        let s = system.v(&x) + z.abs();
        if !rel(two.kc(s) / two.kd(s), wbar.eval(&x, z)) {
            fails[1] += 1;
        }
        let xb = random_direction(&mut rng, n) * (design.omega_r * rng.random::<f64>());
        let zb = design.z_r * rng.random::<f64>();
        if !rel(k7.eval(system.v(&xb) + zb), wbar.eval(&xb, zb)) {
            fails[2] += 1;
        }
    }
    let top = design.beb;
    let grid: Vec<f64> = (0..100).map(|i| top * f64::from(i) / 99.0).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| k7.eval(s)).collect();
    if vals[0] != 0.0 || vals.windows(2).any(|w| w[1] < w[0]) {
        fails[3] += 1;
    }
    Ok(CheckResult::new(
        "comparison_functions",
        fails.iter().all(|&f| f == 0),
        format!(
            "{samples} samples: Ka/Kb {} fails, Kc/Kd {} fails, kappa7 {} fails, monotonicity {}",
            fails[0],
            fails[1],
            fails[2],
            if fails[3] == 0 { "ok" } else { "violated" }
        ),
    ))
}

/// `count` constant initial functions of norm `r` equally spaced on a circle
/// in the first two coordinates.
pub fn ring(n: usize, count: usize, r: f64) -> Vec<InitialFunction> {
    (0..count)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let mut v = vec![0.0; n];
            v[0] = r * th.cos();
            if n > 1 {
                v[1] = r * th.sin();
            }
            InitialFunction::Constant { value: v }
        })
        .collect()
}

/// Simulates every initial function against the design and checks bounds.
/// Runs are independent and evaluated in parallel; results keep input order.
pub fn run_scenario(
    system: &ControlSystem,
    design: &DesignOutput,
    phis: &[InitialFunction],
    horizon: f64,
    opts: &SimOptions,
    stride: usize,
) -> Vec<SimReport> {
    phis.par_iter()
        .map(|phi| {
            simulate(system, &design.quantizer, phi, design.tau, horizon, opts)
                .and_then(|tr| verify_bounds(&tr, design, system, stride))
                .unwrap_or_else(|e| SimReport::failed(design, horizon, &e))
        })
        .collect()
}
