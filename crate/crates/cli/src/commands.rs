//! The four subcommands. Each returns whether its checks passed; errors are
//! configuration or I/O problems.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use qdelay::design::{design, DesignOutput};
use qdelay::metrics::{krasovskii_u, verify_bounds, SimReport};
use qdelay::sim::{simulate, InitialFunction, SimOptions, Trajectory};
use qdelay::systems::{self, ControlSystem};
use qdelay::verify::{self, CheckResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Loaded, RunConfig, SystemSpec};

const A1_RADIUS: f64 = 10.0;

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

/// System, delay and design for the configuration, warning when the delay
/// exceeds the closed-form bound.
fn designed(cfg: &RunConfig) -> Result<(ControlSystem, DesignOutput)> {
    let sys = cfg.build_system()?;
    let (tau, bound) = cfg.resolve_tau(&sys)?;
    if tau > bound {
        eprintln!(
            "warning: tau = {tau} exceeds the sufficient bound {bound}; guarantees do not apply"
        );
    }
    let d = design(&sys, tau, cfg.r, cfg.eps)?;
    Ok((sys, d))
}

#[derive(Serialize)]
struct A1Summary {
    pass: bool,
    radius: f64,
    points: usize,
    worst_margin: f64,
    worst_point: Option<Vec<f64>>,
}

fn a1_summary(sys: &ControlSystem) -> A1Summary {
    let grid = systems::ball_grid(sys.n(), A1_RADIUS, 61);
    let rep = systems::check_a1(sys, &grid);
    A1Summary {
        pass: rep.pass,
        radius: A1_RADIUS,
        points: rep.points,
        worst_margin: rep.worst_margin,
        worst_point: rep.worst_point.map(|x| x.as_slice().to_vec()),
    }
}

#[derive(Serialize)]
struct DesignFile<'a> {
    config_hash: &'a str,
    system: &'a SystemSpec,
    design: &'a DesignOutput,
    decrease_condition: A1Summary,
}

pub fn cmd_design(loaded: &Loaded, out: &Path) -> Result<bool> {
    prepare(out)?;
    let cfg = &loaded.config;
    let (sys, d) = designed(cfg)?;
    let a1 = a1_summary(&sys);
    let pass = a1.pass;
    write_json(
        &out.join("design.json"),
        &DesignFile {
            config_hash: &loaded.hash,
            system: &cfg.system,
            design: &d,
            decrease_condition: a1,
        },
    )?;
    println!(
        "design: tau = {}, u0 = {}, j = {}, mu = {:e}, decrease condition {}",
        d.tau,
        d.u0_r,
        d.j_min,
        d.mu,
        if pass { "holds" } else { "FAILS" }
    );
    Ok(pass)
}

/// Trajectory rows: every `stride`-th knot, every switch and the last knot.
fn trajectory_csv(
    tr: &Trajectory,
    sys: &ControlSystem,
    stride: usize,
    hash: &str,
) -> Result<String> {
    let n = sys.n();
    let mut s = String::new();
    writeln!(s, "# config_hash={hash}")?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["u", "psi", "V", "U", "switch"].map(String::from));
    writeln!(s, "{}", header.join(","))?;
    let last = tr.len() - 1;
    let two_tau = 2.0 * tr.tau();
    for k in (0..tr.len()).filter(|&k| k % stride == 0 || k == last || tr.is_switch_knot(k)) {
        let t = tr.time(k);
        let x = tr.state(k);
        write!(s, "{t}")?;
        for v in x.iter() {
            write!(s, ",{v}")?;
        }
        write!(s, ",{},{},{},", tr.u(k), tr.psi(k), sys.v(&x))?;
        if t >= two_tau {
            write!(s, "{}", krasovskii_u(tr, sys, t)?)?;
        }
        writeln!(s, ",{}", u8::from(tr.is_switch_knot(k)))?;
    }
    Ok(s)
}

#[derive(Serialize)]
struct RunSummary {
    index: usize,
    initial_function: InitialFunction,
    passed: bool,
    report: SimReport,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config_hash: &'a str,
    design: &'a DesignOutput,
    pass: bool,
    runs: Vec<RunSummary>,
}

fn summarize(mut report: SimReport, index: usize, phi: &InitialFunction) -> RunSummary {
    // The functional trace is in the trajectory CSV.
    report.u_trace.clear();
    RunSummary {
        index,
        initial_function: phi.clone(),
        passed: report.passed(),
        report,
    }
}

pub fn cmd_simulate(loaded: &Loaded, out: &Path) -> Result<bool> {
    prepare(out)?;
    let cfg = &loaded.config;
    let (sys, d) = designed(cfg)?;
    let phis = cfg.initial_functions();
    let opts = cfg.sim_options();
    let stride = cfg.output_stride;
    let results: Vec<(Option<String>, SimReport)> = phis
        .par_iter()
        .map(
            |phi| match simulate(&sys, &d.quantizer, phi, d.tau, cfg.horizon, &opts) {
                Ok(tr) => {
                    let csv = trajectory_csv(&tr, &sys, stride, &loaded.hash);
                    let rep = verify_bounds(&tr, &d, &sys, stride)
                        .unwrap_or_else(|e| SimReport::failed(&d, cfg.horizon, &e));
                    (csv.ok(), rep)
                }
                Err(e) => (None, SimReport::failed(&d, cfg.horizon, &e)),
            },
        )
        .collect();
    let mut runs = Vec::new();
    for (i, ((csv, rep), phi)) in results.into_iter().zip(&phis).enumerate() {
        if let Some(csv) = csv {
            write_text(&out.join(format!("trajectory_{i:03}.csv")), &csv)?;
        }
        match &rep.failure {
            Some(e) => println!("run {i}: FAIL ({e})"),
            None => println!(
                "run {i}: {} entry time {:?}, sup |x| {}, max U {:?}",
                if rep.passed() { "pass" } else { "FAIL" },
                rep.entry_time,
                rep.sup_norm,
                rep.u_max
            ),
        }
        runs.push(summarize(rep, i, phi));
    }
    let pass = runs.iter().all(|r| r.passed);
    write_json(
        &out.join("report.json"),
        &ReportFile {
            config_hash: &loaded.hash,
            design: &d,
            pass,
            runs,
        },
    )?;
    Ok(pass)
}

pub fn cmd_sweep(loaded: &Loaded, out: &Path) -> Result<bool> {
    prepare(out)?;
    let cfg = &loaded.config;
    let linear = match &cfg.system {
        spec @ SystemSpec::Linear { .. } => Some(spec.clone()),
        SystemSpec::Pendulum if cfg.sweep.include_linear => Some(config::stock_linear()),
        SystemSpec::Pendulum => None,
    };
    let deltas = cfg.sweep_deltas();
    let rows: Vec<String> = deltas
        .par_iter()
        .map(|&d| -> Result<String> {
            let alpha = systems::pendulum_alpha(d);
            let mut row = format!("{d},{alpha},{}", systems::pendulum_tau_tilde(d));
            if let Some(spec) = &linear {
                let bound = config::build(spec, d).and_then(|s| Ok(systems::tau_max(&s)?));
                match bound {
                    Ok(b) => write!(row, ",{b}")?,
                    Err(_) => row.push(','),
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut s = format!("# config_hash={}\ndelta,alpha,tau_tilde", loaded.hash);
    if linear.is_some() {
        s.push_str(",tau_max_linear");
    }
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    write_text(&out.join("sweep.csv"), &s)?;
    println!("sweep: {} rows", deltas.len());
    Ok(true)
}

#[derive(Serialize)]
struct ScenarioSummary {
    name: String,
    tau: f64,
    pass: bool,
    runs: Vec<RunSummary>,
}

#[derive(Serialize)]
struct VerifyFile<'a> {
    config_hash: &'a str,
    pass: bool,
    checks: &'a [CheckResult],
    scenarios: Vec<ScenarioSummary>,
}

fn scenario(
    name: &str,
    sys: &ControlSystem,
    tau: f64,
    cfg: &RunConfig,
    opts: &SimOptions,
) -> Result<ScenarioSummary> {
    let d = design(sys, tau, cfg.r, cfg.eps)?;
    let phis = verify::ring(sys.n(), 8, cfg.r);
    let reports = verify::run_scenario(sys, &d, &phis, cfg.horizon, opts, cfg.output_stride);
    let runs: Vec<RunSummary> = reports
        .into_iter()
        .zip(&phis)
        .enumerate()
        .map(|(i, (r, phi))| summarize(r, i, phi))
        .collect();
    Ok(ScenarioSummary {
        name: name.to_string(),
        tau,
        pass: runs.iter().all(|r| r.passed),
        runs,
    })
}

pub fn cmd_verify(loaded: &Loaded, out: &Path) -> Result<bool> {
    prepare(out)?;
    let cfg = &loaded.config;
    let (sys, d) = designed(cfg)?;
    let mut checks = vec![
        verify::quantizer_sector_suite(cfg.quantizer_paths, cfg.seed),
        verify::dwell_suite(),
        verify::a1_suite(&sys, A1_RADIUS),
        verify::lemma_suite(&sys, &d, cfg.lemma_samples, cfg.seed)?,
    ];
    let opts = cfg.sim_options();
    let pendulum = systems::make_pendulum(cfg.delta)?;
    let linear_spec = match &cfg.system {
        spec @ SystemSpec::Linear { .. } => spec.clone(),
        SystemSpec::Pendulum => config::stock_linear(),
    };
    let linear = config::build(&linear_spec, cfg.delta)?;
    let tau_p = 0.9 * systems::tau_max(&pendulum)?;
    let tau_l = systems::tau_max(&linear)?;
    let scenarios = vec![
        scenario("pendulum", &pendulum, tau_p, cfg, &opts)?,
        scenario("linear", &linear, tau_l, cfg, &opts)?,
    ];
    for s in &scenarios {
        let failed: Vec<String> = s
            .runs
            .iter()
            .filter(|r| !r.passed)
            .map(|r| {
                r.report
                    .failure
                    .clone()
                    .unwrap_or_else(|| format!("run {} missed a bound", r.index))
            })
            .collect();
        checks.push(CheckResult {
            name: format!("{}_scenario", s.name),
            pass: s.pass,
            detail: if failed.is_empty() {
                format!("{} runs passed at tau = {}", s.runs.len(), s.tau)
            } else {
                failed.join("; ")
            },
        });
    }
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let pass = checks.iter().all(|c| c.pass);
    write_json(
        &out.join("verify.json"),
        &VerifyFile {
            config_hash: &loaded.hash,
            pass,
            checks: &checks,
            scenarios,
        },
    )?;
    Ok(pass)
}
