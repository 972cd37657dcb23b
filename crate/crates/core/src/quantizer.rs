//! Logarithmic quantizer with hysteresis.
//!
//! The main levels are `u_i = rho^i * u0` for `i = 0..=j` with
//! `rho = (1 - delta) / (1 + delta)`. Between two main levels sits an
//! intermediate level `u_i / (1 + delta)`, and the quantizer only moves one
//! step at a time along the chain
//!
//! ```text
//! u_0 > u_0/(1+d) > u_1 > u_1/(1+d) > ... > u_j > u_j/(1+d) > 0
//! ```
//!
//! indexed `k = 0..=2j+2` (index `2j+2` is the dead zone). From level `k` the
//! output drops to `k+1` when `|u|` falls to `level_k / (1 + delta)`, rises to
//! `k-1` when `|u|` reaches `level_k / (1 - delta)`, and leaves the dead zone
//! when `|u|` reaches `level_{2j+1}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Static description of the quantizer: range anchor `u0`, sector half-width
/// `delta` and number of main levels `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamSpec", into = "ParamSpec")]
pub struct QuantizerParams {
    u0: f64,
    delta: f64,
    j: usize,
    levels: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParamSpec {
    u0: f64,
    delta: f64,
    j: usize,
}

impl TryFrom<ParamSpec> for QuantizerParams {
    type Error = Error;

    fn try_from(spec: ParamSpec) -> Result<Self> {
        QuantizerParams::new(spec.u0, spec.delta, spec.j)
    }
}

impl From<QuantizerParams> for ParamSpec {
    fn from(p: QuantizerParams) -> Self {
        ParamSpec {
            u0: p.u0,
            delta: p.delta,
            j: p.j,
        }
    }
}

/// Density `rho = (1 - delta) / (1 + delta)`.
pub fn density(delta: f64) -> f64 {
    (1.0 - delta) / (1.0 + delta)
}

impl QuantizerParams {
    pub fn new(u0: f64, delta: f64, j: usize) -> Result<Self> {
        if !(u0.is_finite() && u0 > 0.0) {
            return Err(invalid(
                "u0",
                format!("must be positive and finite, got {u0}"),
            ));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if j < 1 {
            return Err(invalid("j", "must be at least 1"));
        }
        let rho = density(delta);
        let mut levels = Vec::with_capacity(2 * j + 3);
        for i in 0..=j {
            let ui = u0 * rho.powi(i as i32);
            levels.push(ui);
            levels.push(ui / (1.0 + delta));
        }
        levels.push(0.0);
        if levels.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(invalid(
                "j",
                format!("levels underflow: u0 * rho^{j} is not representable"),
            ));
        }
        let params = QuantizerParams {
            u0,
            delta,
            j,
            levels,
        };
        // Triggers reachable from any single level must be distinct.
        for k in 0..params.levels.len() {
            let t = params.triggers(QuantizerState {
                level: k,
                sign: if k == params.dead_zone() { 0 } else { 1 },
            });
            if let (Some(d), Some(u)) = (t.down, t.up) {
                if !(d < u) {
                    return Err(invalid("delta", "coincident triggers"));
                }
            }
        }
        Ok(params)
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn rho(&self) -> f64 {
        density(self.delta)
    }

    /// Main level `u_i`, `i = 0..=j`.
    pub fn main_level(&self, i: usize) -> f64 {
        self.levels[2 * i]
    }

    /// The renamed chain `level_0 > level_1 > ... > level_{2j+2} = 0`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Largest admissible `|u|`, namely `u0 / (1 - delta)`.
    pub fn range(&self) -> f64 {
        self.u0 / (1.0 - self.delta)
    }

    /// Index of the dead-zone level.
    pub fn dead_zone(&self) -> usize {
        2 * self.j + 2
    }

    /// `u_j / (1 + delta)`: below this the envelope switches to the dead-zone branch.
    pub fn dead_zone_edge(&self) -> f64 {
        self.levels[2 * self.j + 1]
    }

    /// The finite output set `U`, as nonnegative magnitudes.
    pub fn is_output(&self, v: f64) -> bool {
        let m = v.abs();
        self.levels.contains(&m)
    }

    pub fn output(&self, state: QuantizerState) -> f64 {
        f64::from(state.sign) * self.levels[state.level]
    }

    fn check_range(&self, u: f64) -> Result<()> {
        if u.is_nan() || u.abs() > self.range() {
            return Err(Error::OutOfRange {
                value: u,
                range: self.range(),
            });
        }
        Ok(())
    }

    /// Initial value rule: picks the main level `u_i` whose half-open cell
    /// `(u_i/(1+delta), u_i/(1-delta)]` contains `|u|`, or the dead zone when
    /// `|u| <= u_j/(1+delta)`. Never selects an intermediate level.
    pub fn init(&self, u: f64) -> Result<(QuantizerState, f64)> {
        self.check_range(u)?;
        let m = u.abs();
        let d = self.delta;
        for i in 0..=self.j {
            let ui = self.main_level(i);
            if ui / (1.0 + d) < m && m <= ui / (1.0 - d) {
                let state = QuantizerState {
                    level: 2 * i,
                    sign: sign_of(u),
                };
                return Ok((state, self.output(state)));
            }
        }
        let state = QuantizerState::dead(self);
        Ok((state, 0.0))
    }

    /// Transition law evaluated at a candidate event. A trigger counts as hit
    /// when the argument has reached it (or passed it by the event
    /// tolerance). At most one transition fires per call.
    pub fn step(&self, state: QuantizerState, u: f64) -> Result<Transition> {
        self.check_range(u)?;
        let k = state.level;
        let next = if k == self.dead_zone() {
            if u.abs() >= self.levels[k - 1] {
                Some(QuantizerState {
                    level: k - 1,
                    sign: sign_of(u),
                })
            } else {
                None
            }
        } else {
            let mag = f64::from(state.sign) * u;
            let lv = self.levels[k];
            if mag <= lv / (1.0 + self.delta) {
                let level = k + 1;
                let sign = if level == self.dead_zone() {
                    0
                } else {
                    state.sign
                };
                Some(QuantizerState { level, sign })
            } else if k >= 1 && mag >= lv / (1.0 - self.delta) {
                Some(QuantizerState {
                    level: k - 1,
                    sign: state.sign,
                })
            } else {
                None
            }
        };
        Ok(match next {
            Some(s) => Transition {
                state: s,
                output: self.output(s),
                switched: true,
            },
            None => Transition {
                state,
                output: self.output(state),
                switched: false,
            },
        })
    }

    /// Values of `|u|` whose crossing moves the quantizer out of `state`.
    pub fn triggers(&self, state: QuantizerState) -> Triggers {
        let k = state.level;
        if k == self.dead_zone() {
            return Triggers {
                down: None,
                up: Some(self.levels[k - 1]),
            };
        }
        let lv = self.levels[k];
        Triggers {
            down: Some(lv / (1.0 + self.delta)),
            up: (k >= 1).then(|| lv / (1.0 - self.delta)),
        }
    }

    /// Set of admissible quantizer outputs at argument `u` (sector envelope).
    pub fn envelope(&self, u: f64) -> Result<Envelope> {
        self.check_range(u)?;
        let d = self.delta;
        if u.abs() > self.dead_zone_edge() {
            let (a, b) = ((1.0 - d) * u, (1.0 + d) * u);
            Ok(Envelope {
                lo: a.min(b),
                hi: a.max(b),
                sector: true,
            })
        } else {
            let b = (1.0 + d) * u;
            Ok(Envelope {
                lo: b.min(0.0),
                hi: b.max(0.0),
                sector: false,
            })
        }
    }

    /// Smallest `|u|` distance between the point where any transition fires
    /// and the triggers of the level it lands on. With `|du/dt| <= L`, two
    /// consecutive switches are at least `min_trigger_gap() / L` apart.
    pub fn min_trigger_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for k in 0..self.levels.len() {
            let from = QuantizerState {
                level: k,
                sign: if k == self.dead_zone() { 0 } else { 1 },
            };
            for trig in self.triggers(from).iter() {
                let landed = match trig.direction {
                    Crossing::Falling => k + 1,
                    Crossing::Rising => k - 1,
                };
                let to = QuantizerState {
                    level: landed,
                    sign: if landed == self.dead_zone() { 0 } else { 1 },
                };
                for next in self.triggers(to).iter() {
                    gap = gap.min((next.value - trig.value).abs());
                }
            }
        }
        gap
    }
}

fn sign_of(u: f64) -> i8 {
    if u > 0.0 {
        1
    } else if u < 0.0 {
        -1
    } else {
        0
    }
}

/// Discrete mode of the quantizer: a level index and the output sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizerState {
    level: usize,
    sign: i8,
}

impl QuantizerState {
    /// Builds a state, enforcing `sign == 0` exactly in the dead zone.
    pub fn new(params: &QuantizerParams, level: usize, sign: i8) -> Result<Self> {
        if level > params.dead_zone() {
            return Err(invalid(
                "level",
                format!("{level} exceeds {}", params.dead_zone()),
            ));
        }
        let dead = level == params.dead_zone();
        match (dead, sign) {
            (true, 0) | (false, 1) | (false, -1) => Ok(QuantizerState { level, sign }),
            _ => Err(invalid(
                "sign",
                format!("{sign} inconsistent with level {level}"),
            )),
        }
    }

    pub fn dead(params: &QuantizerParams) -> Self {
        QuantizerState {
            level: params.dead_zone(),
            sign: 0,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: QuantizerState,
    pub output: f64,
    pub switched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crossing {
    /// `|u|` decreasing onto the trigger.
    Falling,
    /// `|u|` increasing onto the trigger.
    Rising,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub value: f64,
    pub direction: Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triggers {
    pub down: Option<f64>,
    pub up: Option<f64>,
}

impl Triggers {
    pub fn iter(&self) -> impl Iterator<Item = Trigger> {
        let down = self.down.map(|value| Trigger {
            value,
            direction: Crossing::Falling,
        });
        let up = self.up.map(|value| Trigger {
            value,
            direction: Crossing::Rising,
        });
        down.into_iter().chain(up)
    }

    pub fn len(&self) -> usize {
        self.down.is_some() as usize + self.up.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Closed interval of admissible outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub lo: f64,
    pub hi: f64,
    /// `true` on the sector branch `(1 + lambda delta) u`, `false` on the
    /// dead-zone branch `lambda (1 + delta) u`.
    pub sector: bool,
}

impl Envelope {
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }
}

/// One output sample of [`drive_piecewise_linear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub t: f64,
    pub u: f64,
    pub output: f64,
    pub state: QuantizerState,
    pub switched: bool,
}

/// Runs the quantizer along a piecewise-linear input given by `(t, u)`
/// knots, firing transitions at the exact crossing instants. Emits the
/// output at every knot and at every switch (with `u` equal to the trigger).
pub fn drive_piecewise_linear(
    params: &QuantizerParams,
    knots: &[(f64, f64)],
) -> Result<Vec<Emission>> {
    let Some(&(t0, u_start)) = knots.first() else {
        return Ok(Vec::new());
    };
    let (mut state, output) = params.init(u_start)?;
    let mut out = vec![Emission {
        t: t0,
        u: u_start,
        output,
        state,
        switched: false,
    }];
    let tr = params.step(state, u_start)?;
    if tr.switched {
        state = tr.state;
        out.push(Emission {
            t: t0,
            u: u_start,
            output: tr.output,
            state,
            switched: true,
        });
    }

    for seg in knots.windows(2) {
        let (mut ta, mut ua) = seg[0];
        let (tb, ub) = seg[1];
        params.check_range(ub)?;
        while let Some((tc, uc)) = first_crossing(params, state, (ta, ua), (tb, ub)) {
            let tr = params.step(state, uc)?;
            debug_assert!(tr.switched);
            state = tr.state;
            out.push(Emission {
                t: tc,
                u: uc,
                output: tr.output,
                state,
                switched: tr.switched,
            });
            ta = tc;
            ua = uc;
        }
        out.push(Emission {
            t: tb,
            u: ub,
            output: params.output(state),
            state,
            switched: false,
        });
    }
    Ok(out)
}

/// Earliest trigger hit on the open-closed segment `(a, b]`, returned with
/// the exact argument value at the hit.
fn first_crossing(
    params: &QuantizerParams,
    state: QuantizerState,
    (ta, ua): (f64, f64),
    (tb, ub): (f64, f64),
) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |s: f64, u: f64| {
        if s > 0.0 && s <= 1.0 && best.is_none_or(|(bs, _)| s < bs) {
            best = Some((s, u));
        }
    };
    let trig = params.triggers(state);
    if state.level == params.dead_zone() {
        let theta = trig.up.expect("dead zone has a rising trigger");
        for target in [theta, -theta] {
            if ua.abs() < theta && ub != ua {
                consider((target - ua) / (ub - ua), target);
            }
        }
    } else {
        let sg = f64::from(state.sign);
        let (ma, mb) = (sg * ua, sg * ub);
        if let Some(theta) = trig.down {
            if ma > theta && mb <= theta {
                consider((theta - ma) / (mb - ma), sg * theta);
            }
        }
        if let Some(theta) = trig.up {
            if ma < theta && mb >= theta {
                consider((theta - ma) / (mb - ma), sg * theta);
            }
        }
    }
    best.map(|(s, u)| (ta + s * (tb - ta), u))
}
