//! Threshold crossings of a scalar signal.

use crate::quantizer::{Crossing, Trigger};

/// Whether the magnitude `m` has reached `trigger` from the active side.
pub fn hit(m: f64, trigger: Trigger) -> bool {
    match trigger.direction {
        Crossing::Falling => m <= trigger.value,
        Crossing::Rising => m >= trigger.value,
    }
}

/// Bisects `[lo, hi]`, where the trigger is not hit at `lo` and hit at
/// `hi`, down to width `tol`. Returns the final `hi`, so the trigger is
/// always hit at the returned time.
pub fn refine(m: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, trigger: Trigger, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hit(m(mid), trigger) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Earliest time in `(a, b]` where the magnitude signal `m` reaches
/// `trigger`, scanning `samples` equally spaced points and bisecting the
/// first cell where the trigger is hit. `None` if no sample hits it.
pub fn locate_event(
    m: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    trigger: Trigger,
    samples: usize,
    tol: f64,
) -> Option<f64> {
    let samples = samples.max(1);
    let mut prev = a;
    for i in 1..=samples {
        let s = if i == samples {
            b
        } else {
            a + (b - a) * i as f64 / samples as f64
        };
        if hit(m(s), trigger) {
            return Some(refine(&m, prev, s, trigger, tol));
        }
        prev = s;
    }
    None
}
