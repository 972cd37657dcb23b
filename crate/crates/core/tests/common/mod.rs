#![allow(dead_code)]

use nalgebra::{dmatrix, dvector, DMatrix, DVector, RowDVector};
use qdelay::sim::Trajectory;
use qdelay::systems::{self, ControlSystem, LinearExample};

pub fn double_integrator(delta: f64) -> (ControlSystem, LinearExample) {
    systems::make_linear(
        dmatrix![0.0, 1.0; 0.0, 0.0],
        dvector![0.0, 1.0],
        RowDVector::from_vec(vec![-1.0, -2.0]),
        delta,
    )
    .unwrap()
}

/// Harmonic oscillator with a damping gain; RK4 is not exact on it.
pub fn oscillator(delta: f64) -> (ControlSystem, LinearExample) {
    systems::make_linear(
        dmatrix![0.0, 1.0; -1.0, 0.0],
        dvector![0.0, 1.0],
        RowDVector::from_vec(vec![0.0, -1.0]),
        delta,
    )
    .unwrap()
}

/// `x(h)` for `x' = A x + B psi`, from the exponential of the augmented matrix.
pub fn expm_step(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    psi: f64,
    x0: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, 1)).copy_from(&(b * psi));
    let e = (m * h).exp();
    let mut y = DVector::zeros(n + 1);
    y.rows_mut(0, n).copy_from(x0);
    y[n] = 1.0;
    (e * y).rows(0, n).into_owned()
}

/// Maximal runs of knots with strictly increasing times, as `(first, last)`
/// knot indices. The input is constant on each run.
pub fn switch_free_spans(tr: &Trajectory) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for k in 0..tr.len() {
        let end_here = k + 1 == tr.len() || tr.time(k + 1) == tr.time(k);
        if end_here {
            if k > start {
                spans.push((start, k));
            }
            start = k + 1;
        }
    }
    spans
}

/// Largest gap between a span endpoint and the exponential oracle started at
/// the span's first knot.
pub fn worst_span_error(tr: &Trajectory, ex: &LinearExample) -> (f64, usize) {
    let spans = switch_free_spans(tr);
    let worst = spans
        .iter()
        .map(|&(s, e)| {
            let oracle = expm_step(
                &ex.a,
                &ex.b,
                tr.psi(s),
                &tr.state(s),
                tr.time(e) - tr.time(s),
            );
            (tr.state(e) - oracle).norm()
        })
        .fold(0.0, f64::max);
    (worst, spans.len())
}
