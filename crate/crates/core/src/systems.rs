//! Control-affine plants `x' = f(x) + g(x) u` with a quadratic Lyapunov
//! function, a scalar feedback `z` and a dissipation rate `W`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{invalid, Error, Result};
use crate::sampling;

pub type VecField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// Input channel `g(x)`.
#[derive(Clone)]
pub enum InputChannel {
    Constant(DVector<f64>),
    StateDependent(VecField),
}

/// Feedback law `z(x)` fed (delayed and quantized) to the plant.
#[derive(Clone)]
pub enum Feedback {
    /// `z(x) = K x`.
    Linear(RowDVector<f64>),
    /// `z(x) = sin x1 - (alpha + 1) x1 - (alpha + 2) x2`.
    Pendulum { alpha: f64 },
    /// Arbitrary law; gradient by central differences.
    Custom(ScalarField),
}

impl Feedback {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Feedback::Linear(k) => (k * x)[0],
            Feedback::Pendulum { alpha } => {
                x[0].sin() - (alpha + 1.0) * x[0] - (alpha + 2.0) * x[1]
            }
            Feedback::Custom(z) => z(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Feedback::Linear(k) => k.transpose(),
            Feedback::Pendulum { alpha } => {
                DVector::from_vec(vec![x[0].cos() - (alpha + 1.0), -(alpha + 2.0)])
            }
            Feedback::Custom(z) => central_gradient(z.as_ref(), x),
        }
    }
}

fn central_gradient(
    f: &(dyn Fn(&DVector<f64>) -> f64 + Send + Sync),
    x: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        }),
    )
}

/// Dissipation rate `W(x)` in `V' <= -W`.
#[derive(Clone)]
pub enum Dissipation {
    /// `W(x) = c |x|^2`.
    Quadratic {
        c: f64,
    },
    Custom(ScalarField),
}

impl Dissipation {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        match self {
            Dissipation::Quadratic { c } => c * x.norm_squared(),
            Dissipation::Custom(w) => w(x),
        }
    }
}

/// `V(x) = x^T Q x` with cached extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticLyapunov {
    q: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
}

impl QuadraticLyapunov {
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() {
            return Err(invalid("Q", "must be square"));
        }
        let sym = (&q + q.transpose()) * 0.5;
        if (&sym - &q).amax() > 1e-12 * (1.0 + q.amax()) {
            return Err(invalid("Q", "must be symmetric"));
        }
        let eig = sym.clone().symmetric_eigen();
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        if !(lambda_min > 0.0) {
            return Err(invalid(
                "Q",
                format!("not positive definite (lambda_min = {lambda_min})"),
            ));
        }
        Ok(QuadraticLyapunov {
            q: sym,
            lambda_min,
            lambda_max,
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x * 2.0
    }
}

/// Which closed-form delay bound applies.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Pendulum,
    Linear(Box<LinearExample>),
    Custom,
}

/// A plant together with its stabilizing data.
#[derive(Clone)]
pub struct ControlSystem {
    name: String,
    n: usize,
    drift: VecField,
    input: InputChannel,
    feedback: Feedback,
    lyapunov: QuadraticLyapunov,
    dissipation: Dissipation,
    gamma: Option<f64>,
    delta: f64,
    family: Family,
}

impl fmt::Debug for ControlSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("delta", &self.delta)
            .field("gamma", &self.gamma)
            .field("family", &self.family)
            .finish_non_exhaustive()
    }
}

impl ControlSystem {
    /// Generic constructor. `gamma` is the slope of `kappa_3(l) = gamma (l + 1)`
    /// when known.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        drift: VecField,
        input: InputChannel,
        feedback: Feedback,
        lyapunov: QuadraticLyapunov,
        dissipation: Dissipation,
        gamma: Option<f64>,
        delta: f64,
    ) -> Result<Self> {
        check_delta(delta)?;
        let n = lyapunov.q().nrows();
        if let InputChannel::Constant(b) = &input {
            if b.len() != n {
                return Err(invalid(
                    "g",
                    format!("length {} != state dimension {n}", b.len()),
                ));
            }
        }
        Ok(ControlSystem {
            name: name.into(),
            n,
            drift,
            input,
            feedback,
            lyapunov,
            dissipation,
            gamma,
            delta,
            family: Family::Custom,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn input(&self) -> &InputChannel {
        &self.input
    }

    pub fn feedback(&self) -> &Feedback {
        &self.feedback
    }

    pub fn lyapunov(&self) -> &QuadraticLyapunov {
        &self.lyapunov
    }

    pub fn dissipation(&self) -> &Dissipation {
        &self.dissipation
    }

    /// Replaces the feedback law, keeping every other datum. Used for fault
    /// injection and for custom redesigns.
    pub fn with_feedback(mut self, feedback: Feedback) -> Self {
        self.feedback = feedback;
        self
    }

    pub fn with_dissipation(mut self, dissipation: Dissipation) -> Self {
        self.dissipation = dissipation;
        self
    }

    pub fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.input {
            InputChannel::Constant(b) => b.clone(),
            InputChannel::StateDependent(g) => g(x),
        }
    }

    /// Right-hand side with a frozen input value `psi`.
    pub fn rhs(&self, x: &DVector<f64>, psi: f64) -> DVector<f64> {
        let mut dx = self.f(x);
        if psi != 0.0 {
            dx.axpy(psi, &self.g(x), 1.0);
        }
        dx
    }

    pub fn z(&self, x: &DVector<f64>) -> f64 {
        self.feedback.eval(x)
    }

    pub fn grad_z(&self, x: &DVector<f64>) -> DVector<f64> {
        self.feedback.gradient(x)
    }

    pub fn v(&self, x: &DVector<f64>) -> f64 {
        self.lyapunov.value(x)
    }

    pub fn grad_v(&self, x: &DVector<f64>) -> DVector<f64> {
        self.lyapunov.gradient(x)
    }

    pub fn w(&self, x: &DVector<f64>) -> f64 {
        self.dissipation.eval(x)
    }

    /// `kappa_1(s) = lambda_min(Q) s^2`.
    pub fn kappa1(&self, s: f64) -> f64 {
        self.lyapunov.lambda_min * s * s
    }

    /// `kappa_2(s) = lambda_max(Q) s^2`.
    pub fn kappa2(&self, s: f64) -> f64 {
        self.lyapunov.lambda_max * s * s
    }

    pub fn kappa1_inv(&self, v: f64) -> f64 {
        (v.max(0.0) / self.lyapunov.lambda_min).sqrt()
    }

    pub fn kappa2_inv(&self, v: f64) -> f64 {
        (v.max(0.0) / self.lyapunov.lambda_max).sqrt()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(invalid("delta", format!("must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

/// Redesign constant of the pendulum feedback, `16 delta^2 / (1 - delta)`.
pub fn pendulum_alpha(delta: f64) -> f64 {
    16.0 * delta * delta / (1.0 - delta)
}

/// The pendulum `x1' = x2, x2' = -sin x1 + u` with the redesigned feedback.
/// `delta = 0` gives the nominal law and is accepted for comparison.
pub fn make_pendulum(delta: f64) -> Result<ControlSystem> {
    check_delta(delta)?;
    let alpha = pendulum_alpha(delta);
    let q = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 0.5]);
    let gamma = 4.0 * (1.0 + delta) * (alpha + 2.0) * std::f64::consts::SQRT_2
        / (std::f64::consts::SQRT_2 - 1.0);
    let mut sys = ControlSystem::custom(
        "pendulum",
        Arc::new(|x: &DVector<f64>| DVector::from_vec(vec![x[1], -x[0].sin()])),
        InputChannel::Constant(DVector::from_vec(vec![0.0, 1.0])),
        Feedback::Pendulum { alpha },
        QuadraticLyapunov::new(q)?,
        Dissipation::Quadratic { c: 0.75 },
        Some(gamma),
        delta,
    )?;
    sys.family = Family::Pendulum;
    Ok(sys)
}

/// Data of the linear example `x' = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExample {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub k_tilde: RowDVector<f64>,
    /// Solution of `(A + B K~)^T Q + Q (A + B K~) = -I`.
    pub q: DMatrix<f64>,
    /// Redesigned gain `K~ - 2 alpha B^T Q`.
    pub k: RowDVector<f64>,
    pub alpha: f64,
    pub c: f64,
}

impl LinearExample {
    /// Frobenius norm of the Lyapunov equation residual.
    pub fn lyapunov_residual(&self) -> f64 {
        let m = &self.a + &self.b * &self.k_tilde;
        let n = m.nrows();
        (m.transpose() * &self.q + &self.q * &m + DMatrix::identity(n, n)).norm()
    }
}

/// Solves `M^T Q + Q M = -I` through its Kronecker form and checks that the
/// solution is symmetric positive definite.
pub fn solve_lyapunov(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mt = m.transpose();
    let op = id.kronecker(&mt) + mt.kronecker(&id);
    let rhs = -DVector::from_column_slice(id.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotStabilized("Lyapunov operator is singular".into()))?;
    let q = DMatrix::from_column_slice(n, n, sol.as_slice());
    let q = (&q + q.transpose()) * 0.5;
    if q.clone().cholesky().is_none() {
        return Err(Error::NotStabilized(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    Ok(q)
}

const LINEAR_GAIN_RETRIES: usize = 20;

/// Linear example: Lyapunov solve for `A + B K~`, redesign of the gain and the
/// attached Lyapunov data. The redesign constant starts at
/// `delta^2 / (1 - delta) |K~|^2` and is doubled until the decrease
/// condition holds on a grid of radius 10.
pub fn make_linear(
    a: DMatrix<f64>,
    b: DVector<f64>,
    k_tilde: RowDVector<f64>,
    delta: f64,
) -> Result<(ControlSystem, LinearExample)> {
    check_delta(delta)?;
    let n = a.nrows();
    if !a.is_square() || b.len() != n || k_tilde.len() != n {
        return Err(invalid("A, B, K~", "inconsistent dimensions"));
    }
    let m = &a + &b * &k_tilde;
    let q = solve_lyapunov(&m)?;
    let lyap = QuadraticLyapunov::new(q.clone())?;
    let c = 0.75;
    let mut alpha = delta * delta / (1.0 - delta) * k_tilde.norm_squared();
    let grid = ball_grid(n, 10.0, if n <= 2 { 41 } else { 11 });
    for _ in 0..LINEAR_GAIN_RETRIES {
        let k = &k_tilde - (b.transpose() * &q) * (2.0 * alpha);
        let qb_norm = (&q * &b).norm();
        let gamma = 4.0 * qb_norm * k.norm() * (1.0 / lyap.lambda_min()).max(1.0);
        let a_drift = a.clone();
        let example = LinearExample {
            a: a.clone(),
            b: b.clone(),
            k_tilde: k_tilde.clone(),
            q: q.clone(),
            k: k.clone(),
            alpha,
            c,
        };
        let mut sys = ControlSystem::custom(
            "linear",
            Arc::new(move |x: &DVector<f64>| &a_drift * x),
            InputChannel::Constant(b.clone()),
            Feedback::Linear(k),
            lyap.clone(),
            Dissipation::Quadratic { c },
            Some(gamma),
            delta,
        )?;
        sys.family = Family::Linear(Box::new(example.clone()));
        if check_a1(&sys, &grid).pass {
            return Ok((sys, example));
        }
        alpha = if alpha == 0.0 { 1e-3 } else { 2.0 * alpha };
    }
    Err(Error::NotStabilized(format!(
        "decrease condition still fails after {LINEAR_GAIN_RETRIES} gain doublings"
    )))
}

/// `1 / ((alpha + 2)^2 (1 + delta))`: the pendulum delay bound up to its
/// constant factor.
pub fn pendulum_tau_tilde(delta: f64) -> f64 {
    let alpha = pendulum_alpha(delta);
    1.0 / ((alpha + 2.0).powi(2) * (1.0 + delta))
}

/// Largest delay for which the closed-form sufficient condition of the
/// example families holds.
pub fn tau_max(system: &ControlSystem) -> Result<f64> {
    let delta = system.delta;
    match &system.family {
        Family::Pendulum => {
            let alpha = pendulum_alpha(delta);
            Ok(3.0 / (128.0 * std::f64::consts::SQRT_2 * (alpha + 2.0).powi(2) * (1.0 + delta)))
        }
        Family::Linear(ex) => {
            let g1 = (&ex.k * &ex.a).norm();
            let g2 = (1.0 + delta) * (&ex.k * &ex.b)[0].abs() * ex.k.norm();
            let g3 = 2.0 * (&ex.q * &ex.b).norm() * (1.0 + delta) * g1.max(g2);
            Ok(ex.c / (8.0 * std::f64::consts::SQRT_2 * g3))
        }
        Family::Custom => Err(Error::Unsupported("closed-form delay bound")),
    }
}

/// Outcome of the decrease-condition check on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    pub pass: bool,
    /// Largest value of `grad V (f + g (1+p) z) + W` found (should be `<= 0`).
    pub worst_margin: f64,
    pub worst_point: Option<DVector<f64>>,
    pub worst_p: f64,
    pub points: usize,
}

/// Checks `grad V(x) [f(x) + g(x) (1 + p) z(x)] <= -W(x)` at `p = -delta`
/// and `p = +delta` for every grid point. The left side is affine in `p`,
/// so the endpoints cover the whole interval.
pub fn check_a1(system: &ControlSystem, grid: &[DVector<f64>]) -> A1Report {
    let delta = system.delta;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_point = None;
    let mut worst_p = 0.0;
    let mut pass = true;
    for x in grid {
        let gv = system.grad_v(x);
        let lf = gv.dot(&system.f(x));
        let lg = gv.dot(&system.g(x));
        let z = system.z(x);
        let w = system.w(x);
        let tol = 1e-12 * (1.0 + x.norm_squared());
        for p in [-delta, delta] {
            let m = lf + lg * (1.0 + p) * z + w;
            if m > worst || worst_point.is_none() {
                worst = m;
                worst_point = Some(x.clone());
                worst_p = p;
            }
            if !(m <= tol) {
                pass = false;
            }
        }
    }
    A1Report {
        pass,
        worst_margin: worst,
        worst_point,
        worst_p,
        points: grid.len(),
    }
}

/// Regular grid with `per_axis` points per coordinate on `[-r, r]^n`,
/// restricted to the closed ball of radius `r`.
pub fn ball_grid(n: usize, r: f64, per_axis: usize) -> Vec<DVector<f64>> {
    assert!(per_axis >= 2);
    let total = per_axis.pow(n as u32);
    let step = 2.0 * r / (per_axis - 1) as f64;
    (0..total)
        .filter_map(|mut idx| {
            let x = DVector::from_iterator(
                n,
                (0..n).map(|_| {
                    let i = idx % per_axis;
                    idx /= per_axis;
                    -r + step * i as f64
                }),
            );
            (x.norm() <= r * (1.0 + 1e-12)).then_some(x)
        })
        .collect()
}

/// `sup_{|a| <= r} W(a)`: exact for quadratic `W`, sampled otherwise.
pub fn sup_w(system: &ControlSystem, r: f64) -> f64 {
    match &system.dissipation {
        Dissipation::Quadratic { c } => c * r * r,
        Dissipation::Custom(w) => {
            sampling::sup_over_ball(system.n, r, sampling::DEFAULT_SAMPLES, |x| w(x))
        }
    }
}

/// `sup_{|a| <= r} |z(a)|`: exact for linear `z`, sampled otherwise.
pub fn sup_abs_z(system: &ControlSystem, r: f64) -> f64 {
    match &system.feedback {
        Feedback::Linear(k) => k.norm() * r,
        fb => sampling::sup_over_ball(system.n, r, sampling::DEFAULT_SAMPLES, |x| fb.eval(x).abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn double_integrator(delta: f64) -> (ControlSystem, LinearExample) {
        make_linear(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            RowDVector::from_vec(vec![-1.0, -2.0]),
            delta,
        )
        .unwrap()
    }

    #[test]
    fn pendulum_alpha_and_nominal_law() {
        assert_relative_eq!(
            pendulum_alpha(0.1),
            0.177_777_777_777_777_8,
            epsilon = 1e-15
        );
        let p = make_pendulum(0.0).unwrap();
        let x = DVector::from_vec(vec![0.7, -0.3]);
        assert_relative_eq!(p.z(&x), 0.7f64.sin() - 0.7 + 0.6, epsilon = 1e-15);
        let z0 = DVector::zeros(2);
        assert_eq!(p.z(&z0), 0.0);
        assert_eq!(p.f(&z0), DVector::zeros(2));
    }

    #[test]
    fn pendulum_eigenvalues() {
        let p = make_pendulum(0.1).unwrap();
        assert_relative_eq!(
            p.lyapunov().lambda_min(),
            1.0 - 0.5f64.sqrt(),
            epsilon = 1e-14
        );
        assert_relative_eq!(
            p.lyapunov().lambda_max(),
            1.0 + 0.5f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn pendulum_gradient_matches_differences() {
        let p = make_pendulum(0.3).unwrap();
        let x = DVector::from_vec(vec![1.1, -0.4]);
        let fd = central_gradient(&|x: &DVector<f64>| p.z(x), &x);
        assert!((p.grad_z(&x) - fd).norm() < 1e-8);
    }

    #[test]
    fn tau_bounds() {
        let p = make_pendulum(0.0).unwrap();
        assert_relative_eq!(
            tau_max(&p).unwrap(),
            3.0 / (512.0 * 2f64.sqrt()),
            epsilon = 1e-15
        );
        let p = make_pendulum(0.1).unwrap();
        assert_relative_eq!(tau_max(&p).unwrap(), 3.176_7e-3, epsilon = 1e-6);
        assert_relative_eq!(pendulum_tau_tilde(0.01), 0.247_125, epsilon = 1e-5);
    }

    #[test]
    fn double_integrator_q_and_gain() {
        let (sys, ex) = double_integrator(0.1);
        let expect = DMatrix::from_row_slice(2, 2, &[1.5, 0.5, 0.5, 0.5]);
        assert!((&ex.q - expect).amax() < 1e-12);
        assert!(ex.lyapunov_residual() <= 1e-10);
        assert_relative_eq!(ex.alpha, 0.01 / 0.9 * 5.0, epsilon = 1e-15);
        assert_relative_eq!(ex.k[0], -1.0 - 2.0 * ex.alpha * 0.5, epsilon = 1e-14);
        assert_relative_eq!(ex.k[1], -2.0 - 2.0 * ex.alpha * 0.5, epsilon = 1e-14);
        assert!(tau_max(&sys).unwrap() > 0.0);
    }

    #[test]
    fn zero_delta_keeps_gain() {
        let (_, ex) = double_integrator(0.0);
        assert_eq!(ex.alpha, 0.0);
        assert_eq!(ex.k, ex.k_tilde);
    }

    #[test]
    fn unstabilized_linear_is_rejected() {
        let r = make_linear(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            RowDVector::from_vec(vec![1.0, -2.0]),
            0.1,
        );
        assert!(matches!(r, Err(Error::NotStabilized(_))));
    }

    #[test]
    fn a1_on_examples() {
        let grid = ball_grid(2, 5.0, 41);
        assert!(check_a1(&make_pendulum(0.1).unwrap(), &grid).pass);
        let (lin, _) = double_integrator(0.1);
        assert!(check_a1(&lin, &ball_grid(2, 10.0, 41)).pass);
        let open = make_pendulum(0.1)
            .unwrap()
            .with_feedback(Feedback::Custom(Arc::new(|_| 0.0)));
        let rep = check_a1(&open, &grid);
        assert!(!rep.pass);
        assert!(rep.worst_margin > 0.0);
    }

    #[test]
    fn suprema() {
        let p = make_pendulum(0.1).unwrap();
        assert_relative_eq!(sup_w(&p, 2.0), 3.0);
        assert_eq!(sup_w(&p, 0.0), 0.0);
        assert_eq!(sup_abs_z(&p, 0.0), 0.0);
        let (lin, ex) = double_integrator(0.1);
        assert_relative_eq!(sup_abs_z(&lin, 2.0), 2.0 * ex.k.norm());
    }

    #[test]
    fn custom_system_has_no_delay_bound() {
        let p = make_pendulum(0.1).unwrap();
        let c = ControlSystem::custom(
            "copy",
            p.drift.clone(),
            p.input.clone(),
            p.feedback.clone(),
            p.lyapunov.clone(),
            p.dissipation.clone(),
            None,
            0.1,
        )
        .unwrap();
        assert!(matches!(tau_max(&c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn grid_is_inside_ball() {
        let g = ball_grid(2, 1.0, 5);
        assert!(g.iter().all(|x| x.norm() <= 1.0 + 1e-12));
        assert!(g.iter().any(|x| x.norm() == 0.0));
        assert_eq!(g.len(), 13);
    }
}
