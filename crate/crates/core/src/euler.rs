//! Explicit Euler scheme on a uniform mesh and its piecewise-linear interpolant.
//!
//! A run over `[a, b]` with `n` steps stores the nodes `y_0..y_n` together with
//! the slopes `s_0..s_{n-1}` that produced them, so the interpolant
//! `l(t) = y_k + (t - t_k) s_k` of a noisy run uses the corrupted slopes
//! without re-querying the oracle.

use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::noise::NoisyOracle;

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Right-hand side `g(t, y)` of `y' = g(t, y)` in `d` dimensions.
///
/// The closure writes `g(t, y)` into its output slice, which always has length `d`.
#[derive(Clone)]
pub struct RhsFunction {
    dim: usize,
    f: Arc<RhsFn>,
}

impl RhsFunction {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "right-hand side dimension must be positive");
        Self { dim, f: Arc::new(f) }
    }

    /// Scalar right-hand side `x' = g(t, x)`.
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(1, move |t, y, out| out[0] = f(t, y[0]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        (self.f)(t, y, out)
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, y, &mut out);
        out
    }
}

impl fmt::Debug for RhsFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RhsFunction").field("dim", &self.dim).finish()
    }
}

/// Initial-value problem `z' = g(t, z)`, `z(a) = xi` on `[a, b]`.
#[derive(Clone, Debug)]
pub struct OdeProblem {
    a: f64,
    b: f64,
    xi: Vec<f64>,
    rhs: RhsFunction,
}

impl OdeProblem {
    pub fn new(a: f64, b: f64, xi: Vec<f64>, rhs: RhsFunction) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(param("interval", format!("[{a}, {b}] is not finite")));
        }
        if a >= b {
            return Err(param("interval", format!("need a < b, got [{a}, {b}]")));
        }
        if xi.len() != rhs.dim() {
            return Err(param(
                "xi",
                format!("length {} does not match rhs dimension {}", xi.len(), rhs.dim()),
            ));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(param("xi", "initial value must be finite"));
        }
        Ok(Self { a, b, xi, rhs })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn rhs(&self) -> &RhsFunction {
        &self.rhs
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// Same right-hand side and interval, different initial value.
    pub fn with_initial(&self, xi: Vec<f64>) -> Result<Self> {
        Self::new(self.a, self.b, xi, self.rhs.clone())
    }
}

/// Euler nodes, the slopes used on each step, and the induced interpolant.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    a: f64,
    b: f64,
    n: usize,
    dim: usize,
    h: f64,
    // (n + 1) * dim, row-major by node
    states: Vec<f64>,
    // n * dim
    slopes: Vec<f64>,
}

impl Trajectory {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of steps.
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Mesh point `t_k = a + k h`, with `t_n = b`.
    #[inline]
    pub fn knot(&self, k: usize) -> f64 {
        if k == self.n {
            self.b
        } else {
            self.a + k as f64 * self.h
        }
    }

    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn slope(&self, k: usize) -> &[f64] {
        &self.slopes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn slopes(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.slopes.chunks_exact(self.dim)
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.n)
    }

    /// Largest Euclidean norm over all nodes.
    pub fn max_state_norm(&self) -> f64 {
        self.states().map(norm).fold(0.0, f64::max)
    }

    /// Index of the cell `[t_k, t_{k+1}]` containing `t`, assuming `a <= t <= b`.
    pub(crate) fn cell_of(&self, t: f64) -> usize {
        let last = self.n - 1;
        let guess = ((t - self.a) / self.h).floor();
        let mut k = if guess <= 0.0 {
            0
        } else {
            (guess as usize).min(last)
        };
        while k > 0 && t < self.knot(k) {
            k -= 1;
        }
        while k < last && t >= self.knot(k + 1) {
            k += 1;
        }
        k
    }

    /// Interpolant in cell `k`, writing into `out`. Knots return stored states bit-for-bit.
    #[inline]
    pub(crate) fn eval_in_cell(&self, k: usize, t: f64, out: &mut [f64]) {
        let tk = self.knot(k);
        if t == tk {
            out.copy_from_slice(self.state(k));
        } else if t == self.knot(k + 1) {
            out.copy_from_slice(self.state(k + 1));
        } else {
            let dt = t - tk;
            for ((o, y), s) in out.iter_mut().zip(self.state(k)).zip(self.slope(k)) {
                *o = y + dt * s;
            }
        }
    }

    /// Evaluates the piecewise-linear interpolant `l_n(t)`.
    pub fn interpolate(&self, t: f64) -> Result<Vec<f64>> {
        if !(self.a <= t && t <= self.b) {
            return Err(Error::Domain {
                t,
                a: self.a,
                b: self.b,
            });
        }
        let mut out = vec![0.0; self.dim];
        self.eval_in_cell(self.cell_of(t), t, &mut out);
        Ok(out)
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Bound `e^{K(b-a)} (1 + |xi|)` on exact Euler nodes under linear growth with constant `K`.
pub fn exact_growth_bound(k: f64, a: f64, b: f64, xi_norm: f64) -> f64 {
    (k * (b - a)).exp() * (1.0 + xi_norm)
}

/// Bound `2 e^{(b-a)(K+1)} (1 + |xi|)` on noisy Euler nodes for precision at most 1.
pub fn noisy_growth_bound(k: f64, a: f64, b: f64, xi_norm: f64) -> f64 {
    2.0 * ((b - a) * (k + 1.0)).exp() * (1.0 + xi_norm)
}

fn integrate<F>(a: f64, b: f64, y0: &[f64], n: usize, mut slope: F) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if n == 0 {
        return Err(param("n", "number of steps must be at least 1"));
    }
    let dim = y0.len();
    let h = (b - a) / n as f64;
    let mut states = Vec::with_capacity((n + 1) * dim);
    let mut slopes = vec![0.0; n * dim];
    states.extend_from_slice(y0);
    for k in 0..n {
        let t = a + k as f64 * h;
        let (prev, _) = states.split_at(k * dim + dim);
        let y = &prev[k * dim..];
        let s = &mut slopes[k * dim..(k + 1) * dim];
        slope(t, y, s);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integration {
                step: k,
                t,
                y: y.to_vec(),
            });
        }
        for i in 0..dim {
            let next = states[k * dim + i] + h * slopes[k * dim + i];
            states.push(next);
        }
    }
    Ok(Trajectory {
        a,
        b,
        n,
        dim,
        h,
        states,
        slopes,
    })
}

/// Explicit Euler with exact information: `y_0 = xi`, `y_{k+1} = y_k + h g(t_k, y_k)`.
///
/// Performs exactly `n` right-hand side evaluations.
pub fn euler_solve(problem: &OdeProblem, n: usize) -> Result<Trajectory> {
    let rhs = problem.rhs();
    integrate(problem.a(), problem.b(), problem.xi(), n, |t, y, out| {
        rhs.eval_into(t, y, out)
    })
}

/// Explicit Euler driven by a noisy oracle: starts at the perturbed initial value
/// and advances with corrupted slopes.
pub fn euler_solve_noisy(problem: &OdeProblem, n: usize, oracle: &NoisyOracle) -> Result<Trajectory> {
    if oracle.dim() != problem.dim() {
        return Err(Error::Usage(format!(
            "oracle dimension {} does not match problem dimension {}",
            oracle.dim(),
            problem.dim()
        )));
    }
    integrate(problem.a(), problem.b(), oracle.xi_tilde(), n, |t, y, out| {
        oracle.eval_into(t, y, out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, xi: f64, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> OdeProblem {
        OdeProblem::new(a, b, vec![xi], RhsFunction::scalar(g)).unwrap()
    }

    #[test]
    fn zero_drift_stays_constant() {
        let traj = euler_solve(&scalar(0.0, 1.0, 1.0, |_, _| 0.0), 8).unwrap();
        assert!(traj.states().all(|y| y == [1.0]));
        for t in [0.0, 0.1, 0.37, 0.5, 1.0] {
            assert_eq!(traj.interpolate(t).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn constant_slope_gives_identity() {
        let traj = euler_solve(&scalar(0.0, 1.0, 0.0, |_, _| 1.0), 4).unwrap();
        for k in 0..=4 {
            assert_eq!(traj.state(k), [k as f64 / 4.0]);
        }
        assert_eq!(traj.interpolate(0.5).unwrap(), vec![0.5]);
        assert_eq!(traj.interpolate(0.625).unwrap(), vec![0.625]);
        assert_eq!(traj.interpolate(1.0).unwrap(), traj.final_state());
    }

    #[test]
    fn linear_rhs_matches_closed_form() {
        let traj = euler_solve(&scalar(0.0, 1.0, 1.0, |_, y| y), 2).unwrap();
        assert_eq!(traj.state(1), [1.5]);
        assert_eq!(traj.state(2), [2.25]);
    }

    #[test]
    fn mesh_layout() {
        let traj = euler_solve(&scalar(-3.5, 3.5, 3.0, |t, y| t * y), 7).unwrap();
        assert_eq!(traj.states().len(), 8);
        assert_eq!(traj.slopes().len(), 7);
        assert_eq!(traj.knot(0), -3.5);
        assert_eq!(traj.knot(7), 3.5);
        assert_eq!(traj.step_size(), 1.0);
        for k in 0..7 {
            let next = traj.state(k)[0] + traj.step_size() * traj.slope(k)[0];
            assert_eq!(next, traj.state(k + 1)[0]);
        }
    }

    #[test]
    fn knots_return_stored_states() {
        let traj = euler_solve(&scalar(0.0, 1.0, 0.3, |t, y| (3.0 * t).sin() - y * y), 37).unwrap();
        for k in 0..=37 {
            assert_eq!(traj.interpolate(traj.knot(k)).unwrap(), traj.state(k));
        }
    }

    #[test]
    fn interpolate_rejects_outside_interval() {
        let traj = euler_solve(&scalar(0.0, 1.0, 0.0, |_, _| 1.0), 4).unwrap();
        assert!(matches!(traj.interpolate(-1e-12), Err(Error::Domain { .. })));
        assert!(matches!(traj.interpolate(1.5), Err(Error::Domain { .. })));
        assert!(traj.interpolate(f64::NAN).is_err());
    }

    #[test]
    fn counts_rhs_evaluations() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let p = scalar(0.0, 2.0, 1.0, move |_, y| {
            c.fetch_add(1, Ordering::Relaxed);
            -y
        });
        euler_solve(&p, 13).unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 13);
    }

    #[test]
    fn non_finite_slope_reports_step() {
        // y' = 1/(1 - t) blows up at t = 1 which is hit at k = 4 of 8 on [0, 2].
        let p = scalar(0.0, 2.0, 0.0, |t, _| 1.0 / (1.0 - t));
        match euler_solve(&p, 8) {
            Err(Error::Integration { step, t, .. }) => {
                assert_eq!(step, 4);
                assert_eq!(t, 1.0);
            }
            other => panic!("expected integration error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_problems() {
        let rhs = RhsFunction::scalar(|_, y| y);
        assert!(OdeProblem::new(1.0, 1.0, vec![0.0], rhs.clone()).is_err());
        assert!(OdeProblem::new(0.0, f64::INFINITY, vec![0.0], rhs.clone()).is_err());
        assert!(OdeProblem::new(0.0, 1.0, vec![0.0, 1.0], rhs.clone()).is_err());
        assert!(OdeProblem::new(0.0, 1.0, vec![f64::NAN], rhs.clone()).is_err());
        let p = OdeProblem::new(0.0, 1.0, vec![0.0], rhs).unwrap();
        assert!(euler_solve(&p, 0).is_err());
    }

    #[test]
    fn vector_rotation() {
        // y' = (-y1, y0): Euler grows the radius by sqrt(1 + h^2) each step.
        let rhs = RhsFunction::new(2, |_, y, out| {
            out[0] = -y[1];
            out[1] = y[0];
        });
        let p = OdeProblem::new(0.0, 1.0, vec![1.0, 0.0], rhs).unwrap();
        let traj = euler_solve(&p, 10).unwrap();
        let expected = (1.0f64 + 0.01).powf(5.0);
        assert!((norm(traj.final_state()) - expected).abs() < 1e-12);
    }

    #[test]
    fn error_halves_when_n_doubles() {
        let p = scalar(0.0, 1.0, 1.0, |_, y| y);
        let sup_err = |n: usize| {
            let traj = euler_solve(&p, n).unwrap();
            // Error of the interpolant against e^t peaks at nodes for this convex problem.
            (0..=n)
                .map(|k| (traj.knot(k).exp() - traj.state(k)[0]).abs())
                .fold(0.0, f64::max)
        };
        for n in [16, 64, 256, 1024] {
            let ratio = sup_err(n) / sup_err(2 * n);
            assert!((ratio - 2.0).abs() <= 0.4, "n={n}: ratio {ratio}");
        }
    }

    #[test]
    fn exact_growth_bound_holds() {
        // |g| <= K (1 + |y|) with K = 2 for g = 2 t y sin(y) on [0, 1].
        let p = scalar(0.0, 1.0, 3.0, |t, y| 2.0 * t * y * y.sin());
        for n in [1, 2, 5, 50, 500] {
            let traj = euler_solve(&p, n).unwrap();
            assert!(traj.max_state_norm() <= exact_growth_bound(2.0, 0.0, 1.0, 3.0));
        }
    }
}
