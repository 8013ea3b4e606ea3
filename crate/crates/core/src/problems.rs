//! Benchmark right-hand sides and sampled estimates of their structural constants.
//!
//! Two scalar families are provided:
//!
//! * additive: `A |t|^alpha x sin(x^2 + 1) + B1 sgn(x)|x|^rho1 + B2 sgn(x)|x|^rho2`
//! * multiplicative: `gamma(t) h(x) f(x)` with `h(x) = -sgn(x)|x|^rho`
//!
//! Both are odd in `x`, vanish at `x = 0`, grow at most linearly and satisfy a
//! one-sided Lipschitz condition without being globally Lipschitz.
//!
//! [`estimate_assumptions`] samples pairs of points and reports the largest
//! observed linear-growth, one-sided Lipschitz and Hölder ratios. The results
//! are lower bounds on the true constants; they can refute class membership
//! but never certify it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::euler::{norm, OdeProblem, RhsFunction};

/// `sgn(x) |x|^rho`, with `sgn(0) = 0`.
#[inline]
pub fn signed_power(x: f64, rho: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (rho * x.abs().ln()).exp().copysign(x)
    }
}

#[inline]
fn abs_power(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (p * x.abs().ln()).exp()
    }
}

fn check_exponent(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(param(name, format!("exponent must lie in (0, 1], got {v}")));
    }
    Ok(())
}

/// Parameters of the additive family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveParams {
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "B1")]
    pub b1: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    pub alpha: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl AdditiveParams {
    /// `A = 2, B1 = -2, B2 = -0.5, alpha = 1, rho1 = 1` with the given `rho2`.
    pub fn benchmark(rho2: f64) -> Self {
        Self {
            amplitude: 2.0,
            b1: -2.0,
            b2: -0.5,
            alpha: 1.0,
            rho1: 1.0,
            rho2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(param("A", "must be finite"));
        }
        // Positive B_i would break dissipativity of the power terms.
        if !(self.b1 <= 0.0) {
            return Err(param("B1", format!("must be <= 0, got {}", self.b1)));
        }
        if !(self.b2 <= 0.0) {
            return Err(param("B2", format!("must be <= 0, got {}", self.b2)));
        }
        if !self.b1.is_finite() || !self.b2.is_finite() {
            return Err(param("B1/B2", "must be finite"));
        }
        check_exponent("alpha", self.alpha)?;
        check_exponent("rho1", self.rho1)?;
        check_exponent("rho2", self.rho2)
    }

    /// Hölder exponent in the state variable, `min(rho1, rho2)`.
    pub fn beta(&self) -> f64 {
        self.rho1.min(self.rho2)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.amplitude * abs_power(t, self.alpha) * x * (x * x + 1.0).sin()
            + self.b1 * signed_power(x, self.rho1)
            + self.b2 * signed_power(x, self.rho2)
    }
}

pub fn additive_problem(params: AdditiveParams, a: f64, b: f64, xi: f64) -> Result<OdeProblem> {
    params.validate()?;
    OdeProblem::new(a, b, vec![xi], RhsFunction::scalar(move |t, x| params.eval(t, x)))
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nonnegative time weight with declared Hölder data `|gamma(t) - gamma(s)| <= L |t - s|^alpha`.
#[derive(Clone)]
pub struct TimeWeight {
    pub f: ScalarFn,
    pub holder_constant: f64,
    pub alpha: f64,
}

/// State factor with declared bounds `0 <= f <= D` and Lipschitz constant `L_f`.
#[derive(Clone)]
pub struct StateFactor {
    pub f: ScalarFn,
    pub bound: f64,
    pub lipschitz: f64,
}

#[derive(Clone)]
pub struct MultiplicativeParams {
    pub gamma: TimeWeight,
    pub rho: f64,
    pub factor: StateFactor,
}

impl fmt::Debug for MultiplicativeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplicativeParams")
            .field("gamma_holder", &self.gamma.holder_constant)
            .field("alpha", &self.gamma.alpha)
            .field("rho", &self.rho)
            .field("D", &self.factor.bound)
            .field("L_f", &self.factor.lipschitz)
            .finish()
    }
}

// Grid used to spot-check the declared properties of gamma and f.
const SPOT_CHECK_POINTS: usize = 10_001;
const STATE_CHECK_RANGE: f64 = 100.0;

impl MultiplicativeParams {
    /// `gamma(t) = scale |sin(freq t + phase)|^alpha`, `f(x) = |cos x|`.
    pub fn sine_weight(scale: f64, freq: f64, phase: f64, alpha: f64, rho: f64) -> Self {
        Self {
            gamma: TimeWeight {
                f: Arc::new(move |t| scale * abs_power((freq * t + phase).sin(), alpha)),
                // |u|^alpha is alpha-Hölder with constant 1 and sin is 1-Lipschitz.
                holder_constant: scale.abs() * abs_power(freq, alpha),
                alpha,
            },
            rho,
            factor: StateFactor {
                f: Arc::new(|x: f64| x.cos().abs()),
                bound: 1.0,
                lipschitz: 1.0,
            },
        }
    }

    /// `-0.3 |sin(pi t + 1)|^{2/3} sgn(x)|x|^{2/3} |cos x|`.
    pub fn benchmark() -> Self {
        Self::sine_weight(0.3, PI, 1.0, 2.0 / 3.0, 2.0 / 3.0)
    }

    pub fn validate(&self, a: f64, b: f64) -> Result<()> {
        check_exponent("rho", self.rho)?;
        check_exponent("alpha", self.gamma.alpha)?;
        if !(self.gamma.holder_constant >= 0.0) {
            return Err(param("gamma_holder", "must be >= 0"));
        }
        if !(self.factor.bound >= 0.0) {
            return Err(param("D", "must be >= 0"));
        }
        if !(self.factor.lipschitz >= 0.0) {
            return Err(param("L_f", "must be >= 0"));
        }
        let last = (SPOT_CHECK_POINTS - 1) as f64;
        for i in 0..SPOT_CHECK_POINTS {
            let t = a + (b - a) * i as f64 / last;
            let g = (self.gamma.f)(t);
            if !(g >= 0.0) {
                return Err(param("gamma", format!("gamma({t}) = {g} is not >= 0")));
            }
            let x = -STATE_CHECK_RANGE + 2.0 * STATE_CHECK_RANGE * i as f64 / last;
            let v = (self.factor.f)(x);
            if !(0.0..=self.factor.bound).contains(&v) {
                return Err(param("f", format!("f({x}) = {v} outside [0, {}]", self.factor.bound)));
            }
        }
        Ok(())
    }
}

pub fn multiplicative_problem(params: MultiplicativeParams, a: f64, b: f64, xi: f64) -> Result<OdeProblem> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(param("interval", format!("need finite a < b, got [{a}, {b}]")));
    }
    params.validate(a, b)?;
    let MultiplicativeParams { gamma, rho, factor } = params;
    let rhs = RhsFunction::scalar(move |t, x| (gamma.f)(t) * -signed_power(x, rho) * (factor.f)(x));
    OdeProblem::new(a, b, vec![xi], rhs)
}

/// `y' = y` on `[a, b]`, solution `xi e^{t - a}`.
pub fn linear_test_problem(a: f64, b: f64, xi: f64) -> Result<OdeProblem> {
    OdeProblem::new(a, b, vec![xi], RhsFunction::scalar(|_, y| y))
}

/// Sampled lower bounds for the linear-growth, one-sided Lipschitz and Hölder constants on `B_0(R)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEstimate {
    pub radius: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k_hat: f64,
    pub h_hat: f64,
    pub l_hat: f64,
    pub samples: usize,
}

pub const MIN_SAMPLES: usize = 1_000;
const BLOCK: usize = 4_096;
const MIN_SEPARATION: f64 = 1e-10;
// Near-diagonal pair offsets span 10^-6 .. 10^-2.
const NEAR_LOG_MIN: f64 = -6.0;
const NEAR_LOG_SPAN: f64 = 4.0;

/// Additive-recurrence low-discrepancy sequence with a seeded random shift.
struct Kronecker {
    steps: Vec<f64>,
    shift: Vec<f64>,
}

impl Kronecker {
    fn new(dims: usize, seed: u64) -> Self {
        // phi_d solves x^{d+1} = x + 1.
        let mut phi = 2.0f64;
        for _ in 0..64 {
            phi = (1.0 + phi).powf(1.0 / (dims as f64 + 1.0));
        }
        let steps = (1..=dims).map(|j| phi.powi(-(j as i32)).fract()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Self { steps, shift }
    }

    fn point(&self, i: usize, out: &mut [f64]) {
        let i = i as f64;
        for ((o, s), c) in out.iter_mut().zip(&self.steps).zip(&self.shift) {
            *o = (c + i * s).fract();
        }
    }
}

/// Maps `u` in `[0,1)^d` onto the ball of radius `r` by radial rescaling of the cube.
fn cube_to_ball(u: &[f64], r: f64, out: &mut [f64]) {
    for (o, ui) in out.iter_mut().zip(u) {
        *o = 2.0 * ui - 1.0;
    }
    let inf = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let two = norm(out);
    let scale = if two > 0.0 { r * inf / two } else { 0.0 };
    out.iter_mut().for_each(|o| *o *= scale);
}

fn direction(u: &[f64], out: &mut [f64]) {
    for (o, ui) in out.iter_mut().zip(u) {
        *o = 2.0 * ui - 1.0;
    }
    let n = norm(out);
    if n > 1e-12 {
        out.iter_mut().for_each(|o| *o /= n);
    } else {
        out.fill(0.0);
        out[0] = 1.0;
    }
}

#[derive(Clone, Copy)]
struct Maxima {
    k: f64,
    h: f64,
    l: f64,
}

impl Maxima {
    const EMPTY: Self = Self {
        k: 0.0,
        h: f64::NEG_INFINITY,
        l: 0.0,
    };

    fn merge(self, o: Self) -> Self {
        Self {
            k: self.k.max(o.k),
            h: self.h.max(o.h),
            l: self.l.max(o.l),
        }
    }
}

struct Sampler<'a> {
    problem: &'a OdeProblem,
    seq: Kronecker,
    radius: f64,
    alpha: f64,
    beta: f64,
}

impl Sampler<'_> {
    fn eval(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.problem.rhs().eval_into(t, y, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Evaluation { t, y: y.to_vec() })
        }
    }

    /// Pair `i`: even indices spread over the whole domain, odd indices sit near the diagonal.
    fn pair(&self, i: usize, u: &mut [f64], t: &mut [f64; 2], y: &mut [f64], y2: &mut [f64]) {
        let d = y.len();
        let (a, b) = (self.problem.a(), self.problem.b());
        self.seq.point(i, u);
        t[0] = a + (b - a) * u[0];
        cube_to_ball(&u[2..2 + d], self.radius, y);
        if i % 2 == 0 {
            t[1] = a + (b - a) * u[1];
            cube_to_ball(&u[2 + d..2 + 2 * d], self.radius, y2);
            return;
        }
        let step = 10f64.powf(NEAR_LOG_MIN + NEAR_LOG_SPAN * u[2 + 2 * d]);
        let dt = (b - a) * 10f64.powf(NEAR_LOG_MIN + NEAR_LOG_SPAN * u[3 + 2 * d]);
        t[1] = if t[0] + dt <= b { t[0] + dt } else { t[0] - dt };
        direction(&u[2 + d..2 + 2 * d], y2);
        let forward: Vec<f64> = y.iter().zip(y2.iter()).map(|(p, w)| p + step * w).collect();
        if norm(&forward) <= self.radius {
            y2.copy_from_slice(&forward);
        } else {
            for (q, p) in y2.iter_mut().zip(y.iter()) {
                *q = p - step * *q;
            }
            let r = norm(y2);
            if r > self.radius {
                y2.iter_mut().for_each(|q| *q *= self.radius / r);
            }
        }
    }

    fn block(&self, start: usize, end: usize) -> Result<Maxima> {
        let d = self.problem.dim();
        let mut u = vec![0.0; 2 * d + 4];
        let (mut y, mut y2) = (vec![0.0; d], vec![0.0; d]);
        let (mut g1, mut g2, mut g3) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut t = [0.0; 2];
        let mut m = Maxima::EMPTY;
        for i in start..end {
            self.pair(i, &mut u, &mut t, &mut y, &mut y2);
            self.eval(t[0], &y, &mut g1)?;
            self.eval(t[1], &y2, &mut g2)?;
            self.eval(t[0], &y2, &mut g3)?;
            m.k = m.k.max(norm(&g1) / (1.0 + norm(&y))).max(norm(&g2) / (1.0 + norm(&y2)));

            let mut dist2 = 0.0;
            let mut inner = 0.0;
            let mut gap2 = 0.0;
            for j in 0..d {
                let dy = y[j] - y2[j];
                dist2 += dy * dy;
                inner += dy * (g1[j] - g3[j]);
                gap2 += (g1[j] - g2[j]).powi(2);
            }
            let dist = dist2.sqrt();
            if dist >= MIN_SEPARATION {
                m.h = m.h.max(inner / dist2);
            }
            let denom = abs_power(t[0] - t[1], self.alpha) + abs_power(dist, self.beta);
            if denom > 0.0 {
                m.l = m.l.max(gap2.sqrt() / denom);
            }
        }
        Ok(m)
    }
}

/// Estimates `K`, `H` and `L` for `problem` on `B_0(radius)` from `samples` seeded pairs.
///
/// Sample sets are nested: the first `m` pairs of a run with `samples > m` are
/// exactly the pairs of a run with `m`, so estimates never decrease with `samples`.
pub fn estimate_assumptions(
    problem: &OdeProblem,
    radius: f64,
    alpha: f64,
    beta: f64,
    samples: usize,
    seed: u64,
) -> Result<AssumptionEstimate> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(param("R", format!("radius must be positive and finite, got {radius}")));
    }
    check_exponent("alpha", alpha)?;
    check_exponent("beta", beta)?;
    if samples < MIN_SAMPLES {
        return Err(param("samples", format!("need at least {MIN_SAMPLES}, got {samples}")));
    }
    let sampler = Sampler {
        problem,
        seq: Kronecker::new(2 * problem.dim() + 4, seed),
        radius,
        alpha,
        beta,
    };
    let blocks = samples.div_ceil(BLOCK);
    let m = (0..blocks)
        .into_par_iter()
        .map(|blk| sampler.block(blk * BLOCK, ((blk + 1) * BLOCK).min(samples)))
        .try_reduce(|| Maxima::EMPTY, |x, y| Ok(x.merge(y)))?;
    Ok(AssumptionEstimate {
        radius,
        alpha,
        beta,
        k_hat: m.k,
        h_hat: m.h,
        l_hat: m.l,
        samples,
    })
}
