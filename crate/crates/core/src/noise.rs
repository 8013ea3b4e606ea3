//! Corrupted right-hand sides `g~ = g + e` with `|e(t, y)| <= delta (1 + |y|)`,
//! perturbed initial values, and the oracle bundling both.
//!
//! Every corruption is a genuine function of `(t, y)`: randomized kinds hash the
//! bit patterns of the query point together with the seed instead of drawing
//! from a stream, so repeated queries at the same point agree.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::euler::{norm, OdeProblem, RhsFunction};

// Relative slack for the corruption bound check; covers rounding in `delta (1 + |y|) u`.
const BOUND_SLACK: f64 = 1e-12;

const CORRUPTION_STREAM: u64 = 0x6a09_e667_f3bc_c908;
const INITIAL_STREAM: u64 = 0xbb67_ae85_84ca_a73b;

/// splitmix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize, out: &mut [f64]) {
    if dim == 1 {
        out[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        for o in out.iter_mut() {
            *o = rng.sample(StandardNormal);
        }
        let r = norm(out);
        if r > 1e-300 {
            out.iter_mut().for_each(|o| *o /= r);
            return;
        }
    }
}

/// Family of corrupting functions drawn within one study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    Zero,
    Constant,
    Hashed,
    AdversarialSign,
}

impl CorruptionKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Constant => "constant",
            Self::Hashed => "hashed",
            Self::AdversarialSign => "adversarial-sign",
        }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "constant" => Ok(Self::Constant),
            "hashed" => Ok(Self::Hashed),
            "adversarial-sign" => Ok(Self::AdversarialSign),
            other => Err(param(
                "kind",
                format!("unknown corruption kind `{other}` (expected zero|constant|hashed|adversarial-sign)"),
            )),
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    Zero,
    Constant(Vec<f64>),
    Hashed(u64),
    AdversarialSign(RhsFunction),
}

/// A member of the corruption class for precision `delta`.
#[derive(Clone, Debug)]
pub struct CorruptingFunction {
    delta: f64,
    dim: usize,
    kind: CorruptionKind,
    seed: u64,
    shape: Shape,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(param("delta", format!("precision must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

/// Builds a corrupting function of the given kind over `base`.
///
/// `base` fixes the dimension and is consulted only by the adversarial-sign kind,
/// which pushes against the sign of the exact drift.
pub fn make_corruption(kind: CorruptionKind, delta: f64, seed: u64, base: &RhsFunction) -> Result<CorruptingFunction> {
    check_delta(delta)?;
    let dim = base.dim();
    let shape = match kind {
        CorruptionKind::Zero => Shape::Zero,
        CorruptionKind::Constant => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
            let mut u = vec![0.0; dim];
            unit_direction(&mut rng, dim, &mut u);
            Shape::Constant(u)
        }
        CorruptionKind::Hashed => Shape::Hashed(mix64(seed)),
        CorruptionKind::AdversarialSign => {
            if dim != 1 {
                return Err(Error::UnsupportedKind {
                    kind: kind.name(),
                    reason: format!("defined for scalar problems only, got dimension {dim}"),
                });
            }
            Shape::AdversarialSign(base.clone())
        }
    };
    Ok(CorruptingFunction {
        delta,
        dim,
        kind,
        seed,
        shape,
    })
}

impl CorruptingFunction {
    /// Constant-kind corruption `delta (1 + |y|) u0` with an explicit unit direction.
    pub fn constant_with_direction(delta: f64, direction: Vec<f64>) -> Result<Self> {
        check_delta(delta)?;
        if direction.is_empty() || (norm(&direction) - 1.0).abs() > 1e-12 {
            return Err(param("direction", "must be a unit vector"));
        }
        Ok(Self {
            delta,
            dim: direction.len(),
            kind: CorruptionKind::Constant,
            seed: 0,
            shape: Shape::Constant(direction),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> CorruptionKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the corruption vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.delta == 0.0 || matches!(self.shape, Shape::Zero)
    }

    /// Writes `e(t, y)` into `out`. `base_value` is `g(t, y)` when the caller already has it.
    pub(crate) fn eval_with_base(&self, t: f64, y: &[f64], base_value: Option<&[f64]>, out: &mut [f64]) {
        if self.is_zero() {
            out.fill(0.0);
            return;
        }
        let radius = self.delta * (1.0 + norm(y));
        match &self.shape {
            Shape::Zero => unreachable!(),
            Shape::Constant(u) => {
                for (o, ui) in out.iter_mut().zip(u) {
                    *o = radius * ui;
                }
            }
            Shape::Hashed(key) => {
                let mut h = mix64(key ^ t.to_bits());
                for yi in y {
                    h = mix64(h ^ yi.to_bits());
                }
                let mut rng = ChaCha8Rng::seed_from_u64(h);
                let fraction: f64 = rng.gen();
                unit_direction(&mut rng, self.dim, out);
                let scale = radius * fraction;
                out.iter_mut().for_each(|o| *o *= scale);
            }
            Shape::AdversarialSign(base) => {
                let g = match base_value {
                    Some(v) => v[0],
                    None => base.eval(t, y)[0],
                };
                out[0] = if g > 0.0 {
                    -radius
                } else if g < 0.0 {
                    radius
                } else {
                    0.0
                };
            }
        }
        let size = norm(out);
        assert!(
            size <= radius * (1.0 + BOUND_SLACK),
            "corruption bound violated: |e| = {size} > {radius} at t = {t}"
        );
    }

    pub fn eval_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.eval_with_base(t, y, None, out)
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, y, &mut out);
        out
    }
}

/// Returns `xi + delta v` with a seed-derived `v` in the closed unit ball.
pub fn perturb_initial(xi: &[f64], delta: f64, seed: u64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    if delta == 0.0 {
        return Ok(xi.to_vec());
    }
    let dim = xi.len();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed));
    let mut v = vec![0.0; dim];
    if dim == 1 {
        v[0] = rng.gen_range(-1.0..=1.0);
    } else {
        unit_direction(&mut rng, dim, &mut v);
        let r = rng.gen::<f64>().powf(1.0 / dim as f64);
        v.iter_mut().for_each(|vi| *vi *= r);
    }
    Ok(xi.iter().zip(&v).map(|(x, vi)| x + delta * vi).collect())
}

/// How an oracle perturbs the initial value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialNoise {
    /// Seed-derived point of the ball of radius `delta` around `xi`.
    #[default]
    Ball,
    /// `xi~ = xi`; only the right-hand side is corrupted.
    Exact,
}

/// Noisy information about `(xi, g)`: a corrupted right-hand side and a perturbed initial value.
#[derive(Clone, Debug)]
pub struct NoisyOracle {
    base: RhsFunction,
    corruption: CorruptingFunction,
    xi_tilde: Vec<f64>,
}

impl NoisyOracle {
    pub fn new(base: RhsFunction, corruption: CorruptingFunction, xi_tilde: Vec<f64>) -> Result<Self> {
        if base.dim() != corruption.dim() || base.dim() != xi_tilde.len() {
            return Err(Error::Usage(format!(
                "dimension mismatch: rhs {}, corruption {}, initial value {}",
                base.dim(),
                corruption.dim(),
                xi_tilde.len()
            )));
        }
        Ok(Self {
            base,
            corruption,
            xi_tilde,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn delta(&self) -> f64 {
        self.corruption.delta()
    }

    pub fn corruption(&self) -> &CorruptingFunction {
        &self.corruption
    }

    pub fn xi_tilde(&self) -> &[f64] {
        &self.xi_tilde
    }

    /// `g~(t, y) = g(t, y) + e(t, y)`.
    #[inline]
    pub fn eval_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.base.eval_into(t, y, out);
        if self.corruption.is_zero() {
            return;
        }
        let mut e = [0.0; 8];
        let mut heap;
        let e: &mut [f64] = if self.dim() <= e.len() {
            &mut e[..self.dim()]
        } else {
            heap = vec![0.0; self.dim()];
            &mut heap
        };
        self.corruption.eval_with_base(t, y, Some(out), e);
        for (o, ei) in out.iter_mut().zip(e.iter()) {
            *o += ei;
        }
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, y, &mut out);
        out
    }
}

/// Oracle over `problem` whose seed splits into independent corruption and initial-value seeds.
pub fn make_oracle(problem: &OdeProblem, kind: CorruptionKind, delta: f64, seed: u64) -> Result<NoisyOracle> {
    make_oracle_with(problem, kind, delta, seed, InitialNoise::Ball)
}

pub fn make_oracle_with(
    problem: &OdeProblem,
    kind: CorruptionKind,
    delta: f64,
    seed: u64,
    initial: InitialNoise,
) -> Result<NoisyOracle> {
    let corruption = make_corruption(kind, delta, mix64(seed ^ CORRUPTION_STREAM), problem.rhs())?;
    let xi_tilde = match initial {
        InitialNoise::Ball => perturb_initial(problem.xi(), delta, mix64(seed ^ INITIAL_STREAM))?,
        InitialNoise::Exact => problem.xi().to_vec(),
    };
    NoisyOracle::new(problem.rhs().clone(), corruption, xi_tilde)
}
