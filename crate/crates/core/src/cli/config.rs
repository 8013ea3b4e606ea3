//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "problem": { "name": "additive", "A": 2, "B1": -2, "B2": -0.5,
//!                "alpha": 1, "rho1": 1, "rho2": 0.75, "a": 0, "b": 10, "xi": 1 },
//!   "n_list": [64, 128, 256],
//!   "delta_list": [0, 0.001, 0.01, 0.1],
//!   "kind": "hashed",
//!   "mc_tries": 200,
//!   "factor": 1000,
//!   "base_seed": 42
//! }
//! ```

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::OdeProblem;
use crate::experiments::{default_n_list, FitRange, NoiseModel, StudySettings, DEFAULT_FACTOR, DEFAULT_MC_TRIES, MAX_REFERENCE_STEPS};
use crate::noise::{CorruptionKind, InitialNoise};
use crate::problems::{
    additive_problem, linear_test_problem, multiplicative_problem, AdditiveParams, MultiplicativeParams,
};

fn field(name: &str, reason: impl Into<String>) -> Error {
    Error::ConfigField {
        field: name.to_string(),
        reason: reason.into(),
    }
}

/// Right-hand side family and its parameters. Omitted values take the benchmark defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Family {
    Additive {
        #[serde(rename = "A", default = "default_amplitude")]
        amplitude: f64,
        #[serde(rename = "B1", default = "default_b1")]
        b1: f64,
        #[serde(rename = "B2", default = "default_b2")]
        b2: f64,
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        rho1: f64,
        #[serde(default = "default_rho2")]
        rho2: f64,
    },
    /// `gamma(t) = gamma_scale |sin(gamma_freq t + gamma_phase)|^alpha`, `f(x) = |cos x|`.
    Multiplicative {
        #[serde(default = "default_gamma_scale")]
        gamma_scale: f64,
        #[serde(default = "default_gamma_freq")]
        gamma_freq: f64,
        #[serde(default = "one")]
        gamma_phase: f64,
        #[serde(default = "two_thirds")]
        alpha: f64,
        #[serde(default = "two_thirds")]
        rho: f64,
    },
    LinearTest,
}

fn one() -> f64 {
    1.0
}
fn two_thirds() -> f64 {
    2.0 / 3.0
}
fn default_amplitude() -> f64 {
    2.0
}
fn default_b1() -> f64 {
    -2.0
}
fn default_b2() -> f64 {
    -0.5
}
fn default_rho2() -> f64 {
    0.75
}
fn default_gamma_scale() -> f64 {
    0.3
}
fn default_gamma_freq() -> f64 {
    PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(flatten)]
    pub family: Family,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub xi: Option<f64>,
}

impl ProblemSpec {
    pub fn name(&self) -> &'static str {
        match self.family {
            Family::Additive { .. } => "additive",
            Family::Multiplicative { .. } => "multiplicative",
            Family::LinearTest => "linear-test",
        }
    }

    fn defaults(&self) -> (f64, f64, f64) {
        match self.family {
            Family::Additive { .. } => (0.0, 10.0, 1.0),
            Family::Multiplicative { .. } => (-3.5, 3.5, 3.0),
            Family::LinearTest => (0.0, 1.0, 1.0),
        }
    }

    pub fn build(&self) -> Result<OdeProblem> {
        let (da, db, dxi) = self.defaults();
        let (a, b, xi) = (self.a.unwrap_or(da), self.b.unwrap_or(db), self.xi.unwrap_or(dxi));
        let wrap = |e: Error| match e {
            Error::Parameter { name, reason } => field(&format!("problem.{name}"), reason),
            other => other,
        };
        match self.family {
            Family::Additive {
                amplitude,
                b1,
                b2,
                alpha,
                rho1,
                rho2,
            } => additive_problem(
                AdditiveParams {
                    amplitude,
                    b1,
                    b2,
                    alpha,
                    rho1,
                    rho2,
                },
                a,
                b,
                xi,
            ),
            Family::Multiplicative {
                gamma_scale,
                gamma_freq,
                gamma_phase,
                alpha,
                rho,
            } => multiplicative_problem(
                MultiplicativeParams::sine_weight(gamma_scale, gamma_freq, gamma_phase, alpha, rho),
                a,
                b,
                xi,
            ),
            Family::LinearTest => linear_test_problem(a, b, xi),
        }
        .map_err(wrap)
    }

    /// Default `(alpha, beta)` Hölder exponents of the family.
    pub fn exponents(&self) -> (f64, f64) {
        match self.family {
            Family::Additive { alpha, rho1, rho2, .. } => (alpha, rho1.min(rho2)),
            Family::Multiplicative { alpha, rho, .. } => (alpha, rho),
            Family::LinearTest => (1.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub csv: Option<String>,
    pub slopes: Option<String>,
    pub plot: Option<String>,
    pub trajectory: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckSection {
    #[serde(rename = "R")]
    pub radius: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: Option<u64>,
}

fn default_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSection {
    pub n: usize,
    #[serde(default)]
    pub delta: f64,
    pub seed: Option<u64>,
}

fn default_delta_list() -> Vec<f64> {
    vec![0.0]
}
fn default_kind() -> CorruptionKind {
    CorruptionKind::Hashed
}
fn default_mc_tries() -> usize {
    DEFAULT_MC_TRIES
}
fn default_factor() -> usize {
    DEFAULT_FACTOR
}

/// One reproducible experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_delta_list")]
    pub delta_list: Vec<f64>,
    #[serde(default = "default_kind")]
    pub kind: CorruptionKind,
    #[serde(default)]
    pub initial_noise: InitialNoise,
    #[serde(default = "default_mc_tries")]
    pub mc_tries: usize,
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub fit: FitRange,
    #[serde(default)]
    pub output: OutputPaths,
    pub check: Option<CheckSection>,
    pub solve: Option<SolveSection>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            field(
                "<document>",
                format!("{} (line {}, column {})", e, e.line(), e.column()),
            )
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks the fields used by the `convergence` command.
    pub fn validate_study(&self) -> Result<()> {
        self.problem.build()?;
        if self.n_list.is_empty() {
            return Err(field("n_list", "must not be empty"));
        }
        if self.n_list.contains(&0) {
            return Err(field("n_list", "entries must be positive"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("n_list", "must be strictly increasing"));
        }
        if self.delta_list.is_empty() {
            return Err(field("delta_list", "must not be empty"));
        }
        if let Some(d) = self.delta_list.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(field("delta_list", format!("{d} outside [0, 1]")));
        }
        if self.mc_tries == 0 {
            return Err(field("mc_tries", "must be at least 1"));
        }
        if self.factor == 0 {
            return Err(field("factor", "must be at least 1"));
        }
        let largest = *self.n_list.last().unwrap();
        if largest.checked_mul(self.factor).map_or(true, |s| s > MAX_REFERENCE_STEPS) {
            return Err(field(
                "factor",
                format!("n * factor = {largest} * {} exceeds {MAX_REFERENCE_STEPS}", self.factor),
            ));
        }
        if self.kind == CorruptionKind::AdversarialSign && self.problem.build()?.dim() != 1 {
            return Err(field("kind", "adversarial-sign needs a scalar problem"));
        }
        Ok(())
    }

    pub fn noise_models(&self) -> Vec<NoiseModel> {
        self.delta_list
            .iter()
            .map(|&delta| NoiseModel {
                delta,
                kind: self.kind,
                initial: self.initial_noise,
            })
            .collect()
    }

    pub fn settings(&self) -> StudySettings {
        StudySettings {
            n_list: self.n_list.clone(),
            mc_tries: self.mc_tries,
            factor: self.factor,
            base_seed: self.base_seed,
            fit: self.fit,
        }
    }
}
