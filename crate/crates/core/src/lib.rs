//! Explicit Euler scheme for `z' = g(t, z)`, `z(a) = xi` under exact and noisy
//! information, with an experiment harness that measures empirical convergence
//! rates against dense-mesh reference solutions.
//!
//! * [`euler`]: problems, trajectories and the exact and noisy schemes.
//! * [`noise`]: corrupting functions bounded by `delta (1 + |y|)` and noisy oracles.
//! * [`problems`]: benchmark right-hand sides and sampled assumption checks.
//! * [`experiments`]: reference solutions, sup-norm errors, worst-case Monte Carlo, rate fits.
//! * [`cli`]: JSON experiment configs, CSV/SVG output and the command implementations.

pub mod cli;
pub mod error;
pub mod euler;
pub mod experiments;
pub mod noise;
pub mod problems;

pub use error::{Error, Result};
pub use euler::{euler_solve, euler_solve_noisy, OdeProblem, RhsFunction, Trajectory};
pub use experiments::{
    bound_ratio_check, convergence_studies, convergence_study, fit_rate, reference_solution, sup_error,
    worst_case_error, ConvergenceReport, NoiseModel, ReportRow, StudySettings,
};
pub use noise::{make_corruption, make_oracle, perturb_initial, CorruptingFunction, CorruptionKind, NoisyOracle};
pub use problems::{additive_problem, estimate_assumptions, multiplicative_problem, AdditiveParams, AssumptionEstimate, MultiplicativeParams};
