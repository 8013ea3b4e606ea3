//! Convergence experiments: dense-mesh reference solutions, exact sup-norm
//! distances between piecewise-linear trajectories, sampled worst-case errors
//! under noisy information and log-log rate fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{euler_solve, euler_solve_noisy, OdeProblem, Trajectory};
use crate::noise::{make_oracle_with, CorruptionKind, InitialNoise};

/// Default refinement of the reference mesh relative to the measured one.
pub const DEFAULT_FACTOR: usize = 1000;
/// Default number of Monte Carlo replicas for the worst-case error.
pub const DEFAULT_MC_TRIES: usize = 200;
/// Largest reference mesh the harness will build.
pub const MAX_REFERENCE_STEPS: usize = 100_000_000;
/// Floor applied to errors before taking logarithms.
pub const ERROR_FLOOR: f64 = f64::EPSILON;

/// Grid used when a config gives no `n_list`: `n = 2^4, ..., 2^14`.
pub fn default_n_list() -> Vec<usize> {
    (4..=14).map(|k| 1usize << k).collect()
}
/// Per-doubling decrease below which an error sequence counts as plateaued.
const PLATEAU_DECREASE: f64 = 1.05;

/// Exact-information Euler run with `n * factor` steps, standing in for the true solution.
pub fn reference_solution(problem: &OdeProblem, n: usize, factor: usize) -> Result<Trajectory> {
    let steps = n
        .checked_mul(factor)
        .filter(|&s| s <= MAX_REFERENCE_STEPS && s > 0)
        .ok_or_else(|| {
            Error::Config(format!(
                "reference mesh n * factor = {n} * {factor} must be in [1, {MAX_REFERENCE_STEPS}]"
            ))
        })?;
    euler_solve(problem, steps)
}

/// Walks the cells of a trajectory in increasing time.
struct Cursor<'a> {
    traj: &'a Trajectory,
    cell: usize,
}

impl<'a> Cursor<'a> {
    fn new(traj: &'a Trajectory) -> Self {
        Self { traj, cell: 0 }
    }

    #[inline]
    fn eval(&mut self, t: f64, out: &mut [f64]) {
        let last = self.traj.steps() - 1;
        while self.cell < last && t >= self.traj.knot(self.cell + 1) {
            self.cell += 1;
        }
        self.traj.eval_in_cell(self.cell, t, out);
    }
}

/// `sup_{a <= t <= b} |approx(t) - reference(t)|` for the piecewise-linear interpolants.
///
/// The difference is affine between consecutive points of the merged knot set and
/// the norm of an affine map is convex, so the supremum is attained at a knot.
pub fn sup_error(approx: &Trajectory, reference: &Trajectory) -> Result<f64> {
    if approx.a() != reference.a() || approx.b() != reference.b() {
        return Err(Error::Usage(format!(
            "interval mismatch: [{}, {}] vs [{}, {}]",
            approx.a(),
            approx.b(),
            reference.a(),
            reference.b()
        )));
    }
    if approx.dim() != reference.dim() {
        return Err(Error::Usage(format!(
            "dimension mismatch: {} vs {}",
            approx.dim(),
            reference.dim()
        )));
    }
    let d = approx.dim();
    if d == 1 {
        return Ok(sup_error_scalar(approx, reference));
    }
    let (mut u, mut v) = (vec![0.0; d], vec![0.0; d]);
    let (mut ca, mut cr) = (Cursor::new(approx), Cursor::new(reference));
    let (na, nr) = (approx.steps(), reference.steps());
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i <= na || j <= nr {
        let ta = if i <= na { approx.knot(i) } else { f64::INFINITY };
        let tr = if j <= nr { reference.knot(j) } else { f64::INFINITY };
        let t = ta.min(tr);
        if ta == t {
            i += 1;
        }
        if tr == t {
            j += 1;
        }
        ca.eval(t, &mut u);
        cr.eval(t, &mut v);
        let dist2: f64 = u.iter().zip(&v).map(|(x, y)| (x - y) * (x - y)).sum();
        worst = worst.max(dist2.sqrt());
    }
    Ok(worst)
}

// Same merge as `sup_error`, specialised to d = 1 without per-point slices.
fn sup_error_scalar(approx: &Trajectory, reference: &Trajectory) -> f64 {
    let (na, nr) = (approx.steps(), reference.steps());
    let (mut ca, mut cr) = (Cursor::new(approx), Cursor::new(reference));
    let (mut u, mut v) = ([0.0], [0.0]);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i <= na || j <= nr {
        let ta = if i <= na { approx.knot(i) } else { f64::INFINITY };
        let tr = if j <= nr { reference.knot(j) } else { f64::INFINITY };
        let t = ta.min(tr);
        if ta == t {
            i += 1;
        }
        if tr == t {
            j += 1;
        }
        ca.eval(t, &mut u);
        cr.eval(t, &mut v);
        worst = worst.max((u[0] - v[0]).abs());
    }
    worst
}

/// Precomputed sup-norm distance to a fixed scalar reference for trajectories on a fixed mesh.
///
/// For every cell `[t_k, t_{k+1}]` of the measured mesh the reference knots strictly
/// inside it are reduced to their lower and upper convex hulls. The largest gap between
/// an affine piece and those knots sits on a hull vertex, found by binary search on the
/// hull edge slopes, so a query costs `O(n log m)` instead of `O(n m)` for `m` reference
/// knots per cell.
pub struct ScalarSupIndex<'r> {
    reference: &'r Trajectory,
    steps: usize,
    a: f64,
    b: f64,
    // reference knot indices, one run per cell
    lower: Vec<u32>,
    upper: Vec<u32>,
    lower_at: Vec<usize>,
    upper_at: Vec<usize>,
}

fn cross(o: (f64, f64), p: (f64, f64), q: (f64, f64)) -> f64 {
    (p.0 - o.0) * (q.1 - o.1) - (p.1 - o.1) * (q.0 - o.0)
}

impl<'r> ScalarSupIndex<'r> {
    pub fn new(reference: &'r Trajectory, steps: usize) -> Result<Self> {
        if reference.dim() != 1 {
            return Err(Error::Usage(format!("scalar index needs d = 1, got {}", reference.dim())));
        }
        if steps == 0 {
            return Err(Error::Usage("mesh needs at least one step".into()));
        }
        let (a, b) = (reference.a(), reference.b());
        let h = (b - a) / steps as f64;
        let knot = |k: usize| if k == steps { b } else { a + k as f64 * h };
        let point = |j: usize| (reference.knot(j), reference.state(j)[0]);
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut lower_at = vec![0];
        let mut upper_at = vec![0];
        let mut j = 0;
        let nr = reference.steps();
        for k in 0..steps {
            let (lo, hi) = (knot(k), knot(k + 1));
            while j <= nr && reference.knot(j) <= lo {
                j += 1;
            }
            let start_l = lower.len();
            let start_u = upper.len();
            while j <= nr && reference.knot(j) < hi {
                let p = point(j);
                while lower.len() >= start_l + 2
                    && cross(point(lower[lower.len() - 2] as usize), point(lower[lower.len() - 1] as usize), p) <= 0.0
                {
                    lower.pop();
                }
                lower.push(j as u32);
                while upper.len() >= start_u + 2
                    && cross(point(upper[upper.len() - 2] as usize), point(upper[upper.len() - 1] as usize), p) >= 0.0
                {
                    upper.pop();
                }
                upper.push(j as u32);
                j += 1;
            }
            lower_at.push(lower.len());
            upper_at.push(upper.len());
        }
        Ok(Self {
            reference,
            steps,
            a,
            b,
            lower,
            upper,
            lower_at,
            upper_at,
        })
    }

    /// Largest `|y + (t_j - t0) s - r_j|` over a hull; `rising` selects the lower hull
    /// (edge slopes increase) versus the upper hull (edge slopes decrease).
    fn hull_max(&self, hull: &[u32], rising: bool, t0: f64, y: f64, s: f64) -> f64 {
        if hull.is_empty() {
            return 0.0;
        }
        let r = self.reference;
        let slope = |i: usize| {
            let (p, q) = (hull[i] as usize, hull[i + 1] as usize);
            (r.state(q)[0] - r.state(p)[0]) / (r.knot(q) - r.knot(p))
        };
        let edges = hull.len() - 1;
        let best = if rising {
            partition_point(edges, |i| slope(i) < s)
        } else {
            partition_point(edges, |i| slope(i) > s)
        };
        let lo = best.saturating_sub(1);
        let hi = (best + 1).min(edges);
        (lo..=hi)
            .map(|i| {
                let j = hull[i] as usize;
                (y + (r.knot(j) - t0) * s - r.state(j)[0]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `sup_error(approx, reference)` for a scalar trajectory on the indexed mesh.
    pub fn sup_error(&self, approx: &Trajectory) -> Result<f64> {
        if approx.a() != self.a || approx.b() != self.b || approx.dim() != 1 || approx.steps() != self.steps {
            return Err(Error::Usage("trajectory does not match the indexed mesh".into()));
        }
        let mut cursor = Cursor::new(self.reference);
        let mut v = [0.0];
        let mut worst = 0.0f64;
        for k in 0..=self.steps {
            let t = approx.knot(k);
            cursor.eval(t, &mut v);
            worst = worst.max((approx.state(k)[0] - v[0]).abs());
            if k == self.steps {
                break;
            }
            let (tk, y, s) = (t, approx.state(k)[0], approx.slope(k)[0]);
            let lower = &self.lower[self.lower_at[k]..self.lower_at[k + 1]];
            let upper = &self.upper[self.upper_at[k]..self.upper_at[k + 1]];
            worst = worst
                .max(self.hull_max(lower, true, tk, y, s))
                .max(self.hull_max(upper, false, tk, y, s));
        }
        Ok(worst)
    }
}

/// First index in `0..len` where `pred` turns false, assuming it is monotone.
fn partition_point(len: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Noise level and corruption family of a study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub delta: f64,
    pub kind: CorruptionKind,
    #[serde(default)]
    pub initial: InitialNoise,
}

impl NoiseModel {
    pub fn exact() -> Self {
        Self {
            delta: 0.0,
            kind: CorruptionKind::Zero,
            initial: InitialNoise::Ball,
        }
    }

    pub fn new(delta: f64, kind: CorruptionKind) -> Self {
        Self {
            delta,
            kind,
            initial: InitialNoise::Ball,
        }
    }
}

/// Sampled worst-case error over `mc_tries` corrupted oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCase {
    pub err_max: f64,
    pub errs: Vec<f64>,
}

impl WorstCase {
    pub fn err_mean(&self) -> f64 {
        self.errs.iter().sum::<f64>() / self.errs.len() as f64
    }
}

/// Replica `i` (1-based) of a study seeded with `base_seed`.
pub fn replica_seed(base_seed: u64, i: u64) -> u64 {
    base_seed ^ i
}

/// Runs `mc_tries` noisy Euler solves with seeds `base_seed ^ i`, `i = 1..=mc_tries`,
/// and measures each against `reference`.
pub fn worst_case_error(
    problem: &OdeProblem,
    n: usize,
    noise: &NoiseModel,
    mc_tries: usize,
    base_seed: u64,
    reference: &Trajectory,
) -> Result<WorstCase> {
    if !(0.0..=1.0).contains(&noise.delta) {
        return Err(crate::error::param("delta", format!("must lie in [0, 1], got {}", noise.delta)));
    }
    if mc_tries == 0 {
        return Err(crate::error::param("mc_tries", "need at least one replica"));
    }
    let index = if problem.dim() == 1 && reference.dim() == 1 {
        Some(ScalarSupIndex::new(reference, n)?)
    } else {
        None
    };
    let errs = (1..=mc_tries as u64)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<f64> {
                let seed = replica_seed(base_seed, i);
                let oracle = make_oracle_with(problem, noise.kind, noise.delta, seed, noise.initial)?;
                let traj = euler_solve_noisy(problem, n, &oracle)?;
                match &index {
                    Some(index) if traj.a() == reference.a() && traj.b() == reference.b() => index.sup_error(&traj),
                    _ => sup_error(&traj, reference),
                }
            };
            run().map_err(|e| Error::Replica {
                replica: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let err_max = errs.iter().copied().fold(0.0, f64::max);
    Ok(WorstCase { err_max, errs })
}

/// One row of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    pub err_max: f64,
    pub err_mean: f64,
    pub mc_tries: usize,
}

/// Which rows enter the regression.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitRange {
    #[default]
    Full,
    /// Rows before the first doubling that reduces `err_max` by less than 5%.
    PrePlateau,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub n_list: Vec<usize>,
    pub mc_tries: usize,
    pub factor: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub fit: FitRange,
}

impl StudySettings {
    pub fn new(n_list: Vec<usize>, base_seed: u64) -> Self {
        Self {
            n_list,
            mc_tries: DEFAULT_MC_TRIES,
            factor: DEFAULT_FACTOR,
            base_seed,
            fit: FitRange::Full,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Usage("n_list is empty".into()));
        }
        if self.n_list[0] == 0 {
            return Err(Error::Usage("n_list entries must be positive".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Usage("n_list must be strictly increasing".into()));
        }
        if self.mc_tries == 0 {
            return Err(Error::Usage("mc_tries must be at least 1".into()));
        }
        if self.factor == 0 {
            return Err(Error::Usage("factor must be at least 1".into()));
        }
        let largest = *self.n_list.last().unwrap();
        if largest.checked_mul(self.factor).map_or(true, |s| s > MAX_REFERENCE_STEPS) {
            return Err(Error::Config(format!(
                "largest reference mesh {largest} * {} exceeds {MAX_REFERENCE_STEPS} steps",
                self.factor
            )));
        }
        Ok(())
    }
}

/// Empirical rate table for one noise model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub noise: NoiseModel,
    pub factor: usize,
    pub base_seed: u64,
    pub rows: Vec<ReportRow>,
    pub slope: f64,
    pub intercept: f64,
    pub n_range_used: Vec<usize>,
    /// Indices of rows whose errors were raised to [`ERROR_FLOOR`].
    pub clamped: Vec<usize>,
}

/// Least-squares fit of `-log10(err)` against `log10(n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `-log10(err) = slope * log10(n) + intercept` over `(n, err)` points.
/// Errors at or below zero are raised to [`ERROR_FLOOR`].
pub fn fit_points(points: &[(usize, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| *n > 0 && !e.is_nan())
        .map(|&(n, e)| ((n as f64).log10(), -e.max(ERROR_FLOOR).log10()))
        .collect();
    if usable.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 usable rows, got {}", usable.len())));
    }
    let m = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / m;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("rows need at least two distinct n".into()));
    }
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Fits the empirical rate over `rows` using `err_max`.
pub fn fit_rate(rows: &[ReportRow]) -> Result<RateFit> {
    let points: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.err_max)).collect();
    fit_points(&points)
}

/// Number of leading rows before `err_max` stops decreasing by at least 5% per doubling of `n`.
pub fn pre_plateau_len(rows: &[ReportRow]) -> usize {
    for i in 1..rows.len() {
        let doublings = (rows[i].n as f64 / rows[i - 1].n as f64).log2();
        let per_doubling = (rows[i - 1].err_max / rows[i].err_max).powf(1.0 / doublings);
        if !(per_doubling >= PLATEAU_DECREASE) {
            return i;
        }
    }
    rows.len()
}

fn finish_report(
    noise: NoiseModel,
    settings: &StudySettings,
    mut rows: Vec<ReportRow>,
) -> Result<ConvergenceReport> {
    rows.sort_by_key(|r| r.n);
    let mut clamped = Vec::new();
    for (i, row) in rows.iter_mut().enumerate() {
        if row.err_max < ERROR_FLOOR || row.err_mean < ERROR_FLOOR {
            clamped.push(i);
            row.err_max = row.err_max.max(ERROR_FLOOR);
            row.err_mean = row.err_mean.max(ERROR_FLOOR);
        }
    }
    let used = match settings.fit {
        FitRange::Full => rows.len(),
        FitRange::PrePlateau => {
            let k = pre_plateau_len(&rows);
            if k >= 2 {
                k
            } else {
                rows.len()
            }
        }
    };
    let fit = fit_rate(&rows[..used])?;
    Ok(ConvergenceReport {
        noise,
        factor: settings.factor,
        base_seed: settings.base_seed,
        n_range_used: rows[..used].iter().map(|r| r.n).collect(),
        rows,
        slope: fit.slope,
        intercept: fit.intercept,
        clamped,
    })
}

/// Runs one study per noise model, sharing a single reference solution per `n`.
pub fn convergence_studies(
    problem: &OdeProblem,
    noises: &[NoiseModel],
    settings: &StudySettings,
) -> Result<Vec<ConvergenceReport>> {
    settings.validate()?;
    if noises.is_empty() {
        return Err(Error::Usage("no noise levels requested".into()));
    }
    let mut rows: Vec<Vec<ReportRow>> = vec![Vec::with_capacity(settings.n_list.len()); noises.len()];
    for &n in &settings.n_list {
        let reference = reference_solution(problem, n, settings.factor)?;
        let h = (problem.b() - problem.a()) / n as f64;
        for (noise, out) in noises.iter().zip(rows.iter_mut()) {
            let tries = if noise.delta == 0.0 { 1 } else { settings.mc_tries };
            let wc = worst_case_error(problem, n, noise, tries, settings.base_seed, &reference)?;
            out.push(ReportRow {
                n,
                h,
                delta: noise.delta,
                err_max: wc.err_max,
                err_mean: wc.err_mean().min(wc.err_max),
                mc_tries: tries,
            });
        }
    }
    noises
        .iter()
        .zip(rows)
        .map(|(noise, rows)| finish_report(*noise, settings, rows))
        .collect()
}

/// Convergence study for a single noise model. With `delta = 0` only one replica is run.
pub fn convergence_study(problem: &OdeProblem, noise: &NoiseModel, settings: &StudySettings) -> Result<ConvergenceReport> {
    Ok(convergence_studies(problem, std::slice::from_ref(noise), settings)?.remove(0))
}

/// Ratios of measured errors to the theoretical envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRatios {
    pub ratios: Vec<f64>,
    pub max_over_min: f64,
}

/// `h^alpha + h^beta + [delta > 0] (h^{1/2} + delta)`.
pub fn error_envelope(h: f64, alpha: f64, beta: f64, delta: f64) -> f64 {
    let noisy = if delta > 0.0 { h.sqrt() + delta } else { 0.0 };
    h.powf(alpha) + h.powf(beta) + noisy
}

/// `err_max / envelope` per row; a bounded spread means the envelope holds with a uniform constant.
pub fn bound_ratio_check(rows: &[ReportRow], alpha: f64, beta: f64, delta: f64) -> BoundRatios {
    let ratios: Vec<f64> = rows
        .iter()
        .map(|r| r.err_max / error_envelope(r.h, alpha, beta, delta))
        .collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    BoundRatios {
        max_over_min: max / min,
        ratios,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler::RhsFunction;
    use crate::noise::CorruptionKind;
    use crate::problems::linear_test_problem;
    use proptest::prelude::*;

    fn row(n: usize, err: f64) -> ReportRow {
        ReportRow {
            n,
            h: 1.0 / n as f64,
            delta: 0.0,
            err_max: err,
            err_mean: err,
            mc_tries: 1,
        }
    }

    fn flat_then_ramp() -> (Trajectory, Trajectory) {
        let zero = OdeProblem::new(0.0, 1.0, vec![0.0], RhsFunction::scalar(|_, _| 0.0)).unwrap();
        let one = OdeProblem::new(0.0, 1.0, vec![0.0], RhsFunction::scalar(|_, _| 1.0)).unwrap();
        (euler_solve(&zero, 1).unwrap(), euler_solve(&one, 1).unwrap())
    }

    #[test]
    fn sup_error_examples() {
        let (flat, ramp) = flat_then_ramp();
        assert_eq!(sup_error(&ramp, &ramp).unwrap(), 0.0);
        assert_eq!(sup_error(&flat, &ramp).unwrap(), 1.0);
        // Knots {0, 0.5, 1} with values {0, 1, 0}.
        let tent = OdeProblem::new(0.0, 1.0, vec![0.0], RhsFunction::scalar(|t, _| if t < 0.5 { 2.0 } else { -2.0 })).unwrap();
        let tent = euler_solve(&tent, 2).unwrap();
        assert_eq!(sup_error(&tent, &flat).unwrap(), 1.0);
        assert_eq!(sup_error(&flat, &tent).unwrap(), 1.0);
    }

    #[test]
    fn sup_error_rejects_mismatch() {
        let (flat, _) = flat_then_ramp();
        let other = OdeProblem::new(0.0, 2.0, vec![0.0], RhsFunction::scalar(|_, _| 0.0)).unwrap();
        assert!(matches!(sup_error(&flat, &euler_solve(&other, 3).unwrap()), Err(Error::Usage(_))));
        let planar = OdeProblem::new(0.0, 1.0, vec![0.0, 0.0], RhsFunction::new(2, |_, _, o| o.fill(0.0))).unwrap();
        assert!(matches!(sup_error(&flat, &euler_solve(&planar, 3).unwrap()), Err(Error::Usage(_))));
    }

    #[test]
    fn vector_sup_error_uses_euclidean_norm() {
        let p = OdeProblem::new(0.0, 1.0, vec![0.0, 0.0], RhsFunction::new(2, |_, _, o| {
            o[0] = 3.0;
            o[1] = 4.0;
        }))
        .unwrap();
        let q = OdeProblem::new(0.0, 1.0, vec![0.0, 0.0], RhsFunction::new(2, |_, _, o| o.fill(0.0))).unwrap();
        let e = sup_error(&euler_solve(&p, 3).unwrap(), &euler_solve(&q, 7).unwrap()).unwrap();
        assert!((e - 5.0).abs() < 1e-15);
    }

    #[test]
    fn reference_with_unit_factor_is_plain_euler() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        assert_eq!(reference_solution(&p, 17, 1).unwrap(), euler_solve(&p, 17).unwrap());
        assert_eq!(reference_solution(&p, 10, 1000).unwrap().states().len(), 10_001);
        assert!(matches!(reference_solution(&p, 1_000_000, 1000), Err(Error::Config(_))));
        assert!(matches!(reference_solution(&p, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn reference_approaches_exponential() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        let r = reference_solution(&p, 10, 1000).unwrap();
        // Independent closed form (1 + 1e-4)^(1e4).
        let closed = (1.0f64 + 1e-4).powi(10_000);
        assert!((r.final_state()[0] - closed).abs() < 1e-9);
        assert!((r.final_state()[0] - std::f64::consts::E).abs() < 2e-4);
    }

    #[test]
    fn fit_rate_examples() {
        let fit = fit_rate(&[row(10, 0.1), row(100, 0.01), row(1000, 0.001)]).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && fit.intercept.abs() < 1e-12);
        let rows: Vec<_> = [10, 100, 1000].iter().map(|&n| row(n, 4.0 / (n as f64).sqrt())).collect();
        let fit = fit_rate(&rows).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept + 4f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn fit_rate_needs_two_distinct_rows() {
        assert!(matches!(fit_rate(&[row(10, 0.1)]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&[row(10, 0.1), row(10, 0.2)]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&[]), Err(Error::Fit(_))));
    }

    #[test]
    fn zero_error_row_is_clamped_and_flagged() {
        let settings = StudySettings::new(vec![10, 100, 1000], 0);
        let report = finish_report(NoiseModel::exact(), &settings, vec![row(10, 0.1), row(100, 0.0), row(1000, 0.001)]).unwrap();
        assert_eq!(report.clamped, vec![1]);
        assert_eq!(report.rows[1].err_max, ERROR_FLOOR);
        assert!(report.slope.is_finite());
    }

    #[test]
    fn plateau_detection() {
        let rows = vec![row(16, 1.0), row(32, 0.5), row(64, 0.26), row(128, 0.255), row(256, 0.25)];
        assert_eq!(pre_plateau_len(&rows), 3);
        let settings = StudySettings {
            fit: FitRange::PrePlateau,
            ..StudySettings::new(rows.iter().map(|r| r.n).collect(), 0)
        };
        let report = finish_report(NoiseModel::exact(), &settings, rows).unwrap();
        assert_eq!(report.n_range_used, vec![16, 32, 64]);
    }

    #[test]
    fn envelope_ratios() {
        let rows: Vec<_> = [16, 64, 256].iter().map(|&n| row(n, (1.0 / n as f64).powf(0.5))).collect();
        // alpha = beta = 0.5: envelope is 2 h^0.5.
        let check = bound_ratio_check(&rows, 0.5, 0.5, 0.0);
        assert!((check.max_over_min - 1.0).abs() < 1e-12);
        assert!(check.ratios.iter().all(|r| (r - 0.5).abs() < 1e-12));
        let noisy = bound_ratio_check(&[row(4, 1.0)], 1.0, 1.0, 1.0);
        assert!((noisy.ratios[0] - 1.0 / (0.25 + 0.25 + 0.5 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn worst_case_with_zero_precision_is_deterministic_error() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        let reference = reference_solution(&p, 8, 50).unwrap();
        let exact = sup_error(&euler_solve(&p, 8).unwrap(), &reference).unwrap();
        let wc = worst_case_error(&p, 8, &NoiseModel::new(0.0, CorruptionKind::Hashed), 5, 3, &reference).unwrap();
        assert!(wc.errs.iter().all(|&e| e == exact));
        assert_eq!(wc.err_max, exact);
    }

    #[test]
    fn worst_case_grows_with_tries() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        let reference = reference_solution(&p, 16, 20).unwrap();
        let noise = NoiseModel::new(0.05, CorruptionKind::Hashed);
        let one = worst_case_error(&p, 16, &noise, 1, 7, &reference).unwrap();
        let many = worst_case_error(&p, 16, &noise, 50, 7, &reference).unwrap();
        assert_eq!(one.errs[0], many.errs[0]);
        assert!(many.err_max >= one.err_max);
        assert!(worst_case_error(&p, 16, &noise, 0, 7, &reference).is_err());
        assert!(worst_case_error(&p, 16, &NoiseModel::new(1.5, CorruptionKind::Hashed), 1, 7, &reference).is_err());
    }

    #[test]
    fn replica_failures_carry_index() {
        let p = OdeProblem::new(0.0, 1.0, vec![1.0], RhsFunction::scalar(|_, y| 1.0 / (y - 1.0))).unwrap();
        let reference = reference_solution(&OdeProblem::new(0.0, 1.0, vec![1.0], RhsFunction::scalar(|_, _| 0.0)).unwrap(), 4, 2).unwrap();
        let noise = NoiseModel {
            initial: InitialNoise::Exact,
            ..NoiseModel::new(0.1, CorruptionKind::Zero)
        };
        match worst_case_error(&p, 4, &noise, 3, 0, &reference) {
            Err(Error::Replica { replica, source }) => {
                assert_eq!(replica, 1);
                assert!(matches!(*source, Error::Integration { step: 0, .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn index_matches_merge(
            n in 1usize..40,
            factor in 1usize..60,
            c in -3.0f64..3.0,
            w in 0.1f64..30.0,
            seed in any::<u64>(),
        ) {
            let reference = OdeProblem::new(-1.0, 2.0, vec![0.5], RhsFunction::scalar(move |t, y| c * (w * t).sin() - 0.3 * y)).unwrap();
            let reference = reference_solution(&reference, n, factor).unwrap();
            let p = OdeProblem::new(-1.0, 2.0, vec![0.4], RhsFunction::scalar(|t, y| t.cos() - y)).unwrap();
            let oracle = crate::noise::make_oracle(&p, CorruptionKind::Hashed, 0.3, seed).unwrap();
            let approx = euler_solve_noisy(&p, n, &oracle).unwrap();
            let index = ScalarSupIndex::new(&reference, n).unwrap();
            let fast = index.sup_error(&approx).unwrap();
            let slow = sup_error(&approx, &reference).unwrap();
            prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow), "{} vs {}", fast, slow);
        }
    }

    #[test]
    fn index_handles_unaligned_meshes() {
        let r = OdeProblem::new(0.0, 1.0, vec![0.0], RhsFunction::scalar(|t, _| (40.0 * t).cos())).unwrap();
        let reference = euler_solve(&r, 997).unwrap();
        let p = linear_test_problem(0.0, 1.0, 0.1).unwrap();
        for n in [1, 3, 7, 10, 64, 1000, 2000] {
            let approx = euler_solve(&p, n).unwrap();
            let fast = ScalarSupIndex::new(&reference, n).unwrap().sup_error(&approx).unwrap();
            let slow = sup_error(&approx, &reference).unwrap();
            assert!((fast - slow).abs() <= 1e-13, "n={n}: {fast} vs {slow}");
        }
        let approx = euler_solve(&p, 5).unwrap();
        assert!(ScalarSupIndex::new(&reference, 6).unwrap().sup_error(&approx).is_err());
    }

    #[test]
    fn settings_validation() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        let bad = [
            StudySettings::new(vec![], 0),
            StudySettings::new(vec![8, 4], 0),
            StudySettings::new(vec![4, 4], 0),
            StudySettings::new(vec![0, 4], 0),
            StudySettings::new(vec![1_000_000], 0),
        ];
        for s in bad {
            assert!(convergence_study(&p, &NoiseModel::exact(), &s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn exact_study_forces_single_replica() {
        let p = linear_test_problem(0.0, 1.0, 1.0).unwrap();
        let settings = StudySettings {
            factor: 10,
            ..StudySettings::new(vec![4, 8, 16], 1)
        };
        let report = convergence_study(&p, &NoiseModel::exact(), &settings).unwrap();
        assert!(report.rows.iter().all(|r| r.mc_tries == 1 && r.err_max == r.err_mean));
        assert_eq!(report.n_range_used, vec![4, 8, 16]);
    }
}
