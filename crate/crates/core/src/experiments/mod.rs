//! Monte-Carlo experiments over seeded trials. Every trial draws from its own
//! RNG stream, so results depend only on `(config, master_seed)` and never on
//! the worker count.

mod deloc;
mod distance;
mod hanson_wright;
mod output;
mod singular;
mod suite;

pub use deloc::{
    inverse_entry_ratio, run_delocalization_experiment, run_inverse_entry_experiment, unit_normal_vector, DelocReport,
    DelocTrial, InverseEntryReport, InverseEntryTrial,
};
pub use distance::{
    lower_tail, run_distance_experiment, run_independent_distance_experiment, DistanceRun, Histogram, IndependentRun,
    TrialRecord,
};
pub use hanson_wright::{run_hanson_wright_check, test_matrix, HansonWrightReport, HwMatrixKind};
pub use output::{histogram_svg, refuse_existing, write_json, write_records_csv, CsvRecord};
pub use singular::{run_sv_tail_experiment, SvMode, SvTailReport, SvTrial};
pub use suite::{
    run_identity_suite, IdentitySuiteConfig, IdentitySuiteReport, IdentityViolation, SkippedCheck, SuiteTolerances,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::{EnsembleError, EnsembleSpec};

/// Environment variable read for the worker count when none is given.
pub const WORKERS_ENV: &str = "WIGDIST_WORKERS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    /// Rows spanning the subspace.
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default)]
    pub with_decomposition: bool,
}

fn default_workers() -> usize {
    1
}

fn default_bins() -> usize {
    30
}

impl ExperimentConfig {
    pub fn new(ensemble: EnsembleSpec, n: usize, trials: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            ensemble,
            n,
            trials,
            master_seed,
            t_grid: Vec::new(),
            workers: 1,
            bins: default_bins(),
            eps_grid: Vec::new(),
            with_decomposition: false,
        }
    }

    pub fn size(&self) -> usize {
        self.ensemble.dimension
    }

    /// `m = N - n`.
    pub fn codim(&self) -> usize {
        self.size().saturating_sub(self.n)
    }

    pub fn with_t_grid(mut self, t: Vec<f64>) -> Self {
        self.t_grid = t;
        self
    }

    pub fn with_eps_grid(mut self, eps: Vec<f64>) -> Self {
        self.eps_grid = eps;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_bins(mut self, bins: usize) -> Self {
        self.bins = bins;
        self
    }

    /// Checks `1 ≤ n ≤ N-1` and `trials ≥ 1`.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let big_n = self.size();
        if self.n == 0 || self.n >= big_n {
            return Err(ExperimentError::InvalidConfig(format!(
                "need 1 <= n <= N-1, got n={} with N={big_n}",
                self.n
            )));
        }
        self.validate_trials()
    }

    fn validate_trials(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidConfig("trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(ExperimentError::InvalidConfig("workers must be at least 1".into()));
        }
        self.ensemble.scalar_law()?;
        Ok(())
    }
}

/// Evaluates `f(trial)` for every trial on a pool of `workers` threads,
/// returning results in trial order.
pub fn run_trials<T, F>(trials: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return (0..trials as u64).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(|| (0..trials as u64).into_par_iter().map(&f).collect())
}

/// Which side of the distribution a tail curve tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSide {
    /// `P(stat ≥ t)`, nonincreasing in `t`.
    Upper,
    /// `P(stat ≤ t)`, nondecreasing in `t`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub side: TailSide,
    pub t: Vec<f64>,
    pub probability: Vec<f64>,
    pub wilson_low: Vec<f64>,
    pub wilson_high: Vec<f64>,
    pub trials: usize,
}

impl TailCurve {
    /// Empirical tail of `stats` (non-finite values excluded) at each grid point.
    pub fn from_samples(stats: &[f64], grid: &[f64], side: TailSide) -> Self {
        let finite: Vec<f64> = stats.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        let mut curve = TailCurve {
            side,
            t: grid.to_vec(),
            probability: Vec::with_capacity(grid.len()),
            wilson_low: Vec::with_capacity(grid.len()),
            wilson_high: Vec::with_capacity(grid.len()),
            trials: n,
        };
        for &t in grid {
            let hits = finite
                .iter()
                .filter(|&&v| match side {
                    TailSide::Upper => v >= t,
                    TailSide::Lower => v <= t,
                })
                .count();
            let (lo, hi) = wilson_interval(hits, n);
            curve
                .probability
                .push(if n == 0 { f64::NAN } else { hits as f64 / n as f64 });
            curve.wilson_low.push(lo);
            curve.wilson_high.push(hi);
        }
        curve
    }

    /// Whether the curve moves in the direction its side requires.
    pub fn is_monotone(&self) -> bool {
        self.probability.windows(2).zip(self.t.windows(2)).all(|(p, t)| {
            if t[1] < t[0] {
                return true;
            }
            match self.side {
                TailSide::Upper => p[1] <= p[0],
                TailSide::Lower => p[1] >= p[0],
            }
        })
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.wilson_low
            .iter()
            .zip(&self.wilson_high)
            .map(|(l, h)| 0.5 * (h - l))
            .collect()
    }
}

/// 95% Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Least-squares line through `(x, y)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        points: n,
    })
}

/// Least-squares slope of `y = c·x` through the origin.
pub fn fit_through_origin(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if xs.is_empty() || sxx == 0.0 {
        return None;
    }
    Some(xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / sxx)
}

/// Mean and unbiased variance of the finite entries.
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
