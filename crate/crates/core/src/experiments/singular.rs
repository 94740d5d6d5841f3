use serde::{Deserialize, Serialize};

use super::output::CsvRecord;
use super::{fit_line, run_trials, ExperimentConfig, ExperimentError, TailCurve, TailSide};
use crate::ensembles::sample_wigner;
use crate::linalg::least_singular_value;
use crate::numeric::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SvMode {
    /// `σ_N(A)` of the full symmetric sample, scale `N^{-1/2}`.
    Square,
    /// `σ_n(B)` for rows `2..=n+1`, scale `m N^{-1/2}`.
    Rect,
}

impl std::str::FromStr for SvMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" => Ok(SvMode::Square),
            "rect" => Ok(SvMode::Rect),
            other => Err(format!("unknown mode `{other}` (square | rect)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvTrial {
    pub trial_index: u64,
    pub sigma_min: f64,
    /// `sigma_min / scale`
    pub ratio: f64,
    pub degenerate: bool,
}

impl CsvRecord for SvTrial {
    fn header() -> Vec<&'static str> {
        vec!["trial_index", "sigma_min", "ratio", "degenerate"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.sigma_min.to_string(),
            self.ratio.to_string(),
            self.degenerate.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvTailReport {
    pub config: ExperimentConfig,
    pub mode: SvMode,
    pub scale: f64,
    pub trials: Vec<SvTrial>,
    /// `P(σ ≤ ε · scale)` over the eps grid.
    pub curve: TailCurve,
    pub median_ratio: f64,
    /// Slope of `ln P` against `ln ε` over grid points with positive mass.
    pub tail_exponent: Option<f64>,
    pub degenerate_count: usize,
}

pub fn run_sv_tail_experiment(config: &ExperimentConfig, mode: SvMode) -> Result<SvTailReport, ExperimentError> {
    let big_n = config.size();
    match mode {
        SvMode::Rect => config.validate()?,
        SvMode::Square => {
            if big_n == 0 {
                return Err(ExperimentError::InvalidConfig("N must be positive".into()));
            }
            config.validate_trials()?;
        }
    }
    let mut spec = config.ensemble;
    spec.symmetric = true;
    let sqrt_n = (big_n as f64).sqrt();
    let scale = match mode {
        SvMode::Square => 1.0 / sqrt_n,
        SvMode::Rect => config.codim() as f64 / sqrt_n,
    };
    let n = config.n;
    let trials = run_trials(config.trials, config.workers, |t| {
        let sigma = sample_wigner(&spec, config.master_seed, t).ok().and_then(|s| {
            let a = s.entries;
            let target = match mode {
                SvMode::Square => a,
                SvMode::Rect => a.rows(1, n).into_owned(),
            };
            least_singular_value(&target).ok()
        });
        match sigma {
            Some(s) => SvTrial {
                trial_index: t,
                sigma_min: s,
                ratio: s / scale,
                degenerate: false,
            },
            None => SvTrial {
                trial_index: t,
                sigma_min: f64::NAN,
                ratio: f64::NAN,
                degenerate: true,
            },
        }
    });
    let ratios: Vec<f64> = trials.iter().filter(|t| !t.degenerate).map(|t| t.ratio).collect();
    let curve = TailCurve::from_samples(&ratios, &config.eps_grid, TailSide::Lower);
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .t
        .iter()
        .zip(&curve.probability)
        .filter(|(e, p)| **e > 0.0 && **p > 0.0 && **p < 1.0)
        .map(|(e, p)| (e.ln(), p.ln()))
        .unzip();
    Ok(SvTailReport {
        config: config.clone(),
        mode,
        scale,
        median_ratio: median(&ratios),
        tail_exponent: fit_line(&xs, &ys).map(|f| f.slope),
        degenerate_count: trials.iter().filter(|t| t.degenerate).count(),
        trials,
        curve,
    })
}
