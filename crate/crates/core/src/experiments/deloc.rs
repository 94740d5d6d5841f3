use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::output::CsvRecord;
use super::{run_trials, ExperimentConfig, ExperimentError};
use crate::ensembles::sample_wigner;
use crate::numeric::{max_abs, median, quantile};

/// Residual `‖Bx‖ / ‖B‖_HS` above which a computed normal vector is rejected.
const KERNEL_RESIDUAL_TOL: f64 = 1e-8;
/// Pivot ratio below which the LU factor is treated as singular.
const PIVOT_RATIO_TOL: f64 = 1e-13;

fn pivot_ratio(u_diag: &DVector<f64>) -> f64 {
    let mags: Vec<f64> = u_diag.iter().map(|v| v.abs()).collect();
    let max = mags.iter().copied().fold(0.0, f64::max);
    let min = mags.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Unit vector spanning the kernel of an `(N-1) x N` matrix `b`, with its
/// residual `‖bx‖ / ‖b‖_HS`. Writing `b = [c | M]`, the kernel is spanned by
/// `(1, -M⁻¹c)`; `None` when `M` is numerically singular.
pub fn unit_normal_vector(b: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let (rows, cols) = b.shape();
    if cols != rows + 1 || rows == 0 {
        return None;
    }
    let c = b.column(0).into_owned();
    let lu = b.columns(1, rows).into_owned().lu();
    if pivot_ratio(&lu.u().diagonal()) < PIVOT_RATIO_TOL {
        return None;
    }
    let y = lu.solve(&c)?;
    let mut x = DVector::zeros(cols);
    x[0] = 1.0;
    x.rows_mut(1, rows).copy_from(&(-y));
    let norm = x.norm();
    if !norm.is_finite() {
        return None;
    }
    x /= norm;
    let residual = (b * &x).norm() / b.norm();
    Some((x, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelocTrial {
    pub trial_index: u64,
    pub linf: f64,
    /// `‖x‖∞ sqrt(N) / ln^{3/2} N`
    pub statistic: f64,
    /// `|‖x‖₂ - 1|`
    pub unit_defect: f64,
    pub degenerate: bool,
}

impl CsvRecord for DelocTrial {
    fn header() -> Vec<&'static str> {
        vec!["trial_index", "linf", "statistic", "unit_defect", "degenerate"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.linf.to_string(),
            self.statistic.to_string(),
            self.unit_defect.to_string(),
            self.degenerate.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelocReport {
    pub config: ExperimentConfig,
    pub trials: Vec<DelocTrial>,
    pub max: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub max_unit_defect: f64,
    pub degenerate_count: usize,
}

/// `‖x‖∞` of the unit normal to rows `2..=N` of a symmetric sample.
pub fn run_delocalization_experiment(config: &ExperimentConfig) -> Result<DelocReport, ExperimentError> {
    config.validate_trials()?;
    let big_n = config.size();
    if big_n < 3 {
        return Err(ExperimentError::InvalidConfig("need N >= 3".into()));
    }
    let mut spec = config.ensemble;
    spec.symmetric = true;
    let norm_factor = (big_n as f64).sqrt() / (big_n as f64).ln().powf(1.5);
    let trials = run_trials(config.trials, config.workers, |t| {
        let found = sample_wigner(&spec, config.master_seed, t)
            .ok()
            .and_then(|s| unit_normal_vector(&s.entries.rows(1, big_n - 1).into_owned()));
        match found {
            Some((x, residual)) if residual <= KERNEL_RESIDUAL_TOL => {
                let linf = x.amax();
                DelocTrial {
                    trial_index: t,
                    linf,
                    statistic: linf * norm_factor,
                    unit_defect: (x.norm() - 1.0).abs(),
                    degenerate: false,
                }
            }
            _ => DelocTrial {
                trial_index: t,
                linf: f64::NAN,
                statistic: f64::NAN,
                unit_defect: f64::NAN,
                degenerate: true,
            },
        }
    });
    let stats: Vec<f64> = trials.iter().filter(|t| !t.degenerate).map(|t| t.statistic).collect();
    Ok(DelocReport {
        config: config.clone(),
        max: stats.iter().copied().fold(f64::NAN, f64::max),
        median: median(&stats),
        q90: quantile(&stats, 0.9),
        q99: quantile(&stats, 0.99),
        max_unit_defect: trials
            .iter()
            .filter(|t| !t.degenerate)
            .map(|t| t.unit_defect)
            .fold(0.0, f64::max),
        degenerate_count: trials.iter().filter(|t| t.degenerate).count(),
        trials,
    })
}

/// `max|(A⁻¹)_{ij}| / ‖A⁻¹‖_HS`, or `None` for a numerically singular `a`.
pub fn inverse_entry_ratio(a: &DMatrix<f64>) -> Option<f64> {
    let lu = a.clone().lu();
    if pivot_ratio(&lu.u().diagonal()) < PIVOT_RATIO_TOL {
        return None;
    }
    let inv = lu.try_inverse()?;
    let hs = inv.norm();
    (hs.is_finite() && hs > 0.0).then(|| max_abs(&inv) / hs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseEntryTrial {
    pub trial_index: u64,
    pub ratio: f64,
    /// `ratio · N / ln³ N`
    pub normalized: f64,
    pub degenerate: bool,
}

impl CsvRecord for InverseEntryTrial {
    fn header() -> Vec<&'static str> {
        vec!["trial_index", "ratio", "normalized", "degenerate"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.ratio.to_string(),
            self.normalized.to_string(),
            self.degenerate.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseEntryReport {
    pub config: ExperimentConfig,
    pub trials: Vec<InverseEntryTrial>,
    pub max_ratio: f64,
    pub median_normalized: f64,
    pub max_normalized: f64,
    pub degenerate_count: usize,
}

pub fn run_inverse_entry_experiment(config: &ExperimentConfig) -> Result<InverseEntryReport, ExperimentError> {
    config.validate_trials()?;
    let big_n = config.size();
    if big_n < 2 {
        return Err(ExperimentError::InvalidConfig("need N >= 2".into()));
    }
    let mut spec = config.ensemble;
    spec.symmetric = true;
    let factor = big_n as f64 / (big_n as f64).ln().powi(3);
    let trials = run_trials(config.trials, config.workers, |t| {
        match sample_wigner(&spec, config.master_seed, t)
            .ok()
            .and_then(|s| inverse_entry_ratio(&s.entries))
        {
            Some(ratio) => InverseEntryTrial {
                trial_index: t,
                ratio,
                normalized: ratio * factor,
                degenerate: false,
            },
            None => InverseEntryTrial {
                trial_index: t,
                ratio: f64::NAN,
                normalized: f64::NAN,
                degenerate: true,
            },
        }
    });
    let ok: Vec<&InverseEntryTrial> = trials.iter().filter(|t| !t.degenerate).collect();
    let normalized: Vec<f64> = ok.iter().map(|t| t.normalized).collect();
    Ok(InverseEntryReport {
        config: config.clone(),
        max_ratio: ok.iter().map(|t| t.ratio).fold(f64::NAN, f64::max),
        median_normalized: median(&normalized),
        max_normalized: normalized.iter().copied().fold(f64::NAN, f64::max),
        degenerate_count: trials.len() - ok.len(),
        trials,
    })
}
