use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::output::CsvRecord;
use super::{fit_through_origin, run_trials, ExperimentConfig, ExperimentError, TailCurve, TailSide};
use crate::ensembles::{derive_seed, sample_iid, EnsembleKind, EnsembleSpec};
use crate::linalg::{hs_norm, op_norm};

const MATRIX_TAG: u64 = 0x6877_6d61;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HwMatrixKind {
    Identity,
    /// Orthogonal projection onto a random subspace of half the dimension.
    Projection,
    /// `GᵀG / M` for a Gaussian `G`.
    Spd,
    Zero,
}

impl std::str::FromStr for HwMatrixKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(HwMatrixKind::Identity),
            "projection" => Ok(HwMatrixKind::Projection),
            "spd" => Ok(HwMatrixKind::Spd),
            "zero" => Ok(HwMatrixKind::Zero),
            other => Err(format!(
                "unknown matrix kind `{other}` (identity | projection | spd | zero)"
            )),
        }
    }
}

/// The fixed matrix `A` of a Hanson-Wright run.
pub fn test_matrix(kind: HwMatrixKind, size: usize, seed: u64) -> Result<DMatrix<f64>, ExperimentError> {
    let gaussian = EnsembleSpec::iid(EnsembleKind::StandardGaussian);
    Ok(match kind {
        HwMatrixKind::Identity => DMatrix::identity(size, size),
        HwMatrixKind::Zero => DMatrix::zeros(size, size),
        HwMatrixKind::Projection => {
            let k = size.div_ceil(2);
            let g = sample_iid(size, k, &gaussian, seed, 0)?.entries;
            let q = g.qr().q();
            &q * q.transpose()
        }
        HwMatrixKind::Spd => {
            let g = sample_iid(size, size, &gaussian, seed, 0)?.entries;
            g.tr_mul(&g) / size as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HwTrial {
    pub trial_index: u64,
    /// `|xᵀAx - tr A| / ‖A‖_HS`
    pub quadratic: f64,
    /// `|‖Ax‖ - ‖A‖_HS| / ‖A‖₂`
    pub norm: f64,
}

impl CsvRecord for HwTrial {
    fn header() -> Vec<&'static str> {
        vec!["trial_index", "quadratic", "norm"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.quadratic.to_string(),
            self.norm.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HansonWrightReport {
    pub kind: HwMatrixKind,
    pub size: usize,
    pub trials: Vec<HwTrial>,
    pub quadratic: TailCurve,
    pub norm: TailCurve,
    /// `C` in `P(quadratic > t) ≈ exp(-C t)`, fitted through the origin.
    pub c_quadratic: Option<f64>,
    /// `C` in `P(norm > t) ≈ exp(-C t²)`.
    pub c_norm: Option<f64>,
}

/// Fits `-ln p = C · x(t)` over grid points with `t > 0` and `p > 0`.
fn fit_rate(curve: &TailCurve, x: impl Fn(f64) -> f64) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .t
        .iter()
        .zip(&curve.probability)
        .filter(|(t, p)| **t > 0.0 && **p > 0.0)
        .map(|(t, p)| (x(*t), -p.ln()))
        .unzip();
    fit_through_origin(&xs, &ys)
}

/// Empirical tails of the centred quadratic form and of `‖Ax‖` for an iid
/// vector `x` of the configured law and length `N`.
pub fn run_hanson_wright_check(
    config: &ExperimentConfig,
    kind: HwMatrixKind,
) -> Result<HansonWrightReport, ExperimentError> {
    config.validate_trials()?;
    let size = config.size();
    if size == 0 {
        return Err(ExperimentError::InvalidConfig("N must be positive".into()));
    }
    let a = test_matrix(kind, size, derive_seed(config.master_seed, MATRIX_TAG))?;
    let hs = hs_norm(&a);
    let op = op_norm(&a).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let trace = a.trace();
    let spec = config.ensemble;
    let trials = run_trials(config.trials, config.workers, |t| {
        let x = match sample_iid(size, 1, &spec, config.master_seed, t) {
            Ok(s) => s.entries.column(0).into_owned(),
            Err(_) => {
                return HwTrial {
                    trial_index: t,
                    quadratic: f64::NAN,
                    norm: f64::NAN,
                }
            }
        };
        let ax = &a * &x;
        let quadratic = if hs > 0.0 { (x.dot(&ax) - trace).abs() / hs } else { 0.0 };
        let norm = if op > 0.0 { (ax.norm() - hs).abs() / op } else { 0.0 };
        HwTrial {
            trial_index: t,
            quadratic,
            norm,
        }
    });
    let q: Vec<f64> = trials.iter().map(|t| t.quadratic).collect();
    let nv: Vec<f64> = trials.iter().map(|t| t.norm).collect();
    let quadratic = TailCurve::from_samples(&q, &config.t_grid, TailSide::Upper);
    let norm = TailCurve::from_samples(&nv, &config.t_grid, TailSide::Upper);
    Ok(HansonWrightReport {
        kind,
        size,
        c_quadratic: fit_rate(&quadratic, |t| t),
        c_norm: fit_rate(&norm, |t| t * t),
        trials,
        quadratic,
        norm,
    })
}
