use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::output::CsvRecord;
use super::{
    fit_line, mean_variance, run_trials, wilson_interval, ExperimentConfig, ExperimentError, LineFit, TailCurve,
    TailSide,
};
use crate::ensembles::{derive_seed, sample_iid, sample_wigner, EnsembleKind};
use crate::identities::{decompose_distance, DistanceDecomposition};
use crate::linalg::{distance_to_rowspace, DistanceMethod};

/// Seed tag separating the independent row from the subspace rows.
const ROW_TAG: u64 = 0x726f_7731;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub dist: f64,
    /// `(dist² - m)/sqrt(m)`
    pub normalized: f64,
    pub sigma_min: Option<f64>,
    pub decomposition: Option<DistanceDecomposition>,
    /// The Gram route failed and the orthogonal fallback was used (or
    /// nothing could be computed).
    pub degenerate: bool,
}

impl TrialRecord {
    fn new(trial_index: u64, dist: f64, m: usize, degenerate: bool) -> Self {
        TrialRecord {
            trial_index,
            dist,
            normalized: normalize(dist, m),
            sigma_min: None,
            decomposition: None,
            degenerate,
        }
    }
}

pub fn normalize(dist: f64, m: usize) -> f64 {
    let m = m as f64;
    (dist * dist - m) / m.sqrt()
}

impl CsvRecord for TrialRecord {
    fn header() -> Vec<&'static str> {
        vec![
            "trial_index",
            "dist",
            "normalized",
            "sigma_min",
            "truncated_term",
            "error_numerator",
            "error_denominator",
            "degenerate",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let d = self.decomposition;
        vec![
            self.trial_index.to_string(),
            self.dist.to_string(),
            self.normalized.to_string(),
            opt(self.sigma_min),
            opt(d.map(|d| d.truncated_term)),
            opt(d.map(|d| d.error_numerator)),
            opt(d.map(|d| d.error_denominator)),
            self.degenerate.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over the range of the finite values; a single value
    /// gets one unit-width bin.
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            return Histogram {
                edges: vec![lo - 0.5, lo + 0.5],
                counts: vec![v.len()],
            };
        }
        let bins = bins.min(v.len()).max(1);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for x in v {
            let i = (((x - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn mode_index(&self) -> Option<usize> {
        // first maximal bin
        let max = *self.counts.iter().max()?;
        self.counts.iter().position(|&c| c == max)
    }

    /// Rises to the mode and falls after it, up to sampling noise: a dip of
    /// `c[j]` below an earlier (rising side) or later (falling side) `c[i]` is
    /// tolerated while `c[i] - c[j] ≤ 3 sqrt(c[i] + c[j] + 1)`.
    pub fn is_unimodal(&self) -> bool {
        let Some(mode) = self.mode_index() else {
            return true;
        };
        let c: Vec<f64> = self.counts.iter().map(|&x| x as f64).collect();
        let ok = |hi: f64, lo: f64| hi - lo <= 3.0 * (hi + lo + 1.0).sqrt();
        for j in 0..=mode {
            for i in 0..j {
                if !ok(c[i], c[j]) {
                    return false;
                }
            }
        }
        for i in mode..c.len() {
            for j in i + 1..c.len() {
                if !ok(c[j], c[i]) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRun {
    pub config: ExperimentConfig,
    pub model: String,
    pub records: Vec<TrialRecord>,
    pub histogram: Histogram,
    pub mean: f64,
    pub variance: f64,
    pub unimodal: bool,
    pub degenerate_count: usize,
}

impl DistanceRun {
    pub fn normalized(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| !r.degenerate)
            .map(|r| r.normalized)
            .collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().filter(|r| !r.degenerate).map(|r| r.dist).collect()
    }
}

fn model_name(kind: EnsembleKind) -> String {
    match kind {
        EnsembleKind::Goe => "goe (off-diagonal variance 1, diagonal variance 2)".into(),
        EnsembleKind::StandardGaussian => "symmetric gaussian (all variances 1)".into(),
        k => format!("symmetric {k}"),
    }
}

/// Distance from `x` to the row span of `b`, falling back to the orthogonal
/// route when the Gram matrix is numerically singular.
fn robust_distance(x: &DVector<f64>, b: &nalgebra::DMatrix<f64>) -> (f64, bool) {
    match distance_to_rowspace(x, b, DistanceMethod::Gram) {
        Ok(d) => (d, false),
        Err(_) => match distance_to_rowspace(x, b, DistanceMethod::Orthogonal) {
            Ok(d) => (d, true),
            Err(_) => (f64::NAN, true),
        },
    }
}

/// Distance from row 1 of a symmetric sample to the span of rows `2..=n+1`.
pub fn run_distance_experiment(config: &ExperimentConfig) -> Result<DistanceRun, ExperimentError> {
    config.validate()?;
    let mut spec = config.ensemble;
    spec.symmetric = true;
    let (n, m) = (config.n, config.codim());
    let records = run_trials(config.trials, config.workers, |t| {
        let a = match sample_wigner(&spec, config.master_seed, t) {
            Ok(s) => s.entries,
            Err(_) => return TrialRecord::new(t, f64::NAN, m, true),
        };
        let x = a.row(0).transpose();
        let b = a.rows(1, n).into_owned();
        let (dist, degenerate) = robust_distance(&x, &b);
        let mut rec = TrialRecord::new(t, dist, m, degenerate);
        if config.with_decomposition {
            rec.decomposition = decompose_distance(&a, n).ok();
        }
        rec
    });
    let degenerate_count = records.iter().filter(|r| r.degenerate).count();
    let normalized: Vec<f64> = records.iter().filter(|r| !r.degenerate).map(|r| r.normalized).collect();
    let histogram = Histogram::from_values(&normalized, config.bins);
    let (mean, variance) = mean_variance(&normalized);
    Ok(DistanceRun {
        config: config.clone(),
        model: model_name(spec.kind),
        unimodal: histogram.is_unimodal(),
        records,
        histogram,
        mean,
        variance,
        degenerate_count,
    })
}

/// `P(dist ≤ sqrt(m) - λ)` with its Wilson interval.
pub fn lower_tail(run: &DistanceRun, lambda: f64) -> (f64, (f64, f64)) {
    let d = run.distances();
    let thr = (run.config.codim() as f64).sqrt() - lambda;
    let hits = d.iter().filter(|&&x| x <= thr).count();
    let p = if d.is_empty() {
        f64::NAN
    } else {
        hits as f64 / d.len() as f64
    };
    (p, wilson_interval(hits, d.len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentRun {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    /// `P(|dist - sqrt(m)| ≥ t)` over the configured grid.
    pub curve: TailCurve,
    /// Fit of `ln p` against `t²` over grid points with `t > 0` and `p > 0`.
    pub fit: Option<LineFit>,
    /// `K` in `exp(-t²/K)`, defined when the fitted slope is negative.
    pub decay_constant: Option<f64>,
    pub degenerate_count: usize,
}

/// Row 1 drawn independently of the iid `n x N` block spanning the subspace.
pub fn run_independent_distance_experiment(config: &ExperimentConfig) -> Result<IndependentRun, ExperimentError> {
    config.validate()?;
    let spec = config.ensemble;
    let (big_n, n, m) = (config.size(), config.n, config.codim());
    let row_seed = derive_seed(config.master_seed, ROW_TAG);
    let records = run_trials(config.trials, config.workers, |t| {
        let b = sample_iid(n, big_n, &spec, config.master_seed, t);
        let x = sample_iid(1, big_n, &spec, row_seed, t);
        match (b, x) {
            (Ok(b), Ok(x)) => {
                let xv = x.entries.row(0).transpose();
                let (dist, degenerate) = robust_distance(&xv, &b.entries);
                TrialRecord::new(t, dist, m, degenerate)
            }
            _ => TrialRecord::new(t, f64::NAN, m, true),
        }
    });
    let sqrt_m = (m as f64).sqrt();
    let deviations: Vec<f64> = records
        .iter()
        .filter(|r| !r.degenerate)
        .map(|r| (r.dist - sqrt_m).abs())
        .collect();
    let curve = TailCurve::from_samples(&deviations, &config.t_grid, TailSide::Upper);
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .t
        .iter()
        .zip(&curve.probability)
        .filter(|(t, p)| **t > 0.0 && **p > 0.0)
        .map(|(t, p)| (t * t, p.ln()))
        .unzip();
    let fit = fit_line(&xs, &ys);
    let decay_constant = fit.filter(|f| f.slope < 0.0).map(|f| -1.0 / f.slope);
    Ok(IndependentRun {
        config: config.clone(),
        degenerate_count: records.iter().filter(|r| r.degenerate).count(),
        records,
        curve,
        fit,
        decay_constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleSpec;

    #[test]
    fn single_trial_gives_single_bin() {
        let cfg = ExperimentConfig::new(EnsembleSpec::wigner(EnsembleKind::Goe, 20), 15, 1, 1);
        let run = run_distance_experiment(&cfg).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.histogram.counts, vec![1]);
        let r = &run.records[0];
        assert!((r.normalized - normalize(r.dist, 5)).abs() <= 1e-12);
    }

    #[test]
    fn decomposition_total_matches_distance() {
        let mut cfg = ExperimentConfig::new(EnsembleSpec::wigner(EnsembleKind::Rademacher, 40), 30, 5, 9);
        cfg.with_decomposition = true;
        let run = run_distance_experiment(&cfg).unwrap();
        for r in &run.records {
            let d = r.decomposition.unwrap();
            assert!((d.total - r.dist * r.dist).abs() <= 1e-8 * d.total.max(1.0));
        }
    }

    #[test]
    fn histogram_shape_checks() {
        let h = Histogram {
            edges: (0..=5).map(f64::from).collect(),
            counts: vec![10, 50, 100, 40, 5],
        };
        assert!(h.is_unimodal());
        let h = Histogram {
            edges: (0..=5).map(f64::from).collect(),
            counts: vec![100, 5, 5, 5, 100],
        };
        assert!(!h.is_unimodal());
        let h = Histogram::from_values(&[0.0, 1.0, 2.0, 2.0], 2);
        assert_eq!(h.counts, vec![1, 3]);
    }

    #[test]
    fn independent_tail_starts_at_one_and_decreases() {
        let cfg = ExperimentConfig::new(
            EnsembleSpec::iid(EnsembleKind::StandardGaussian).with_dimension(60),
            50,
            200,
            3,
        )
        .with_t_grid(vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let run = run_independent_distance_experiment(&cfg).unwrap();
        assert_eq!(run.curve.probability[0], 1.0);
        assert!(run.curve.is_monotone());
        assert!(run.fit.unwrap().slope < 0.0);
    }
}
