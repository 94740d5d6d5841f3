//! Singular-value statistics: interval counts against the quarter-circle law,
//! Cauchy interlacing under row removal, and the trace of `(PPᵀ)⁻¹`.

use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, LinalgError};
use crate::numeric::adaptive_simpson;

/// Absolute tolerance for the predicted-count quadrature.
pub const QUADRATURE_TOL: f64 = 1e-9;

/// Default upper edge of the bulk: `2 - 0.2`.
pub const BULK_EDGE: f64 = 1.8;

/// Quarter-circle density `(1/π) sqrt(4 - x²)` on `[0, 2]`, integrating to one.
pub fn quarter_circle_density(x: f64) -> f64 {
    if (0.0..=2.0).contains(&x) {
        (4.0 - x * x).max(0.0).sqrt() / std::f64::consts::PI
    } else {
        0.0
    }
}

/// `∫_lo^hi` of the quarter-circle density by adaptive quadrature.
pub fn quarter_circle_mass(lo: f64, hi: f64) -> f64 {
    let a = lo.max(0.0);
    let b = hi.min(2.0);
    if a >= b {
        return 0.0;
    }
    adaptive_simpson(&quarter_circle_density, a, b, QUADRATURE_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    Raw,
    /// Divide singular values by `sqrt(cols)`.
    BySqrtN,
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "by-sqrt-n" | "by-sqrt-N" | "sqrt-n" => Ok(Normalization::BySqrtN),
            other => Err(format!("unknown normalization `{other}` (raw | by-sqrt-n)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalCount {
    pub lo: f64,
    pub hi: f64,
    pub observed: usize,
    pub predicted: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("interval [{lo}, {hi}] is empty")]
    BadInterval { lo: f64, hi: f64 },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("row index {index} out of range for {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("need more columns than rows (m >= 1), got {rows}x{cols}")]
    NoCodimension { rows: usize, cols: usize },
}

fn normalized_singular_values(sample: &DMatrix<f64>, normalization: Normalization) -> Result<Vec<f64>, SpectralError> {
    let sv = linalg::singular_values(sample)?;
    let scale = match normalization {
        Normalization::Raw => 1.0,
        Normalization::BySqrtN => (sample.ncols() as f64).sqrt(),
    };
    Ok(sv.iter().map(|s| s / scale).collect())
}

/// Counts singular values in `[lo, hi]`. The prediction is
/// `#σ · ∫_lo^hi ρ_qc`, meaningful under `BySqrtN`.
pub fn count_singular_values(
    sample: &DMatrix<f64>,
    lo: f64,
    hi: f64,
    normalization: Normalization,
) -> Result<IntervalCount, SpectralError> {
    if !(lo < hi) {
        return Err(SpectralError::BadInterval { lo, hi });
    }
    let sv = normalized_singular_values(sample, normalization)?;
    Ok(count_in(&sv, lo, hi))
}

/// Interval counts for each consecutive pair of `edges`, sharing one SVD.
/// Bins are half-open except the last, so counts partition the union.
pub fn count_partition(
    sample: &DMatrix<f64>,
    edges: &[f64],
    normalization: Normalization,
) -> Result<Vec<IntervalCount>, SpectralError> {
    if let Some(w) = edges.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(SpectralError::BadInterval { lo: w[0], hi: w[1] });
    }
    let sv = normalized_singular_values(sample, normalization)?;
    let last = edges.len().saturating_sub(2);
    Ok(edges
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let observed = sv
                .iter()
                .filter(|&&s| s >= w[0] && (s < w[1] || (i == last && s <= w[1])))
                .count();
            IntervalCount {
                lo: w[0],
                hi: w[1],
                observed,
                predicted: sv.len() as f64 * quarter_circle_mass(w[0], w[1]),
            }
        })
        .collect())
}

fn count_in(sv: &[f64], lo: f64, hi: f64) -> IntervalCount {
    IntervalCount {
        lo,
        hi,
        observed: sv.iter().filter(|&&s| s >= lo && s <= hi).count(),
        predicted: sv.len() as f64 * quarter_circle_mass(lo, hi),
    }
}

pub fn write_interval_counts<W: Write>(out: W, counts: &[IntervalCount]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for c in counts {
        w.serialize(c)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlacingReport {
    pub holds: bool,
    /// Largest amount by which an inequality fails; nonpositive when it holds.
    pub max_violation: f64,
    pub tolerance: f64,
}

/// Checks `σ_i(A) ≥ σ_i(A₂) ≥ σ_{i+1}(A)` where `A₂` drops row `removed_row`.
pub fn interlacing_check(sample: &DMatrix<f64>, removed_row: usize) -> Result<InterlacingReport, SpectralError> {
    let rows = sample.nrows();
    if rows < 2 {
        return Err(SpectralError::TooFewRows { needed: 2, got: rows });
    }
    if removed_row >= rows {
        return Err(SpectralError::RowOutOfRange {
            index: removed_row,
            rows,
        });
    }
    let reduced = sample.clone().remove_row(removed_row);
    let full = padded_singular_values(sample)?;
    let part = padded_singular_values(&reduced)?;
    let tolerance = 1e-8 * full.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut max_violation = f64::NEG_INFINITY;
    for (i, s) in part.iter().enumerate() {
        max_violation = max_violation.max(s - full[i]);
        let next = full.get(i + 1).copied().unwrap_or(0.0);
        max_violation = max_violation.max(next - s);
    }
    Ok(InterlacingReport {
        holds: max_violation <= tolerance,
        max_violation,
        tolerance,
    })
}

/// Singular values padded with zeros to the row count, so the interlacing
/// statement applies to the eigenvalues of `AAᵀ`.
fn padded_singular_values(a: &DMatrix<f64>) -> Result<Vec<f64>, SpectralError> {
    let mut sv = linalg::singular_values(a)?.as_slice().to_vec();
    sv.resize(a.nrows(), 0.0);
    Ok(sv)
}

/// `m · tr((PPᵀ)⁻¹) / N` with `N` the column count and `m = N - rows`.
pub fn trace_inverse_ratio(p: &DMatrix<f64>) -> Result<f64, SpectralError> {
    let (rows, cols) = p.shape();
    if cols <= rows {
        return Err(SpectralError::NoCodimension { rows, cols });
    }
    let t = linalg::trace_inverse_gram(p)?;
    Ok((cols - rows) as f64 * t.from_singular_values / cols as f64)
}
