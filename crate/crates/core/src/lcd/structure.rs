use serde::{Deserialize, Serialize};

use super::LcdError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompressibilityClass {
    Compressible,
    Incompressible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressibilityReport {
    pub c0: f64,
    pub c1: f64,
    /// Number of largest coordinates a sparse vector may keep, `⌊c0·n⌋`.
    pub kept: usize,
    /// Norm of everything outside the `kept` largest coordinates.
    pub sparse_distance: f64,
    /// Norm of the `kept` largest coordinates.
    pub kept_norm: f64,
    pub class: CompressibilityClass,
    pub spread_set: Vec<usize>,
}

/// `c* = c0·c1²/2`, the guaranteed spread fraction of an incompressible vector.
pub fn spread_constant(c0: f64, c1: f64) -> f64 {
    c0 * c1 * c1 / 2.0
}

/// Magnitude window `[c1/sqrt(2n), 1/sqrt(c0·n)]` defining the spread set.
pub fn spread_bounds(n: usize, c0: f64, c1: f64) -> (f64, f64) {
    let n = n as f64;
    (c1 / (2.0 * n).sqrt(), 1.0 / (c0 * n).sqrt())
}

/// Distance of the normalized `x` to `⌊c0·n⌋`-sparse vectors, its class, and
/// the coordinates inside the spread window.
pub fn classify_compressibility(x: &[f64], c0: f64, c1: f64) -> Result<CompressibilityReport, LcdError> {
    if !(c0 > 0.0 && c0 < 1.0 && c1 > 0.0 && c1 < 1.0) {
        return Err(LcdError::InvalidParams(format!(
            "c0, c1 must lie in (0, 1), got {c0}, {c1}"
        )));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(LcdError::DegenerateVector);
    }
    let n = x.len();
    let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();
    let mut mags: Vec<f64> = unit.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let kept = ((c0 * n as f64).floor() as usize).min(n);
    let kept_norm = mags[..kept].iter().map(|v| v * v).sum::<f64>().sqrt();
    let sparse_distance = mags[kept..].iter().map(|v| v * v).sum::<f64>().sqrt();
    let class = if sparse_distance <= c1 {
        CompressibilityClass::Compressible
    } else {
        CompressibilityClass::Incompressible
    };
    let (lo, hi) = spread_bounds(n, c0, c1);
    let spread_set = unit
        .iter()
        .enumerate()
        .filter(|(_, v)| (lo..=hi).contains(&v.abs()))
        .map(|(i, _)| i)
        .collect();
    Ok(CompressibilityReport {
        c0,
        c1,
        kept,
        sparse_distance,
        kept_norm,
        class,
        spread_set,
    })
}
