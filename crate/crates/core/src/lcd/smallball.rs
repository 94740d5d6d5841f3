use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{LcdError, LcdParams};
use crate::ensembles::{trial_rng, EnsembleKind, ScalarLaw};

/// Largest number of terms enumerated exactly (`2^20` sums).
pub const MAX_EXACT_TERMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmallBallMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevyMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallEstimate {
    pub radius: f64,
    pub estimate: f64,
    pub method: SmallBallMethod,
    pub stderr: f64,
    pub theory_bound: Option<f64>,
}

impl SmallBallEstimate {
    pub fn with_theory_bound(mut self, bound: f64) -> Self {
        self.theory_bound = Some(bound);
        self
    }
}

/// Most sorted values inside any closed window of width `width`.
fn max_window(sorted: &[f64], width: f64) -> usize {
    let slack = 1e-12 * sorted.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] - sorted[lo] > width + slack {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

fn all_sign_sums(x: &[f64]) -> Vec<f64> {
    let mut sums = Vec::with_capacity(1 << x.len());
    sums.push(0.0);
    for &xi in x {
        let len = sums.len();
        for j in 0..len {
            let s = sums[j];
            sums[j] = s + xi;
            sums.push(s - xi);
        }
    }
    sums
}

/// `sup_u P(|S - u| ≤ r)` for `S = Σ a_i x_i`, by enumeration of all sign
/// patterns (rademacher only) or by sampling.
pub fn levy_concentration(
    x: &[f64],
    kind: EnsembleKind,
    radius: f64,
    mode: LevyMode,
) -> Result<SmallBallEstimate, LcdError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(LcdError::InvalidParams(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
        return Err(LcdError::DegenerateVector);
    }
    match mode {
        LevyMode::Exact => {
            if kind != EnsembleKind::Rademacher || x.len() > MAX_EXACT_TERMS {
                return Err(LcdError::EnumerationUnsupported {
                    got: x.len(),
                    max: MAX_EXACT_TERMS,
                });
            }
            let mut sums = all_sign_sums(x);
            sums.sort_by(|a, b| a.total_cmp(b));
            let count = max_window(&sums, 2.0 * radius);
            Ok(SmallBallEstimate {
                radius,
                estimate: count as f64 / sums.len() as f64,
                method: SmallBallMethod::ExactEnumeration,
                stderr: 0.0,
                theory_bound: None,
            })
        }
        LevyMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(LcdError::InvalidParams("need at least one sample".into()));
            }
            let law = ScalarLaw::new(kind, 1.0).map_err(|e| LcdError::InvalidParams(e.to_string()))?;
            let mut rng = trial_rng(seed, 0);
            let mut sums: Vec<f64> = (0..samples)
                .map(|_| x.iter().map(|xi| law.draw(&mut rng) * xi).sum())
                .collect();
            sums.sort_by(|a, b| a.total_cmp(b));
            let p = max_window(&sums, 2.0 * radius) as f64 / samples as f64;
            Ok(SmallBallEstimate {
                radius,
                estimate: p,
                method: SmallBallMethod::MonteCarlo,
                stderr: (p * (1.0 - p) / samples as f64).sqrt(),
                theory_bound: None,
            })
        }
    }
}

/// Exact `sup_u P(‖S - u‖ ≤ r)` for planar sums `S = Σ a_i y_i` with
/// rademacher `a_i`, where `y_i` are the columns of the `2 x N` matrix `ys`.
/// An optimal disc can be moved until it is centred on a sum or has two sums
/// on its boundary, so those centres are the only candidates.
pub fn levy_concentration_planar(ys: &DMatrix<f64>, radius: f64) -> Result<SmallBallEstimate, LcdError> {
    if ys.nrows() != 2 {
        return Err(LcdError::InvalidParams("planar sums need a 2 x N matrix".into()));
    }
    let n = ys.ncols();
    if n == 0 || n > MAX_EXACT_TERMS {
        return Err(LcdError::EnumerationUnsupported {
            got: n,
            max: MAX_EXACT_TERMS,
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(LcdError::InvalidParams(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let xs: Vec<f64> = ys.row(0).iter().copied().collect();
    let zs: Vec<f64> = ys.row(1).iter().copied().collect();
    let sx = all_sign_sums(&xs);
    let sz = all_sign_sums(&zs);
    let total = sx.len();

    // merge coincident sums
    let scale = sx.iter().chain(&sz).fold(1.0_f64, |a, v| a.max(v.abs()));
    let slack = 1e-12 * scale;
    let mut pts: Vec<(f64, f64)> = sx.into_iter().zip(sz).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut uniq: Vec<(f64, f64, usize)> = Vec::new();
    for (x, z) in pts {
        match uniq.last_mut() {
            Some(last) if (last.0 - x).abs() <= slack && (last.1 - z).abs() <= slack => last.2 += 1,
            _ => uniq.push((x, z, 1)),
        }
    }

    let cell = 2.0 * radius;
    let key = |x: f64, z: f64| ((x / cell).floor() as i64, (z / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in uniq.iter().enumerate() {
        grid.entry(key(p.0, p.1)).or_default().push(i);
    }
    let neighbours = |x: f64, z: f64| {
        let (kx, kz) = key(x, z);
        (-1..=1).flat_map(move |dx| (-1..=1).map(move |dz| (kx + dx, kz + dz)))
    };
    let r2 = radius * radius + 2.0 * slack * radius;
    let count_at = |cx: f64, cz: f64| -> usize {
        neighbours(cx, cz)
            .filter_map(|k| grid.get(&k))
            .flatten()
            .filter(|&&j| {
                let (x, z, _) = uniq[j];
                (x - cx).powi(2) + (z - cz).powi(2) <= r2
            })
            .map(|&j| uniq[j].2)
            .sum()
    };

    let mut best = 0;
    for (i, &(x, z, _)) in uniq.iter().enumerate() {
        best = best.max(count_at(x, z));
        for k in neighbours(x, z) {
            let Some(list) = grid.get(&k) else { continue };
            for &j in list.iter().filter(|&&j| j > i) {
                let (x2, z2, _) = uniq[j];
                let (dx, dz) = (x2 - x, z2 - z);
                let d2 = dx * dx + dz * dz;
                if d2 > 4.0 * radius * radius {
                    continue;
                }
                let h = (radius * radius - d2 / 4.0).max(0.0).sqrt();
                let d = d2.sqrt();
                let (mx, mz) = (x + dx / 2.0, z + dz / 2.0);
                let (ox, oz) = (-dz / d * h, dx / d * h);
                best = best.max(count_at(mx + ox, mz + oz));
                best = best.max(count_at(mx - ox, mz - oz));
            }
        }
    }
    Ok(SmallBallEstimate {
        radius,
        estimate: best as f64 / total as f64,
        method: SmallBallMethod::ExactEnumeration,
        stderr: 0.0,
        theory_bound: None,
    })
}

/// `C0 (ε/γ + e^{-2α²})`.
pub fn small_ball_bound_one_dim(eps: f64, params: &LcdParams, c0: f64) -> f64 {
    c0 * (eps / params.gamma + (-2.0 * params.alpha * params.alpha).exp())
}

/// Smallest `C0` for which every `(ε, estimate)` pair sits under the bound.
pub fn fit_one_dim_constant(points: &[(f64, f64)], params: &LcdParams) -> f64 {
    points
        .iter()
        .map(|&(eps, p)| p / small_ball_bound_one_dim(eps, params, 1.0))
        .fold(0.0, f64::max)
}

/// `(Cε/(γ sqrt b))^m + C^m e^{-2bα²}`, valid for `ε ≥ sqrt(m)/LCD`.
pub fn small_ball_bound_multi(
    lcd_value: f64,
    m: usize,
    eps: f64,
    params: &LcdParams,
    b: f64,
    c: f64,
) -> Result<f64, LcdError> {
    params.validate()?;
    if m == 0 || !(b > 0.0) || !(c > 0.0) {
        return Err(LcdError::InvalidParams("need m >= 1, b > 0, C > 0".into()));
    }
    let threshold = (m as f64).sqrt() / lcd_value;
    if !(eps >= threshold) {
        return Err(LcdError::NotApplicable { eps, threshold });
    }
    let mi = m as i32;
    Ok((c * eps / (params.gamma * b.sqrt())).powi(mi) + c.powi(mi) * (-2.0 * b * params.alpha * params.alpha).exp())
}
