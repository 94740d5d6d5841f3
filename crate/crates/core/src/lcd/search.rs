use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::structure::{classify_compressibility, spread_constant, CompressibilityClass};
use super::LcdError;

/// Width to which the first feasible grid cell is bisected.
pub const REFINEMENT_TOL: f64 = 1e-9;
/// Grid step as a fraction of the search bound.
const GRID_FRACTION: f64 = 1e-5;
/// Direction counts for the dense multi-dimensional search.
const PLANAR_DIRECTIONS: usize = 720;
const SPATIAL_DIRECTIONS: usize = 6000;
const REFINE_CANDIDATES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcdParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl LcdParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, LcdError> {
        let p = LcdParams { alpha, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), LcdError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LcdError::InvalidParams(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(LcdError::InvalidParams(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchQuality {
    /// Every candidate was examined at the stated resolution.
    Exhaustive,
    /// Minimum over a sample, so it can only overshoot the infimum.
    UpperEstimate,
    /// Maximum over a sample, so it can only undershoot.
    LowerEstimate,
    /// Randomized directions without a one-sided guarantee.
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcdResult {
    /// `None` means nothing feasible up to `search_bound`.
    pub value: Option<f64>,
    pub witness_theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_direction: Option<Vec<f64>>,
    pub search_bound: f64,
    pub resolution: f64,
    pub quality: SearchQuality,
}

impl LcdResult {
    pub fn found(&self) -> bool {
        self.value.is_some()
    }

    /// The value with not-found mapped to `+∞`.
    pub fn value_or_inf(&self) -> f64 {
        self.value.unwrap_or(f64::INFINITY)
    }
}

pub fn default_search_bound(dim: usize) -> f64 {
    10.0 * (dim as f64).sqrt()
}

/// `dist(v, Zᴺ)`.
pub fn integer_distance(v: &[f64]) -> f64 {
    v.iter().map(|t| (t - t.round()).powi(2)).sum::<f64>().sqrt()
}

/// `dist(θx, Zᴺ) < min(γ‖θx‖, α)`, with early exit on the running sum.
fn is_feasible(x: &[f64], norm: f64, theta: f64, params: &LcdParams) -> bool {
    let thr = (params.gamma * theta * norm).min(params.alpha);
    let thr2 = thr * thr;
    let mut s = 0.0;
    for xi in x {
        let t = theta * xi;
        let d = t - t.round();
        s += d * d;
        if s >= thr2 {
            return false;
        }
    }
    true
}

/// First feasible θ on the grid `step, 2·step, ...` up to `upto`, then
/// bisected against the preceding grid point.
fn scan(x: &[f64], norm: f64, params: &LcdParams, upto: f64, step: f64) -> Option<f64> {
    let steps = (upto / step).ceil() as usize;
    let mut prev = 0.0;
    for j in 1..=steps {
        let theta = (j as f64 * step).min(upto);
        if is_feasible(x, norm, theta, params) {
            let (mut lo, mut hi) = (prev, theta);
            while hi - lo > REFINEMENT_TOL {
                let mid = 0.5 * (lo + hi);
                if is_feasible(x, norm, mid, params) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(hi);
        }
        prev = theta;
    }
    None
}

fn check_vector(x: &[f64]) -> Result<f64, LcdError> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(LcdError::DegenerateVector);
    }
    Ok(norm)
}

fn check_bound(bound: f64) -> Result<(), LcdError> {
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(LcdError::InvalidParams(format!(
            "search bound must be positive and finite, got {bound}"
        )));
    }
    Ok(())
}

/// `LCD_{α,γ}(x) = inf{θ > 0 : dist(θx, Zᴺ) < min(γ‖θx‖, α)}` by grid scan
/// on `(0, search_bound]` and bisection of the first feasible cell.
pub fn lcd(x: &[f64], params: &LcdParams, search_bound: f64) -> Result<LcdResult, LcdError> {
    params.validate()?;
    check_bound(search_bound)?;
    let norm = check_vector(x)?;
    let step = GRID_FRACTION * search_bound;
    let value = scan(x, norm, params, search_bound, step);
    Ok(LcdResult {
        value,
        witness_theta: value,
        witness_direction: None,
        search_bound,
        resolution: step,
        quality: SearchQuality::Exhaustive,
    })
}

/// Directions spread over a half sphere (antipodes give the same value),
/// always including the coordinate axes.
fn direction_set(m: usize, count: usize) -> Vec<DVector<f64>> {
    let mut dirs: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            let mut e = DVector::zeros(m);
            e[i] = 1.0;
            e
        })
        .collect();
    match m {
        1 => {}
        2 => dirs.extend((1..count).map(|k| {
            let phi = std::f64::consts::PI * k as f64 / count as f64;
            DVector::from_vec(vec![phi.cos(), phi.sin()])
        })),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            dirs.extend((0..count).map(|i| {
                let z = (i as f64 + 0.5) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
            }));
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x1cd0_0000 + m as u64);
            dirs.extend((0..count).map(|_| {
                let g: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
                let n = g.norm();
                g / n
            }));
        }
    }
    dirs
}

/// Orthonormal basis of the tangent space at unit `u`.
fn tangent_basis(u: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = u.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        v -= u * u.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
        if basis.len() + 1 == m {
            break;
        }
    }
    basis
}

struct Directional<'a> {
    x: &'a DMatrix<f64>,
    params: &'a LcdParams,
    bound: f64,
    step: f64,
    best: f64,
    best_dir: Option<DVector<f64>>,
    candidates: Vec<(f64, DVector<f64>)>,
}

impl<'a> Directional<'a> {
    fn new(x: &'a DMatrix<f64>, params: &'a LcdParams, bound: f64) -> Self {
        Directional {
            x,
            params,
            bound,
            step: GRID_FRACTION * bound,
            best: f64::INFINITY,
            best_dir: None,
            candidates: Vec::new(),
        }
    }

    fn try_direction(&mut self, u: &DVector<f64>) {
        let v = self.x.tr_mul(u);
        let norm = v.norm();
        if !(norm > 1e-300) {
            return;
        }
        let cap = self.best.min(self.bound);
        if let Some(t) = scan(v.as_slice(), norm, self.params, cap, self.step) {
            if t < self.best {
                self.best = t;
                self.best_dir = Some(u.clone());
            }
            self.candidates.push((t, u.clone()));
        }
    }

    /// Local grid search in the tangent plane around the best candidates.
    fn refine(&mut self, spacing: f64) {
        let m = self.x.nrows();
        if !(2..=3).contains(&m) {
            return;
        }
        self.candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let seeds: Vec<DVector<f64>> = self
            .candidates
            .iter()
            .take(REFINE_CANDIDATES)
            .map(|c| c.1.clone())
            .collect();
        let k: i32 = if m == 2 { 32 } else { 8 };
        for seed in seeds {
            let mut centre = seed;
            let mut width = spacing;
            for _ in 0..2 {
                let basis = tangent_basis(&centre);
                let h = width / k as f64;
                let offsets: Vec<Vec<f64>> = if m == 2 {
                    (-k..=k).map(|i| vec![i as f64 * h]).collect()
                } else {
                    (-k..=k)
                        .flat_map(|i| (-k..=k).map(move |j| vec![i as f64 * h, j as f64 * h]))
                        .collect()
                };
                for off in offsets {
                    let mut u = centre.clone();
                    for (b, o) in basis.iter().zip(&off) {
                        u += b * *o;
                    }
                    let n = u.norm();
                    self.try_direction(&(u / n));
                }
                if let Some(d) = &self.best_dir {
                    centre = d.clone();
                }
                width /= k as f64;
            }
        }
    }

    fn result(&self, quality: SearchQuality) -> LcdResult {
        let value = self.best.is_finite().then_some(self.best);
        LcdResult {
            value,
            witness_theta: value,
            witness_direction: self.best_dir.as_ref().map(|d| d.as_slice().to_vec()),
            search_bound: self.bound,
            resolution: self.step,
            quality,
        }
    }
}

/// `LCD_{α,γ}(x₁, …, x_m)`: the smallest `‖Θ‖` with `(⟨Θ, y_j⟩)_j` close to
/// the integer lattice, where `y_j` are the columns of `xs` (`m x N`, rows are
/// the `x_i`). Searched as the minimum over unit directions `u` of the 1-D
/// LCD of `xsᵀu`, densely for `m ≤ 3` and over random directions otherwise.
pub fn lcd_multi(xs: &DMatrix<f64>, params: &LcdParams, search_bound: f64) -> Result<LcdResult, LcdError> {
    params.validate()?;
    check_bound(search_bound)?;
    let m = xs.nrows();
    if m == 0 || xs.ncols() == 0 {
        return Err(LcdError::EmptyBasis);
    }
    for i in 0..m {
        check_vector(xs.row(i).transpose().as_slice())?;
    }
    let (count, quality) = match m {
        1 => (1, SearchQuality::Exhaustive),
        2 => (PLANAR_DIRECTIONS, SearchQuality::Exhaustive),
        3 => (SPATIAL_DIRECTIONS, SearchQuality::Exhaustive),
        _ => (SPATIAL_DIRECTIONS, SearchQuality::Approximate),
    };
    let mut search = Directional::new(xs, params, search_bound);
    for u in direction_set(m, count) {
        search.try_direction(&u);
    }
    search.refine(direction_spacing(m, count));
    Ok(search.result(quality))
}

fn direction_spacing(m: usize, count: usize) -> f64 {
    match m {
        2 => std::f64::consts::PI / count as f64,
        _ => (2.0 * std::f64::consts::PI / count as f64).sqrt(),
    }
}

/// `inf` of `LCD_{α,γ}(y)` over unit `y` in the row span of `basis`,
/// estimated from `sample_count` quasi-random directions plus local
/// refinement; the result is an upper estimate of the infimum.
pub fn lcd_subspace(
    basis: &DMatrix<f64>,
    params: &LcdParams,
    search_bound: f64,
    sample_count: usize,
) -> Result<LcdResult, LcdError> {
    params.validate()?;
    check_bound(search_bound)?;
    let m = basis.nrows();
    if m == 0 || basis.ncols() == 0 {
        return Err(LcdError::EmptyBasis);
    }
    let defect = crate::numeric::max_abs(&(basis * basis.transpose() - DMatrix::identity(m, m)));
    if defect > 1e-10 {
        return Err(LcdError::NotOrthonormal(defect));
    }
    let count = sample_count.max(1);
    let mut search = Directional::new(basis, params, search_bound);
    for u in direction_set(m, count) {
        search.try_direction(&u);
    }
    search.refine(direction_spacing(m, count));
    let quality = if m == 1 {
        SearchQuality::Exhaustive
    } else {
        SearchQuality::UpperEstimate
    };
    Ok(search.result(quality))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedLcd {
    pub result: LcdResult,
    /// Maximizing index set.
    pub subset: Vec<usize>,
    pub subset_size: usize,
    pub subsets_examined: usize,
    pub exhaustive: bool,
}

/// `max{LCD_{α,γ}(x_I/‖x_I‖) : I ⊆ spread(x), |I| = ⌈λN⌉}`. All subsets are
/// tried when there are at most `max_subsets` of them; otherwise a fixed
/// pseudo-random family of that size, giving a lower estimate.
pub fn regularized_lcd(
    x: &[f64],
    lambda: f64,
    params: &LcdParams,
    c0: f64,
    c1: f64,
    search_bound: f64,
    max_subsets: usize,
) -> Result<RegularizedLcd, LcdError> {
    params.validate()?;
    check_bound(search_bound)?;
    let report = classify_compressibility(x, c0, c1)?;
    if report.class == CompressibilityClass::Compressible {
        return Err(LcdError::Compressible(report.sparse_distance));
    }
    let limit = spread_constant(c0, c1);
    if !(lambda > 0.0 && lambda < limit) {
        return Err(LcdError::LambdaOutOfRange { lambda, limit });
    }
    let n = x.len();
    let k = (lambda * n as f64).ceil() as usize;
    let spread = &report.spread_set;
    if k > spread.len() {
        return Err(LcdError::SpreadTooSmall {
            spread: spread.len(),
            needed: k,
        });
    }
    let norm = check_vector(x)?;
    let unit: Vec<f64> = x.iter().map(|v| v / norm).collect();

    let total = binomial(spread.len(), k);
    let exhaustive = total <= max_subsets as u128;
    let family: Vec<Vec<usize>> = if exhaustive {
        combinations(spread.len(), k)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(((n as u64) << 32) ^ k as u64);
        (0..max_subsets.max(1))
            .map(|_| {
                let mut s = index::sample(&mut rng, spread.len(), k).into_vec();
                s.sort_unstable();
                s
            })
            .collect()
    };

    let mut best: Option<(f64, Vec<usize>, LcdResult)> = None;
    for positions in &family {
        let subset: Vec<usize> = positions.iter().map(|&p| spread[p]).collect();
        let sub: Vec<f64> = subset.iter().map(|&i| unit[i]).collect();
        let sub_norm = sub.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sub: Vec<f64> = sub.iter().map(|v| v / sub_norm).collect();
        let r = lcd(&sub, params, search_bound)?;
        let v = r.value_or_inf();
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, subset, r));
        }
        if v.is_infinite() {
            break;
        }
    }
    let (_, subset, mut result) = best.expect("subset family is nonempty");
    result.quality = if exhaustive {
        SearchQuality::Exhaustive
    } else {
        SearchQuality::LowerEstimate
    };
    Ok(RegularizedLcd {
        result,
        subset,
        subset_size: k,
        subsets_examined: family.len(),
        exhaustive,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if c[i] < n - k + i {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        c[i] += 1;
        for j in i + 1..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain forward scan at a fixed absolute step, no refinement.
    fn grid_oracle(x: &[f64], p: &LcdParams, bound: f64, step: f64) -> Option<f64> {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut theta = step;
        while theta <= bound {
            let d = integer_distance(&x.iter().map(|v| theta * v).collect::<Vec<_>>());
            if d < (p.gamma * theta * norm).min(p.alpha) {
                return Some(theta);
            }
            theta += step;
        }
        None
    }

    #[test]
    fn params_are_validated() {
        assert!(LcdParams::new(0.1, 1.0).is_err());
        assert!(LcdParams::new(0.0, 0.5).is_err());
        assert!(LcdParams::new(0.1, 0.5).is_ok());
    }

    #[test]
    fn basis_vector_has_closed_form_lcd() {
        let p = LcdParams::new(0.1, 0.9).unwrap();
        for n in [1, 3, 7] {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            let r = lcd(&e, &p, default_search_bound(n)).unwrap();
            assert!((r.value.unwrap() - 0.9).abs() <= 1e-8, "{r:?}");
        }
    }

    #[test]
    fn diagonal_vector_matches_grid_oracle() {
        let p = LcdParams::new(0.3, 0.5).unwrap();
        let x = [1.0 / 2f64.sqrt(); 2];
        let r = lcd(&x, &p, 10.0).unwrap();
        let oracle = grid_oracle(&x, &p, 10.0, 1e-5).unwrap();
        assert!((r.value.unwrap() - oracle).abs() <= 1e-5 + r.resolution);
        assert!((r.value.unwrap() - (2f64.sqrt() - 0.3)).abs() <= 1e-8);
    }

    #[test]
    fn scaling_inequality() {
        let p = LcdParams::new(0.2, 0.5).unwrap();
        let x = [0.6, -0.48, 0.64];
        let base = lcd(&x, &p, 30.0).unwrap();
        for delta in [0.5, 2.0] {
            let scaled: Vec<f64> = x.iter().map(|v| delta * v).collect();
            let r = lcd(&scaled, &p, 30.0 / delta).unwrap();
            assert!(r.value_or_inf() <= base.value_or_inf() / delta + base.resolution + 1e-9);
        }
    }

    #[test]
    fn zero_vector_is_rejected_and_not_found_is_a_result() {
        let p = LcdParams::new(0.1, 0.5).unwrap();
        assert_eq!(lcd(&[0.0, 0.0], &p, 1.0), Err(LcdError::DegenerateVector));
        let r = lcd(&[1.0], &p, 0.5).unwrap();
        assert!(!r.found());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["value"].is_null());
    }

    #[test]
    fn witness_is_feasible() {
        let p = LcdParams::new(0.15, 0.4).unwrap();
        let x = [0.3, 0.5, -0.81];
        let r = lcd(&x, &p, 20.0).unwrap();
        let t = r.witness_theta.unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| t * v).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(integer_distance(&scaled) < (p.gamma * t * norm).min(p.alpha) + 1e-9);
    }

    #[test]
    fn multi_with_one_vector_is_plain_lcd() {
        let p = LcdParams::new(0.2, 0.6).unwrap();
        let x = [0.2, 0.7, -0.4, 0.5];
        let single = lcd(&x, &p, 20.0).unwrap();
        let multi = lcd_multi(&DMatrix::from_row_slice(1, 4, &x), &p, 20.0).unwrap();
        assert_eq!(single.value, multi.value);
    }

    #[test]
    fn multi_with_standard_basis() {
        let p = LcdParams::new(0.1, 0.9).unwrap();
        let r = lcd_multi(&DMatrix::identity(2, 2), &p, 10.0).unwrap();
        assert!((r.value.unwrap() - 0.9).abs() <= 1e-8, "{r:?}");
        let r3 = lcd_multi(&DMatrix::identity(3, 3), &p, 10.0).unwrap();
        assert!((r3.value.unwrap() - 0.9).abs() <= 1e-8);
    }

    #[test]
    fn subspace_of_a_single_vector() {
        let p = LcdParams::new(0.3, 0.5).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let h = DMatrix::from_row_slice(1, 2, &[s, s]);
        let sub = lcd_subspace(&h, &p, 10.0, 16).unwrap();
        let direct = lcd(&[s, s], &p, 10.0).unwrap();
        assert_eq!(sub.value, direct.value);
        let e = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let sub = lcd_subspace(&e, &LcdParams::new(0.1, 0.9).unwrap(), 10.0, 4).unwrap();
        assert!((sub.value.unwrap() - 0.9).abs() < 1e-8);
        assert!(lcd_subspace(&DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), &p, 10.0, 4).is_err());
        assert_eq!(
            lcd_subspace(&DMatrix::zeros(0, 3), &p, 10.0, 4),
            Err(LcdError::EmptyBasis)
        );
    }

    #[test]
    fn combinations_are_complete() {
        let c = combinations(5, 2);
        assert_eq!(c.len(), 10);
        assert_eq!(c[0], vec![0, 1]);
        assert_eq!(c[9], vec![3, 4]);
        assert_eq!(binomial(20, 10), 184_756);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }
}
