//! Seedable sampling of Wigner-type symmetric matrices and iid rectangular
//! matrices.
//!
//! Every sample is a pure function of `(spec, seed, trial_index)`: the
//! generator is ChaCha8 keyed by the seed, with the trial index selecting an
//! independent stream. Entries are drawn in a fixed order (upper triangle,
//! row-major, for symmetric samples; row-major otherwise), so trials can be
//! evaluated on any number of workers and still reproduce bit-for-bit.

use std::ops::{Bound, RangeBounds};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::adaptive_simpson;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("matrix dimension must be at least 1 (got {rows}x{cols})")]
    InvalidDimension { rows: usize, cols: usize },
    #[error("unknown ensemble kind `{0}`")]
    UnknownKind(String),
    #[error("subgaussian parameter must be positive and finite (got {0})")]
    InvalidSubgaussianParam(f64),
    #[error("truncated-gaussian family needs k0 >= 0.25 (got {0})")]
    TruncationTooNarrow(f64),
    #[error("wigner sampling requires a symmetric spec")]
    NotSymmetric,
    #[error("index range {start}..{end} out of bounds for extent {extent}")]
    OutOfRange { start: usize, end: usize, extent: usize },
    #[error("selection {start}..{end} is empty")]
    EmptySelection { start: usize, end: usize },
}

/// Scalar law of the matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// N(0, 1) in every entry, diagonal included.
    StandardGaussian,
    /// Symmetric Bernoulli: +1 or -1 with probability 1/2.
    Rademacher,
    /// Gaussian orthogonal ensemble: off-diagonal variance 1, diagonal variance 2.
    Goe,
    /// Standard normal truncated at `sqrt(k0)` and rescaled to unit variance.
    CustomSubgaussian,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::StandardGaussian => "standard-gaussian",
            EnsembleKind::Rademacher => "rademacher",
            EnsembleKind::Goe => "goe",
            EnsembleKind::CustomSubgaussian => "custom-subgaussian",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard-gaussian" | "gaussian" => Ok(EnsembleKind::StandardGaussian),
            "rademacher" | "bernoulli" => Ok(EnsembleKind::Rademacher),
            "goe" => Ok(EnsembleKind::Goe),
            "custom-subgaussian" => Ok(EnsembleKind::CustomSubgaussian),
            other => Err(EnsembleError::UnknownKind(other.to_string())),
        }
    }
}

impl std::fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Distribution, symmetry and dimension recipe for a random matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    /// Subgaussian parameter `k0`. Only the truncated family uses it to shape
    /// the law; for the other kinds it is carried along as metadata.
    #[serde(rename = "k0", default = "default_k0")]
    pub subgaussian_param: f64,
    #[serde(default = "default_true")]
    pub symmetric: bool,
    #[serde(rename = "N")]
    pub dimension: usize,
}

fn default_k0() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

impl EnsembleSpec {
    pub fn new(kind: EnsembleKind, dimension: usize) -> Self {
        EnsembleSpec {
            kind,
            subgaussian_param: default_k0(),
            symmetric: true,
            dimension,
        }
    }

    pub fn wigner(kind: EnsembleKind, dimension: usize) -> Self {
        Self::new(kind, dimension)
    }

    pub fn iid(kind: EnsembleKind) -> Self {
        EnsembleSpec {
            symmetric: false,
            ..Self::new(kind, 1)
        }
    }

    pub fn with_k0(mut self, k0: f64) -> Self {
        self.subgaussian_param = k0;
        self
    }

    pub fn with_dimension(mut self, dimension: usize) -> Self {
        self.dimension = dimension;
        self
    }

    /// Builds the scalar sampler for this spec, validating parameters.
    pub fn scalar_law(&self) -> Result<ScalarLaw, EnsembleError> {
        ScalarLaw::new(self.kind, self.subgaussian_param)
    }
}

/// The on-disk form: an ensemble spec together with its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeededEnsemble {
    #[serde(flatten)]
    pub spec: EnsembleSpec,
    pub seed: u64,
}

/// Ready-to-draw scalar distribution.
#[derive(Debug, Clone, Copy)]
pub struct ScalarLaw {
    kind: EnsembleKind,
    truncation: f64,
    scale: f64,
}

impl ScalarLaw {
    pub fn new(kind: EnsembleKind, k0: f64) -> Result<Self, EnsembleError> {
        if !(k0.is_finite() && k0 > 0.0) {
            return Err(EnsembleError::InvalidSubgaussianParam(k0));
        }
        let (truncation, scale) = match kind {
            EnsembleKind::CustomSubgaussian => {
                if k0 < 0.25 {
                    return Err(EnsembleError::TruncationTooNarrow(k0));
                }
                let t = k0.sqrt();
                (t, 1.0 / truncated_normal_variance(t).sqrt())
            }
            _ => (f64::INFINITY, 1.0),
        };
        Ok(ScalarLaw {
            kind,
            truncation,
            scale,
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    /// Draws an off-diagonal (or iid) entry.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            EnsembleKind::StandardGaussian | EnsembleKind::Goe => StandardNormal.sample(rng),
            EnsembleKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EnsembleKind::CustomSubgaussian => loop {
                let g: f64 = StandardNormal.sample(rng);
                if g.abs() <= self.truncation {
                    break g * self.scale;
                }
            },
        }
    }

    /// Draws a diagonal entry of a symmetric sample.
    pub fn draw_diagonal<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            EnsembleKind::Goe => std::f64::consts::SQRT_2 * self.draw(rng),
            _ => self.draw(rng),
        }
    }
}

/// Variance of a standard normal conditioned on `|g| <= t`, by quadrature.
fn truncated_normal_variance(t: f64) -> f64 {
    let density = |x: f64| (-0.5 * x * x).exp();
    let mass = adaptive_simpson(&density, -t, t, 1e-13);
    let second = adaptive_simpson(&|x: f64| x * x * density(x), -t, t, 1e-13);
    second / mass
}

/// A sampled matrix together with everything needed to regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub entries: DMatrix<f64>,
    pub seed: u64,
    pub trial_index: u64,
    pub spec: EnsembleSpec,
}

/// Generator for trial `trial_index` under master seed `seed`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Derives an independent seed for a named sub-purpose of a run
/// (splitmix64 finaliser over `seed ^ tag`).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = (seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples an `N x N` symmetric matrix whose upper triangle (diagonal
/// included) is iid from the spec's law.
pub fn sample_wigner(spec: &EnsembleSpec, seed: u64, trial_index: u64) -> Result<MatrixSample, EnsembleError> {
    if !spec.symmetric {
        return Err(EnsembleError::NotSymmetric);
    }
    let n = spec.dimension;
    if n == 0 {
        return Err(EnsembleError::InvalidDimension { rows: 0, cols: 0 });
    }
    let law = spec.scalar_law()?;
    let mut rng = trial_rng(seed, trial_index);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = law.draw_diagonal(&mut rng);
        for j in (i + 1)..n {
            let v = law.draw(&mut rng);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    Ok(MatrixSample {
        entries: a,
        seed,
        trial_index,
        spec: *spec,
    })
}

/// Samples a `rows x cols` matrix with all entries iid. The GOE kind draws
/// standard normals here (there is no diagonal to distinguish).
pub fn sample_iid(
    rows: usize,
    cols: usize,
    spec: &EnsembleSpec,
    seed: u64,
    trial_index: u64,
) -> Result<MatrixSample, EnsembleError> {
    if rows == 0 || cols == 0 {
        return Err(EnsembleError::InvalidDimension { rows, cols });
    }
    let law = spec.scalar_law()?;
    let mut rng = trial_rng(seed, trial_index);
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = law.draw(&mut rng);
        }
    }
    Ok(MatrixSample {
        entries: a,
        seed,
        trial_index,
        spec: EnsembleSpec {
            symmetric: false,
            ..*spec
        },
    })
}

fn resolve_range<R: RangeBounds<usize>>(range: R, extent: usize) -> Result<(usize, usize), EnsembleError> {
    let start = match range.start_bound() {
        Bound::Included(&s) => s,
        Bound::Excluded(&s) => s + 1,
        Bound::Unbounded => 0,
    };
    let end = match range.end_bound() {
        Bound::Included(&e) => e + 1,
        Bound::Excluded(&e) => e,
        Bound::Unbounded => extent,
    };
    if end > extent || start > end {
        return Err(EnsembleError::OutOfRange { start, end, extent });
    }
    if start == end {
        return Err(EnsembleError::EmptySelection { start, end });
    }
    Ok((start, end))
}

/// Copies rows `range` (0-based) of a matrix.
pub fn take_rows<R: RangeBounds<usize>>(m: &DMatrix<f64>, range: R) -> Result<DMatrix<f64>, EnsembleError> {
    let (s, e) = resolve_range(range, m.nrows())?;
    Ok(m.rows(s, e - s).into_owned())
}

/// Copies columns `range` (0-based) of a matrix.
pub fn take_cols<R: RangeBounds<usize>>(m: &DMatrix<f64>, range: R) -> Result<DMatrix<f64>, EnsembleError> {
    let (s, e) = resolve_range(range, m.ncols())?;
    Ok(m.columns(s, e - s).into_owned())
}

impl MatrixSample {
    pub fn take_rows<R: RangeBounds<usize>>(&self, range: R) -> Result<MatrixSample, EnsembleError> {
        Ok(MatrixSample {
            entries: take_rows(&self.entries, range)?,
            ..self.clone()
        })
    }

    pub fn take_cols<R: RangeBounds<usize>>(&self, range: R) -> Result<MatrixSample, EnsembleError> {
        Ok(MatrixSample {
            entries: take_cols(&self.entries, range)?,
            ..self.clone()
        })
    }
}
