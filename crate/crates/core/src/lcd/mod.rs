//! Least common denominators of real vectors, compressibility and small-ball
//! probabilities of random sums.

mod search;
mod smallball;
mod structure;

pub use search::{
    default_search_bound, integer_distance, lcd, lcd_multi, lcd_subspace, regularized_lcd, LcdParams, LcdResult,
    RegularizedLcd, SearchQuality, REFINEMENT_TOL,
};
pub use smallball::{
    fit_one_dim_constant, levy_concentration, levy_concentration_planar, small_ball_bound_multi,
    small_ball_bound_one_dim, LevyMode, SmallBallEstimate, SmallBallMethod,
};
pub use structure::{
    classify_compressibility, spread_bounds, spread_constant, CompressibilityClass, CompressibilityReport,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcdError {
    #[error("vector is zero or has non-finite entries")]
    DegenerateVector,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("basis is not orthonormal (defect {0:e})")]
    NotOrthonormal(f64),
    #[error("empty basis")]
    EmptyBasis,
    #[error("vector is compressible (sparse distance {0:.4})")]
    Compressible(f64),
    #[error("lambda {lambda} outside (0, {limit})")]
    LambdaOutOfRange { lambda: f64, limit: f64 },
    #[error("spread set has {spread} indices, fewer than the {needed} required")]
    SpreadTooSmall { spread: usize, needed: usize },
    #[error("exact enumeration needs rademacher weights and at most {max} terms, got {got}")]
    EnumerationUnsupported { got: usize, max: usize },
    #[error("eps {eps} below the applicability threshold {threshold}")]
    NotApplicable { eps: f64, threshold: f64 },
}
