//! Dense kernels: SVD, distances to row spaces, projectors, norms and traces
//! of inverse Gram matrices.
//!
//! The distance path never forms `(BBᵀ)⁻¹` explicitly; it solves with the
//! Cholesky factor of the Gram matrix. An independent orthogonalization route
//! (Householder QR of `Bᵀ`, falling back to an SVD basis when `B` is rank
//! deficient) is kept alongside it as a cross-check.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SVD};
use thiserror::Error;

/// `σ_min / σ_max` below this declares a matrix rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix is empty")]
    Empty,
    #[error("rank deficient: conditioning ratio {ratio:e} below tolerance {tolerance:e}")]
    RankDeficient { ratio: f64, tolerance: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("svd failed to converge")]
    NoConvergence,
}

/// Full singular value decomposition with singular values sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub singular_values: DVector<f64>,
    /// `rows x k` left singular vectors.
    pub u: DMatrix<f64>,
    /// `k x cols` right singular vectors (as rows).
    pub v_t: DMatrix<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * &self.v_t
    }

    pub fn smallest(&self) -> f64 {
        self.singular_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Number of singular values above `RANK_TOLERANCE * σ_1`.
    pub fn numerical_rank(&self) -> usize {
        let top = self.singular_values.get(0).copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|&&s| top > 0.0 && s > RANK_TOLERANCE * top)
            .count()
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.is_empty() {
        return Err(LinalgError::Empty);
    }
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

pub fn svd(m: &DMatrix<f64>) -> Result<SvdResult, LinalgError> {
    check_finite(m)?;
    let raw = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let u = raw.u.ok_or(LinalgError::NoConvergence)?;
    let v_t = raw.v_t.ok_or(LinalgError::NoConvergence)?;
    let s = raw.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let singular_values = DVector::from_iterator(s.len(), order.iter().map(|&i| s[i]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = DMatrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    Ok(SvdResult {
        singular_values,
        u,
        v_t,
    })
}

/// Singular values only, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>, LinalgError> {
    check_finite(m)?;
    let raw = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0).ok_or(LinalgError::NoConvergence)?;
    let mut s: Vec<f64> = raw.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(DVector::from_vec(s))
}

pub fn least_singular_value(m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    let s = singular_values(m)?;
    Ok(s.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn hs_norm(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn op_norm(m: &DMatrix<f64>) -> Result<f64, LinalgError> {
    if m.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    Ok(singular_values(m)?[0])
}

/// Cholesky factor of `BBᵀ`, rejecting numerically rank-deficient `B`.
///
/// The pivot ratio `min L_ii / max L_ii` stands in for `σ_min / σ_max`; both
/// vanish together and the factorization itself fails well before the ratio
/// reaches the tolerance.
pub fn gram_cholesky(b: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, LinalgError> {
    check_finite(b)?;
    let gram = b * b.transpose();
    let chol = gram.cholesky().ok_or(LinalgError::RankDeficient {
        ratio: 0.0,
        tolerance: RANK_TOLERANCE,
    })?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
        (lo.min(v.abs()), hi.max(v.abs()))
    });
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio < RANK_TOLERANCE {
        return Err(LinalgError::RankDeficient {
            ratio,
            tolerance: RANK_TOLERANCE,
        });
    }
    Ok(chol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMethod {
    /// `x (I - Bᵀ(BBᵀ)⁻¹B) xᵀ` with a Cholesky solve.
    Gram,
    /// Residual after projecting on an orthonormal basis of the row space.
    Orthogonal,
}

/// Euclidean distance from `x` to the span of the rows of `b`.
pub fn distance_to_rowspace(x: &DVector<f64>, b: &DMatrix<f64>, method: DistanceMethod) -> Result<f64, LinalgError> {
    if x.len() != b.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "vector of length {} against rows of length {}",
            x.len(),
            b.ncols()
        )));
    }
    match method {
        DistanceMethod::Gram => {
            let chol = gram_cholesky(b)?;
            Ok(squared_distance_with(&chol, x, b).max(0.0).sqrt())
        }
        DistanceMethod::Orthogonal => {
            check_finite(b)?;
            let basis = rowspace_basis(b)?;
            let residual = x - &basis * (basis.transpose() * x);
            Ok(residual.norm())
        }
    }
}

/// `‖x‖² - (Bx)ᵀ(BBᵀ)⁻¹(Bx)` given the Gram factor.
pub fn squared_distance_with(chol: &Cholesky<f64, Dyn>, x: &DVector<f64>, b: &DMatrix<f64>) -> f64 {
    let bx = b * x;
    let sol = chol.solve(&bx);
    x.norm_squared() - bx.dot(&sol)
}

/// Orthonormal basis (as columns) of the row space of `b`.
fn rowspace_basis(b: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let bt = b.transpose();
    if b.nrows() <= b.ncols() {
        let qr = bt.clone().qr();
        let r = qr.r();
        let diag = r.diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        if hi > 0.0 && lo / hi >= RANK_TOLERANCE {
            return Ok(qr.q());
        }
    }
    // rank-revealing fallback
    let dec = svd(&bt)?;
    let rank = dec.numerical_rank();
    Ok(dec.u.columns(0, rank).into_owned())
}

/// Both distance routes side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub gram: f64,
    pub orthogonal: f64,
}

impl DistanceReport {
    pub fn relative_gap(&self) -> f64 {
        (self.gram - self.orthogonal).abs() / self.orthogonal.abs().max(1.0)
    }
}

pub fn distance_report(x: &DVector<f64>, b: &DMatrix<f64>) -> Result<DistanceReport, LinalgError> {
    Ok(DistanceReport {
        gram: distance_to_rowspace(x, b, DistanceMethod::Gram)?,
        orthogonal: distance_to_rowspace(x, b, DistanceMethod::Orthogonal)?,
    })
}

/// `tr((PPᵀ)⁻¹)` two ways: from singular values and as `‖(PPᵀ)⁻¹P‖²_HS`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceInverseGram {
    pub from_singular_values: f64,
    pub from_hs_norm: f64,
}

impl TraceInverseGram {
    pub fn value(&self) -> f64 {
        self.from_singular_values
    }

    pub fn relative_gap(&self) -> f64 {
        (self.from_singular_values - self.from_hs_norm).abs() / self.from_singular_values.abs().max(1.0)
    }
}

pub fn trace_inverse_gram(p: &DMatrix<f64>) -> Result<TraceInverseGram, LinalgError> {
    let chol = gram_cholesky(p)?;
    let s = singular_values(p)?;
    let top = s[0];
    let bottom = s[s.len() - 1];
    if s.len() < p.nrows() || bottom <= RANK_TOLERANCE * top {
        return Err(LinalgError::RankDeficient {
            ratio: bottom / top,
            tolerance: RANK_TOLERANCE,
        });
    }
    let from_singular_values = s.iter().map(|v| v.powi(-2)).sum();
    let solved = chol.solve(p);
    Ok(TraceInverseGram {
        from_singular_values,
        from_hs_norm: solved.norm_squared(),
    })
}

/// `I - Bᵀ(BBᵀ)⁻¹B` with its diagnostics.
#[derive(Debug, Clone)]
pub struct ProjectionReport {
    pub projector: DMatrix<f64>,
    pub codimension: usize,
    pub rank_tolerance: f64,
}

impl ProjectionReport {
    /// `‖Π² - Π‖_HS`.
    pub fn idempotence_defect(&self) -> f64 {
        (&self.projector * &self.projector - &self.projector).norm()
    }

    pub fn trace(&self) -> f64 {
        self.projector.trace()
    }
}

pub fn projector_onto_complement(b: &DMatrix<f64>) -> Result<ProjectionReport, LinalgError> {
    let chol = gram_cholesky(b)?;
    let n = b.ncols();
    if b.nrows() > n {
        return Err(LinalgError::RankDeficient {
            ratio: 0.0,
            tolerance: RANK_TOLERANCE,
        });
    }
    let mut projector = DMatrix::identity(n, n) - b.transpose() * chol.solve(b);
    // symmetrize away rounding
    projector = 0.5 * (&projector + projector.transpose());
    Ok(ProjectionReport {
        projector,
        codimension: n - b.nrows(),
        rank_tolerance: RANK_TOLERANCE,
    })
}
