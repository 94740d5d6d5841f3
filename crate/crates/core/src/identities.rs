//! Closed-form identities behind the dependent-row distance argument, each
//! implemented exactly as displayed so it can be checked against direct
//! computation.
//!
//! Conventions: `B` is `n x N` (rows 2..n+1 of a symmetric `A`), `z` its first
//! column and `P` the rest. Inside `P`, `w = (x0, z)` is the first column,
//! `y` the rest of the first row and `R` the lower-right block, so that
//! `P = [[x0, y], [z, R]]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::numeric::max_abs;

/// Relative floor below which a denominator is treated as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentityError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("degenerate {quantity}: {value:e} below floor {floor:e}")]
    Degenerate {
        quantity: &'static str,
        value: f64,
        floor: f64,
    },
    #[error("singular block `{0}`")]
    SingularBlock(&'static str),
    #[error("index {index} out of range for {extent} rows")]
    IndexOutOfRange { index: usize, extent: usize },
    #[error("shape error: {0}")]
    Shape(String),
}

fn degenerate(quantity: &'static str, value: f64, scale: f64) -> Result<(), IdentityError> {
    let floor = DEGENERACY_FLOOR * scale.max(1.0);
    if !(value > floor) {
        return Err(IdentityError::Degenerate { quantity, value, floor });
    }
    Ok(())
}

/// Explicit inverse with a reciprocal-condition guard.
fn invert(name: &'static str, m: &DMatrix<f64>) -> Result<DMatrix<f64>, IdentityError> {
    if m.nrows() != m.ncols() {
        return Err(IdentityError::Shape(format!("{name} is not square")));
    }
    let inv = m.clone().try_inverse().ok_or(IdentityError::SingularBlock(name))?;
    let rcond = 1.0 / (max_abs(m) * max_abs(&inv) * m.nrows() as f64);
    if !rcond.is_finite() || rcond < 1e-14 {
        return Err(IdentityError::SingularBlock(name));
    }
    Ok(inv)
}

/// `(GGᵀ)⁻¹` for a full-row-rank `g`, formed explicitly.
fn inverse_gram(name: &'static str, g: &DMatrix<f64>) -> Result<DMatrix<f64>, IdentityError> {
    let chol = linalg::gram_cholesky(g).map_err(|_| IdentityError::SingularBlock(name))?;
    let inv = chol.inverse();
    Ok(0.5 * (&inv + inv.transpose()))
}

fn diag_sum(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Σ_i a_i b_i` over the shorter vector: the diagonal sum of `a bᵀ`.
fn outer_diag_sum(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// The squared distance split into the truncated term and the error term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceDecomposition {
    /// `x¹(I - Pᵀ(PPᵀ)⁻¹P)x¹ᵀ`
    pub truncated_term: f64,
    /// `a11 - zᵀ(PPᵀ)⁻¹P x¹ᵀ`
    pub error_numerator: f64,
    /// `1 + zᵀ(PPᵀ)⁻¹z`
    pub error_denominator: f64,
    pub total: f64,
}

impl DistanceDecomposition {
    pub fn error_term(&self) -> f64 {
        self.error_numerator.powi(2) / self.error_denominator
    }
}

/// Decomposes `dist²(row_1(A), span(rows 2..=n+1))` for a square sample `a`.
pub fn decompose_distance(a: &DMatrix<f64>, n: usize) -> Result<DistanceDecomposition, IdentityError> {
    let big_n = a.nrows();
    if a.ncols() != big_n {
        return Err(IdentityError::Shape("sample must be square".into()));
    }
    if n == 0 || n >= big_n {
        return Err(IdentityError::Shape(format!(
            "need 1 <= n <= N-1, got n={n}, N={big_n}"
        )));
    }
    let x = a.row(0).transpose();
    let b = a.rows(1, n).into_owned();
    decompose_row_distance(&x, &b)
}

/// Same decomposition for an explicit row `x` (length `N`) and `B` (`n x N`).
pub fn decompose_row_distance(x: &DVector<f64>, b: &DMatrix<f64>) -> Result<DistanceDecomposition, IdentityError> {
    if x.len() != b.ncols() || b.ncols() < 2 {
        return Err(IdentityError::Shape("row length must match B and be at least 2".into()));
    }
    let z = b.column(0).into_owned();
    let p = b.columns(1, b.ncols() - 1).into_owned();
    let x1 = x.rows(1, x.len() - 1).into_owned();
    let a11 = x[0];

    let chol = linalg::gram_cholesky(&p)?;
    let truncated_term = linalg::squared_distance_with(&chol, &x1, &p);
    let gz = chol.solve(&z);
    let px1 = &p * &x1;
    let error_numerator = a11 - gz.dot(&px1);
    let error_denominator = 1.0 + z.dot(&gz);
    let total = truncated_term + error_numerator.powi(2) / error_denominator;
    Ok(DistanceDecomposition {
        truncated_term,
        error_numerator,
        error_denominator,
        total,
    })
}

/// `(G + zzᵀ)⁻¹` from `G⁻¹` by the rank-one update formula.
pub fn rank_one_inverse_update(g_inv: &DMatrix<f64>, z: &DVector<f64>) -> Result<DMatrix<f64>, IdentityError> {
    if g_inv.nrows() != g_inv.ncols() || g_inv.nrows() != z.len() {
        return Err(IdentityError::Shape("G⁻¹ must be square and match z".into()));
    }
    let left = g_inv * z;
    let right = g_inv.transpose() * z;
    let denom = 1.0 + z.dot(&left);
    if !(denom > 1e-12) {
        return Err(IdentityError::Degenerate {
            quantity: "1 + zᵀG⁻¹z",
            value: denom,
            floor: 1e-12,
        });
    }
    Ok(g_inv - (left * right.transpose()) / denom)
}

/// Inverse of `[[X, Y], [Yᵀ, Z]]` assembled from Schur complements.
pub fn schur_block_inverse(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
) -> Result<DMatrix<f64>, IdentityError> {
    let (k, l) = (x.nrows(), z.nrows());
    if x.ncols() != k || z.ncols() != l || y.shape() != (k, l) {
        return Err(IdentityError::Shape("blocks do not tile a square matrix".into()));
    }
    let x_inv = invert("X", x)?;
    let z_inv = invert("Z", z)?;
    let top_left = invert("X - Y Z⁻¹ Yᵀ", &(x - y * &z_inv * y.transpose()))?;
    let bottom_right = invert("Z - Yᵀ X⁻¹ Y", &(z - y.transpose() * &x_inv * y))?;
    let top_right = -(&x_inv * y * &bottom_right);
    let mut m = DMatrix::zeros(k + l, k + l);
    m.view_mut((0, 0), (k, k)).copy_from(&top_left);
    m.view_mut((0, k), (k, l)).copy_from(&top_right);
    m.view_mut((k, 0), (l, k)).copy_from(&top_right.transpose());
    m.view_mut((k, k), (l, l)).copy_from(&bottom_right);
    Ok(m)
}

/// `(QQᵀ)⁻¹` for `Q = [y; R]` assembled from its four closed-form blocks.
pub fn qq_inverse_via_schur(y: &DVector<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>, IdentityError> {
    if r.ncols() != y.len() {
        return Err(IdentityError::Shape("y and R must share a column count".into()));
    }
    let g = inverse_gram("RRᵀ", r)?;
    let ry = r * y;
    let h = &g * &ry;
    let y2 = y.norm_squared();
    let d2 = y2 - ry.dot(&h);
    degenerate("d²", d2, y2)?;
    let k = r.nrows();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    m[(0, 0)] = 1.0 / d2;
    for i in 0..k {
        m[(0, i + 1)] = -h[i] / d2;
        m[(i + 1, 0)] = -h[i] / d2;
    }
    m.view_mut((1, 1), (k, k)).copy_from(&(g + &h * h.transpose() / d2));
    Ok(m)
}

/// Move row/column `k` of `p` to the front with a transposition; the
/// diagonal of `(PPᵀ)⁻¹P` is permuted the same way.
fn bring_to_front(p: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>, IdentityError> {
    if k >= p.nrows() || k >= p.ncols() {
        return Err(IdentityError::IndexOutOfRange {
            index: k,
            extent: p.nrows(),
        });
    }
    let mut q = p.clone();
    q.swap_rows(0, k);
    q.swap_columns(0, k);
    Ok(q)
}

/// Pieces of `P = [[x0, y], [z, R]]` and the recurring quantities built on `(RRᵀ)⁻¹`.
struct Blocks {
    x0: f64,
    y: DVector<f64>,
    z: DVector<f64>,
    r: DMatrix<f64>,
    g: DMatrix<f64>,
    /// `G R yᵀ`
    h: DVector<f64>,
    /// `G z`
    gz: DVector<f64>,
    /// `x0 - y Rᵀ G z`
    u: f64,
    d2: f64,
    /// `zᵀ G z`
    zgz: f64,
}

impl Blocks {
    fn new(p: &DMatrix<f64>) -> Result<Self, IdentityError> {
        let (n, cols) = p.shape();
        if n < 2 || cols <= n {
            return Err(IdentityError::Shape(format!("need 2 <= rows < cols, got {n}x{cols}")));
        }
        let x0 = p[(0, 0)];
        let y: DVector<f64> = p.view((0, 1), (1, cols - 1)).transpose().column(0).into_owned();
        let z = p.view((1, 0), (n - 1, 1)).into_owned().column(0).into_owned();
        let r = p.view((1, 1), (n - 1, cols - 1)).into_owned();
        let g = inverse_gram("RRᵀ", &r)?;
        let ry = &r * &y;
        let h = &g * &ry;
        let gz = &g * &z;
        let u = x0 - ry.dot(&gz);
        let y2 = y.norm_squared();
        let d2 = y2 - ry.dot(&h);
        degenerate("d²", d2, y2)?;
        let zgz = z.dot(&gz);
        Ok(Blocks {
            x0,
            y,
            z,
            r,
            g,
            h,
            gz,
            u,
            d2,
            zgz,
        })
    }
}

/// Components of the closed form for a diagonal entry of `(PPᵀ)⁻¹P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEntryBreakdown {
    /// Squared distance from `y` to the rows of `R`.
    pub d_squared: f64,
    /// `d⁻²(x0 - yRᵀ(RRᵀ)⁻¹z)`
    pub a_coef: f64,
    pub numerator: f64,
    /// `d²(1 + zᵀ(RRᵀ)⁻¹z) + numerator²`
    pub denominator: f64,
    pub value: f64,
    /// `zᵀ(RRᵀ)⁻¹z`
    pub z_quadratic: f64,
}

impl DiagonalEntryBreakdown {
    /// `1 / (2 sqrt(d²(1 + zᵀ(RRᵀ)⁻¹z)))`, which dominates `|value|` by AM-GM.
    pub fn am_gm_bound(&self) -> f64 {
        0.5 / (self.d_squared * (1.0 + self.z_quadratic)).sqrt()
    }
}

/// `((PPᵀ)⁻¹P)_{ii}` by the closed form, `i` zero-based.
pub fn diagonal_entry_formula(p: &DMatrix<f64>, i: usize) -> Result<DiagonalEntryBreakdown, IdentityError> {
    let q = bring_to_front(p, i)?;
    let bl = Blocks::new(&q)?;
    let denominator = bl.d2 * (1.0 + bl.zgz) + bl.u * bl.u;
    degenerate("D₁", denominator, bl.d2)?;
    Ok(DiagonalEntryBreakdown {
        d_squared: bl.d2,
        a_coef: bl.u / bl.d2,
        numerator: bl.u,
        denominator,
        value: bl.u / denominator,
        z_quadratic: bl.zgz,
    })
}

/// Direct `(PPᵀ)⁻¹P` via a Cholesky solve.
pub fn gram_solve(p: &DMatrix<f64>) -> Result<DMatrix<f64>, IdentityError> {
    let chol = linalg::gram_cholesky(p)?;
    Ok(chol.solve(p))
}

/// Diagonal-sum comparison between `P` and its minor `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceComparison {
    /// `Σ_i ((PPᵀ)⁻¹P)_{ii}`
    pub t_full: f64,
    /// `Σ_i ((RRᵀ)⁻¹R)_{ii}`
    pub t_reduced: f64,
    /// `Σ_i (M₁' + M₂)_{ii}`
    pub correction: f64,
    /// `((PPᵀ)⁻¹P)_{kk}`
    pub first_entry: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    /// `|(T - first_entry) - (T_R - correction)|`
    pub identity_residual: f64,
}

impl TraceComparison {
    pub fn e_sum(&self) -> f64 {
        self.e1 + self.e2 + self.e3 + self.e4
    }

    pub fn residual_within(&self, tol: f64) -> bool {
        self.identity_residual <= tol * self.t_reduced.abs().max(1.0)
    }

    pub fn split_holds(&self, slack: f64) -> bool {
        self.correction.abs() <= self.e_sum() + slack
    }
}

/// Compares the diagonal sums of `(PPᵀ)⁻¹P` and `(RRᵀ)⁻¹R` where `R` drops row
/// and column `k` (zero-based) of `P`.
pub fn trace_comparison(p: &DMatrix<f64>, k: usize) -> Result<TraceComparison, IdentityError> {
    let q = bring_to_front(p, k)?;
    let bl = Blocks::new(&q)?;

    let direct_full = gram_solve(&q)?;
    let t_full = diag_sum(&direct_full);
    let first_entry = direct_full[(0, 0)];
    let t_reduced = diag_sum(&(&bl.g * &bl.r));

    let m = bl.r.ncols();
    let proj = DMatrix::identity(m, m) - bl.r.transpose() * &bl.g * &bl.r;
    let y_proj = proj.transpose() * &bl.y; // (y Π)ᵀ
    let a = bl.u / bl.d2;
    let w_quad = bl.zgz + bl.u * bl.u / bl.d2;
    let norm = 1.0 + w_quad;

    // M₁' = d⁻² G R yᵀ y Π
    let m1p = &bl.h * y_proj.transpose() / bl.d2;

    // M₂, term by term as displayed
    let gr = &bl.g * &bl.r;
    let zt_gr = gr.transpose() * &bl.z; // (zᵀ G R)ᵀ
    let rt_g_r_minus_i = -&proj;
    let t1 = (a * a) * (&bl.h * (rt_g_r_minus_i.transpose() * &bl.y).transpose());
    let t2 = a * (&bl.gz * bl.y.transpose());
    let t3 = &bl.gz * zt_gr.transpose();
    let t4 = a * (&bl.g * (&bl.r * &bl.y * bl.z.transpose() + &bl.z * (&bl.r * &bl.y).transpose()) * &gr);
    let m2 = (t1 + t2 + t3 - t4) / norm;

    let correction = diag_sum(&(m1p + m2));
    let identity_residual = ((t_full - first_entry) - (t_reduced - correction)).abs();

    let c = 1.0 / (bl.d2 * norm);
    let e1 = c * bl.u.abs() * outer_diag_sum(&bl.gz, &y_proj).abs();
    let e2 = c * (1.0 + bl.zgz) * outer_diag_sum(&bl.h, &y_proj).abs();
    let e3 = c * bl.y.dot(&y_proj) * outer_diag_sum(&bl.gz, &zt_gr).abs();
    let e4 = c * bl.u.abs() * outer_diag_sum(&bl.h, &zt_gr).abs();

    debug_assert!(bl.x0.is_finite());
    Ok(TraceComparison {
        t_full,
        t_reduced,
        correction,
        first_entry,
        e1,
        e2,
        e3,
        e4,
        identity_residual,
    })
}

/// Error terms plus the normalized comparison gap `|T - T_R| · m / sqrt(N)`
/// with `N` the column count of `P` and `m = N - rows`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTermMagnitudes {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub gap: f64,
    pub normalized_gap: f64,
    pub ambient: usize,
    pub codim: usize,
}

pub fn error_term_magnitudes(p: &DMatrix<f64>, k: usize) -> Result<ErrorTermMagnitudes, IdentityError> {
    let tc = trace_comparison(p, k)?;
    let ambient = p.ncols();
    let codim = ambient - p.nrows();
    let gap = (tc.t_full - tc.t_reduced).abs();
    Ok(ErrorTermMagnitudes {
        e1: tc.e1,
        e2: tc.e2,
        e3: tc.e3,
        e4: tc.e4,
        gap,
        normalized_gap: gap * codim as f64 / (ambient as f64).sqrt(),
        ambient,
        codim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{sample_iid, sample_wigner, EnsembleKind, EnsembleSpec};
    use crate::linalg::{distance_to_rowspace, DistanceMethod};
    use crate::numeric::{scaled_error, scaled_error_scalar};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        sample_iid(rows, cols, &EnsembleSpec::iid(EnsembleKind::StandardGaussian), seed, 0)
            .unwrap()
            .entries
    }

    fn wigner(n: usize, seed: u64) -> DMatrix<f64> {
        sample_wigner(&EnsembleSpec::wigner(EnsembleKind::StandardGaussian, n), seed, 0)
            .unwrap()
            .entries
    }

    #[test]
    fn rank_one_small_cases() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let out = rank_one_inverse_update(&i2, &DVector::zeros(2)).unwrap();
        assert_eq!(out, i2);
        let out = rank_one_inverse_update(&DMatrix::identity(1, 1), &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(out[(0, 0)], 0.5);
        let g_inv = DMatrix::from_element(1, 1, -1.0);
        assert!(matches!(
            rank_one_inverse_update(&g_inv, &DVector::from_element(1, 1.0)),
            Err(IdentityError::Degenerate { .. })
        ));
    }

    #[test]
    fn rank_one_matches_direct_inverse() {
        let a = gaussian(5, 9, 1);
        let g = &a * a.transpose();
        let z = DVector::from_column_slice(gaussian(5, 1, 2).as_slice());
        let out = rank_one_inverse_update(&g.clone().try_inverse().unwrap(), &z).unwrap();
        let direct = (g + &z * z.transpose()).try_inverse().unwrap();
        assert!(scaled_error(&out, &direct) <= 1e-10);
    }

    #[test]
    fn schur_small_cases() {
        let out = schur_block_inverse(
            &DMatrix::identity(1, 1),
            &DMatrix::zeros(1, 2),
            &DMatrix::identity(2, 2),
        )
        .unwrap();
        assert_eq!(out, DMatrix::identity(3, 3));
        let out = schur_block_inverse(
            &DMatrix::from_element(1, 1, 2.0),
            &DMatrix::zeros(1, 1),
            &DMatrix::from_element(1, 1, 4.0),
        )
        .unwrap();
        assert_eq!(out, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]));
        assert!(matches!(
            schur_block_inverse(&DMatrix::zeros(1, 1), &DMatrix::zeros(1, 1), &DMatrix::identity(1, 1)),
            Err(IdentityError::SingularBlock(_))
        ));
    }

    #[test]
    fn schur_matches_direct_inverse() {
        let a = wigner(6, 3);
        let m = &a * a.transpose() + DMatrix::identity(6, 6);
        let out = schur_block_inverse(
            &m.view((0, 0), (2, 2)).into_owned(),
            &m.view((0, 2), (2, 4)).into_owned(),
            &m.view((2, 2), (4, 4)).into_owned(),
        )
        .unwrap();
        let direct = m.try_inverse().unwrap();
        assert!(scaled_error(&out, &direct) <= 1e-10);
    }

    #[test]
    fn qq_inverse_cases() {
        let out = qq_inverse_via_schur(
            &DVector::from_vec(vec![1.0, 0.0]),
            &DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
        )
        .unwrap();
        assert!(scaled_error(&out, &DMatrix::identity(2, 2)) < 1e-15);

        // y orthogonal to the rows of R with unit norm: top-left block is 1
        let r = DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 3.0]);
        let out = qq_inverse_via_schur(&DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]), &r).unwrap();
        assert!((out[(0, 0)] - 1.0).abs() < 1e-14);

        let q = gaussian(10, 20, 4);
        let y = q.row(0).transpose();
        let r = q.rows(1, 9).into_owned();
        let out = qq_inverse_via_schur(&y, &r).unwrap();
        let direct = (&q * q.transpose()).try_inverse().unwrap();
        assert!(scaled_error(&out, &direct) <= 1e-8);

        // y inside the row space of R
        let y = r.row(0).transpose() + 2.0 * r.row(3).transpose();
        assert!(matches!(
            qq_inverse_via_schur(&y, &r),
            Err(IdentityError::Degenerate { .. })
        ));
    }

    #[test]
    fn decomposition_with_zero_first_column() {
        let mut a = wigner(12, 5);
        for i in 1..12 {
            a[(i, 0)] = 0.0;
            a[(0, i)] = 0.0;
        }
        // restore the first row outside B so x stays generic
        for j in 8..12 {
            a[(0, j)] = 1.0 + j as f64;
        }
        let dec = decompose_distance(&a, 6).unwrap();
        assert_eq!(dec.error_denominator, 1.0);
        assert_eq!(dec.error_numerator, a[(0, 0)]);
        assert!((dec.error_term() - a[(0, 0)].powi(2)).abs() < 1e-15);
    }

    #[test]
    fn decomposition_matches_projection_formula() {
        let a = wigner(30, 6);
        let n = 20;
        let dec = decompose_distance(&a, n).unwrap();
        let x = a.row(0).transpose();
        let b = a.rows(1, n).into_owned();
        let direct = distance_to_rowspace(&x, &b, DistanceMethod::Orthogonal)
            .unwrap()
            .powi(2);
        assert!(scaled_error_scalar(dec.total, direct) <= 1e-8);
        let x1 = x.rows(1, 29).into_owned();
        let p = b.columns(1, 29).into_owned();
        let trunc = distance_to_rowspace(&x1, &p, DistanceMethod::Orthogonal)
            .unwrap()
            .powi(2);
        assert!(scaled_error_scalar(dec.truncated_term, trunc) <= 1e-8);
        assert!(dec.total >= dec.truncated_term);
        assert!(dec.error_denominator >= 1.0);
    }

    #[test]
    fn decomposition_shape_errors() {
        let a = wigner(5, 1);
        assert!(decompose_distance(&a, 0).is_err());
        assert!(decompose_distance(&a, 5).is_err());
        let rect = DMatrix::zeros(3, 4);
        assert!(decompose_distance(&rect, 1).is_err());
    }

    #[test]
    fn diagonal_formula_matches_direct_entries() {
        let p = gaussian(10, 25, 7);
        let direct = gram_solve(&p).unwrap();
        for i in 0..10 {
            let bd = diagonal_entry_formula(&p, i).unwrap();
            assert!(scaled_error_scalar(bd.value, direct[(i, i)]) <= 1e-8, "i={i}");
            assert!((bd.value - bd.numerator / bd.denominator).abs() <= 1e-12 * bd.value.abs().max(1e-300));
            assert!(bd.value.abs() <= bd.am_gm_bound() + 1e-10);
            // d² is the squared distance from the i-th row (minus entry i) to R_i
            let mut q = p.clone();
            q.swap_rows(0, i);
            q.swap_columns(0, i);
            let y: DVector<f64> = q.view((0, 1), (1, 24)).transpose().column(0).into_owned();
            let r = q.view((1, 1), (9, 24)).into_owned();
            let d = distance_to_rowspace(&y, &r, DistanceMethod::Orthogonal).unwrap();
            assert!(scaled_error_scalar(bd.d_squared, d * d) <= 1e-8);
        }
    }

    #[test]
    fn diagonal_formula_with_zero_truncated_column() {
        let mut p = gaussian(6, 14, 8);
        for i in 1..6 {
            p[(i, 0)] = 0.0;
        }
        let bd = diagonal_entry_formula(&p, 0).unwrap();
        let c = p[(0, 0)];
        assert_eq!(bd.numerator, c);
        assert!((bd.value - c / (bd.d_squared + c * c)).abs() < 1e-15);
        let direct = gram_solve(&p).unwrap();
        assert!(scaled_error_scalar(bd.value, direct[(0, 0)]) <= 1e-10);
    }

    #[test]
    fn trace_identity_and_split() {
        let p = gaussian(12, 30, 9);
        for k in [0, 5, 11] {
            let tc = trace_comparison(&p, k).unwrap();
            assert!(tc.residual_within(1e-8), "{tc:?}");
            assert!(tc.split_holds(1e-8), "{tc:?}");
            assert!(tc.e1 >= 0.0 && tc.e2 >= 0.0 && tc.e3 >= 0.0 && tc.e4 >= 0.0);
            let direct = gram_solve(&p).unwrap();
            assert!((tc.first_entry - direct[(k, k)]).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_identity_with_vanishing_first_column() {
        let mut p = gaussian(8, 20, 10);
        for i in 0..8 {
            p[(i, 0)] = 0.0;
        }
        let tc = trace_comparison(&p, 0).unwrap();
        assert_eq!(tc.first_entry, 0.0);
        assert!(tc.residual_within(1e-8));
        assert!(tc.split_holds(1e-8));
        assert_eq!(tc.e1, 0.0);
        assert_eq!(tc.e4, 0.0);
    }

    #[test]
    fn error_terms_reject_zero_matrix() {
        assert!(error_term_magnitudes(&DMatrix::zeros(4, 9), 0).is_err());
        let p = wigner(40, 11).rows(0, 30).into_owned();
        let e = error_term_magnitudes(&p, 0).unwrap();
        assert_eq!((e.ambient, e.codim), (40, 10));
        assert!(e.e1 >= 0.0 && e.e2 >= 0.0 && e.e3 >= 0.0 && e.e4 >= 0.0);
    }

    #[test]
    fn error_gap_scaling_median_is_moderate() {
        let (big_n, m, trials) = (200, 50, 100);
        let spec = EnsembleSpec::wigner(EnsembleKind::StandardGaussian, big_n);
        let stats: Vec<f64> = (0..trials)
            .map(|t| {
                let a = sample_wigner(&spec, 2024, t).unwrap().entries;
                let p = a.rows(0, big_n - m).into_owned();
                error_term_magnitudes(&p, 0).unwrap().normalized_gap
            })
            .collect();
        let med = crate::numeric::median(&stats);
        assert!(med <= 20.0, "median normalized gap {med}");
    }
}
