//! Small dense linear-algebra helpers shared by the solver stack.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>` and assumes the
//! symmetric inputs have already been symmetrized by the caller where it
//! matters; the eigen-based routines symmetrize defensively because block
//! arithmetic in the solvers accumulates asymmetry at roundoff level.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `(M + M^T)/2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Maximum absolute entry difference `|M - M^T|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Eigendecomposition of a symmetric matrix. Returns `(values, vectors)`.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric eigendecomposition input"));
    }
    let se = symmetrize(m).symmetric_eigen();
    Ok((se.eigenvalues, se.eigenvectors))
}

/// Applies `f` to the eigenvalues of a symmetric matrix and recomposes.
pub fn spectral_map<F: Fn(f64) -> f64>(m: &DMatrix<f64>, f: F) -> Result<DMatrix<f64>> {
    let (vals, q) = sym_eigen(m)?;
    let d = DMatrix::from_diagonal(&vals.map(f));
    Ok(&q * d * q.transpose())
}

/// Projection onto the PSD cone (eigenvalue clipping at zero).
pub fn clip_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, |v| v.max(0.0))
}

/// Spectral projection onto `{ lo*I <= M <= hi*I }`.
pub fn clip_box(m: &DMatrix<f64>, lo: f64, hi: f64) -> Result<DMatrix<f64>> {
    spectral_map(m, |v| v.clamp(lo, hi))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min(m: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = sym_eigen(m)?;
    Ok(vals.min())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> Result<f64> {
    let (vals, _) = sym_eigen(m)?;
    Ok(vals.max())
}

/// `log det M` for symmetric positive definite `M`, via Cholesky.
/// Returns `None` if the factorization fails (not PD).
pub fn logdet_pd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn inverse_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))
}

/// Inverse through LU with a reciprocal-condition-number guard.
///
/// `rcond` is estimated from the singular values; values below `min_rcond`
/// are treated as singular.
pub fn inverse_guarded(m: &DMatrix<f64>, min_rcond: f64, what: &str) -> Result<DMatrix<f64>> {
    if rcond(m) < min_rcond {
        return Err(Error::Singular(what.to_string()));
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// Reciprocal condition number `sigma_min / sigma_max` (0 when degenerate).
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smax <= 0.0 || !smax.is_finite() {
        0.0
    } else {
        smin / smax
    }
}

/// Two-norm condition number; `inf` when degenerate.
pub fn cond(m: &DMatrix<f64>) -> f64 {
    let rc = rcond(m);
    if rc <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / rc
    }
}

/// Spectral radius (largest eigenvalue modulus) of a general square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `tr(A B)` without forming the product.
pub fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}
