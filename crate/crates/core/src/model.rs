//! Domain types for path analysis: the hypothesis pattern, the path model
//! `(A, Psi)`, the per-solve problem data, and the symmetric block variable
//! the convex programs optimize over.
//!
//! Conventions: index pairs are documented 1-based (as serialized) but stored
//! 0-based; `Psi` validation tolerates eigenvalues down to `-TOL_PSD` relative
//! to the largest magnitude eigenvalue; `I - A` counts as singular below a
//! reciprocal condition number of `MIN_RCOND`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance for PSD validation of noise covariances.
pub const TOL_PSD: f64 = 1e-8;

/// `I - A` with reciprocal condition number below this is an error.
pub const MIN_RCOND: f64 = 1e-12;

/// Index set of hypothesized zero entries of the path matrix.
///
/// Always contains every diagonal pair (a variable never influences itself).
/// Entries are stored 0-based; the 1-based accessors exist for file formats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroPattern {
    n: usize,
    mask: Vec<bool>,
    count: usize,
}

impl ZeroPattern {
    /// Pattern containing only the diagonal (no prior structure knowledge).
    pub fn diagonal(n: usize) -> Self {
        let mut p = ZeroPattern {
            n,
            mask: vec![false; n * n],
            count: 0,
        };
        for i in 0..n {
            p.set(i, i);
        }
        p
    }

    /// Pattern containing every index pair (the path matrix is forced to zero).
    pub fn full(n: usize) -> Self {
        ZeroPattern {
            n,
            mask: vec![true; n * n],
            count: n * n,
        }
    }

    /// Builds a pattern from 0-based pairs; the diagonal is added implicitly.
    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut p = Self::diagonal(n);
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::PatternOutOfBounds { i: i + 1, j: j + 1, n });
            }
            p.set(i, j);
        }
        Ok(p)
    }

    /// Builds a pattern from 1-based pairs (the serialized convention).
    pub fn from_pairs_one_based(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut p = Self::diagonal(n);
        for (i, j) in pairs {
            if i == 0 || j == 0 || i > n || j > n {
                return Err(Error::PatternOutOfBounds { i, j, n });
            }
            p.set(i - 1, j - 1);
        }
        Ok(p)
    }

    fn set(&mut self, i: usize, j: usize) {
        let idx = i * self.n + j;
        if !self.mask[idx] {
            self.mask[idx] = true;
            self.count += 1;
        }
    }

    /// Adds a 0-based pair.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::PatternOutOfBounds { i: i + 1, j: j + 1, n: self.n });
        }
        self.set(i, j);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of pairs in the set (diagonal included).
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        // Never true: the diagonal is always present.
        self.count == 0
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    /// Set union with another pattern of the same dimension.
    pub fn union(&self, other: &ZeroPattern) -> Result<ZeroPattern> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "pattern union of n={} with n={}",
                self.n, other.n
            )));
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if other.contains(i, j) {
                    out.set(i, j);
                }
            }
        }
        Ok(out)
    }

    pub fn is_superset_of(&self, other: &ZeroPattern) -> bool {
        self.n == other.n
            && (0..self.n * self.n).all(|k| !other.mask[k] || self.mask[k])
    }

    /// 0-based pairs in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n * n).filter(|k| self.mask[*k]).map(move |k| (k / n, k % n))
    }

    /// 1-based pairs in row-major order, for serialization.
    pub fn entries_one_based(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries().map(|(i, j)| (i + 1, j + 1))
    }

    /// 0-based pairs *not* in the set, row-major.
    pub fn complement_entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n * n).filter(|k| !self.mask[*k]).map(move |k| (k / n, k % n))
    }
}

/// Keeps the entries indexed by the pattern, zeroes the rest.
pub fn project_pattern(m: &DMatrix<f64>, pattern: &ZeroPattern) -> Result<DMatrix<f64>> {
    let n = pattern.n();
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if m.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but pattern has n={}",
            m.nrows(),
            m.ncols(),
            n
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| if pattern.contains(i, j) { m[(i, j)] } else { 0.0 }))
}

/// The complementary projection `P^c(M) = M - P(M)`.
pub fn project_complement(m: &DMatrix<f64>, pattern: &ZeroPattern) -> Result<DMatrix<f64>> {
    Ok(m - project_pattern(m, pattern)?)
}

/// A path model: coefficients `A`, noise covariance `Psi`, and the zero
/// pattern `A` respects.
#[derive(Debug, Clone)]
pub struct PathModel {
    a: DMatrix<f64>,
    psi: DMatrix<f64>,
    pattern: ZeroPattern,
}

impl PathModel {
    /// Validates the model invariants: zero diagonal, pattern respected,
    /// `Psi` symmetric PSD (to `TOL_PSD`), `I - A` invertible.
    pub fn new(a: DMatrix<f64>, psi: DMatrix<f64>, pattern: ZeroPattern) -> Result<Self> {
        let n = pattern.n();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{} but pattern has n={}",
                a.nrows(),
                a.ncols(),
                n
            )));
        }
        if psi.nrows() != n || psi.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Psi is {}x{} but pattern has n={}",
                psi.nrows(),
                psi.ncols(),
                n
            )));
        }
        for (i, j) in pattern.entries() {
            if a[(i, j)] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "A[{},{}] = {} violates the zero pattern",
                    i + 1,
                    j + 1,
                    a[(i, j)]
                )));
            }
        }
        let asym = linalg::asymmetry(&psi);
        let scale = psi.amax().max(1.0);
        if asym > 1e-8 * scale {
            return Err(Error::NotSymmetric { asym });
        }
        let (vals, _) = linalg::sym_eigen(&psi)?;
        let vmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if vals.min() < -TOL_PSD * vmax.max(1.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "Psi has eigenvalue {:.3e}",
                vals.min()
            )));
        }
        let i_minus_a = DMatrix::identity(n, n) - &a;
        if linalg::rcond(&i_minus_a) < MIN_RCOND {
            return Err(Error::Singular("I - A".into()));
        }
        Ok(PathModel { a, psi, pattern })
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn pattern(&self) -> &ZeroPattern {
        &self.pattern
    }

    /// Count of nonzero off-diagonal path coefficients.
    pub fn nnz(&self) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && self.a[(i, j)] != 0.0)
            .count()
    }
}

/// Model-reproduced covariance `Sigma = (I-A)^{-1} Psi (I-A)^{-T}`.
pub fn implied_covariance(model: &PathModel) -> Result<DMatrix<f64>> {
    let n = model.n();
    let i_minus_a = DMatrix::identity(n, n) - model.a();
    let inv = linalg::inverse_guarded(&i_minus_a, MIN_RCOND, "I - A")?;
    let sigma = &inv * model.psi() * inv.transpose();
    Ok(linalg::symmetrize(&sigma))
}

/// KL divergence `log det Sigma + tr(S Sigma^{-1}) - log det S - n` between
/// a sample covariance and a model covariance, both positive definite.
pub fn kl_divergence(s: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if s.nrows() != sigma.nrows() || s.ncols() != sigma.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "S is {}x{}, Sigma is {}x{}",
            s.nrows(),
            s.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let n = s.nrows() as f64;
    let ld_sigma = linalg::logdet_pd(sigma)
        .ok_or_else(|| Error::NotPositiveDefinite("Sigma in KL divergence".into()))?;
    let ld_s = linalg::logdet_pd(s)
        .ok_or_else(|| Error::NotPositiveDefinite("S in KL divergence".into()))?;
    let sigma_inv = linalg::inverse_pd(sigma)?;
    Ok(ld_sigma + linalg::trace_prod(s, &sigma_inv) - ld_s - n)
}

/// Which count of "known" covariance parameters to use in the df formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DfConvention {
    /// `n(n-1)/2`, as the source text states.
    OffDiagonal,
    /// `n(n+1)/2` distinct entries of a symmetric covariance.
    FullSymmetric,
}

/// Degrees of freedom: known parameters minus estimated parameters.
///
/// Known is `n(n-1)/2` under the default convention; estimated is the free
/// entries of `A` plus `n` (diagonal `Psi`) or `n(n+1)/2` (full symmetric).
/// Advisory only; negative df flags a possibly non-unique estimator.
pub fn degrees_of_freedom(pattern: &ZeroPattern, psi_diagonal: bool) -> i64 {
    degrees_of_freedom_with(pattern, psi_diagonal, DfConvention::OffDiagonal)
}

pub fn degrees_of_freedom_with(
    pattern: &ZeroPattern,
    psi_diagonal: bool,
    convention: DfConvention,
) -> i64 {
    let n = pattern.n() as i64;
    let known = match convention {
        DfConvention::OffDiagonal => n * (n - 1) / 2,
        DfConvention::FullSymmetric => n * (n + 1) / 2,
    };
    let free_a = n * n - pattern.len() as i64;
    let psi_params = if psi_diagonal { n } else { n * (n + 1) / 2 };
    known - (free_a + psi_params)
}

/// Parameters of one solve: sample covariance, bound on `Psi`, penalty, and
/// the hypothesis pattern.
#[derive(Debug, Clone)]
pub struct Problem {
    s: DMatrix<f64>,
    alpha: f64,
    gamma: f64,
    pattern: ZeroPattern,
}

impl Problem {
    pub fn new(s: DMatrix<f64>, alpha: f64, gamma: f64, pattern: ZeroPattern) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::NotSquare { rows: s.nrows(), cols: s.ncols() });
        }
        if s.nrows() != pattern.n() {
            return Err(Error::DimensionMismatch(format!(
                "S is {}x{} but pattern has n={}",
                s.nrows(),
                s.ncols(),
                pattern.n()
            )));
        }
        let asym = linalg::asymmetry(&s);
        if asym > 1e-8 * s.amax().max(1.0) {
            return Err(Error::NotSymmetric { asym });
        }
        let s = linalg::symmetrize(&s);
        if s.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(
                "S must be positive definite (more samples than variables, or ridge shrinkage)"
                    .into(),
            ));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidConfig(format!("gamma must be nonnegative, got {gamma}")));
        }
        Ok(Problem { s, alpha, gamma, pattern })
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn pattern(&self) -> &ZeroPattern {
        &self.pattern
    }
}

/// The three independent blocks of the symmetric `2n x 2n` variable
/// `[[X1, X2^T], [X2, X4]]`.
///
/// `X1` and `X4` are kept symmetric; `X2` is a general square block. The
/// Frobenius norm and inner product count the off-diagonal block twice, so
/// they agree with the assembled-matrix quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVariable {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    pub x4: DMatrix<f64>,
}

impl BlockVariable {
    pub fn zeros(n: usize) -> Self {
        BlockVariable {
            x1: DMatrix::zeros(n, n),
            x2: DMatrix::zeros(n, n),
            x4: DMatrix::zeros(n, n),
        }
    }

    pub fn new(x1: DMatrix<f64>, x2: DMatrix<f64>, x4: DMatrix<f64>) -> Result<Self> {
        let n = x1.nrows();
        for (name, m) in [("X1", &x1), ("X2", &x2), ("X4", &x4)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "block {name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(BlockVariable { x1, x2, x4 })
    }

    pub fn n(&self) -> usize {
        self.x1.nrows()
    }

    /// The full symmetric `2n x 2n` matrix.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.x1);
        m.view_mut((0, n), (n, n)).copy_from(&self.x2.transpose());
        m.view_mut((n, 0), (n, n)).copy_from(&self.x2);
        m.view_mut((n, n), (n, n)).copy_from(&self.x4);
        m
    }

    /// Splits a `2n x 2n` matrix back into blocks, symmetrizing `X1`/`X4`
    /// and averaging the two copies of the off-diagonal block.
    pub fn from_assembled(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "assembled block matrix must be square with even size, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows() / 2;
        let x1 = linalg::symmetrize(&m.view((0, 0), (n, n)).into_owned());
        let x4 = linalg::symmetrize(&m.view((n, n), (n, n)).into_owned());
        let lower = m.view((n, 0), (n, n)).into_owned();
        let upper_t = m.view((0, n), (n, n)).transpose();
        let x2 = (lower + upper_t) * 0.5;
        Ok(BlockVariable { x1, x2, x4 })
    }

    /// Frobenius norm of the assembled matrix.
    pub fn norm(&self) -> f64 {
        (self.x1.norm_squared() + 2.0 * self.x2.norm_squared() + self.x4.norm_squared()).sqrt()
    }

    /// Trace inner product of the assembled matrices.
    pub fn dot(&self, other: &BlockVariable) -> f64 {
        self.x1.dot(&other.x1) + 2.0 * self.x2.dot(&other.x2) + self.x4.dot(&other.x4)
    }

    pub fn scaled(&self, c: f64) -> BlockVariable {
        BlockVariable { x1: &self.x1 * c, x2: &self.x2 * c, x4: &self.x4 * c }
    }

    /// `self + c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &BlockVariable) {
        self.x1 += c * &other.x1;
        self.x2 += c * &other.x2;
        self.x4 += c * &other.x4;
    }

    pub fn sub(&self, other: &BlockVariable) -> BlockVariable {
        BlockVariable {
            x1: &self.x1 - &other.x1,
            x2: &self.x2 - &other.x2,
            x4: &self.x4 - &other.x4,
        }
    }

    pub fn add(&self, other: &BlockVariable) -> BlockVariable {
        BlockVariable {
            x1: &self.x1 + &other.x1,
            x2: &self.x2 + &other.x2,
            x4: &self.x4 + &other.x4,
        }
    }
}
