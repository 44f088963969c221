//! The three proximal operators the splitting solvers compose, each in
//! closed form:
//!
//! * `prox_logdet_box` — the smooth log-det term plus the spectral box on
//!   the noise block,
//! * `prox_l1_pattern` — elementwise soft thresholding of the path block
//!   with the pattern entries pinned to the identity,
//! * `prox_psd` — projection of the assembled matrix onto the PSD cone.
//!
//! All three minimize `f_i(Z) + (rho/2) ||Y - Z||_F^2` over the assembled
//! `2n x 2n` symmetric variable; the off-diagonal block therefore counts
//! twice in the norm, which is why the scalar subproblem for the path block
//! thresholds at `gamma/rho` rather than `2*gamma/rho`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BlockVariable, ZeroPattern};

/// Parameters shared by the proximal operators.
#[derive(Debug, Clone)]
pub struct ProxParams {
    /// Proximal weight.
    pub rho: f64,
    /// l1 penalty on off-pattern path entries.
    pub gamma: f64,
    /// Upper bound of the spectral box on the noise block.
    pub alpha: f64,
    /// Sample covariance.
    pub s: DMatrix<f64>,
    /// Hypothesized zero entries.
    pub pattern: ZeroPattern,
}

impl ProxParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if self.s.nrows() != self.pattern.n() || self.s.ncols() != self.pattern.n() {
            return Err(Error::DimensionMismatch(format!(
                "S is {}x{} but pattern has n={}",
                self.s.nrows(),
                self.s.ncols(),
                self.pattern.n()
            )));
        }
        Ok(())
    }
}

/// Positive root of `rho z^2 - lambda z - 1 = 0`, written to avoid
/// cancellation for large negative `lambda`.
#[inline]
pub fn logdet_eigen_root(lambda: f64, rho: f64) -> f64 {
    let disc = (lambda * lambda + 4.0 * rho).sqrt();
    if lambda >= 0.0 {
        (lambda + disc) / (2.0 * rho)
    } else {
        2.0 / (disc - lambda)
    }
}

/// Prox of `-logdet(Z1) + tr(S Z1) + I{0 <= Z4 <= alpha I}` with weight
/// `rho/2` on the squared distance.
///
/// `Z2` passes through; `Z4` is the spectral box projection of `Y4`; `Z1`
/// solves `rho Z1 - Z1^{-1} = rho Y1 - S` eigenvalue-wise and is therefore
/// positive definite.
pub fn prox_logdet_box(y: &BlockVariable, p: &ProxParams) -> Result<BlockVariable> {
    let m = linalg::symmetrize(&(&y.x1 * p.rho - &p.s));
    let (vals, q) = linalg::sym_eigen(&m)?;
    let roots = DVector::from_iterator(vals.len(), vals.iter().map(|&l| logdet_eigen_root(l, p.rho)));
    let z1 = &q * DMatrix::from_diagonal(&roots) * q.transpose();
    let z4 = linalg::clip_box(&y.x4, 0.0, p.alpha)?;
    Ok(BlockVariable { x1: linalg::symmetrize(&z1), x2: y.x2.clone(), x4: z4 })
}

/// Scalar soft threshold, three-branch closed form.
#[inline]
pub fn soft_threshold(a: f64, k: f64) -> f64 {
    debug_assert!(k >= 0.0);
    if a > k {
        a - k
    } else if a < -k {
        a + k
    } else {
        0.0
    }
}

/// Prox of the penalized path block: soft-threshold the off-pattern entries
/// of `Y2` at `gamma/rho`, pin pattern entries to the identity; `Z1`, `Z4`
/// pass through.
pub fn prox_l1_pattern(y: &BlockVariable, p: &ProxParams) -> BlockVariable {
    let n = y.n();
    let k = if p.gamma == 0.0 { 0.0 } else { p.gamma / p.rho };
    let z2 = DMatrix::from_fn(n, n, |i, j| {
        if p.pattern.contains(i, j) {
            if i == j {
                1.0
            } else {
                0.0
            }
        } else {
            soft_threshold(y.x2[(i, j)], k)
        }
    });
    BlockVariable { x1: y.x1.clone(), x2: z2, x4: y.x4.clone() }
}

/// Projection of the assembled variable onto the PSD cone.
pub fn prox_psd(y: &BlockVariable) -> Result<BlockVariable> {
    let projected = linalg::clip_psd(&y.assemble())?;
    BlockVariable::from_assembled(&projected)
}
