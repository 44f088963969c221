//! Problem-level estimation API: confirmatory and sparse fits, the critical
//! penalty `gamma_max` above which the path matrix vanishes, the critical
//! bound `alpha_c` below which the trivial inverse-covariance solution is
//! infeasible, and recovery of `(A, Psi, Sigma^{-1})` from the block solution.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BlockVariable, PathModel, Problem, ZeroPattern};
use crate::solver::{solve, SolveReport, SolverOptions};

/// Relative low-rank gap below which `X2^T X4^{-1} X2` is trusted as the
/// inverse-covariance estimate.
pub const LOWRANK_GAP_TOL: f64 = 1e-3;

/// Entries of the recovered path matrix below `1e-5 * max(1, ||A||_max)` are
/// reported as structural zeros when extracting a pattern.
pub const ZERO_SCALE: f64 = 1e-5;

/// Result of a confirmatory or sparse fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Recovered path model: `A = I - X2`, `Psi` = box-clipped `X4`.
    pub model: PathModel,
    /// Estimate of the inverse implied covariance (see `LOWRANK_GAP_TOL`).
    pub sigma_inv_hat: DMatrix<f64>,
    pub report: SolveReport,
    pub gamma: f64,
    pub alpha: f64,
}

/// Smallest penalty that forces the sparse-fit path matrix to zero:
/// `(1/alpha) * max over off-pattern (i,j) of |alpha I - S|_ij`.
pub fn gamma_max(s: &DMatrix<f64>, alpha: f64, pattern: &ZeroPattern) -> f64 {
    let n = pattern.n();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if pattern.contains(i, j) {
                continue;
            }
            let v = (if i == j { alpha } else { 0.0 }) - s[(i, j)];
            best = best.max(v.abs());
        }
    }
    best / alpha
}

/// Harmonic mean of the eigenvalues of `S`: `n / tr(S^{-1})`. Bounds on
/// `alpha` below this value rule out the trivial solution `X1 = S^{-1}`.
pub fn alpha_critical(s: &DMatrix<f64>) -> Result<f64> {
    let inv = linalg::inverse_pd(s)?;
    Ok(s.nrows() as f64 / inv.trace())
}

/// Relative gap `||X1 - X2^T X4^{-1} X2||_F / ||X1||_F`; zero exactly when
/// the relaxation is tight and `X1` is a faithful inverse covariance.
pub fn lowrank_gap(x: &BlockVariable) -> Result<f64> {
    let x4_inv = linalg::inverse_pd(&x.x4)
        .map_err(|_| Error::Singular("X4 in low-rank gap".into()))?;
    let approx = x.x2.transpose() * x4_inv * &x.x2;
    Ok((&x.x1 - approx).norm() / x.x1.norm().max(f64::MIN_POSITIVE))
}

/// Confirmatory fit: the penalty-free program under the given zero pattern.
/// Warns when `alpha` exceeds `alpha_c` (risk of the trivial solution).
pub fn fit_confirmatory(
    s: &DMatrix<f64>,
    alpha: f64,
    pattern: &ZeroPattern,
    opts: &SolverOptions,
) -> Result<FitResult> {
    fit_sparse(s, alpha, 0.0, pattern, opts)
}

/// Sparse fit: the l1-penalized program. `gamma = 0` coincides with the
/// confirmatory fit.
pub fn fit_sparse(
    s: &DMatrix<f64>,
    alpha: f64,
    gamma: f64,
    pattern: &ZeroPattern,
    opts: &SolverOptions,
) -> Result<FitResult> {
    let problem = Problem::new(s.clone(), alpha, gamma, pattern.clone())?;
    match alpha_critical(s) {
        Ok(ac) if alpha > ac => log::warn!(
            "alpha = {alpha:.4e} exceeds alpha_c = {ac:.4e}; the trivial solution X1 = S^-1 \
             becomes feasible and the fit may be uninformative"
        ),
        _ => {}
    }
    let report = solve(&problem, opts)?;
    build_fit(&problem, report)
}

fn build_fit(problem: &Problem, report: SolveReport) -> Result<FitResult> {
    let n = problem.n();
    let a = DMatrix::identity(n, n) - &report.x.x2;
    let psi = linalg::clip_box(&report.x.x4, 0.0, problem.alpha())?;
    let model = PathModel::new(a, psi, problem.pattern().clone())?;

    let sigma_inv_hat = if report.lowrank_gap <= LOWRANK_GAP_TOL {
        match linalg::inverse_pd(&report.x.x4) {
            Ok(x4_inv) => {
                linalg::symmetrize(&(report.x.x2.transpose() * x4_inv * &report.x.x2))
            }
            Err(_) => {
                log::warn!("X4 singular; falling back to X1 as the inverse-covariance estimate");
                report.x.x1.clone()
            }
        }
    } else {
        log::warn!(
            "low-rank gap {:.3e} above {LOWRANK_GAP_TOL:.0e}; using X1 as the \
             inverse-covariance estimate",
            report.lowrank_gap
        );
        report.x.x1.clone()
    };
    let sigma_inv_hat = ensure_pd(sigma_inv_hat, &report.x.x1);

    Ok(FitResult {
        model,
        sigma_inv_hat,
        gamma: problem.gamma(),
        alpha: problem.alpha(),
        report,
    })
}

/// The inverse-covariance estimate must be usable downstream (log-likelihoods
/// invert it); fall back through X1 and an eigenvalue floor if needed.
fn ensure_pd(candidate: DMatrix<f64>, x1: &DMatrix<f64>) -> DMatrix<f64> {
    if candidate.clone().cholesky().is_some() {
        return candidate;
    }
    if x1.clone().cholesky().is_some() {
        log::warn!("inverse-covariance estimate not PD; using X1 instead");
        return x1.clone();
    }
    log::warn!("X1 not PD either; flooring eigenvalues");
    let floor = 1e-12 * x1.amax().max(1.0);
    linalg::spectral_map(x1, |v| v.max(floor)).unwrap_or_else(|_| candidate)
}

/// Threshold for declaring an entry of `A` a structural zero.
pub fn zero_threshold(a: &DMatrix<f64>) -> f64 {
    ZERO_SCALE * a.amax().max(1.0)
}

/// Pattern discovered by a sparse fit: the prior pattern, the diagonal, and
/// every off-pattern entry of `A` at or below the structural-zero threshold.
pub fn extract_pattern(a: &DMatrix<f64>, prior: &ZeroPattern) -> Result<ZeroPattern> {
    let n = prior.n();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{} but prior pattern has n={}",
            a.nrows(),
            a.ncols(),
            n
        )));
    }
    let eps = zero_threshold(a);
    let mut pattern = prior.clone();
    for i in 0..n {
        for j in 0..n {
            if i == j || a[(i, j)].abs() <= eps {
                pattern.insert(i, j)?;
            }
        }
    }
    Ok(pattern)
}
