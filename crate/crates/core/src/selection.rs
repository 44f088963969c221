//! Exploratory pipeline: sweep the penalty over a grid, extract each
//! discovered support, refit it without the penalty (reduces shrinkage bias),
//! score every candidate with five information criteria, and pick the best
//! per criterion.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{extract_pattern, fit_confirmatory, fit_sparse, gamma_max, FitResult};
use crate::linalg;
use crate::model::ZeroPattern;
use crate::solver::SolverOptions;

/// Model selection criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Aicc,
    Bic,
    Kic,
    Kicc,
}

impl Criterion {
    pub const ALL: [Criterion; 5] =
        [Criterion::Aic, Criterion::Aicc, Criterion::Bic, Criterion::Kic, Criterion::Kicc];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Criterion::Aic => "aic",
            Criterion::Aicc => "aicc",
            Criterion::Bic => "bic",
            Criterion::Kic => "kic",
            Criterion::Kicc => "kicc",
        };
        f.write_str(s)
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "aicc" => Ok(Criterion::Aicc),
            "bic" => Ok(Criterion::Bic),
            "kic" => Ok(Criterion::Kic),
            "kicc" => Ok(Criterion::Kicc),
            other => Err(Error::InvalidConfig(format!("unknown criterion '{other}'"))),
        }
    }
}

/// Gaussian log-likelihood of `N` samples with sample covariance `S` under a
/// model covariance: `L = (N/2)(-log det Sigma - tr(S Sigma^{-1}))`.
pub fn log_likelihood(s: &DMatrix<f64>, sigma_hat: &DMatrix<f64>, n_samples: usize) -> Result<f64> {
    let sigma_inv = linalg::inverse_pd(sigma_hat)
        .map_err(|_| Error::NotPositiveDefinite("Sigma_hat in log-likelihood".into()))?;
    log_likelihood_from_inverse(s, &sigma_inv, n_samples)
}

/// Same likelihood, parameterized by the inverse covariance (what the fits
/// produce directly).
pub fn log_likelihood_from_inverse(
    s: &DMatrix<f64>,
    sigma_inv: &DMatrix<f64>,
    n_samples: usize,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    let ld_inv = linalg::logdet_pd(sigma_inv)
        .ok_or_else(|| Error::NotPositiveDefinite("Sigma_hat^{-1} in log-likelihood".into()))?;
    Ok(n_samples as f64 / 2.0 * (ld_inv - linalg::trace_prod(s, sigma_inv)))
}

/// Penalized-likelihood score; smaller is better. `None` when a corrected
/// criterion is undefined for the sample size (`N <= k+1` for AICc,
/// `N <= k+2` for KICc).
pub fn score(loglik: f64, k: usize, n_samples: usize, criterion: Criterion) -> Option<f64> {
    let l = loglik;
    let k = k as f64;
    let n = n_samples as f64;
    match criterion {
        Criterion::Aic => Some(-2.0 * l + 2.0 * k),
        Criterion::Bic => Some(-2.0 * l + k * n.ln()),
        Criterion::Kic => Some(-2.0 * l + 3.0 * k),
        Criterion::Aicc => {
            if n > k + 1.0 {
                Some(-2.0 * l + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0))
            } else {
                None
            }
        }
        Criterion::Kicc => {
            if n > k + 2.0 {
                Some(-2.0 * l + (k + 1.0) * (3.0 * n - k - 2.0) / (n - k - 2.0) + k / (n - k))
            } else {
                None
            }
        }
    }
}

/// One point of the selection path.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub gamma: f64,
    /// Prior pattern plus the zeros discovered by the sparse fit.
    pub pattern_hat: ZeroPattern,
    /// Penalty-free refit restricted to `pattern_hat`.
    pub refit: FitResult,
    pub loglik: f64,
    /// Free parameters: off-pattern entries of `A` plus the noise terms.
    pub k_eff: usize,
    pub scores: BTreeMap<Criterion, Option<f64>>,
    /// Both the sparse fit and the refit converged.
    pub converged: bool,
}

impl Candidate {
    /// Structural nonzero count of the candidate support.
    pub fn nnz(&self) -> usize {
        let n = self.pattern_hat.n();
        n * n - self.pattern_hat.len()
    }
}

/// Result of the exploratory sweep, candidates ordered by gamma.
#[derive(Debug, Clone)]
pub struct SelectionPath {
    pub gamma_max: f64,
    pub candidates: Vec<Candidate>,
    /// Index of the best (minimum-score) converged candidate per criterion.
    pub best: BTreeMap<Criterion, usize>,
}

impl SelectionPath {
    pub fn best_candidate(&self, criterion: Criterion) -> Option<&Candidate> {
        self.best.get(&criterion).map(|&i| &self.candidates[i])
    }
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Bound on the noise covariance; `None` uses `lambda_min(S)`.
    pub alpha: Option<f64>,
    /// Number of grid points including the zero penalty.
    pub grid_size: usize,
    /// Count noise parameters as `n` (diagonal) instead of `n(n+1)/2`.
    pub psi_diagonal: bool,
    pub solver: SolverOptions,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        // PPXA is the faster of the two drivers on ill-conditioned sweeps,
        // so the pipeline defaults to it.
        let solver = SolverOptions {
            algorithm: crate::solver::Algorithm::Ppxa,
            ..SolverOptions::default()
        };
        ExploreConfig { alpha: None, grid_size: 15, psi_diagonal: true, solver }
    }
}

/// Penalty grid: zero plus `count - 1` log-spaced points ending at
/// `gamma_max` (selected penalties span decades).
pub fn gamma_grid(gamma_max: f64, count: usize) -> Vec<f64> {
    if gamma_max <= 0.0 {
        return vec![0.0];
    }
    if count <= 1 {
        return vec![gamma_max];
    }
    let lo = 1e-4 * gamma_max;
    let m = count - 1;
    let mut grid = Vec::with_capacity(count);
    grid.push(0.0);
    if m == 1 {
        grid.push(gamma_max);
        return grid;
    }
    let log_lo = lo.ln();
    let log_hi = gamma_max.ln();
    for i in 0..m {
        let t = i as f64 / (m - 1) as f64;
        grid.push((log_lo + t * (log_hi - log_lo)).exp());
    }
    grid
}

/// Runs the full sweep on a sample covariance with `n_samples` observations.
pub fn explore(
    s: &DMatrix<f64>,
    n_samples: usize,
    prior: &ZeroPattern,
    config: &ExploreConfig,
) -> Result<SelectionPath> {
    if config.grid_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid_size must be at least 2, got {}",
            config.grid_size
        )));
    }
    if n_samples < 2 {
        return Err(Error::InvalidConfig("need at least 2 samples".into()));
    }
    let alpha = match config.alpha {
        Some(a) => a,
        None => linalg::lambda_min(s)?,
    };
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }

    let gm = gamma_max(s, alpha, prior);
    let grid = gamma_grid(gm, config.grid_size);

    let results: Vec<Result<Candidate>> = grid
        .par_iter()
        .map(|&gamma| candidate_at(s, n_samples, alpha, gamma, prior, config))
        .collect();

    let mut candidates = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => candidates.push(c),
            Err(e) => {
                log::warn!("candidate at gamma = {:.4e} failed: {e}", grid[i]);
            }
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("every candidate in the sweep failed".into()));
    }

    let mut best = BTreeMap::new();
    for c in Criterion::ALL {
        let mut arg: Option<(usize, f64)> = None;
        for (i, cand) in candidates.iter().enumerate() {
            if !cand.converged {
                continue;
            }
            if let Some(Some(v)) = cand.scores.get(&c) {
                if v.is_finite() && arg.map_or(true, |(_, b)| *v < b) {
                    arg = Some((i, *v));
                }
            }
        }
        if let Some((i, _)) = arg {
            best.insert(c, i);
        }
    }

    Ok(SelectionPath { gamma_max: gm, candidates, best })
}

fn candidate_at(
    s: &DMatrix<f64>,
    n_samples: usize,
    alpha: f64,
    gamma: f64,
    prior: &ZeroPattern,
    config: &ExploreConfig,
) -> Result<Candidate> {
    let n = prior.n();
    let sparse = fit_sparse(s, alpha, gamma, prior, &config.solver)?;
    let pattern_hat = extract_pattern(sparse.model.a(), prior)?;
    let refit = fit_confirmatory(s, alpha, &pattern_hat, &config.solver)?;
    let loglik = log_likelihood_from_inverse(s, &refit.sigma_inv_hat, n_samples)?;
    let free_a = n * n - pattern_hat.len();
    let psi_params = if config.psi_diagonal { n } else { n * (n + 1) / 2 };
    let k_eff = free_a + psi_params;
    let mut scores = BTreeMap::new();
    for c in Criterion::ALL {
        scores.insert(c, score(loglik, k_eff, n_samples, c));
    }
    let converged = sparse.report.converged && refit.report.converged;
    Ok(Candidate { gamma, pattern_hat, refit, loglik, k_eff, scores, converged })
}

/// Versioned serialization of a selection path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathDocument {
    pub spec_version: String,
    pub n: usize,
    pub num_samples: usize,
    pub alpha: f64,
    pub gamma_max: f64,
    pub gammas: Vec<f64>,
    pub candidates: Vec<CandidateDocument>,
    /// Criterion name to the selected gamma.
    pub best: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateDocument {
    pub gamma: f64,
    pub nnz: usize,
    pub loglik: f64,
    pub k: usize,
    pub scores: BTreeMap<String, Option<f64>>,
    pub converged: bool,
}

impl PathDocument {
    pub fn from_path(path: &SelectionPath, n: usize, num_samples: usize, alpha: f64) -> Self {
        let candidates = path
            .candidates
            .iter()
            .map(|c| CandidateDocument {
                gamma: c.gamma,
                nnz: c.nnz(),
                loglik: c.loglik,
                k: c.k_eff,
                scores: c
                    .scores
                    .iter()
                    .map(|(crit, v)| (crit.to_string(), *v))
                    .collect(),
                converged: c.converged,
            })
            .collect();
        let best = path
            .best
            .iter()
            .map(|(crit, &i)| (crit.to_string(), path.candidates[i].gamma))
            .collect();
        PathDocument {
            spec_version: "1".to_string(),
            n,
            num_samples,
            alpha,
            gamma_max: path.gamma_max,
            gammas: path.candidates.iter().map(|c| c.gamma).collect(),
            candidates,
            best,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn loglik_examples() {
        let s = DMatrix::identity(3, 3);
        let l = log_likelihood(&s, &s, 2).unwrap();
        assert!((l - (-3.0)).abs() < 1e-12);
        // doubling N doubles L
        let l2 = log_likelihood(&s, &s, 4).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);
    }

    #[test]
    fn loglik_maximized_at_s() {
        let s = nalgebra::dmatrix![1.5, 0.2; 0.2, 0.8];
        let base = log_likelihood(&s, &s, 10).unwrap();
        // local perturbations only lower the likelihood
        for k in 0..6 {
            let mut sigma = s.clone();
            let d = 0.05 * ((k % 3) as f64 - 1.0);
            let e = 0.03 * ((k / 3) as f64 - 0.5);
            sigma[(0, 0)] += d.abs() + 0.01;
            sigma[(0, 1)] += e;
            sigma[(1, 0)] += e;
            let l = log_likelihood(&s, &sigma, 10).unwrap();
            assert!(l <= base + 1e-12);
        }
    }

    #[test]
    fn score_examples() {
        // At L = 0, k = 0 every additive-penalty score vanishes; KICc keeps
        // its constant (k+1)-term, (3N-2)/(N-2) at k = 0.
        for c in [Criterion::Aic, Criterion::Aicc, Criterion::Bic, Criterion::Kic] {
            assert_eq!(score(0.0, 0, 100, c), Some(0.0));
        }
        let kicc0 = score(0.0, 0, 100, Criterion::Kicc).unwrap();
        assert!((kicc0 - 298.0 / 98.0).abs() < 1e-12);
        let aic = score(-100.0, 5, 100, Criterion::Aic).unwrap();
        assert!((aic - 210.0).abs() < 1e-12);
        let bic = score(-100.0, 5, 100, Criterion::Bic).unwrap();
        assert!((bic - (200.0 + 5.0 * 100f64.ln())).abs() < 1e-12);
        assert!((bic - 223.02585092994046).abs() < 1e-10);
        // hand evaluations of the corrected criteria
        let aicc = score(-100.0, 5, 100, Criterion::Aicc).unwrap();
        assert!((aicc - (210.0 + 60.0 / 94.0)).abs() < 1e-12);
        let kic = score(-100.0, 5, 100, Criterion::Kic).unwrap();
        assert!((kic - 215.0).abs() < 1e-12);
        let kicc = score(-100.0, 5, 100, Criterion::Kicc).unwrap();
        let want = 200.0 + 6.0 * (300.0 - 7.0) / 93.0 + 5.0 / 95.0;
        assert!((kicc - want).abs() < 1e-12);
    }

    #[test]
    fn corrected_scores_undefined_for_small_samples() {
        assert!(score(-1.0, 10, 11, Criterion::Aicc).is_none());
        assert!(score(-1.0, 10, 12, Criterion::Aicc).is_some());
        assert!(score(-1.0, 10, 12, Criterion::Kicc).is_none());
        assert!(score(-1.0, 10, 13, Criterion::Kicc).is_some());
        assert!(score(-1.0, 10, 11, Criterion::Bic).is_some());
    }

    #[test]
    fn bic_exceeds_aic_for_large_samples() {
        for k in 1..10usize {
            for n in [8usize, 50, 1000] {
                let a = score(-3.0, k, n, Criterion::Aic).unwrap();
                let b = score(-3.0, k, n, Criterion::Bic).unwrap();
                let diff = b - a;
                let want = k as f64 * ((n as f64).ln() - 2.0);
                assert!((diff - want).abs() < 1e-10);
                if (n as f64) > std::f64::consts::E.powi(2) {
                    assert!(diff > 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_loglik_shift_preserves_argmin() {
        let logliks = [-40.0, -25.0, -18.0, -16.5, -16.4];
        let ks = [2usize, 4, 6, 9, 13];
        let n = 60;
        for c in Criterion::ALL {
            let pick = |shift: f64| {
                logliks
                    .iter()
                    .zip(ks.iter())
                    .enumerate()
                    .filter_map(|(i, (&l, &k))| score(l + shift, k, n, c).map(|v| (i, v)))
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .map(|(i, _)| i)
            };
            assert_eq!(pick(0.0), pick(123.456));
        }
    }

    #[test]
    fn gamma_grid_shape() {
        let g = gamma_grid(2.0, 2);
        assert_eq!(g, vec![0.0, 2.0]);
        let g = gamma_grid(1.0, 10);
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1e-4).abs() < 1e-12);
        assert!((g[9] - 1.0).abs() < 1e-12);
        for w in g.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert_eq!(gamma_grid(0.0, 10), vec![0.0]);
    }
}
