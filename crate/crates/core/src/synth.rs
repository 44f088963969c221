//! Synthetic benchmark harness: ground-truth model generation, sampling,
//! support-recovery metrics, ROC sweeps, and the partial-correlation
//! pre-screen used to build zero-pattern priors from data.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::estimator::{fit_sparse, gamma_max, zero_threshold};
use crate::linalg;
use crate::model::{PathModel, ZeroPattern};
use crate::selection::{explore, Criterion, ExploreConfig, SelectionPath};

/// `I - A` draws with a two-norm condition number above this are rejected.
pub const MAX_COND: f64 = 1e3;

const REJECTION_LIMIT: usize = 1000;

/// Configuration of one synthetic trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    /// Fraction of unordered variable pairs carrying one directed edge;
    /// the edge count is `round(density * n(n-1)/2)`.
    pub density: f64,
    /// Sample count.
    pub n_samples: usize,
    /// Noise variance of each error term.
    pub noise_var: f64,
    /// Fraction of the true zero entries revealed to the estimator as prior.
    pub assumed_zero_frac: f64,
    pub seed: u64,
}

impl TrialSpec {
    pub fn new(n: usize, density: f64, n_samples: usize, seed: u64) -> Self {
        TrialSpec { n, density, n_samples, noise_var: 0.1, assumed_zero_frac: 0.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("need at least 2 variables".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidConfig(format!(
                "density must lie in [0,1], got {}",
                self.density
            )));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_var must be positive, got {}",
                self.noise_var
            )));
        }
        if !(0.0..=1.0).contains(&self.assumed_zero_frac) {
            return Err(Error::InvalidConfig(format!(
                "assumed_zero_frac must lie in [0,1], got {}",
                self.assumed_zero_frac
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidConfig("need at least 2 samples".into()));
        }
        Ok(())
    }
}

/// Derives an independent RNG stream from a base seed.
fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draws a ground-truth path model: `round(density * n(n-1)/2)` unordered
/// pairs each carry one directed edge with magnitude uniform in [0.3, 0.9]
/// and random sign; draws are rejected until `I - A` is well-conditioned.
pub fn generate_model(spec: &TrialSpec) -> Result<PathModel> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let k = (spec.density * pairs.len() as f64).round() as usize;

    for _ in 0..REJECTION_LIMIT {
        let mut a = DMatrix::zeros(n, n);
        for idx in index_sample(&mut rng, pairs.len(), k) {
            let (mut i, mut j) = pairs[idx];
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut i, &mut j);
            }
            let magnitude = rng.gen_range(0.3..0.9);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            a[(i, j)] = sign * magnitude;
        }
        let i_minus_a = DMatrix::identity(n, n) - &a;
        if linalg::cond(&i_minus_a) < MAX_COND {
            let pattern = pattern_of_zeros(&a)?;
            let psi = DMatrix::identity(n, n) * spec.noise_var;
            return PathModel::new(a, psi, pattern);
        }
    }
    Err(Error::GenerationRejected { attempts: REJECTION_LIMIT })
}

/// Pattern of exact zeros of a matrix (diagonal included).
pub fn pattern_of_zeros(a: &DMatrix<f64>) -> Result<ZeroPattern> {
    let n = a.nrows();
    let pairs = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| a[(i, j)] == 0.0);
    ZeroPattern::from_pairs(n, pairs)
}

/// Draws `n_samples` rows of `Y = (I - A)^{-1} e`, `e ~ N(0, Psi)`.
/// Deterministic for a fixed seed.
pub fn generate_samples(model: &PathModel, n_samples: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi_sqrt = linalg::spectral_map(model.psi(), |v| v.max(0.0).sqrt())?;
    let lu = (DMatrix::identity(n, n) - model.a()).lu();
    let mut data = DMatrix::zeros(n_samples, n);
    let mut g = nalgebra::DVector::zeros(n);
    for row in 0..n_samples {
        for k in 0..n {
            g[k] = StandardNormal.sample(&mut rng);
        }
        let e = &psi_sqrt * &g;
        let y = lu.solve(&e).ok_or_else(|| Error::Singular("I - A while sampling".into()))?;
        data.row_mut(row).copy_from(&y.transpose());
    }
    Ok(data)
}

/// Sample covariance with `1/(N-1)` normalization, optionally mean-centered.
pub fn sample_covariance(data: &DMatrix<f64>, center: bool) -> Result<DMatrix<f64>> {
    let (rows, cols) = data.shape();
    if rows < 2 {
        return Err(Error::InvalidConfig("need at least 2 rows for a covariance".into()));
    }
    let centered = if center {
        let mean = data.row_mean();
        DMatrix::from_fn(rows, cols, |i, j| data[(i, j)] - mean[j])
    } else {
        data.clone()
    };
    Ok(centered.transpose() * centered / (rows as f64 - 1.0))
}

/// Reveals a fraction of the true zeros as a prior pattern (plus diagonal).
pub fn reveal_zeros(a_true: &DMatrix<f64>, frac: f64, seed: u64) -> Result<ZeroPattern> {
    let n = a_true.nrows();
    let zeros: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && a_true[(i, j)] == 0.0)
        .collect();
    let k = (frac * zeros.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pattern = ZeroPattern::diagonal(n);
    if k > 0 {
        for idx in index_sample(&mut rng, zeros.len(), k) {
            let (i, j) = zeros[idx];
            pattern.insert(i, j)?;
        }
    }
    Ok(pattern)
}

/// Entrywise support-recovery counts over off-diagonal entries outside the
/// prior pattern. Positives are nonzero entries of the truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn evaluated(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn total_error(&self) -> usize {
        self.fp + self.fn_
    }

    /// TP / (TP + FN); zero when there are no positives.
    pub fn tp_rate(&self) -> f64 {
        let denom = self.tp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            self.tp as f64 / denom as f64
        }
    }

    /// FP / (FP + TN); zero when there are no negatives.
    pub fn fp_rate(&self) -> f64 {
        let denom = self.fp + self.tn;
        if denom == 0 {
            0.0
        } else {
            self.fp as f64 / denom as f64
        }
    }
}

/// Compares an estimated path matrix against the truth; entries with
/// `|A_hat| > eps_zero` count as predicted positives.
pub fn confusion(
    a_hat: &DMatrix<f64>,
    a_true: &DMatrix<f64>,
    prior: &ZeroPattern,
    eps_zero: f64,
) -> Result<ConfusionCounts> {
    let n = prior.n();
    if a_hat.nrows() != n || a_true.nrows() != n || a_hat.ncols() != n || a_true.ncols() != n {
        return Err(Error::DimensionMismatch("confusion inputs".into()));
    }
    let mut c = ConfusionCounts::default();
    for i in 0..n {
        for j in 0..n {
            if i == j || prior.contains(i, j) {
                continue;
            }
            tally(&mut c, a_hat[(i, j)].abs() > eps_zero, a_true[(i, j)] != 0.0);
        }
    }
    Ok(c)
}

/// Same counts, with the prediction given structurally: entries outside
/// `support_pattern` are the predicted nonzeros.
pub fn confusion_from_support(
    support_pattern: &ZeroPattern,
    a_true: &DMatrix<f64>,
    prior: &ZeroPattern,
) -> Result<ConfusionCounts> {
    let n = prior.n();
    if a_true.nrows() != n || support_pattern.n() != n {
        return Err(Error::DimensionMismatch("confusion inputs".into()));
    }
    let mut c = ConfusionCounts::default();
    for i in 0..n {
        for j in 0..n {
            if i == j || prior.contains(i, j) {
                continue;
            }
            tally(&mut c, !support_pattern.contains(i, j), a_true[(i, j)] != 0.0);
        }
    }
    Ok(c)
}

fn tally(c: &mut ConfusionCounts, predicted: bool, actual: bool) {
    match (predicted, actual) {
        (true, true) => c.tp += 1,
        (true, false) => c.fp += 1,
        (false, true) => c.fn_ += 1,
        (false, false) => c.tn += 1,
    }
}

/// One point of an ROC sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RocPoint {
    pub gamma: f64,
    pub fp_rate: f64,
    pub tp_rate: f64,
    pub counts: ConfusionCounts,
}

/// Sweeps the sparse fit over `gamma = fraction * gamma_max` and reports one
/// confusion per point, ordered by gamma. Using fractions keeps points
/// index-aligned across trials so curves can be averaged pointwise.
pub fn roc_sweep(
    spec: &TrialSpec,
    gamma_fractions: &[f64],
    opts: &crate::solver::SolverOptions,
) -> Result<Vec<RocPoint>> {
    let model = generate_model(spec)?;
    let data = generate_samples(&model, spec.n_samples, stream_seed(spec.seed, 1))?;
    let s = sample_covariance(&data, true)?;
    let prior = reveal_zeros(model.a(), spec.assumed_zero_frac, stream_seed(spec.seed, 2))?;
    let alpha = linalg::lambda_min(&s)?;
    let gm = gamma_max(&s, alpha, &prior);

    let mut fractions: Vec<f64> = gamma_fractions.to_vec();
    fractions.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let points: Result<Vec<RocPoint>> = fractions
        .par_iter()
        .map(|&f| {
            let gamma = f * gm;
            let fit = fit_sparse(&s, alpha, gamma, &prior, opts)?;
            let eps = zero_threshold(fit.model.a());
            let counts = confusion(fit.model.a(), model.a(), &prior, eps)?;
            Ok(RocPoint { gamma, fp_rate: counts.fp_rate(), tp_rate: counts.tp_rate(), counts })
        })
        .collect();
    points
}

/// Pattern of insignificant partial correlations: `Theta = S^{-1}`,
/// `r_ij = -Theta_ij / sqrt(Theta_ii Theta_jj)`, two-sided t test with
/// `N - n` degrees of freedom. Pairs whose p-value is not below the
/// significance level join the returned pattern (both directions).
pub fn partial_corr_screen(
    s: &DMatrix<f64>,
    n_samples: usize,
    significance: f64,
) -> Result<ZeroPattern> {
    let n = s.nrows();
    if n_samples <= n + 2 {
        return Err(Error::InvalidConfig(format!(
            "partial-correlation screen needs N > n + 2 (N = {n_samples}, n = {n})"
        )));
    }
    if !(0.0..=1.0).contains(&significance) {
        return Err(Error::InvalidConfig(format!(
            "significance must lie in [0,1], got {significance}"
        )));
    }
    let theta = linalg::inverse_pd(s)?;
    let df = (n_samples - n) as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::InvalidConfig(format!("t distribution: {e}")))?;
    let mut pattern = ZeroPattern::diagonal(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = -theta[(i, j)] / (theta[(i, i)] * theta[(j, j)]).sqrt();
            let significant = if r.abs() >= 1.0 {
                true
            } else {
                let t = r * (df / (1.0 - r * r)).sqrt();
                let p = 2.0 * (1.0 - t_dist.cdf(t.abs()));
                p < significance
            };
            if !significant {
                pattern.insert(i, j)?;
                pattern.insert(j, i)?;
            }
        }
    }
    Ok(pattern)
}

/// Per-candidate outcome of one benchmark trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateOutcome {
    pub gamma: f64,
    pub counts: ConfusionCounts,
    pub loglik: f64,
    pub k: usize,
    pub scores: BTreeMap<String, Option<f64>>,
    pub converged: bool,
}

/// Outcome of one benchmark trial: the swept candidates and, per criterion,
/// the selected candidate with its support-recovery counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub gamma_max: f64,
    pub true_nnz: usize,
    pub candidates: Vec<CandidateOutcome>,
    pub best: BTreeMap<String, CandidateOutcome>,
}

/// Runs one full exploratory trial: generate truth, sample, screen nothing,
/// sweep, and score recovery of each candidate and of the per-criterion best.
pub fn bench_trial(spec: &TrialSpec, config: &ExploreConfig) -> Result<TrialOutcome> {
    let model = generate_model(spec)?;
    let data = generate_samples(&model, spec.n_samples, stream_seed(spec.seed, 1))?;
    let s = sample_covariance(&data, true)?;
    let prior = reveal_zeros(model.a(), spec.assumed_zero_frac, stream_seed(spec.seed, 2))?;
    let path = explore(&s, spec.n_samples, &prior, config)?;
    trial_outcome(spec, &model, &prior, &path)
}

fn trial_outcome(
    spec: &TrialSpec,
    model: &PathModel,
    prior: &ZeroPattern,
    path: &SelectionPath,
) -> Result<TrialOutcome> {
    let outcome_of = |c: &crate::selection::Candidate| -> Result<CandidateOutcome> {
        let counts = confusion_from_support(&c.pattern_hat, model.a(), prior)?;
        Ok(CandidateOutcome {
            gamma: c.gamma,
            counts,
            loglik: c.loglik,
            k: c.k_eff,
            scores: c.scores.iter().map(|(crit, v)| (crit.to_string(), *v)).collect(),
            converged: c.converged,
        })
    };
    let candidates: Result<Vec<_>> = path.candidates.iter().map(outcome_of).collect();
    let mut best = BTreeMap::new();
    for c in Criterion::ALL {
        if let Some(cand) = path.best_candidate(c) {
            best.insert(c.to_string(), outcome_of(cand)?);
        }
    }
    Ok(TrialOutcome {
        seed: spec.seed,
        gamma_max: path.gamma_max,
        true_nnz: model.nnz(),
        candidates: candidates?,
        best,
    })
}
