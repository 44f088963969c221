//! Consensus-form proximal splitting drivers.
//!
//! Both algorithms minimize `f1 + f2 + f3` over the product space
//! `(X_1, X_2, X_3)` subject to `X_1 = X_2 = X_3`, where `f1` is the smooth
//! log-det fit term plus the spectral box, `f2` the penalized/pinned path
//! block, and `f3` the PSD-cone indicator. Problems are scaled by
//! `beta = 1/lambda_min(S)` before solving (and the solution mapped back)
//! unless the caller opts out; the proximal weight defaults to `beta`,
//! i.e. 1 on the scaled problem.
//!
//! Stopping combines the relative change of the cost objective and of the
//! solution with, for ADMM, the relative primal/dual residual norms; the
//! reported convergence measure is the max of the active family.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::lowrank_gap;
use crate::linalg;
use crate::model::{project_complement, BlockVariable, Problem};
use crate::prox::{prox_l1_pattern, prox_logdet_box, prox_psd, ProxParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Admm,
    Ppxa,
}

/// Proximal weight selection; `Auto` resolves to `1/lambda_min(S)` of the
/// problem actually handed to the iteration (so 1.0 after scaling).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub algorithm: Algorithm,
    pub rho: Rho,
    /// PPXA step parameter (the prox scaling, not the l1 penalty).
    pub ppxa_gamma: f64,
    /// PPXA relaxation, must lie in (0, 2).
    pub ppxa_lambda: f64,
    /// Relative-change stopping threshold.
    pub tol: f64,
    pub max_iter: usize,
    /// Scale the problem to `lambda_min(S) = 1` before iterating.
    pub scale: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            algorithm: Algorithm::Admm,
            rho: Rho::Auto,
            ppxa_gamma: 0.1,
            ppxa_lambda: 1.8,
            tol: 1e-5,
            max_iter: 10_000,
            scale: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if let Rho::Fixed(r) = self.rho {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidConfig(format!("rho must be positive, got {r}")));
            }
        }
        if !(self.ppxa_gamma > 0.0) || !self.ppxa_gamma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ppxa_gamma must be positive, got {}",
                self.ppxa_gamma
            )));
        }
        if !(self.ppxa_lambda > 0.0 && self.ppxa_lambda < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "ppxa_lambda must lie in (0, 2), got {}",
                self.ppxa_lambda
            )));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scaled residuals of the four KKT condition groups. Pure diagnostics;
/// all entries are nonnegative and zero at an exact primal/dual pair.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct KktDiagnostics {
    /// `||X1 - (S - Z1)^{-1}||_F`, scaled by `max(1, ||X1||_F)`.
    pub stationarity: f64,
    /// Largest PSD/box violation of the primal blocks.
    pub primal_feas: f64,
    /// `max(0, ||P^c(Z2)||_inf - gamma)` and the PSD violation of `Z`.
    pub dual_feas: f64,
    /// Scaled norms of `Z X` and `Z4 (X4 - alpha I)`.
    pub comp_slack: f64,
}

impl KktDiagnostics {
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_feas)
            .max(self.dual_feas)
            .max(self.comp_slack)
    }
}

/// Outcome of one solve: the primal blocks, a dual (multiplier or estimate),
/// and convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: BlockVariable,
    pub z_dual: BlockVariable,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Per-iteration convergence measure of the internal (scaled) run.
    pub residual_history: Vec<f64>,
    /// Per-iteration objective of the internal (scaled) run.
    pub objective_history: Vec<f64>,
    pub kkt: KktDiagnostics,
    /// `||X1 - X2^T X4^{-1} X2||_F / ||X1||_F`; infinite when X4 is singular.
    pub lowrank_gap: f64,
    /// True when `z_dual` was reconstructed from stationarity rather than
    /// taken from algorithm multipliers (PPXA has no dual iterates).
    pub dual_is_estimate: bool,
}

/// Primal objective `-logdet X1 + tr(S X1) + 2 gamma sum |off-pattern X2|`.
/// NaN when `X1` is not positive definite.
pub fn primal_objective(problem: &Problem, x: &BlockVariable) -> f64 {
    let ld = match linalg::logdet_pd(&x.x1) {
        Some(v) => v,
        None => return f64::NAN,
    };
    let mut pen = 0.0;
    if problem.gamma() > 0.0 {
        for (i, j) in problem.pattern().complement_entries() {
            pen += x.x2[(i, j)].abs();
        }
        pen *= 2.0 * problem.gamma();
    }
    -ld + linalg::trace_prod(problem.s(), &x.x1) + pen
}

/// Dual objective `logdet(S - Z1) - 2 tr(Z2) - alpha tr(Z4) + n`;
/// negative infinity when `S - Z1` is not positive definite.
pub fn dual_objective(problem: &Problem, z: &BlockVariable) -> f64 {
    let m = problem.s() - &z.x1;
    match linalg::logdet_pd(&m) {
        Some(ld) => {
            ld - 2.0 * z.x2.trace() - problem.alpha() * z.x4.trace() + problem.n() as f64
        }
        None => f64::NEG_INFINITY,
    }
}

/// Rescales a problem by `beta = 1/lambda_min(S)` so the scaled covariance
/// has unit minimum eigenvalue. The penalty is scale invariant and stays.
pub fn scale_problem(problem: &Problem) -> Result<(Problem, f64)> {
    let lmin = linalg::lambda_min(problem.s())?;
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!(
            "cannot scale: lambda_min(S) = {lmin:.3e}"
        )));
    }
    let beta = 1.0 / lmin;
    let scaled = Problem::new(
        problem.s() * beta,
        problem.alpha() * beta,
        problem.gamma(),
        problem.pattern().clone(),
    )?;
    Ok((scaled, beta))
}

/// Maps a solution of the scaled problem back to the original one:
/// `X1 = beta X1~, X2 = X2~, X4 = X4~/beta` and the inverse map on the dual.
pub fn unscale_solution(
    x_scaled: &BlockVariable,
    z_scaled: &BlockVariable,
    beta: f64,
) -> (BlockVariable, BlockVariable) {
    let x = BlockVariable {
        x1: &x_scaled.x1 * beta,
        x2: x_scaled.x2.clone(),
        x4: &x_scaled.x4 / beta,
    };
    let z = BlockVariable {
        x1: &z_scaled.x1 / beta,
        x2: z_scaled.x2.clone(),
        x4: &z_scaled.x4 * beta,
    };
    (x, z)
}

/// Forward map of the scaling proposition, used in tests and by callers that
/// solve the raw problem but want the scaled solution.
pub fn scale_solution(
    x: &BlockVariable,
    z: &BlockVariable,
    beta: f64,
) -> (BlockVariable, BlockVariable) {
    unscale_solution(x, z, 1.0 / beta)
}

/// Residuals of the KKT conditions at `(x, z)` for the given problem.
pub fn kkt_check(problem: &Problem, x: &BlockVariable, z: &BlockVariable) -> KktDiagnostics {
    let alpha = problem.alpha();

    let stationarity = match (problem.s() - &z.x1).cholesky() {
        Some(chol) => {
            let inv = chol.inverse();
            (&x.x1 - inv).norm() / x.x1.norm().max(1.0)
        }
        None => f64::INFINITY,
    };

    let lmin_x = linalg::lambda_min(&x.assemble()).unwrap_or(f64::NEG_INFINITY);
    let (x4_vals, _) = match linalg::sym_eigen(&x.x4) {
        Ok(v) => v,
        Err(_) => return infinite_kkt(),
    };
    let primal_feas = (-lmin_x)
        .max(-x4_vals.min())
        .max(x4_vals.max() - alpha)
        .max(0.0);

    let pc_z2 = project_complement(&z.x2, problem.pattern())
        .map(|m| m.amax())
        .unwrap_or(f64::INFINITY);
    let lmin_z = linalg::lambda_min(&z.assemble()).unwrap_or(f64::NEG_INFINITY);
    let dual_feas = (pc_z2 - problem.gamma()).max(-lmin_z).max(0.0);

    let za = z.assemble();
    let xa = x.assemble();
    let zx = (&za * &xa).norm() / (za.norm() * xa.norm()).max(1.0);
    let slack4 = &x.x4 - DMatrix::identity(problem.n(), problem.n()) * alpha;
    let z4s = (&z.x4 * &slack4).norm() / (z.x4.norm() * slack4.norm()).max(1.0);
    let comp_slack = zx.max(z4s);

    KktDiagnostics { stationarity, primal_feas, dual_feas, comp_slack }
}

fn infinite_kkt() -> KktDiagnostics {
    KktDiagnostics {
        stationarity: f64::INFINITY,
        primal_feas: f64::INFINITY,
        dual_feas: f64::INFINITY,
        comp_slack: f64::INFINITY,
    }
}

/// Solves the problem with the configured algorithm. With `gamma = 0` this is
/// the confirmatory program; with `gamma > 0` the sparse one.
pub fn solve(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    let lmin = linalg::lambda_min(problem.s())?;
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("lambda_min(S) = {lmin:.3e}")));
    }

    let (work_problem, beta) = if opts.scale {
        scale_problem(problem)?
    } else {
        (problem.clone(), 1.0)
    };
    // beta of the problem handed to the iteration
    let auto_rho = if opts.scale { 1.0 } else { 1.0 / lmin };
    let rho = match opts.rho {
        Rho::Auto => auto_rho,
        Rho::Fixed(r) => r,
    };

    let core = match opts.algorithm {
        Algorithm::Admm => run_admm(&work_problem, rho, opts)?,
        Algorithm::Ppxa => run_ppxa(&work_problem, opts)?,
    };

    let (mut x, z_dual) = if opts.scale {
        unscale_solution(&core.x, &core.z_dual, beta)
    } else {
        (core.x, core.z_dual)
    };
    enforce_pattern(&mut x, problem);

    let kkt = kkt_check(problem, &x, &z_dual);
    let gap = lowrank_gap(&x).unwrap_or(f64::INFINITY);

    Ok(SolveReport {
        objective: primal_objective(problem, &x),
        x,
        z_dual,
        iterations: core.iterations,
        converged: core.converged,
        residual_history: core.residual_history,
        objective_history: core.objective_history,
        kkt,
        lowrank_gap: gap,
        dual_is_estimate: core.dual_is_estimate,
    })
}

/// Convenience wrapper pinning the algorithm to ADMM.
pub fn solve_admm(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    let opts = SolverOptions { algorithm: Algorithm::Admm, ..opts.clone() };
    solve(problem, &opts)
}

/// Convenience wrapper pinning the algorithm to PPXA.
pub fn solve_ppxa(problem: &Problem, opts: &SolverOptions) -> Result<SolveReport> {
    let opts = SolverOptions { algorithm: Algorithm::Ppxa, ..opts.clone() };
    solve(problem, &opts)
}

/// Pattern entries of the path block are constraints, not estimates; pin them
/// exactly on the returned iterate.
fn enforce_pattern(x: &mut BlockVariable, problem: &Problem) {
    for (i, j) in problem.pattern().entries() {
        x.x2[(i, j)] = if i == j { 1.0 } else { 0.0 };
    }
}

struct CoreResult {
    x: BlockVariable,
    z_dual: BlockVariable,
    iterations: usize,
    converged: bool,
    residual_history: Vec<f64>,
    objective_history: Vec<f64>,
    dual_is_estimate: bool,
}

fn initial_point(problem: &Problem) -> Result<BlockVariable> {
    let n = problem.n();
    let s_inv = linalg::inverse_pd(problem.s())?;
    Ok(BlockVariable {
        x1: s_inv,
        x2: DMatrix::zeros(n, n),
        x4: DMatrix::identity(n, n) * problem.alpha(),
    })
}

fn prox_params(problem: &Problem, rho: f64) -> ProxParams {
    ProxParams {
        rho,
        gamma: problem.gamma(),
        alpha: problem.alpha(),
        s: problem.s().clone(),
        pattern: problem.pattern().clone(),
    }
}

fn apply_prox(i: usize, v: &BlockVariable, params: &ProxParams) -> Result<BlockVariable> {
    match i {
        0 => prox_logdet_box(v, params),
        1 => {
            let out = prox_l1_pattern(v, params);
            debug_assert!(
                params.pattern.entries().all(|(r, c)| {
                    out.x2[(r, c)] == if r == c { 1.0 } else { 0.0 }
                }),
                "pattern block must be pinned from the first iteration"
            );
            Ok(out)
        }
        _ => prox_psd(v),
    }
}

fn rel_change(curr: f64, prev: f64) -> f64 {
    if curr.is_finite() && prev.is_finite() {
        (curr - prev).abs() / prev.abs().max(1.0)
    } else {
        f64::INFINITY
    }
}

fn run_admm(problem: &Problem, rho: f64, opts: &SolverOptions) -> Result<CoreResult> {
    let x0 = initial_point(problem)?;
    let params = prox_params(problem, rho);

    let mut xs = [x0.clone(), x0.clone(), x0.clone()];
    let mut z = x0;
    let mut ys = [
        BlockVariable::zeros(problem.n()),
        BlockVariable::zeros(problem.n()),
        BlockVariable::zeros(problem.n()),
    ];

    let mut residual_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut obj_prev = primal_objective(problem, &z);
    let mut converged = false;
    let mut iterations = 0;
    let mut best: Option<(f64, BlockVariable, BlockVariable)> = None;

    for it in 1..=opts.max_iter {
        iterations = it;
        let z_old = z.clone();

        for i in 0..3 {
            let mut v = z.clone();
            v.axpy(-1.0 / rho, &ys[i]);
            xs[i] = apply_prox(i, &v, &params)?;
        }
        z = xs[0].add(&xs[1]).add(&xs[2]).scaled(1.0 / 3.0);
        for i in 0..3 {
            let diff = xs[i].sub(&z);
            ys[i].axpy(rho, &diff);
        }

        let primal_res =
            (0..3).map(|i| xs[i].sub(&z).norm().powi(2)).sum::<f64>().sqrt();
        let x_scale = (0..3).map(|i| xs[i].norm().powi(2)).sum::<f64>().sqrt();
        let z_scale = 3f64.sqrt() * z.norm();
        let dual_res = rho * 3f64.sqrt() * z.sub(&z_old).norm();
        let y_scale = (0..3).map(|i| ys[i].norm().powi(2)).sum::<f64>().sqrt();

        let obj = primal_objective(problem, &z);
        let conv = (primal_res / x_scale.max(z_scale).max(1.0))
            .max(dual_res / y_scale.max(1.0))
            .max(rel_change(obj, obj_prev))
            .max(z.sub(&z_old).norm() / z_old.norm().max(1.0));
        residual_history.push(conv);
        objective_history.push(obj);
        obj_prev = obj;

        if best.as_ref().map_or(true, |(b, _, _)| conv < *b) {
            best = Some((conv, z.clone(), ys[2].clone()));
        }
        if conv <= opts.tol {
            converged = true;
            break;
        }
    }

    // The SDP dual variable is the multiplier attached to the PSD block.
    let (x, z_dual) = if converged {
        (z, ys[2].clone())
    } else {
        let (_, bx, bz) = best.expect("at least one iteration ran");
        (bx, bz)
    };

    Ok(CoreResult {
        x,
        z_dual,
        iterations,
        converged,
        residual_history,
        objective_history,
        dual_is_estimate: false,
    })
}

fn run_ppxa(problem: &Problem, opts: &SolverOptions) -> Result<CoreResult> {
    let x0 = initial_point(problem)?;
    // prox_{gamma_p f_i / omega_i} with omega_i = 1/3 is a prox with weight
    // rho_eff = omega_i / gamma_p.
    let rho_eff = (1.0 / 3.0) / opts.ppxa_gamma;
    let params = prox_params(problem, rho_eff);
    let lambda = opts.ppxa_lambda;

    let mut ys = [x0.clone(), x0.clone(), x0.clone()];
    let mut x = x0;

    let mut residual_history = Vec::new();
    let mut objective_history = Vec::new();
    let mut obj_prev = primal_objective(problem, &x);
    let mut converged = false;
    let mut iterations = 0;
    let mut best: Option<(f64, BlockVariable)> = None;

    for it in 1..=opts.max_iter {
        iterations = it;
        let ps = [
            apply_prox(0, &ys[0], &params)?,
            apply_prox(1, &ys[1], &params)?,
            apply_prox(2, &ys[2], &params)?,
        ];
        let p_bar = ps[0].add(&ps[1]).add(&ps[2]).scaled(1.0 / 3.0);
        for i in 0..3 {
            // y_i += lambda (2 p_bar - x - p_i), with the p_i just computed
            let mut upd = p_bar.scaled(2.0);
            upd.axpy(-1.0, &x);
            upd.axpy(-1.0, &ps[i]);
            ys[i].axpy(lambda, &upd);
        }
        let mut x_new = x.clone();
        x_new.axpy(lambda, &p_bar.sub(&x));

        let obj = primal_objective(problem, &x_new);
        let conv = rel_change(obj, obj_prev)
            .max(x_new.sub(&x).norm() / x.norm().max(1.0));
        residual_history.push(conv);
        objective_history.push(obj);
        obj_prev = obj;
        x = x_new;

        if best.as_ref().map_or(true, |(b, _)| conv < *b) {
            best = Some((conv, x.clone()));
        }
        if conv <= opts.tol {
            converged = true;
            break;
        }
    }

    let x = if converged {
        x
    } else {
        best.expect("at least one iteration ran").1
    };
    let z_dual = recover_dual_from_stationarity(problem, &x);

    Ok(CoreResult {
        x,
        z_dual,
        iterations,
        converged,
        residual_history,
        objective_history,
        dual_is_estimate: true,
    })
}

/// Dual estimate from the stationarity relation `Z1 = S - X1^{-1}` and the
/// left block column of the slackness system `Z X = 0`:
/// `X2^T Z2 = -X1 Z1` and `Z4 X2 = -Z2 X1`. Given an exact primal and an
/// invertible path block these determine the true dual; at solver accuracy
/// they give a diagnostic estimate.
fn recover_dual_from_stationarity(problem: &Problem, x: &BlockVariable) -> BlockVariable {
    let n = problem.n();
    let zero = BlockVariable::zeros(n);
    let x1_inv = match linalg::inverse_pd(&x.x1) {
        Ok(m) => m,
        Err(_) => return zero,
    };
    let z1 = linalg::symmetrize(&(problem.s() - x1_inv));
    let x2t_lu = x.x2.transpose().lu();
    let z2 = match x2t_lu.solve(&(-(&x.x1 * &z1))) {
        Some(sol) => sol,
        None => {
            return BlockVariable { x1: z1, x2: DMatrix::zeros(n, n), x4: DMatrix::zeros(n, n) }
        }
    };
    // Z4 = -Z2 X1 X2^{-1}, via X2^T Z4^T = -(Z2 X1)^T
    let z4 = match x2t_lu.solve(&(-(&x.x1 * z2.transpose()))) {
        Some(sol) => linalg::symmetrize(&sol.transpose()),
        None => DMatrix::zeros(n, n),
    };
    BlockVariable { x1: z1, x2: z2, x4: z4 }
}
