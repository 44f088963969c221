//! Shared helpers for the integration suites.
#![allow(dead_code)] // each suite uses a subset

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use sempath::model::BlockVariable;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample covariance of `samples` i.i.d. standard-normal draws; `samples`
/// controls the eigenvalue spread (few samples = ill-conditioned).
pub fn gaussian_covariance(n: usize, samples: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g: DMatrix<f64> =
        DMatrix::from_fn(samples, n, |_, _| rand_distr::StandardNormal.sample(rng));
    let mean = g.row_mean();
    let centered = DMatrix::from_fn(samples, n, |i, j| g[(i, j)] - mean[j]);
    centered.transpose() * centered / (samples as f64 - 1.0)
}

/// Generic random SPD matrix with moderate spread.
pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    gaussian_covariance(n, 3 * n, rng)
}

pub fn random_block(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> BlockVariable {
    let r = |rng: &mut ChaCha8Rng| DMatrix::from_fn(n, n, |_, _| rng.gen_range(-scale..scale));
    let x1 = r(rng);
    let x2 = r(rng);
    let x4 = r(rng);
    BlockVariable {
        x1: (&x1 + x1.transpose()) * 0.5,
        x2,
        x4: (&x4 + x4.transpose()) * 0.5,
    }
}

/// Randomized feasibility search for the trivial-solution system at a given
/// `alpha`. With `X1 = S^{-1}` fixed, the noise block's best choice is
/// `alpha I`, so the system is feasible iff some matrix `M` with unit
/// diagonal satisfies `S^{-1} - (1/alpha) M^T M >= -tol`. Random starts plus
/// coordinate descent over the off-diagonal entries.
pub fn trivial_feasibility_search(
    s: &DMatrix<f64>,
    alpha: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
    tries: usize,
) -> bool {
    let n = s.nrows();
    let s_inv = sempath::linalg::inverse_pd(s).expect("S is PD");
    let violation = |m: &DMatrix<f64>| -> f64 {
        let gap = &s_inv - (m.transpose() * m) / alpha;
        -sempath::linalg::lambda_min(&gap).unwrap()
    };
    let off: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j)
        .collect();

    let mut candidates: Vec<DMatrix<f64>> = vec![DMatrix::identity(n, n)];
    for _ in 0..tries {
        let mut m = DMatrix::identity(n, n);
        for &(i, j) in &off {
            m[(i, j)] = rng.gen_range(-1.5..1.5);
        }
        candidates.push(m);
    }
    for mut m in candidates {
        let mut v = violation(&m);
        if v <= tol {
            return true;
        }
        let mut step = 0.5;
        for _ in 0..60 {
            let mut improved = false;
            for &(i, j) in &off {
                for dir in [-1.0, 1.0] {
                    let old = m[(i, j)];
                    m[(i, j)] = old + dir * step;
                    let cand = violation(&m);
                    if cand < v {
                        v = cand;
                        improved = true;
                    } else {
                        m[(i, j)] = old;
                    }
                }
            }
            if v <= tol {
                return true;
            }
            if !improved {
                step *= 0.5;
                if step < 1e-6 {
                    break;
                }
            }
        }
    }
    false
}
