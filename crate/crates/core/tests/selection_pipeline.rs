//! End-to-end properties of the exploratory sweep.

mod common;

use common::rng;
use rand::Rng;
use sempath::selection::{explore, score, Criterion, ExploreConfig, PathDocument};
use sempath::solver::SolverOptions;
use sempath::synth::{generate_model, generate_samples, sample_covariance, TrialSpec};
use sempath::model::ZeroPattern;

fn quick_config(grid_size: usize) -> ExploreConfig {
    ExploreConfig {
        grid_size,
        solver: SolverOptions { tol: 1e-5, max_iter: 30_000, ..Default::default() },
        ..Default::default()
    }
}

#[test]
fn null_truth_recovers_sparse_models_under_bic() {
    // Data generated from A_true = 0: the BIC pick should carry at most a
    // couple of spurious links, on a majority of trials.
    let mut ok = 0;
    let trials = 12;
    for seed in 0..trials {
        let spec = TrialSpec::new(5, 0.0, 1000, 4000 + seed);
        let model = generate_model(&spec).unwrap();
        let data = generate_samples(&model, spec.n_samples, 9000 + seed).unwrap();
        let s = sample_covariance(&data, true).unwrap();
        let path = explore(&s, spec.n_samples, &ZeroPattern::diagonal(5), &quick_config(12))
            .unwrap();
        let best = path.best_candidate(Criterion::Bic).expect("BIC candidate");
        if best.nnz() <= 2 {
            ok += 1;
        }
    }
    assert!(ok * 2 > trials, "BIC kept a sparse model on only {ok}/{trials} trials");
}

#[test]
fn two_point_grid_has_empty_model_at_gamma_max() {
    let mut r = rng(400);
    let n = 6;
    let spec = TrialSpec::new(n, 0.4, 500, r.gen());
    let model = generate_model(&spec).unwrap();
    let data = generate_samples(&model, spec.n_samples, 77).unwrap();
    let s = sample_covariance(&data, true).unwrap();
    let path = explore(&s, spec.n_samples, &ZeroPattern::diagonal(n), &quick_config(2)).unwrap();
    assert_eq!(path.candidates.len(), 2);
    let last = path.candidates.last().unwrap();
    assert!((last.gamma - path.gamma_max).abs() < 1e-12);
    assert_eq!(last.nnz(), 0, "candidate at gamma_max must have empty support");
    assert_eq!(last.k_eff, n, "only the diagonal noise parameters remain");
    assert_eq!(last.refit.model.a().amax(), 0.0);
}

#[test]
fn stored_scores_recomputable() {
    let mut r = rng(401);
    let n = 5;
    let spec = TrialSpec::new(n, 0.4, 300, r.gen());
    let model = generate_model(&spec).unwrap();
    let data = generate_samples(&model, spec.n_samples, 88).unwrap();
    let s = sample_covariance(&data, true).unwrap();
    let path = explore(&s, spec.n_samples, &ZeroPattern::diagonal(n), &quick_config(8)).unwrap();
    for c in &path.candidates {
        for crit in Criterion::ALL {
            let want = score(c.loglik, c.k_eff, spec.n_samples, crit);
            let got = c.scores[&crit];
            match (want, got) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                _ => panic!("definedness mismatch for {crit}"),
            }
        }
    }
    // gammas strictly increasing, pattern_hat contains the prior
    for w in path.candidates.windows(2) {
        assert!(w[0].gamma < w[1].gamma);
    }
    for c in &path.candidates {
        assert!(c.pattern_hat.is_superset_of(&ZeroPattern::diagonal(n)));
    }
}

#[test]
fn support_nesting_soft_check() {
    // Larger penalties keep at most slack-many more links than smaller ones.
    let mut r = rng(402);
    let n = 10;
    let spec = TrialSpec::new(n, 0.4, 400, r.gen());
    let model = generate_model(&spec).unwrap();
    let data = generate_samples(&model, spec.n_samples, 99).unwrap();
    let s = sample_covariance(&data, true).unwrap();
    let path = explore(&s, spec.n_samples, &ZeroPattern::diagonal(n), &quick_config(15)).unwrap();
    for w in path.candidates.windows(2) {
        assert!(
            w[1].nnz() <= w[0].nnz() + 2,
            "support grew by more than the slack between gamma {:.3e} and {:.3e}",
            w[0].gamma,
            w[1].gamma
        );
    }
}

#[test]
fn path_document_schema() {
    let mut r = rng(403);
    let n = 4;
    let spec = TrialSpec::new(n, 0.5, 200, r.gen());
    let model = generate_model(&spec).unwrap();
    let data = generate_samples(&model, spec.n_samples, 111).unwrap();
    let s = sample_covariance(&data, true).unwrap();
    let path = explore(&s, spec.n_samples, &ZeroPattern::diagonal(n), &quick_config(6)).unwrap();
    let doc = PathDocument::from_path(&path, n, spec.n_samples, 0.5);
    let json = serde_json::to_string_pretty(&doc).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["spec_version"], "1");
    assert_eq!(value["gammas"].as_array().unwrap().len(), path.candidates.len());
    let cand0 = &value["candidates"][0];
    for key in ["gamma", "nnz", "loglik", "k", "scores", "converged"] {
        assert!(cand0.get(key).is_some(), "candidate missing key {key}");
    }
    for crit in ["aic", "aicc", "bic", "kic", "kicc"] {
        assert!(cand0["scores"].get(crit).is_some());
        assert!(value["best"].get(crit).is_some());
    }
    let back: PathDocument = serde_json::from_str(&json).unwrap();
    assert_eq!(back.gammas.len(), doc.gammas.len());
}
