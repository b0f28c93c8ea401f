use rayon::prelude::*;

use crate::datasets::BenchmarkFixture;
use crate::error::Result;

use super::config::ExperimentConfig;
use super::selection::{candidate_pool, sample_candidates, summarize_runs, Candidate, RunRecord, SelectionSummary};

/// One uniformly drawn architecture per run. Uses the same draw as the first
/// candidate of a selection run with the same seed.
pub fn random_baseline(cfg: &ExperimentConfig, fixture: &BenchmarkFixture) -> Result<(Vec<RunRecord>, SelectionSummary)> {
    baseline(cfg, fixture, "random", 1)
}

/// The best-validation architecture among `n_a` draws per run.
pub fn optimal_baseline(cfg: &ExperimentConfig, fixture: &BenchmarkFixture) -> Result<(Vec<RunRecord>, SelectionSummary)> {
    baseline(cfg, fixture, "optimal", cfg.n_a)
}

fn baseline(
    cfg: &ExperimentConfig,
    fixture: &BenchmarkFixture,
    method: &str,
    n_a: usize,
) -> Result<(Vec<RunRecord>, SelectionSummary)> {
    cfg.validate()?;
    let pool = candidate_pool(fixture, &cfg.dataset, n_a)?;
    let records = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|run_id| {
            let archs = sample_candidates(&pool, n_a, cfg.master_seed, run_id);
            let mut candidates = Vec::with_capacity(n_a);
            let mut best: Option<(usize, f64)> = None;
            for (i, arch) in archs.iter().enumerate() {
                let e = fixture.lookup(arch, &cfg.dataset)?;
                if best.is_none_or(|(_, v)| e.val_acc > v) {
                    best = Some((i, e.val_acc));
                }
                candidates.push(Candidate {
                    arch: *arch,
                    score: Some(e.val_acc),
                });
            }
            let (i, _) = best.expect("n_a >= 1");
            let e = fixture.lookup(&archs[i], &cfg.dataset)?;
            Ok(RunRecord {
                run_id,
                method: method.into(),
                dataset: cfg.dataset.clone(),
                batch_seed: None,
                candidates,
                selected: Some(archs[i]),
                trained_val: Some(e.val_acc),
                trained_test: Some(e.test_acc),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_runs(&records);
    Ok((records, summary))
}
