use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{sample_batch, BenchmarkFixture, DatasetBatch, DatasetSplits};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seed_hash, Stream};
use crate::scoring::{graph_for_batch, graph_mellor_score, graph_untrained_stats};
use crate::search_space::{ArchitectureSpec, CellSpec};
use crate::stats::population_mean_std;

use super::config::{ExperimentConfig, ScoreKind};

/// A sampled architecture and its score. `None` marks an undefined score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub arch: CellSpec,
    pub score: Option<f64>,
}

/// One run of a selection method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub method: String,
    pub dataset: String,
    pub batch_seed: Option<u64>,
    pub candidates: Vec<Candidate>,
    pub selected: Option<CellSpec>,
    pub trained_val: Option<f64>,
    pub trained_test: Option<f64>,
}

impl RunRecord {
    pub fn is_skipped(&self) -> bool {
        self.selected.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Population moments of the trained accuracies of the selected
/// architectures; skipped runs are counted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub method: String,
    pub dataset: String,
    pub n_runs: usize,
    pub n_skipped: usize,
    pub val: Option<MeanStd>,
    pub test: Option<MeanStd>,
}

fn moments(xs: &[f64]) -> Option<MeanStd> {
    population_mean_std(xs).ok().map(|(mean, std)| MeanStd { mean, std })
}

/// Summary of records that share one method and dataset (the first record's).
pub fn summarize_runs(records: &[RunRecord]) -> SelectionSummary {
    let val: Vec<f64> = records.iter().filter_map(|r| r.trained_val).collect();
    let test: Vec<f64> = records.iter().filter_map(|r| r.trained_test).collect();
    SelectionSummary {
        method: records.first().map(|r| r.method.clone()).unwrap_or_default(),
        dataset: records.first().map(|r| r.dataset.clone()).unwrap_or_default(),
        n_runs: records.len(),
        n_skipped: records.iter().filter(|r| r.is_skipped()).count(),
        val: moments(&val),
        test: moments(&test),
    }
}

/// Minimum strictly positive score; ties go to the earliest entry.
pub fn select_architecture<T: Clone>(scored: &[(T, f64)]) -> Result<T> {
    let scores: Vec<Option<f64>> = scored.iter().map(|(_, s)| Some(*s)).collect();
    select_by_score(ScoreKind::CvU, &scores)
        .map(|i| scored[i].0.clone())
        .ok_or(Error::NoValidCandidate)
}

/// Index of the winning score: minimum positive CV_U, or maximum defined
/// Jacobian score. Ties go to the earliest entry.
pub fn select_by_score(kind: ScoreKind, scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        let Some(s) = *s else { continue };
        let valid = match kind {
            ScoreKind::CvU => s > 0.0 && s.is_finite(),
            ScoreKind::Mellor => s.is_finite(),
        };
        if !valid {
            continue;
        }
        let better = match (kind, best) {
            (_, None) => true,
            (ScoreKind::CvU, Some((_, b))) => s < b,
            (ScoreKind::Mellor, Some((_, b))) => s > b,
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Scores every candidate on `batch`. Candidate `a` uses the init seeds
/// `seed_hash([master, run, a, i])`.
pub fn score_candidates(
    cfg: &ExperimentConfig,
    run_id: u64,
    candidates: &[CellSpec],
    batch: &DatasetBatch,
) -> Result<Vec<Option<f64>>> {
    candidates
        .par_iter()
        .enumerate()
        .map(|(a, &cell)| {
            let started = Instant::now();
            let graph = graph_for_batch(&ArchitectureSpec::cell(cell, cfg.skeleton), batch)?;
            let built = started.elapsed();
            let base = seed_hash(&[cfg.master_seed, run_id, a as u64]);
            let score = match cfg.score {
                ScoreKind::CvU => {
                    let seeds: Vec<u64> = (0..cfg.n_init as u64).map(|i| derive_seed(base, i)).collect();
                    Some(graph_untrained_stats(&graph, batch, &seeds, cfg.batch_norm)?.cv_u)
                }
                ScoreKind::Mellor => graph_mellor_score(&graph, batch, derive_seed(base, 0), cfg.batch_norm)?.s,
            };
            log::debug!(
                "run {run_id} candidate {a}: instantiate {:.3}s, score {:.3}s",
                built.as_secs_f64(),
                (started.elapsed() - built).as_secs_f64()
            );
            Ok(score)
        })
        .collect()
}

/// Candidate architectures of one run: `n_a` draws from `pool` keyed by
/// `seed_hash([master, run, 1])`.
pub(crate) fn sample_candidates(pool: &[CellSpec], n_a: usize, master_seed: u64, run_id: u64) -> Vec<CellSpec> {
    Stream::new(seed_hash(&[master_seed, run_id, 1]))
        .sample_indices(pool.len(), n_a)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

pub(crate) fn candidate_pool(fixture: &BenchmarkFixture, dataset: &str, n_a: usize) -> Result<Vec<CellSpec>> {
    let pool = fixture.architectures(dataset);
    if pool.len() < n_a {
        return Err(Error::InsufficientData(format!(
            "fixture has {} architectures for {dataset}, {n_a} requested per run",
            pool.len()
        )));
    }
    Ok(pool)
}

/// Runs the score-and-select loop `cfg.n_runs` times. Every candidate of a
/// run is scored on the run's single batch of training images.
pub fn run_selection_experiment(
    cfg: &ExperimentConfig,
    data: &DatasetSplits,
    fixture: &BenchmarkFixture,
) -> Result<(Vec<RunRecord>, SelectionSummary)> {
    cfg.validate()?;
    let pool = candidate_pool(fixture, &cfg.dataset, cfg.n_a)?;
    let transform = cfg.normalization.transform(data);
    let records = (0..cfg.n_runs as u64)
        .into_par_iter()
        .map(|run_id| {
            let started = Instant::now();
            let batch_seed = seed_hash(&[cfg.master_seed, run_id]);
            let batch = sample_batch(&data.train, cfg.n_bs, batch_seed, &transform)?;
            let archs = sample_candidates(&pool, cfg.n_a, cfg.master_seed, run_id);
            let scores = score_candidates(cfg, run_id, &archs, &batch)?;
            let selected = select_by_score(cfg.score, &scores).map(|i| archs[i]);
            let (trained_val, trained_test) = match selected {
                Some(arch) => {
                    let e = fixture.lookup(&arch, &cfg.dataset)?;
                    (Some(e.val_acc), Some(e.test_acc))
                }
                None => {
                    log::warn!("run {run_id}: every candidate scored zero, run skipped");
                    (None, None)
                }
            };
            log::info!("run {run_id} finished in {:.2}s", started.elapsed().as_secs_f64());
            Ok(RunRecord {
                run_id,
                method: cfg.score.method_name().into(),
                dataset: cfg.dataset.clone(),
                batch_seed: Some(batch_seed),
                candidates: archs
                    .into_iter()
                    .zip(scores)
                    .map(|(arch, score)| Candidate { arch, score })
                    .collect(),
                selected,
                trained_val,
                trained_test,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize_runs(&records);
    Ok((records, summary))
}
