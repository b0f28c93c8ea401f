//! Untrained-accuracy statistics, the CV_U score and the Jacobian
//! correlation score.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::DatasetBatch;
use crate::error::{Error, Result};
use crate::nn::{argmax_rows, BatchNormMode, Graph, NetworkInstance, Tensor};
use crate::rng::derive_seed;
use crate::search_space::{instantiate_network, ArchitectureSpec};
use crate::stats::population_mean_std;

/// Stability constant of the Jacobian score.
pub const MELLOR_K: f64 = 1e-5;

/// Untrained accuracies over initialisations and their population moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UntrainedStats {
    pub accuracies: Vec<f64>,
    pub mu_u: f64,
    pub sigma_u: f64,
    pub cv_u: f64,
}

impl UntrainedStats {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Result<Self> {
        let (mu_u, sigma_u) = population_mean_std(&accuracies)?;
        let cv_u = if mu_u == 0.0 { 0.0 } else { sigma_u / mu_u };
        Ok(UntrainedStats {
            accuracies,
            mu_u,
            sigma_u,
            cv_u,
        })
    }

    /// Zero score: excluded from selection.
    pub fn is_degenerate(&self) -> bool {
        self.cv_u <= 0.0
    }
}

/// Graph for `spec` sized to the batch's images and classes.
pub fn graph_for_batch(spec: &ArchitectureSpec, batch: &DatasetBatch) -> Result<Arc<Graph>> {
    let shape = batch.pixels.shape();
    if shape.len() != 4 {
        return Err(Error::Dimension {
            expected: vec![batch.len(), 0, 0, 0],
            actual: shape.to_vec(),
        });
    }
    instantiate_network(spec, batch.classes, [shape[1], shape[2], shape[3]])
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = argmax_rows(logits)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len() as f64
}

/// Accuracy of a fresh initialisation of `graph` on `batch`.
pub fn graph_untrained_accuracy(
    graph: &Arc<Graph>,
    batch: &DatasetBatch,
    init_seed: u64,
    bn_mode: BatchNormMode,
) -> Result<f64> {
    let net = NetworkInstance::new(Arc::clone(graph), init_seed)?.with_batch_norm_mode(bn_mode);
    let logits = net.forward(&batch.pixels)?;
    Ok(accuracy(&logits, &batch.labels))
}

pub fn untrained_accuracy(spec: &ArchitectureSpec, batch: &DatasetBatch, init_seed: u64) -> Result<f64> {
    let graph = graph_for_batch(spec, batch)?;
    graph_untrained_accuracy(&graph, batch, init_seed, BatchNormMode::default())
}

/// One forward pass per seed, in parallel; results keep the seed order.
pub fn graph_untrained_stats(
    graph: &Arc<Graph>,
    batch: &DatasetBatch,
    init_seeds: &[u64],
    bn_mode: BatchNormMode,
) -> Result<UntrainedStats> {
    let accuracies = init_seeds
        .par_iter()
        .map(|&s| graph_untrained_accuracy(graph, batch, s, bn_mode))
        .collect::<Result<Vec<_>>>()?;
    UntrainedStats::from_accuracies(accuracies)
}

/// Initialisation `i` uses `derive_seed(base_seed, i)`.
pub fn untrained_stats(
    spec: &ArchitectureSpec,
    batch: &DatasetBatch,
    n_init: usize,
    base_seed: u64,
) -> Result<UntrainedStats> {
    if n_init == 0 {
        return Err(Error::OutOfRange {
            what: "n_init",
            value: "0".into(),
            allowed: ">= 1".into(),
        });
    }
    let graph = graph_for_batch(spec, batch)?;
    let seeds: Vec<u64> = (0..n_init as u64).map(|i| derive_seed(base_seed, i)).collect();
    graph_untrained_stats(&graph, batch, &seeds, BatchNormMode::default())
}

/// `sigma_u / mu_u`; lower is better.
pub fn cv_score(stats: &UntrainedStats) -> f64 {
    stats.cv_u
}

/// Spectrum of the Jacobian correlation matrix and the score built from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianScore {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Higher is better. `None` when degenerate.
    pub s: Option<f64>,
    pub k: f64,
    /// Some Jacobian row had zero variance, so the correlation is undefined.
    pub degenerate: bool,
}

/// `-sum(log(e + k) + 1 / (e + k))`. Eigenvalues below zero are rounding
/// noise of a positive semidefinite matrix and are clamped to zero.
pub fn mellor_from_eigenvalues(eigenvalues: &[f64], k: f64) -> f64 {
    -eigenvalues
        .iter()
        .map(|&e| {
            let v = e.max(0.0) + k;
            v.ln() + 1.0 / v
        })
        .sum::<f64>()
}

/// Row-correlation matrix of `jacobian` (`[n, d]`), or `None` when a row has
/// zero variance.
pub fn jacobian_correlation(jacobian: &Tensor) -> Option<DMatrix<f64>> {
    let (n, d) = (jacobian.rows(), jacobian.row_len());
    let mut centred: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = jacobian.row(i);
        let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / d as f64;
        let c: Vec<f64> = row.iter().map(|&v| f64::from(v) - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        centred.push(c.into_iter().map(|v| v / norm).collect());
    }
    let mut corr = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        corr[(i, i)] = 1.0;
        for j in 0..i {
            let r: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            corr[(i, j)] = r;
            corr[(j, i)] = r;
        }
    }
    Some(corr)
}

pub fn jacobian_score(jacobian: &Tensor) -> JacobianScore {
    match jacobian_correlation(jacobian) {
        None => JacobianScore {
            eigenvalues: Vec::new(),
            s: None,
            k: MELLOR_K,
            degenerate: true,
        },
        Some(corr) => {
            let mut eigenvalues: Vec<f64> = SymmetricEigen::new(corr).eigenvalues.iter().copied().collect();
            eigenvalues.sort_by(f64::total_cmp);
            JacobianScore {
                s: Some(mellor_from_eigenvalues(&eigenvalues, MELLOR_K)),
                eigenvalues,
                k: MELLOR_K,
                degenerate: false,
            }
        }
    }
}

pub fn graph_mellor_score(
    graph: &Arc<Graph>,
    batch: &DatasetBatch,
    init_seed: u64,
    bn_mode: BatchNormMode,
) -> Result<JacobianScore> {
    if batch.len() < 2 {
        return Err(Error::OutOfRange {
            what: "batch size",
            value: batch.len().to_string(),
            allowed: ">= 2 for the Jacobian score".into(),
        });
    }
    let net = NetworkInstance::new(Arc::clone(graph), init_seed)?.with_batch_norm_mode(bn_mode);
    Ok(jacobian_score(&net.input_jacobian(&batch.pixels)?))
}

pub fn mellor_score(spec: &ArchitectureSpec, batch: &DatasetBatch, init_seed: u64) -> Result<JacobianScore> {
    let graph = graph_for_batch(spec, batch)?;
    graph_mellor_score(&graph, batch, init_seed, BatchNormMode::default())
}
