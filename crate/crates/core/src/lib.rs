//! Trainless neural architecture search.
//!
//! Architectures are scored without any training: a network is built,
//! initialised many times with independent He-uniform draws, and its
//! untrained accuracy on one fixed batch is recorded per initialisation.
//! The coefficient of variation of those accuracies (`cv_u = sigma_u / mu_u`)
//! is the score; low values point at architectures that train well.
//!
//! The crate contains everything needed to reproduce the selection
//! experiments on the NAS-Bench-201 cell space against a trained-accuracy
//! fixture, and a desk-scale version of the two-hidden-layer MLP study on
//! MNIST:
//!
//! - [`nn`]: a small deterministic network engine (forward, reverse-mode
//!   gradients, input Jacobians, Adam).
//! - [`search_space`]: the MLP grid and the cell space, architecture strings
//!   and network instantiation.
//! - [`datasets`]: IDX, CIFAR binary and `TLNAS1` flat loaders, splits, batches
//!   and the benchmark fixture.
//! - [`scoring`]: untrained accuracy, `cv_u` and the Jacobian correlation score.
//! - [`stats`]: population moments, Welch's t-test, Spearman correlation.
//! - [`harness`]: selection runs, baselines, MLP training and the MNIST study.
//! - [`report`]: JSON-lines records, CSV summaries and SVG scatter plots.

pub mod datasets;
pub mod error;
pub mod harness;
pub mod nn;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod search_space;
pub mod stats;

pub use error::{Error, Result};
pub use nn::{NetworkInstance, Tensor};
pub use search_space::{ArchitectureSpec, CellSpec, MlpSpec, SkeletonConfig};
