//! Minimal deterministic network engine.
//!
//! Networks are ordered DAGs of [`LayerSpec`] nodes ([`Graph`]) paired with a
//! parameter store ([`NetworkInstance`]). Storage is `f32`; every reduction
//! (dot products, batch statistics, pooling) accumulates in `f64` in a fixed
//! order, so logits are bit-identical for identical weights and batches.
//!
//! Spatial tensors are `[N, C, H, W]`; flat tensors are `[N, F]`. Batches
//! enter the network as `[N, H, W, C]` and are transposed by the input node.

mod adam;
mod graph;
mod init;
mod kernels;
mod layer;
mod loss;
mod network;
mod tensor;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use graph::{Graph, GraphBuilder, Node, NodeId};
pub use init::he_uniform_init;
pub use layer::{FeatureShape, LayerKind, LayerSpec};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use network::{BatchNormMode, Gradients, LayerParams, NetworkInstance, Tape, BN_EPSILON};
pub use tensor::Tensor;
