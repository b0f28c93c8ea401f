use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, GraphBuilder, LayerKind, NodeId};

use super::cell::{CellOp, CellSpec};
use super::mlp::MlpSpec;
use super::ArchitectureSpec;

/// Macro-skeleton around the cell: stem width and cells per stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkeletonConfig {
    pub stem_channels: usize,
    pub cells_per_stack: usize,
}

impl SkeletonConfig {
    /// The benchmark skeleton. The only one valid for fixture joins.
    pub const CANONICAL: SkeletonConfig = SkeletonConfig {
        stem_channels: 16,
        cells_per_stack: 5,
    };

    /// Small skeleton for fast tests.
    pub const DESK: SkeletonConfig = SkeletonConfig {
        stem_channels: 8,
        cells_per_stack: 2,
    };

    pub fn validate(&self) -> Result<()> {
        if self.stem_channels == 0 || self.cells_per_stack == 0 {
            return Err(Error::OutOfRange {
                what: "skeleton size",
                value: format!("{self:?}"),
                allowed: "positive stem channels and cells per stack".into(),
            });
        }
        Ok(())
    }
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        Self::CANONICAL
    }
}

/// Builds the unweighted layer graph for an architecture.
///
/// Cells: 3x3 stem conv + BN, three stacks of cells joined by stride-2
/// residual blocks (channels double per stack), BN + ReLU, global average
/// pooling and a linear classifier. MLPs: two ReLU dense layers and a
/// classifier. `input_hwc` is `[height, width, channels]`.
pub fn instantiate_network(spec: &ArchitectureSpec, num_classes: usize, input_hwc: [usize; 3]) -> Result<Arc<Graph>> {
    let [h, w, c] = input_hwc;
    if num_classes == 0 || h == 0 || w == 0 || c == 0 {
        return Err(Error::OutOfRange {
            what: "network input",
            value: format!("{num_classes} classes, {input_hwc:?}"),
            allowed: "positive sizes".into(),
        });
    }
    let mut g = GraphBuilder::new(h, w, c);
    let out = match spec {
        ArchitectureSpec::Mlp(m) => build_mlp(&mut g, m, num_classes)?,
        ArchitectureSpec::Cell { cell, skeleton } => build_cell_network(&mut g, cell, skeleton, num_classes)?,
    };
    Ok(Arc::new(g.finish(out)?))
}

pub fn count_parameters(spec: &ArchitectureSpec, num_classes: usize, input_hwc: [usize; 3]) -> Result<usize> {
    Ok(instantiate_network(spec, num_classes, input_hwc)?.param_count())
}

fn build_mlp(g: &mut GraphBuilder, m: &MlpSpec, num_classes: usize) -> Result<NodeId> {
    let x = g.input();
    let d1 = g.push("dense1", LayerKind::Dense { out_units: m.units_layer1 }, &[x])?;
    let r1 = g.push("dense1.relu", LayerKind::Relu, &[d1])?;
    let d2 = g.push("dense2", LayerKind::Dense { out_units: m.units_layer2 }, &[r1])?;
    let r2 = g.push("dense2.relu", LayerKind::Relu, &[d2])?;
    g.push("classifier", LayerKind::Classifier { num_classes }, &[r2])
}

fn conv(out_channels: usize, kernel: usize, stride: usize) -> LayerKind {
    LayerKind::Conv2d {
        out_channels,
        kernel,
        stride,
        padding: kernel / 2,
    }
}

/// ReLU -> conv -> BN.
fn relu_conv_bn(
    g: &mut GraphBuilder,
    name: &str,
    relu: NodeId,
    out_channels: usize,
    kernel: usize,
    stride: usize,
) -> Result<NodeId> {
    let c = g.push(format!("{name}.conv"), conv(out_channels, kernel, stride), &[relu])?;
    g.push(format!("{name}.bn"), LayerKind::BatchNorm, &[c])
}

fn residual_block(g: &mut GraphBuilder, name: &str, x: NodeId, out_channels: usize) -> Result<NodeId> {
    let relu = g.push(format!("{name}.relu"), LayerKind::Relu, &[x])?;
    let a = relu_conv_bn(g, &format!("{name}.conv_a"), relu, out_channels, 3, 2)?;
    let a_relu = g.push(format!("{name}.conv_b.relu"), LayerKind::Relu, &[a])?;
    let b = relu_conv_bn(g, &format!("{name}.conv_b"), a_relu, out_channels, 3, 1)?;
    let pool = g.push(
        format!("{name}.shortcut.pool"),
        LayerKind::AvgPool {
            kernel: 2,
            stride: 2,
            padding: 0,
        },
        &[x],
    )?;
    let short = g.push(format!("{name}.shortcut.conv"), conv(out_channels, 1, 1), &[pool])?;
    g.push(format!("{name}.add"), LayerKind::Add, &[short, b])
}

fn cell_block(g: &mut GraphBuilder, name: &str, input: NodeId, cell: &CellSpec, channels: usize) -> Result<NodeId> {
    let mut nodes = vec![input];
    let mut relus: HashMap<usize, NodeId> = HashMap::new();
    for target in 1..=3 {
        let mut terms = Vec::new();
        for (source, op) in cell.incoming(target) {
            let src = nodes[source];
            let edge = format!("{name}.edge{target}{source}");
            let term = match op {
                CellOp::Zeroize => g.push(format!("{edge}.none"), LayerKind::Zeroize, &[src])?,
                CellOp::SkipConnect => src,
                CellOp::Conv1x1 | CellOp::Conv3x3 => {
                    let relu = match relus.get(&source) {
                        Some(&r) => r,
                        None => {
                            let r = g.push(format!("{name}.node{source}.relu"), LayerKind::Relu, &[src])?;
                            relus.insert(source, r);
                            r
                        }
                    };
                    let k = if op == CellOp::Conv1x1 { 1 } else { 3 };
                    relu_conv_bn(g, &edge, relu, channels, k, 1)?
                }
                CellOp::AvgPool3x3 => g.push(
                    format!("{edge}.pool"),
                    LayerKind::AvgPool {
                        kernel: 3,
                        stride: 1,
                        padding: 1,
                    },
                    &[src],
                )?,
            };
            terms.push(term);
        }
        let node = if terms.len() == 1 {
            terms[0]
        } else {
            g.push(format!("{name}.node{target}"), LayerKind::Add, &terms)?
        };
        nodes.push(node);
    }
    Ok(nodes[3])
}

fn build_cell_network(
    g: &mut GraphBuilder,
    cell: &CellSpec,
    skeleton: &SkeletonConfig,
    num_classes: usize,
) -> Result<NodeId> {
    skeleton.validate()?;
    let mut channels = skeleton.stem_channels;
    let stem = g.push("stem.conv", conv(channels, 3, 1), &[g.input()])?;
    let mut x = g.push("stem.bn", LayerKind::BatchNorm, &[stem])?;
    for stack in 0..3 {
        if stack > 0 {
            channels *= 2;
            x = residual_block(g, &format!("reduce{stack}"), x, channels)?;
        }
        for i in 0..skeleton.cells_per_stack {
            x = cell_block(g, &format!("stack{stack}.cell{i}"), x, cell, channels)?;
        }
    }
    let bn = g.push("lastact.bn", LayerKind::BatchNorm, &[x])?;
    let relu = g.push("lastact.relu", LayerKind::Relu, &[bn])?;
    let pooled = g.push("gap", LayerKind::GlobalAvgPool, &[relu])?;
    g.push("classifier", LayerKind::Classifier { num_classes }, &[pooled])
}
