use crate::error::{Error, Result};

use super::layer::{FeatureShape, LayerKind, LayerSpec};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub spec: LayerSpec,
    pub inputs: Vec<NodeId>,
    pub shape: FeatureShape,
}

/// Immutable layer DAG. Node 0 is the input; nodes only reference earlier
/// nodes, so index order is a topological order.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    nodes: Vec<Node>,
    input_hwc: [usize; 3],
    output: NodeId,
    last_use: Vec<NodeId>,
}

impl Graph {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    /// `[height, width, channels]` of one input image.
    pub fn input_hwc(&self) -> [usize; 3] {
        self.input_hwc
    }

    pub fn num_classes(&self) -> usize {
        self.nodes[self.output].shape.numel()
    }

    /// Index of the last node reading each node's output.
    pub(crate) fn last_use(&self) -> &[NodeId] {
        &self.last_use
    }

    pub fn param_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match n.inputs.first() {
                Some(&i) => n.spec.param_count(self.nodes[i].shape),
                None => 0,
            })
            .sum()
    }

    pub fn contains_batch_norm(&self) -> bool {
        self.nodes
            .iter()
            .any(|n| n.spec.kind == LayerKind::BatchNorm)
    }
}

pub struct GraphBuilder {
    nodes: Vec<Node>,
    input_hwc: [usize; 3],
}

impl GraphBuilder {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        let shape = FeatureShape::Spatial {
            channels,
            height,
            width,
        };
        let input = Node {
            name: "input".into(),
            spec: LayerSpec {
                kind: LayerKind::Input,
                fan_in: channels,
            },
            inputs: vec![],
            shape,
        };
        Self {
            nodes: vec![input],
            input_hwc: [height, width, channels],
        }
    }

    pub fn input(&self) -> NodeId {
        0
    }

    pub fn shape(&self, id: NodeId) -> FeatureShape {
        self.nodes[id].shape
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        kind: LayerKind,
        inputs: &[NodeId],
    ) -> Result<NodeId> {
        let name = name.into();
        let invalid = |reason: &str| Error::InvalidLayer {
            layer: name.clone(),
            reason: reason.to_string(),
        };
        if inputs.is_empty() {
            return Err(invalid("layer has no inputs"));
        }
        if let Some(&bad) = inputs.iter().find(|&&i| i >= self.nodes.len()) {
            return Err(invalid(&format!("input node {bad} does not exist yet")));
        }
        if kind != LayerKind::Add && inputs.len() != 1 {
            return Err(invalid("only add layers take several inputs"));
        }
        let input = self.nodes[inputs[0]].shape;
        let geometry = |kernel: usize, stride: usize, padding: usize| -> Result<(usize, usize)> {
            let FeatureShape::Spatial { height, width, .. } = input else {
                return Err(invalid("spatial layer fed a flat tensor"));
            };
            if kernel == 0 || stride == 0 {
                return Err(invalid("kernel and stride must be positive"));
            }
            if height + 2 * padding < kernel || width + 2 * padding < kernel {
                return Err(invalid("kernel larger than padded input"));
            }
            Ok((
                (height + 2 * padding - kernel) / stride + 1,
                (width + 2 * padding - kernel) / stride + 1,
            ))
        };
        let (shape, fan_in) = match kind {
            LayerKind::Input => return Err(invalid("graphs have exactly one input")),
            LayerKind::Dense { out_units: units } | LayerKind::Classifier { num_classes: units } => {
                if units == 0 {
                    return Err(invalid("zero output units"));
                }
                (FeatureShape::Flat(units), input.numel())
            }
            LayerKind::Conv2d {
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                if out_channels == 0 {
                    return Err(invalid("zero output channels"));
                }
                let (height, width) = geometry(kernel, stride, padding)?;
                (
                    FeatureShape::Spatial {
                        channels: out_channels,
                        height,
                        width,
                    },
                    input.channels() * kernel * kernel,
                )
            }
            LayerKind::AvgPool {
                kernel,
                stride,
                padding,
            } => {
                if padding >= kernel {
                    return Err(invalid("padding must be smaller than the kernel"));
                }
                let (height, width) = geometry(kernel, stride, padding)?;
                (
                    FeatureShape::Spatial {
                        channels: input.channels(),
                        height,
                        width,
                    },
                    input.channels(),
                )
            }
            LayerKind::GlobalAvgPool => {
                if !matches!(input, FeatureShape::Spatial { .. }) {
                    return Err(invalid("global pooling needs a spatial input"));
                }
                (FeatureShape::Flat(input.channels()), input.channels())
            }
            LayerKind::Add => {
                if inputs.iter().any(|&i| self.nodes[i].shape != input) {
                    return Err(invalid("add inputs differ in shape"));
                }
                (input, input.channels())
            }
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::Zeroize | LayerKind::Identity => {
                (input, input.channels())
            }
        };
        if fan_in == 0 {
            return Err(invalid("fan_in is zero"));
        }
        self.nodes.push(Node {
            name,
            spec: LayerSpec { kind, fan_in },
            inputs: inputs.to_vec(),
            shape,
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn finish(self, output: NodeId) -> Result<Graph> {
        if output >= self.nodes.len() || output == 0 {
            return Err(Error::InvalidLayer {
                layer: format!("node {output}"),
                reason: "output must be a non-input node".into(),
            });
        }
        let mut last_use: Vec<NodeId> = (0..self.nodes.len()).collect();
        for (id, node) in self.nodes.iter().enumerate() {
            for &i in &node.inputs {
                last_use[i] = last_use[i].max(id);
            }
        }
        last_use[output] = usize::MAX;
        Ok(Graph {
            nodes: self.nodes,
            input_hwc: self.input_hwc,
            output,
            last_use,
        })
    }
}
