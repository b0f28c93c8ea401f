/// Per-sample shape of a node's output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureShape {
    Spatial {
        channels: usize,
        height: usize,
        width: usize,
    },
    Flat(usize),
}

impl FeatureShape {
    pub fn numel(&self) -> usize {
        match *self {
            FeatureShape::Spatial {
                channels,
                height,
                width,
            } => channels * height * width,
            FeatureShape::Flat(n) => n,
        }
    }

    /// Channels for spatial shapes, features for flat ones.
    pub fn channels(&self) -> usize {
        match *self {
            FeatureShape::Spatial { channels, .. } => channels,
            FeatureShape::Flat(n) => n,
        }
    }

    /// Positions per channel (1 for flat shapes).
    pub fn plane(&self) -> usize {
        match *self {
            FeatureShape::Spatial { height, width, .. } => height * width,
            FeatureShape::Flat(_) => 1,
        }
    }

    pub(crate) fn with_batch(&self, n: usize) -> Vec<usize> {
        match *self {
            FeatureShape::Spatial {
                channels,
                height,
                width,
            } => vec![n, channels, height, width],
            FeatureShape::Flat(f) => vec![n, f],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    /// Batch entry point; transposes `[N, H, W, C]` to `[N, C, H, W]`.
    Input,
    /// Fully connected with bias; flattens spatial inputs.
    Dense { out_units: usize },
    /// Bias-free convolution.
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Average pooling that excludes padded positions from the divisor.
    AvgPool {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    /// Non-affine normalisation (gamma = 1, beta = 0).
    BatchNorm,
    Relu,
    /// Emits zeros of the input's shape.
    Zeroize,
    Identity,
    /// Elementwise sum of all inputs.
    Add,
    GlobalAvgPool,
    /// Final dense layer producing class logits.
    Classifier { num_classes: usize },
}

/// A layer kind together with the units/channels feeding it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub fan_in: usize,
}

impl LayerSpec {
    pub fn is_parameterised(&self) -> bool {
        matches!(
            self.kind,
            LayerKind::Dense { .. } | LayerKind::Conv2d { .. } | LayerKind::Classifier { .. }
        )
    }

    /// `(weight shape, bias length)` for parameterised layers.
    ///
    /// Dense weights are stored `[in, out]`; convolution weights
    /// `[out, in, k, k]`.
    pub fn param_shapes(&self, input: FeatureShape) -> Option<(Vec<usize>, Option<usize>)> {
        match self.kind {
            LayerKind::Dense { out_units } => {
                Some((vec![input.numel(), out_units], Some(out_units)))
            }
            LayerKind::Classifier { num_classes } => {
                Some((vec![input.numel(), num_classes], Some(num_classes)))
            }
            LayerKind::Conv2d {
                out_channels,
                kernel,
                ..
            } => Some((
                vec![out_channels, input.channels(), kernel, kernel],
                None,
            )),
            _ => None,
        }
    }

    pub fn param_count(&self, input: FeatureShape) -> usize {
        self.param_shapes(input)
            .map(|(w, b)| w.iter().product::<usize>() + b.unwrap_or(0))
            .unwrap_or(0)
    }
}
