use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::Stream;

use super::ImageDataset;

/// Per-channel mean and population std of pixels scaled to [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    pub fn compute(ds: &ImageDataset) -> ChannelStats {
        let c = ds.channels;
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        for px in ds.images.chunks_exact(c) {
            for (k, &p) in px.iter().enumerate() {
                let v = f64::from(p) / 255.0;
                sum[k] += v;
                sq[k] += v * v;
            }
        }
        let n = (ds.images.len() / c.max(1)).max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n - m * m).max(0.0).sqrt())
            .collect();
        ChannelStats { mean, std }
    }

    /// Reads the sidecar if present, otherwise computes the stats and tries to
    /// write it. A failed write only logs a warning.
    pub fn load_or_compute(ds: &ImageDataset, sidecar: &Path) -> Result<ChannelStats> {
        if sidecar.exists() {
            let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
            let stats: ChannelStats = serde_json::from_str(&text)
                .map_err(|e| Error::format(sidecar, e.to_string()))?;
            if stats.mean.len() != ds.channels || stats.std.len() != ds.channels {
                return Err(Error::format(sidecar, "channel count does not match dataset"));
            }
            return Ok(stats);
        }
        let stats = ChannelStats::compute(ds);
        let body = serde_json::to_string_pretty(&stats)?;
        if let Err(e) = std::fs::write(sidecar, body) {
            log::warn!("could not cache channel stats at {}: {e}", sidecar.display());
        }
        Ok(stats)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PixelTransform {
    /// `p / 255`.
    UnitScale,
    /// `(p / 255 - mean_c) / std_c`; a zero std leaves the channel centred only.
    Standardize(ChannelStats),
}

impl PixelTransform {
    fn lookup(&self, channels: usize) -> Vec<[f32; 256]> {
        (0..channels)
            .map(|c| {
                let mut table = [0f32; 256];
                for (p, t) in table.iter_mut().enumerate() {
                    let v = p as f64 / 255.0;
                    *t = match self {
                        PixelTransform::UnitScale => v as f32,
                        PixelTransform::Standardize(s) => {
                            let sd = if s.std[c] > 0.0 { s.std[c] } else { 1.0 };
                            ((v - s.mean[c]) / sd) as f32
                        }
                    };
                }
                table
            })
            .collect()
    }
}

/// Preprocessed images `[n, H, W, C]` with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBatch {
    pub pixels: Tensor,
    pub labels: Vec<usize>,
    pub indices: Vec<usize>,
    pub batch_seed: u64,
    pub classes: usize,
}

impl DatasetBatch {
    /// The images at `indices` in order, preprocessed by `transform`.
    pub fn gather(
        ds: &ImageDataset,
        indices: &[usize],
        transform: &PixelTransform,
        batch_seed: u64,
    ) -> Result<DatasetBatch> {
        if let PixelTransform::Standardize(s) = transform {
            if s.mean.len() != ds.channels || s.std.len() != ds.channels {
                return Err(Error::Dimension {
                    expected: vec![ds.channels],
                    actual: vec![s.mean.len(), s.std.len()],
                });
            }
        }
        let table = transform.lookup(ds.channels);
        let mut data = Vec::with_capacity(indices.len() * ds.image_len());
        for &i in indices {
            if i >= ds.len() {
                return Err(Error::OutOfRange {
                    what: "image index",
                    value: i.to_string(),
                    allowed: format!("0..{}", ds.len()),
                });
            }
            for px in ds.image(i).chunks_exact(ds.channels) {
                data.extend(px.iter().zip(&table).map(|(&p, t)| t[usize::from(p)]));
            }
        }
        Ok(DatasetBatch {
            pixels: Tensor::new(vec![indices.len(), ds.height, ds.width, ds.channels], data)?,
            labels: indices.iter().map(|&i| usize::from(ds.labels[i])).collect(),
            indices: indices.to_vec(),
            batch_seed,
            classes: ds.classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `n_bs` distinct images drawn uniformly from `ds`, determined by `batch_seed`.
pub fn sample_batch(
    ds: &ImageDataset,
    n_bs: usize,
    batch_seed: u64,
    transform: &PixelTransform,
) -> Result<DatasetBatch> {
    if n_bs == 0 || n_bs > ds.len() {
        return Err(Error::OutOfRange {
            what: "batch size",
            value: n_bs.to_string(),
            allowed: format!("1..={}", ds.len()),
        });
    }
    let indices = Stream::new(batch_seed).sample_indices(ds.len(), n_bs);
    DatasetBatch::gather(ds, &indices, transform, batch_seed)
}
