//! Image datasets, split conventions, batches and the trained-accuracy
//! fixture.

mod batch;
mod cifar;
mod fixture;
mod flat;
mod idx;
mod splits;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use batch::{sample_batch, ChannelStats, DatasetBatch, PixelTransform};
pub use cifar::{load_cifar_binary, CifarVersion};
pub use fixture::{load_benchmark_fixture, write_benchmark_fixture, BenchmarkEntry, BenchmarkFixture};
pub use flat::{load_flat_binary, write_flat_binary, FLAT_MAGIC};
pub use idx::load_mnist_idx;
pub use splits::{
    load_cifar100_dir, load_cifar10_dir, load_dataset_dir, load_imagenet16_dir, load_mnist_dir,
    reduce_train_per_class, DatasetSplits, SPLIT_SEED,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Labelled 8-bit images, stored `[N, H, W, C]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageDataset {
    pub name: String,
    pub split: Split,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
    pub images: Vec<u8>,
    pub labels: Vec<u16>,
}

impl ImageDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.image_len();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn input_hwc(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    /// Checks the length and label-range invariants.
    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() * self.image_len() {
            return Err(Error::InsufficientData(format!(
                "{}: {} pixel bytes for {} images of {} bytes",
                self.name,
                self.images.len(),
                self.labels.len(),
                self.image_len()
            )));
        }
        if let Some(bad) = self.labels.iter().find(|&&l| usize::from(l) >= self.classes) {
            return Err(Error::OutOfRange {
                what: "label",
                value: bad.to_string(),
                allowed: format!("0..{}", self.classes),
            });
        }
        Ok(())
    }

    /// The images at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], split: Split) -> ImageDataset {
        let mut images = Vec::with_capacity(indices.len() * self.image_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        ImageDataset {
            name: self.name.clone(),
            split,
            height: self.height,
            width: self.width,
            channels: self.channels,
            classes: self.classes,
            images,
            labels,
        }
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for &l in &self.labels {
            h[usize::from(l)] += 1;
        }
        h
    }
}
