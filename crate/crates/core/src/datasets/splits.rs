use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};

use super::{
    load_cifar_binary, load_flat_binary, load_mnist_idx, ChannelStats, CifarVersion, ImageDataset, Split,
    FLAT_MAGIC,
};

/// Fixed seed for every permutation-based split, so all runs agree.
pub const SPLIT_SEED: u64 = 0x7E57_5EED_0201_C1FA;

/// The three splits of a dataset plus train-split channel statistics.
#[derive(Clone, Debug)]
pub struct DatasetSplits {
    pub train: ImageDataset,
    pub val: ImageDataset,
    pub test: ImageDataset,
    pub channel_stats: ChannelStats,
}

impl DatasetSplits {
    pub fn split(&self, split: Split) -> &ImageDataset {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn name(&self) -> &str {
        &self.train.name
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Halves `ds` by a fixed permutation; each half keeps the original order.
fn halve(ds: &ImageDataset, first: Split, second: Split, salt: u64) -> (ImageDataset, ImageDataset) {
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    Stream::new(derive_seed(SPLIT_SEED, salt)).shuffle(&mut perm);
    let (a, b) = perm.split_at(ds.len() / 2);
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    (ds.subset(&a, first), ds.subset(&b, second))
}

fn stats_sidecar(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.channel_stats.json"))
}

fn find_dir(root: &Path, marker: &str, nested: &[&str]) -> Option<PathBuf> {
    std::iter::once(root.to_path_buf())
        .chain(nested.iter().map(|n| root.join(n)))
        .find(|d| d.join(marker).is_file())
}

/// `data_batch_{1..5}.bin` halved into train/val; `test_batch.bin` as test.
pub fn load_cifar10_dir(dir: &Path) -> Result<DatasetSplits> {
    let dir = find_dir(dir, "data_batch_1.bin", &["cifar-10-batches-bin"])
        .ok_or_else(|| Error::InsufficientData(format!("no CIFAR-10 batches under {}", dir.display())))?;
    let train_files: Vec<PathBuf> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
    let full = load_cifar_binary(CifarVersion::Cifar10, &train_files)?;
    let test = load_cifar_binary(CifarVersion::Cifar10, &[dir.join("test_batch.bin")])?.with_split(Split::Test);
    let (train, val) = halve(&full, Split::Train, Split::Val, 10);
    let channel_stats = ChannelStats::load_or_compute(&train, &stats_sidecar(&dir, "cifar10"))?;
    Ok(DatasetSplits { train, val, test, channel_stats })
}

/// `train.bin` as train; `test.bin` halved into val/test.
pub fn load_cifar100_dir(dir: &Path) -> Result<DatasetSplits> {
    let dir = find_dir(dir, "train.bin", &["cifar-100-binary"])
        .ok_or_else(|| Error::InsufficientData(format!("no CIFAR-100 files under {}", dir.display())))?;
    let train = load_cifar_binary(CifarVersion::Cifar100, &[dir.join("train.bin")])?;
    let full_test = load_cifar_binary(CifarVersion::Cifar100, &[dir.join("test.bin")])?;
    let (val, test) = halve(&full_test, Split::Val, Split::Test, 100);
    let channel_stats = ChannelStats::load_or_compute(&train, &stats_sidecar(&dir, "cifar100"))?;
    Ok(DatasetSplits { train, val, test, channel_stats })
}

/// `train.tlnas`, `valid.tlnas` (or `val.tlnas`) and `test.tlnas`.
pub fn load_imagenet16_dir(dir: &Path) -> Result<DatasetSplits> {
    let dir = find_dir(dir, "train.tlnas", &["ImageNet16-120", "imagenet16"])
        .ok_or_else(|| Error::InsufficientData(format!("no train.tlnas under {}", dir.display())))?;
    let val_path = ["valid.tlnas", "val.tlnas"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::InsufficientData(format!("no valid.tlnas under {}", dir.display())))?;
    let name = "ImageNet16-120";
    let train = load_flat_binary(dir.join("train.tlnas"))?.with_name(name);
    let val = load_flat_binary(val_path)?.with_name(name).with_split(Split::Val);
    let test = load_flat_binary(dir.join("test.tlnas"))?.with_name(name).with_split(Split::Test);
    let channel_stats = ChannelStats::load_or_compute(&train, &stats_sidecar(&dir, "imagenet16"))?;
    Ok(DatasetSplits { train, val, test, channel_stats })
}

/// The full IDX train set, and the t10k set halved into val/test.
pub fn load_mnist_dir(dir: &Path) -> Result<DatasetSplits> {
    let dir = find_dir(dir, "train-images-idx3-ubyte", &["mnist", "MNIST/raw"])
        .ok_or_else(|| Error::InsufficientData(format!("no MNIST IDX files under {}", dir.display())))?;
    let train = load_mnist_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))?;
    let t10k = load_mnist_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))?;
    let (val, test) = halve(&t10k, Split::Val, Split::Test, 28);
    let channel_stats = ChannelStats::load_or_compute(&train, &stats_sidecar(&dir, "mnist"))?;
    Ok(DatasetSplits { train, val, test, channel_stats })
}

/// Detects the layout at `path`. A single `TLNAS1` file becomes the train
/// split with empty val/test splits.
pub fn load_dataset_dir(path: &Path) -> Result<DatasetSplits> {
    if path.is_file() {
        let mut head = [0u8; 6];
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        head.copy_from_slice(bytes.get(..6).ok_or_else(|| Error::format(path, "truncated header"))?);
        if &head != FLAT_MAGIC {
            return Err(Error::format(path, "not a TLNAS1 file"));
        }
        drop(bytes);
        let train = load_flat_binary(path)?;
        let empty = train.subset(&[], Split::Val);
        let channel_stats = ChannelStats::compute(&train);
        return Ok(DatasetSplits {
            val: empty.clone(),
            test: empty.with_split(Split::Test),
            train,
            channel_stats,
        });
    }
    if find_dir(path, "data_batch_1.bin", &["cifar-10-batches-bin"]).is_some() {
        load_cifar10_dir(path)
    } else if find_dir(path, "train.bin", &["cifar-100-binary"]).is_some() {
        load_cifar100_dir(path)
    } else if find_dir(path, "train-images-idx3-ubyte", &["mnist", "MNIST/raw"]).is_some() {
        load_mnist_dir(path)
    } else if find_dir(path, "train.tlnas", &["ImageNet16-120", "imagenet16"]).is_some() {
        load_imagenet16_dir(path)
    } else {
        Err(Error::InsufficientData(format!("no recognised dataset at {}", path.display())))
    }
}

/// Exactly `per_class` examples of each class, drawn without replacement.
/// The result is ordered by original index.
pub fn reduce_train_per_class(ds: &ImageDataset, per_class: usize, seed: u64) -> Result<ImageDataset> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[usize::from(l)].push(i);
    }
    let mut chosen = Vec::with_capacity(per_class * ds.classes);
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < per_class {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} examples, {per_class} requested",
                members.len()
            )));
        }
        let picks = Stream::new(derive_seed(seed, class as u64)).sample_indices(members.len(), per_class);
        chosen.extend(picks.into_iter().map(|k| members[k]));
    }
    chosen.sort_unstable();
    Ok(ds.subset(&chosen, ds.split))
}
