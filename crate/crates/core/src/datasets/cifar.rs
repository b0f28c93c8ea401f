use std::path::Path;

use crate::error::{Error, Result};

use super::{ImageDataset, Split};

const PLANE: usize = 32 * 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CifarVersion {
    Cifar10,
    Cifar100,
}

impl CifarVersion {
    /// Label bytes followed by three 32x32 colour planes.
    pub fn record_len(self) -> usize {
        self.label_bytes() + 3 * PLANE
    }

    fn label_bytes(self) -> usize {
        match self {
            CifarVersion::Cifar10 => 1,
            CifarVersion::Cifar100 => 2,
        }
    }

    pub fn classes(self) -> usize {
        match self {
            CifarVersion::Cifar10 => 10,
            CifarVersion::Cifar100 => 100,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CifarVersion::Cifar10 => "cifar10",
            CifarVersion::Cifar100 => "cifar100",
        }
    }
}

/// Concatenates the records of every file in `paths`. CIFAR-100 records use
/// the fine label (second byte). Pixels are converted to `[H, W, C]`.
pub fn load_cifar_binary<P: AsRef<Path>>(version: CifarVersion, paths: &[P]) -> Result<ImageDataset> {
    let rec = version.record_len();
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % rec != 0 {
            return Err(Error::format(
                path,
                format!("{} bytes is not a multiple of the {rec}-byte record", bytes.len()),
            ));
        }
        images.reserve(bytes.len() / rec * 3 * PLANE);
        for record in bytes.chunks_exact(rec) {
            let label = record[version.label_bytes() - 1];
            if usize::from(label) >= version.classes() {
                return Err(Error::format(path, format!("label {label} out of range")));
            }
            labels.push(u16::from(label));
            let px = &record[version.label_bytes()..];
            for p in 0..PLANE {
                images.extend_from_slice(&[px[p], px[PLANE + p], px[2 * PLANE + p]]);
            }
        }
    }
    Ok(ImageDataset {
        name: version.name().into(),
        split: Split::Train,
        height: 32,
        width: 32,
        channels: 3,
        classes: version.classes(),
        images,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_record_fixture() {
        // Oracle: records assembled byte by byte.
        let mut bytes = Vec::new();
        for (label, base) in [(3u8, 0u8), (9u8, 100u8)] {
            bytes.push(label);
            for channel in 0..3u8 {
                bytes.extend((0..PLANE).map(|p| base.wrapping_add(channel * 10).wrapping_add((p % 7) as u8)));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data_batch_1.bin");
        std::fs::write(&path, &bytes).unwrap();
        let ds = load_cifar_binary(CifarVersion::Cifar10, &[&path]).unwrap();
        assert_eq!(ds.labels, vec![3, 9]);
        let img = ds.image(1);
        // pixel 5, channels r/g/b
        assert_eq!(&img[15..18], &[105, 115, 125]);
        assert_eq!(img[0], 100);
    }

    #[test]
    fn cifar100_uses_fine_label() {
        let mut bytes = vec![4u8, 77u8];
        bytes.extend(std::iter::repeat_n(1u8, 3 * PLANE));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        std::fs::write(&path, &bytes).unwrap();
        let ds = load_cifar_binary(CifarVersion::Cifar100, &[&path]).unwrap();
        assert_eq!(ds.labels, vec![77]);
        assert_eq!(ds.classes, 100);
    }

    #[test]
    fn rejects_partial_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, vec![0u8; 3000]).unwrap();
        assert!(matches!(
            load_cifar_binary(CifarVersion::Cifar10, &[&path]),
            Err(Error::Format { .. })
        ));
    }
}
