use std::path::Path;

use crate::error::{Error, Result};

use super::{ImageDataset, Split};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const MNIST_CLASSES: usize = 10;

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Reads an IDX image/label file pair (big-endian headers, raw bytes).
pub fn load_mnist_idx(image_path: impl AsRef<Path>, label_path: impl AsRef<Path>) -> Result<ImageDataset> {
    let (ip, lp) = (image_path.as_ref(), label_path.as_ref());
    let images = read(ip)?;
    let labels = read(lp)?;
    let magic = be_u32(&images, 0, ip)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(ip, format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(&images, 4, ip)? as usize;
    let rows = be_u32(&images, 8, ip)? as usize;
    let cols = be_u32(&images, 12, ip)? as usize;
    let payload = &images[16..];
    if payload.len() != n * rows * cols {
        return Err(Error::format(
            ip,
            format!("expected {} pixel bytes, found {}", n * rows * cols, payload.len()),
        ));
    }
    let lmagic = be_u32(&labels, 0, lp)?;
    if lmagic != LABEL_MAGIC {
        return Err(Error::format(lp, format!("bad label magic {lmagic:#010x}")));
    }
    let ln = be_u32(&labels, 4, lp)? as usize;
    let lpayload = &labels[8..];
    if ln != n || lpayload.len() != n {
        return Err(Error::format(
            lp,
            format!("{n} images but {ln} labels declared, {} present", lpayload.len()),
        ));
    }
    if let Some(bad) = lpayload.iter().find(|&&l| usize::from(l) >= MNIST_CLASSES) {
        return Err(Error::format(lp, format!("label {bad} outside 0..{MNIST_CLASSES}")));
    }
    Ok(ImageDataset {
        name: "mnist".into(),
        split: Split::Train,
        height: rows,
        width: cols,
        channels: 1,
        classes: MNIST_CLASSES,
        images: payload.to_vec(),
        labels: lpayload.iter().map(|&l| u16::from(l)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Byte-level IDX writer used as the oracle for the loader.
    fn idx_bytes(magic: u32, dims: &[u32], payload: &[u8]) -> Vec<u8> {
        let mut out = magic.to_be_bytes().to_vec();
        for d in dims {
            out.extend_from_slice(&d.to_be_bytes());
        }
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn three_image_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..3 * 4 * 2).map(|i| (i * 11 % 256) as u8).collect();
        std::fs::write(dir.path().join("img"), idx_bytes(0x803, &[3, 4, 2], &pixels)).unwrap();
        std::fs::write(dir.path().join("lbl"), idx_bytes(0x801, &[3], &[7, 0, 9])).unwrap();
        let ds = load_mnist_idx(dir.path().join("img"), dir.path().join("lbl")).unwrap();
        assert_eq!((ds.len(), ds.height, ds.width, ds.channels), (3, 4, 2, 1));
        assert_eq!(ds.images, pixels);
        assert_eq!(ds.labels, vec![7, 0, 9]);
    }

    #[test]
    fn rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        std::fs::write(&img, idx_bytes(0x803, &[1, 2, 2], &[1, 2, 3, 4])).unwrap();
        std::fs::write(&lbl, idx_bytes(0x801, &[1], &[10])).unwrap();
        assert!(matches!(load_mnist_idx(&img, &lbl), Err(Error::Format { .. })));
        std::fs::write(&lbl, idx_bytes(0x802, &[1], &[1])).unwrap();
        assert!(matches!(load_mnist_idx(&img, &lbl), Err(Error::Format { .. })));
        std::fs::write(&lbl, idx_bytes(0x801, &[2], &[1, 1])).unwrap();
        assert!(matches!(load_mnist_idx(&img, &lbl), Err(Error::Format { .. })));
        std::fs::write(&img, idx_bytes(0x803, &[1, 2, 2], &[1, 2, 3])).unwrap();
        std::fs::write(&lbl, idx_bytes(0x801, &[1], &[1])).unwrap();
        assert!(matches!(load_mnist_idx(&img, &lbl), Err(Error::Format { .. })));
    }
}
