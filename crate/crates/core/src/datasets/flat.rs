use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ImageDataset, Split};

pub const FLAT_MAGIC: &[u8; 6] = b"TLNAS1";
const HEADER_LEN: usize = 6 + 5 * 4;

/// Reads the `TLNAS1` layout: magic, little-endian `u32` N, H, W, C, classes,
/// N little-endian `u16` labels, then `N * H * W * C` pixel bytes.
pub fn load_flat_binary(path: impl AsRef<Path>) -> Result<ImageDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..6] != FLAT_MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let field = |i: usize| {
        let o = 6 + 4 * i;
        u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as usize
    };
    let (n, h, w, c, classes) = (field(0), field(1), field(2), field(3), field(4));
    let label_end = HEADER_LEN + 2 * n;
    let expected = label_end + n * h * w * c;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let labels: Vec<u16> = bytes[HEADER_LEN..label_end]
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    let ds = ImageDataset {
        name: path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        split: Split::Train,
        height: h,
        width: w,
        channels: c,
        classes,
        images: bytes[label_end..].to_vec(),
        labels,
    };
    ds.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(ds)
}

pub fn write_flat_binary(ds: &ImageDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    ds.validate()?;
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * ds.len() + ds.images.len());
    out.extend_from_slice(FLAT_MAGIC);
    for v in [ds.len(), ds.height, ds.width, ds.channels, ds.classes] {
        let v = u32::try_from(v).map_err(|_| Error::format(path, "dimension exceeds u32"))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in &ds.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&ds.images);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}
