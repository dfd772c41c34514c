//! IDX containers as used by the MNIST family: big-endian, magic
//! `0x00000803` for `u8` image stacks and `0x00000801` for `u8` label vectors.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, WriteBytesExt};
use flate2::write::GzEncoder;
use flate2::Compression;
use wienerlab_core::knn::{LabeledSet, NUM_CLASSES};
use wienerlab_core::spectral::Signal;

use super::read_maybe_gzip;
use crate::error::{LabError, LabResult};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn take<'a>(path: &Path, bytes: &'a [u8], offset: usize, len: usize) -> LabResult<&'a [u8]> {
    bytes.get(offset..offset + len).ok_or_else(|| {
        LabError::format(
            path,
            format!(
                "truncated at byte offset {}: need {len} bytes, file has {}",
                offset,
                bytes.len()
            ),
        )
    })
}

fn header(path: &Path, bytes: &[u8], magic: u32) -> LabResult<Vec<usize>> {
    let found = BigEndian::read_u32(take(path, bytes, 0, 4)?);
    if found != magic {
        return Err(LabError::format(
            path,
            format!("bad magic 0x{found:08x} at byte offset 0, expected 0x{magic:08x}"),
        ));
    }
    let rank = (magic & 0xff) as usize;
    (0..rank)
        .map(|d| Ok(BigEndian::read_u32(take(path, bytes, 4 + 4 * d, 4)?) as usize))
        .collect()
}

/// Image stack scaled to `[0, 1]`.
pub fn read_images(path: &Path) -> LabResult<Vec<Signal>> {
    let bytes = read_maybe_gzip(path)?;
    let dims = header(path, &bytes, IMAGE_MAGIC)?;
    let (n, rows, cols) = (dims[0], dims[1], dims[2]);
    if rows == 0 || cols == 0 {
        return Err(LabError::format(path, "zero image extent in header"));
    }
    let plane = rows * cols;
    let total = n
        .checked_mul(plane)
        .ok_or_else(|| LabError::format(path, "header dimensions overflow"))?;
    let body = take(path, &bytes, 16, total)?;
    body.chunks_exact(plane)
        .map(|px| {
            let data = px.iter().map(|&b| b as f64 / 255.0).collect();
            Ok(Signal::new(data, &[rows, cols])?)
        })
        .collect()
}

pub fn read_labels(path: &Path) -> LabResult<Vec<u8>> {
    let bytes = read_maybe_gzip(path)?;
    let n = header(path, &bytes, LABEL_MAGIC)?[0];
    let body = take(path, &bytes, 8, n)?;
    if let Some(i) = body.iter().position(|&l| l as usize >= NUM_CLASSES) {
        return Err(LabError::format(
            path,
            format!(
                "label {} at byte offset {} is not a digit class",
                body[i],
                8 + i
            ),
        ));
    }
    Ok(body.to_vec())
}

/// Image and label files of one split.
pub fn ingest(images: &Path, labels: &Path) -> LabResult<LabeledSet> {
    let signals = read_images(images)?;
    let labels_v = read_labels(labels)?;
    if signals.len() != labels_v.len() {
        return Err(LabError::format(
            labels,
            format!(
                "{} labels for {} images in {}",
                labels_v.len(),
                signals.len(),
                images.display()
            ),
        ));
    }
    Ok(LabeledSet::new(signals, labels_v)?)
}

fn write_bytes(path: &Path, bytes: Vec<u8>, gzip: bool) -> LabResult<()> {
    let out = if gzip {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| LabError::io(path, e))?;
        enc.finish().map_err(|e| LabError::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Writes 2D single-channel images, clamped to `[0, 1]` and quantized.
pub fn write_images(path: &Path, images: &[Signal], gzip: bool) -> LabResult<()> {
    let shape = images
        .first()
        .map_or(&[0usize, 0][..], |s| s.shape())
        .to_vec();
    if shape.len() != 2
        || images
            .iter()
            .any(|s| s.shape() != shape || s.channels() != 1)
    {
        return Err(LabError::Data(
            "IDX images must share one 2D single-channel shape".into(),
        ));
    }
    let mut bytes = Vec::with_capacity(16 + images.len() * shape[0] * shape[1]);
    for v in [
        IMAGE_MAGIC,
        images.len() as u32,
        shape[0] as u32,
        shape[1] as u32,
    ] {
        bytes.write_u32::<BigEndian>(v).expect("vec write");
    }
    for s in images {
        bytes.extend(
            s.data()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
        );
    }
    write_bytes(path, bytes, gzip)
}

pub fn write_labels(path: &Path, labels: &[u8], gzip: bool) -> LabResult<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes
        .write_u32::<BigEndian>(LABEL_MAGIC)
        .expect("vec write");
    bytes
        .write_u32::<BigEndian>(labels.len() as u32)
        .expect("vec write");
    bytes.extend_from_slice(labels);
    write_bytes(path, bytes, gzip)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.idx");
        let mut bytes = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 28, 0, 0, 0, 28];
        bytes.extend((0..2 * 28 * 28).map(|i| (i % 256) as u8));
        fs::write(&path, bytes).unwrap();
        let imgs = read_images(&path).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!(imgs[1].shape(), &[28, 28]);
        assert_eq!(imgs[0].data()[255], 1.0);
    }

    #[test]
    fn truncation_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.idx");
        fs::write(&path, [0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 7]).unwrap();
        let msg = read_images(&path).unwrap_err().to_string();
        assert!(msg.contains("byte offset 16"), "{msg}");
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.idx");
        fs::write(&path, [0, 0, 8, 1, 0, 0, 0, 0]).unwrap();
        let err = read_images(&path).unwrap_err();
        assert!(matches!(err, LabError::Format { .. }));
        assert_eq!(err.exit_code(), crate::error::exit::DATA);
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i.gz"), dir.path().join("l.gz"));
        let img = Signal::new(vec![0.0, 1.0, 0.5, 0.25], &[2, 2]).unwrap();
        write_images(&ip, &[img.clone(), img], true).unwrap();
        write_labels(&lp, &[3, 9], true).unwrap();
        let set = ingest(&ip, &lp).unwrap();
        assert_eq!(set.labels(), &[3, 9]);
        assert!((set.signals()[0].data()[2] - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_images(&ip, &[Signal::zeros(&[2, 2], 1).unwrap()], false).unwrap();
        write_labels(&lp, &[1, 2], false).unwrap();
        assert!(matches!(ingest(&ip, &lp), Err(LabError::Format { .. })));
    }
}
