//! Binary greymap (P5) images.

use std::fs;
use std::path::Path;

use wienerlab_core::spectral::Signal;

use crate::error::{LabError, LabResult};

fn parse_header(path: &Path, bytes: &[u8]) -> LabResult<(usize, usize, usize, usize)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(LabError::format(
                path,
                format!("truncated header at byte offset {pos}"),
            ));
        }
        fields.push((start, &bytes[start..pos]));
    }
    if fields[0].1 != b"P5" {
        return Err(LabError::format(
            path,
            "bad magic at byte offset 0, expected P5",
        ));
    }
    let mut nums = [0usize; 3];
    for (slot, &(offset, text)) in nums.iter_mut().zip(&fields[1..]) {
        *slot = std::str::from_utf8(text)
            .ok()
            .and_then(|t| t.parse().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| {
                LabError::format(path, format!("bad header field at byte offset {offset}"))
            })?;
    }
    if nums[2] > 255 {
        return Err(LabError::format(
            path,
            format!(
                "maxval {} at byte offset {} exceeds 255",
                nums[2], fields[3].0
            ),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    Ok((nums[0], nums[1], nums[2], pos + 1))
}

/// Reads a P5 image scaled to `[0, 1]`.
pub fn read_pgm(path: &Path) -> LabResult<Signal> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    let (width, height, maxval, start) = parse_header(path, &bytes)?;
    let len = width * height;
    let raster = bytes.get(start..start + len).ok_or_else(|| {
        LabError::format(
            path,
            format!(
                "truncated raster at byte offset {}: need {len} bytes",
                bytes.len()
            ),
        )
    })?;
    let data = raster.iter().map(|&b| b as f64 / maxval as f64).collect();
    Ok(Signal::new(data, &[height, width])?)
}

fn rows_cols(s: &Signal) -> LabResult<(usize, usize)> {
    if s.channels() != 1 {
        return Err(LabError::Data(format!(
            "greymap output needs one channel, got {}",
            s.channels()
        )));
    }
    Ok(match s.shape() {
        [n] => (1, *n),
        [r, c] => (*r, *c),
        _ => unreachable!("signals are 1D or 2D"),
    })
}

/// Writes `s` clamped to `[0, 1]` and quantized to 8 bits. 1D signals become
/// a single row.
pub fn write_pgm(path: &Path, s: &Signal) -> LabResult<()> {
    let (rows, cols) = rows_cols(s)?;
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        s.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// Min-max scales `s` into `[0, 1]` before writing; returns `(min, max)`.
pub fn write_pgm_normalized(path: &Path, s: &Signal) -> LabResult<(f64, f64)> {
    let (lo, hi) = s
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let scaled = s
        .data()
        .iter()
        .map(|&v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    write_pgm(path, &s.with_data(scaled)?)?;
    Ok((lo, hi))
}

/// Lays same-shaped single-channel images out on a grid with `cols` tiles per
/// row and a one-pixel zero gutter. Each tile is min-max scaled when
/// `normalize` is set.
pub fn tile(images: &[Signal], cols: usize, normalize: bool) -> LabResult<Signal> {
    let first = images
        .first()
        .ok_or_else(|| LabError::Data("nothing to tile".into()))?;
    let (h, w) = rows_cols(first)?;
    let cols = cols.clamp(1, images.len());
    let rows = images.len().div_ceil(cols);
    let (gh, gw) = (rows * (h + 1) - 1, cols * (w + 1) - 1);
    let mut data = vec![0.0; gh * gw];
    for (i, img) in images.iter().enumerate() {
        if rows_cols(img)? != (h, w) {
            return Err(LabError::Data("tiles must share one shape".into()));
        }
        let (lo, hi) = img
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let (r0, c0) = ((i / cols) * (h + 1), (i % cols) * (w + 1));
        for r in 0..h {
            for c in 0..w {
                let v = img.data()[r * w + c];
                data[(r0 + r) * gw + c0 + c] = match normalize {
                    true if hi > lo => (v - lo) / (hi - lo),
                    true => 0.0,
                    false => v,
                };
            }
        }
    }
    Ok(Signal::new(data, &[gh, gw])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let s = Signal::new(
            (0..35).map(|i| (i as f64 * 0.37).sin().abs()).collect(),
            &[5, 7],
        )
        .unwrap();
        write_pgm(&path, &s).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.shape(), &[5, 7]);
        for (a, b) in s.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn header_comments_and_maxval() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut bytes = b"P5\n# note\n2 1\n# more\n100\n".to_vec();
        bytes.extend([50, 100]);
        fs::write(&path, bytes).unwrap();
        assert_eq!(read_pgm(&path).unwrap().data(), &[0.5, 1.0]);
    }

    #[test]
    fn rejects_ascii_and_truncated_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p2.pgm");
        fs::write(&path, b"P2\n1 1\n255\n0\n").unwrap();
        assert!(matches!(read_pgm(&path), Err(LabError::Format { .. })));
        fs::write(&path, b"P5\n4 4\n255\n\x01\x02").unwrap();
        assert!(read_pgm(&path)
            .unwrap_err()
            .to_string()
            .contains("byte offset"));
    }

    #[test]
    fn tiling_places_gutters() {
        let a = Signal::new(vec![1.0; 4], &[2, 2]).unwrap();
        let t = tile(&[a.clone(), a.clone(), a], 2, false).unwrap();
        assert_eq!(t.shape(), &[5, 5]);
        assert_eq!(t.data()[2], 0.0);
        assert_eq!(t.sum(), 12.0);
    }
}
