//! `WNAE` model files. Layout, all little-endian: magic `b"WNAE"`, version
//! `u32`, activation code `u32`, layer count `u32`, that many `u32` widths,
//! then the flat `f64` parameters.

use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use wienerlab_core::trainer::{Activation, DenseAutoencoder};

use crate::error::{LabError, LabResult};

pub const MAGIC: &[u8; 4] = b"WNAE";
pub const VERSION: u32 = 1;

pub fn encode(model: &DenseAutoencoder) -> Vec<u8> {
    let params = model.parameters();
    let mut out = Vec::with_capacity(16 + 4 * model.widths().len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.write_u32::<LittleEndian>(VERSION).expect("vec write");
    out.write_u32::<LittleEndian>(model.activation().code())
        .expect("vec write");
    out.write_u32::<LittleEndian>(model.widths().len() as u32)
        .expect("vec write");
    for &w in model.widths() {
        out.write_u32::<LittleEndian>(w as u32).expect("vec write");
    }
    for p in params {
        out.write_f64::<LittleEndian>(p).expect("vec write");
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> LabResult<DenseAutoencoder> {
    let fail = |offset: usize, what: &str| {
        LabError::format(path, format!("{what} at byte offset {offset}"))
    };
    let word = |offset: usize| {
        bytes
            .get(offset..offset + 4)
            .map(LittleEndian::read_u32)
            .ok_or_else(|| fail(offset, "truncated header"))
    };
    if bytes.get(..4) != Some(&MAGIC[..]) {
        return Err(fail(0, "bad magic"));
    }
    let version = word(4)?;
    if version != VERSION {
        return Err(fail(4, &format!("unsupported version {version}")));
    }
    let activation =
        Activation::from_code(word(8)?).map_err(|_| fail(8, "unknown activation code"))?;
    let layers = word(12)? as usize;
    let widths = (0..layers)
        .map(|i| word(16 + 4 * i).map(|w| w as usize))
        .collect::<LabResult<Vec<_>>>()?;
    let mut model =
        DenseAutoencoder::zeros(&widths, activation).map_err(|e| fail(12, &e.to_string()))?;
    let start = 16 + 4 * layers;
    let body = &bytes[start.min(bytes.len())..];
    if body.len() != 8 * model.num_parameters() {
        return Err(fail(
            start,
            &format!(
                "parameter block of {} bytes, expected {}",
                body.len(),
                8 * model.num_parameters()
            ),
        ));
    }
    let params: Vec<f64> = body.chunks_exact(8).map(LittleEndian::read_f64).collect();
    model
        .set_parameters(&params)
        .map_err(|e| fail(start, &e.to_string()))?;
    Ok(model)
}

pub fn write_model(path: &Path, model: &DenseAutoencoder) -> LabResult<()> {
    fs::write(path, encode(model)).map_err(|e| LabError::io(path, e))
}

pub fn read_model(path: &Path) -> LabResult<DenseAutoencoder> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    decode(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = DenseAutoencoder::random(&[6, 3, 6], Activation::Tanh, 5).unwrap();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"WNAE");
        assert_eq!(decode(Path::new("m"), &bytes).unwrap(), m);
    }

    #[test]
    fn truncated_body_is_rejected() {
        let m = DenseAutoencoder::random(&[4, 4], Activation::Relu, 1).unwrap();
        let bytes = encode(&m);
        let err = decode(Path::new("m"), &bytes[..bytes.len() - 3]).unwrap_err();
        assert!(err.to_string().contains("byte offset 24"), "{err}");
    }
}
