pub mod idx;
pub mod model;
pub mod pgm;

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{LabError, LabResult};

/// Reads a file, transparently inflating gzip content.
pub(crate) fn read_maybe_gzip(path: &Path) -> LabResult<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| LabError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| LabError::format(path, format!("gzip: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}
