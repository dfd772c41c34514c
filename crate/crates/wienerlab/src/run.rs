//! Run directories and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Config;
use crate::error::{LabError, LabResult};

pub const CONFIG_ECHO: &str = "config.toml";

/// Output directory of one subcommand invocation.
#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates `<root>/<command>-<timestamp>` (with a numeric suffix on
    /// collision) and writes the effective config into it.
    pub fn create(root: &Path, command: &str, cfg: &Config) -> LabResult<Self> {
        fs::create_dir_all(root).map_err(|e| LabError::io(root, e))?;
        let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
        let mut suffix = 0;
        let path = loop {
            let name = match suffix {
                0 => format!("{command}-{stamp}"),
                n => format!("{command}-{stamp}-{n}"),
            };
            let candidate = root.join(name);
            match fs::create_dir(&candidate) {
                Ok(()) => break candidate,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => suffix += 1,
                Err(e) => return Err(LabError::io(candidate, e)),
            }
        };
        let dir = Self { path };
        dir.write_text(CONFIG_ECHO, &cfg.to_toml())?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> LabResult<()> {
        let p = self.file(name);
        fs::write(&p, text).map_err(|e| LabError::io(p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> LabResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// CSV with a header row.
    pub fn write_csv<R: Serialize>(
        &self,
        name: &str,
        header: &[&str],
        rows: &[R],
    ) -> LabResult<()> {
        let p = self.file(name);
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(&p)?;
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| LabError::io(p, e))
    }
}
