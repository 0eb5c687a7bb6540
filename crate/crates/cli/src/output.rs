//! Output files: provenance header, CSV/JSON encoding and atomic placement.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

impl RunMeta {
    /// Hash of the canonical JSON of the fully resolved configuration.
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let canonical = serde_json::to_vec(cfg).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        Self {
            tool: "oamtopo",
            version: VERSION,
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: cfg.seed,
        }
    }

    pub fn csv_comment(&self) -> String {
        format!("# {} {} config_sha256={} seed={}\n", self.tool, self.version, self.config_sha256, self.seed)
    }
}

/// CSV text: the provenance comment, a header row and data rows, LF-terminated.
pub fn csv_text(meta: &RunMeta, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut buf = meta.csv_comment().into_bytes();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
        for r in rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(buf)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    meta: &'a RunMeta,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the run metadata under `meta` next to the body's fields.
pub fn json_text<T: Serialize>(meta: &RunMeta, body: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(&Envelope { meta, body }).map_err(|e| CliError::Io(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(&target).map_err(|e| CliError::Io(format!("{}: {e}", target.display())))?;
    Ok(target)
}

/// File-name stem from a topology label: `CUCA 4x4` becomes `cuca_4x4`.
pub fn slug(label: &str) -> String {
    let mut s = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

/// Shortest round-trip form; very small or large magnitudes use an exponent.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
