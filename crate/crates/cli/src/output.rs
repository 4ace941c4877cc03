//! CSV formatting, atomic file output and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Reals are written with 17 significant digits so replays compare bytewise.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects CSV records in memory; nothing reaches disk until [`Table::finish`].
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().context("flushing CSV buffer")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial file at `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments that reproduce the run, with any generated seed made explicit.
    pub argv: Vec<String>,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub artifact_version: String,
    pub elapsed_ms: u64,
    pub outputs: Vec<OutputRecord>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_vec_pretty(self)?;
        text.push(b'\n');
        write_atomic(path, &text)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(-2.0), "-2.0000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(real(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn atomic_write_and_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.csv");
        write_atomic(&out, b"a,b\n1,2\n").unwrap();
        assert_eq!(std::fs::read(&out).unwrap(), b"a,b\n1,2\n");
        let m = RunManifest {
            command: "sieve".into(),
            argv: vec!["sieve".into(), "--x-max".into(), "10".into()],
            parameters: BTreeMap::new(),
            seed: None,
            artifact_version: "0".into(),
            elapsed_ms: 1,
            outputs: vec![OutputRecord {
                path: out.clone(),
                sha256: sha256_hex(b"a,b\n1,2\n"),
                bytes: 8,
            }],
        };
        let mp = manifest_path(&out);
        assert!(mp.to_string_lossy().ends_with("t.csv.manifest.json"));
        m.write(&mp).unwrap();
        assert_eq!(RunManifest::read(&mp).unwrap(), m);
    }
}
