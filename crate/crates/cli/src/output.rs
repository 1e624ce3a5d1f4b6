//! CSV emission and run manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub use thermoproc::reachable::format_float as fmt;

pub const MANIFEST_NAME: &str = "manifest.json";

/// A file produced by an experiment, held in memory until written.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Builds CSV bytes: `#` comment lines, then header and rows.
pub fn csv_file(name: &str, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<OutputFile> {
    let mut bytes = Vec::new();
    for c in comments {
        bytes.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        let wrap = |e: csv::Error| CliError::io(name, std::io::Error::other(e));
        w.write_record(header).map_err(wrap)?;
        for row in rows {
            w.write_record(row).map_err(wrap)?;
        }
        w.flush().map_err(|e| CliError::io(name, e))?;
    }
    Ok(OutputFile {
        name: name.to_string(),
        bytes,
    })
}

pub fn json_file<T: Serialize>(name: &str, value: &T) -> OutputFile {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    OutputFile {
        name: name.to_string(),
        bytes,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub outputs: Vec<ManifestEntry>,
    pub wall_clock_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `files` into `dir` in order, then the manifest.
pub fn write_run(
    dir: &Path,
    config: &ExperimentConfig,
    files: &[OutputFile],
    wall_clock_seconds: f64,
) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut outputs = Vec::with_capacity(files.len());
    for f in files {
        let path = dir.join(&f.name);
        std::fs::write(&path, &f.bytes).map_err(|e| CliError::io(&path, e))?;
        outputs.push(ManifestEntry {
            file: f.name.clone(),
            bytes: f.bytes.len(),
            sha256: sha256_hex(&f.bytes),
        });
    }
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: config.experiment.kind().to_string(),
        config: config.clone(),
        outputs,
        wall_clock_seconds,
    };
    let m = json_file(MANIFEST_NAME, &manifest);
    let path = dir.join(MANIFEST_NAME);
    std::fs::write(&path, m.bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}

/// Names of the files in `dir` whose digest no longer matches the manifest.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::config(MANIFEST_NAME, e.to_string()))?;
    let mut bad = Vec::new();
    for entry in &manifest.outputs {
        let p = dir.join(&entry.file);
        match std::fs::read(&p) {
            Ok(bytes) if sha256_hex(&bytes) == entry.sha256 => {}
            _ => bad.push(entry.file.clone()),
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Experiment, Fig3Params};

    #[test]
    fn csv_has_comments_then_header() {
        let f = csv_file("t.csv", &["a = 1".into()], &["x", "y"], &[vec![fmt(0.1), fmt(2.0)]]).unwrap();
        let text = String::from_utf8(f.bytes).unwrap();
        assert_eq!(text, "# a = 1\nx,y\n1.0000000000000001e-1,2.0000000000000000e0\n");
    }

    #[test]
    fn digests_are_checked() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig::new(Experiment::Fig3(Fig3Params::default()), dir.path());
        let file = OutputFile {
            name: "a.txt".into(),
            bytes: b"hello".to_vec(),
        };
        write_run(dir.path(), &config, &[file], 0.0).unwrap();
        assert!(verify_manifest(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("a.txt"), b"changed").unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["a.txt".to_string()]);
    }
}
