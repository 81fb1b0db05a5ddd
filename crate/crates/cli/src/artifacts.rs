//! Content-addressed run directories, write-once artifacts and the manifest.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hyst_core::corpus::{ACTS_FILE, DATA_FILE, DEV_LIST, TEST_LIST};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "config.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of the corpus files, so that runs over different data never share
/// a directory.
pub fn data_digest(data_dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in [DATA_FILE, ACTS_FILE, DEV_LIST, TEST_LIST] {
        let path = data_dir.join(name);
        h.update(name.as_bytes());
        if path.is_file() {
            let bytes = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Hash naming the run directory: the path-free config plus the data digest.
pub fn run_hash(config: &RunConfig, data_digest: &str) -> String {
    let mut key = config.fingerprint_json();
    key.push('\n');
    key.push_str(data_digest);
    sha256_hex(key.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestLine<'a> {
    subcommand: &'a str,
    config_hash: &'a str,
    seeds: &'a [u64],
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

/// One run directory. Tracks the files read and written by the current
/// subcommand so they can be recorded in the manifest.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    hash: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl RunDir {
    /// Opens (creating if needed) the directory for `config` and records the
    /// resolved config in it, without paths, so that identical runs produce
    /// identical files wherever they live.
    pub fn open(config: &RunConfig) -> Result<Self> {
        let digest = data_digest(&config.data_dir)?;
        let hash = run_hash(config, &digest);
        let root = config.out_dir.join(&hash[..16]);
        fs::create_dir_all(&root).with_context(|| format!("cannot create run directory {}", root.display()))?;
        let mut run = Self {
            root,
            hash,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        let mut record: serde_json::Value = serde_json::from_str(&config.fingerprint_json()).expect("config parses");
        record["data_sha256"] = serde_json::Value::String(digest);
        let mut text = serde_json::to_string_pretty(&record).expect("config serializes");
        text.push('\n');
        run.write_once(CONFIG_FILE, text.as_bytes())?;
        run.outputs.clear();
        Ok(run)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    /// Writes `bytes` to `rel` unless it already holds exactly these bytes.
    /// An existing file with other contents is never overwritten.
    pub fn write_once(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(rel);
        if path.is_file() {
            let old = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
            if old != bytes {
                bail!(
                    "refusing to overwrite {} with different contents; artifacts are write-once, \
                     so use a fresh --out directory",
                    path.display()
                );
            }
        } else {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let tmp = path.with_extension("partial");
            fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
            fs::rename(&tmp, &path)?;
        }
        self.outputs.push(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Path of a prerequisite artifact, or an error naming the subcommand
    /// that produces it.
    pub fn require(&self, rel: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        if !path.is_file() {
            bail!(
                "missing {} in {}; run `hyst {producer}` first with the same configuration",
                rel,
                self.root.display()
            );
        }
        Ok(path)
    }

    /// Reads a prerequisite artifact and records it as an input.
    pub fn read_input(&mut self, rel: &str, producer: &str) -> Result<Vec<u8>> {
        let path = self.require(rel, producer)?;
        let bytes = fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?;
        self.record_input(rel, &bytes);
        Ok(bytes)
    }

    pub fn record_input(&mut self, rel: &str, bytes: &[u8]) {
        let entry = FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        };
        if !self.inputs.contains(&entry) {
            self.inputs.push(entry);
        }
    }

    /// Appends one manifest line for the finished subcommand and resets the
    /// tracked inputs and outputs.
    pub fn finish(&mut self, subcommand: &str, seeds: &[u64]) -> Result<()> {
        let line = ManifestLine {
            subcommand,
            config_hash: &self.hash,
            seeds,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string(&line).expect("manifest line serializes");
        text.push('\n');
        let path = self.path(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .with_context(|| format!("cannot open {}", path.display()))?;
        f.write_all(text.as_bytes())?;
        self.inputs.clear();
        self.outputs.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(out: &Path, data: &Path) -> RunDir {
        for name in [DATA_FILE, DEV_LIST, TEST_LIST] {
            fs::write(data.join(name), "{}").unwrap();
        }
        let mut c = RunConfig::desk();
        c.data_dir = data.to_path_buf();
        c.out_dir = out.to_path_buf();
        RunDir::open(&c).unwrap()
    }

    #[test]
    fn artifacts_are_write_once() {
        let out = tempfile::tempdir().unwrap();
        let data = tempfile::tempdir().unwrap();
        let mut run = run_in(out.path(), data.path());
        run.write_once("a/b.txt", b"one").unwrap();
        run.write_once("a/b.txt", b"one").unwrap();
        let err = run.write_once("a/b.txt", b"two").unwrap_err().to_string();
        assert!(err.contains("write-once"));
        assert_eq!(fs::read(run.path("a/b.txt")).unwrap(), b"one");
    }

    #[test]
    fn missing_prerequisite_names_the_producer() {
        let out = tempfile::tempdir().unwrap();
        let data = tempfile::tempdir().unwrap();
        let run = run_in(out.path(), data.path());
        let err = run.require("checkpoints/ov-seed1.ckpt", "train-ov").unwrap_err().to_string();
        assert!(err.contains("run `hyst train-ov` first"), "{err}");
    }

    #[test]
    fn manifest_records_inputs_and_outputs() {
        let out = tempfile::tempdir().unwrap();
        let data = tempfile::tempdir().unwrap();
        let mut run = run_in(out.path(), data.path());
        run.write_once("x.json", b"{}").unwrap();
        run.finish("ingest", &[1, 2, 3]).unwrap();
        run.read_input("x.json", "ingest").unwrap();
        run.finish("stats", &[]).unwrap();
        let text = fs::read_to_string(run.path(MANIFEST_FILE)).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["subcommand"], "ingest");
        assert_eq!(lines[0]["outputs"][0]["path"], "x.json");
        assert_eq!(lines[1]["inputs"][0]["sha256"], sha256_hex(b"{}"));
        assert_eq!(lines[1]["config_hash"], run.hash());
    }

    #[test]
    fn same_config_and_data_share_a_directory() {
        let out = tempfile::tempdir().unwrap();
        let data = tempfile::tempdir().unwrap();
        let a = run_in(out.path(), data.path());
        let b = run_in(out.path(), data.path());
        assert_eq!(a.root(), b.root());
        fs::write(data.path().join(DATA_FILE), "{\"x\":1}").unwrap();
        let mut c = RunConfig::desk();
        c.data_dir = data.path().to_path_buf();
        c.out_dir = out.path().to_path_buf();
        assert_ne!(RunDir::open(&c).unwrap().root(), a.root());
    }
}
