//! Artifacts on disk: the output directory with its manifest, and the
//! content cache shared between runs.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::records::to_json;

pub const MANIFEST: &str = "manifest.json";
pub const ERROR_RECORD: &str = "error.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes artifacts into one directory and records them for the manifest.
/// Every file of a run goes through one `Artifacts`.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<Artifact>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.retain(|a| a.path != name);
        self.written.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> io::Result<()> {
        self.write(name, &to_json(value))
    }

    pub fn written(&self) -> &[Artifact] {
        &self.written
    }

    /// Writes the manifest listing every artifact so far.
    pub fn finish(
        self,
        command: &str,
        hash: &str,
        parameters: &BTreeMap<String, String>,
        status: u8,
    ) -> io::Result<Vec<Artifact>> {
        let manifest = json!({
            "command": command,
            "config_hash": hash,
            "parameters": parameters,
            "status": status,
            "artifacts": self.written.iter().map(|a| json!({
                "path": a.path,
                "sha256": a.sha256,
                "bytes": a.bytes,
            })).collect::<Value>(),
        });
        fs::write(self.dir.join(MANIFEST), to_json(&manifest))?;
        Ok(self.written)
    }
}

/// A previous run in `dir` with the same config hash whose artifacts are all
/// still present and unchanged: its status and artifact list.
pub fn previous_run(dir: &Path, hash: &str) -> Option<(u8, Vec<Artifact>)> {
    let text = fs::read(dir.join(MANIFEST)).ok()?;
    let manifest: Value = serde_json::from_slice(&text).ok()?;
    if manifest.get("config_hash")?.as_str()? != hash {
        return None;
    }
    let status = u8::try_from(manifest.get("status")?.as_u64()?).ok()?;
    let mut out = Vec::new();
    for a in manifest.get("artifacts")?.as_array()? {
        let path = a.get("path")?.as_str()?;
        let expected = a.get("sha256")?.as_str()?;
        let bytes = fs::read(dir.join(path)).ok()?;
        if sha256_hex(&bytes) != expected {
            return None;
        }
        out.push(Artifact {
            path: path.to_string(),
            sha256: expected.to_string(),
            bytes: bytes.len(),
        });
    }
    Some((status, out))
}

/// Content store keyed by a descriptive string, e.g. one branch point.
#[derive(Debug, Clone)]
pub struct RecordCache {
    dir: Option<PathBuf>,
}

impl RecordCache {
    pub fn new(dir: &Path) -> Self {
        RecordCache {
            dir: Some(dir.to_path_buf()),
        }
    }

    pub fn disabled() -> Self {
        RecordCache { dir: None }
    }

    fn slot(&self, key: &str, name: &str) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(&sha256_hex(key.as_bytes())[..32]).join(name))
    }

    pub fn load(&self, key: &str, name: &str) -> Option<Vec<u8>> {
        fs::read(self.slot(key, name)?).ok()
    }

    /// Writes the entry together with its key text; failures only cost a
    /// recomputation later, so they are ignored.
    pub fn store(&self, key: &str, name: &str, bytes: &[u8]) {
        let Some(path) = self.slot(key, name) else {
            return;
        };
        let dir = path.parent().expect("slot has a directory");
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("key.txt"), key);
            let _ = fs::write(&path, bytes);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn previous_run_requires_hash_and_contents() {
        let tmp = tempfile::tempdir().unwrap();
        let mut a = Artifacts::create(tmp.path()).unwrap();
        a.write("x.csv", b"a\n1\n").unwrap();
        a.finish("curve", "abc", &BTreeMap::new(), 0).unwrap();
        assert_eq!(previous_run(tmp.path(), "abc").unwrap().1.len(), 1);
        assert!(previous_run(tmp.path(), "abd").is_none());
        fs::write(tmp.path().join("x.csv"), "a\n2\n").unwrap();
        assert!(previous_run(tmp.path(), "abc").is_none());
    }

    #[test]
    fn record_cache_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let c = RecordCache::new(tmp.path());
        assert!(c.load("k", "v.json").is_none());
        c.store("k", "v.json", b"1");
        assert_eq!(c.load("k", "v.json").as_deref(), Some(&b"1"[..]));
        assert!(c.load("k2", "v.json").is_none());
        assert!(RecordCache::disabled().load("k", "v.json").is_none());
    }
}
