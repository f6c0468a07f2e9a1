//! Self-describing `run.json` written by every command.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const RUN_RECORD: &str = "run.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Inputs, configuration and output digests of one run. Holds no
/// wall-clock fields, so equal runs on synthetic sources produce equal
/// records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Input path to content digest.
    pub inputs: BTreeMap<String, String>,
    /// Output path, relative to the output directory, to content digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunRecord {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunRecord {
            tool: "chainbench".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            seed: None,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        let digest = if path.is_dir() { dir_digest(path)? } else { sha256_hex(&fs::read(path)?) };
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Records every file under `dir` except the record itself and files
    /// whose names are in `skip`.
    pub fn add_outputs(&mut self, dir: &Path, skip: &[&str]) -> io::Result<()> {
        for (rel, digest) in tree_digests(dir)? {
            let name = rel.rsplit('/').next().unwrap_or(&rel);
            if rel != RUN_RECORD && !skip.contains(&name) {
                self.outputs.insert(rel, digest);
            }
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join(RUN_RECORD), text)
    }
}

fn tree_digests(dir: &Path) -> io::Result<BTreeMap<String, String>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> io::Result<()> {
        for e in fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
                out.insert(rel, sha256_hex(&fs::read(&p)?));
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    if dir.exists() {
        walk(dir, dir, &mut out)?;
    }
    Ok(out)
}

/// Digest over the sorted (path, digest) list of every file in `dir`.
pub fn dir_digest(dir: &Path) -> io::Result<String> {
    let mut text = String::new();
    for (rel, d) in tree_digests(dir)? {
        text.push_str(&rel);
        text.push(' ');
        text.push_str(&d);
        text.push('\n');
    }
    Ok(sha256_hex(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest_vector() {
        // Known SHA-256 of the ASCII string "abc".
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn outputs_are_relative_and_skip_volatile_files() {
        let d = tempfile::tempdir().unwrap();
        fs::create_dir(d.path().join("sub")).unwrap();
        fs::write(d.path().join("sub/a.csv"), "x").unwrap();
        fs::write(d.path().join("timings.json"), "1").unwrap();
        let mut r = RunRecord::new("synth", serde_json::json!({"seed": 1}));
        r.add_outputs(d.path(), &["timings.json"]).unwrap();
        r.write(d.path()).unwrap();
        assert_eq!(r.outputs.keys().collect::<Vec<_>>(), ["sub/a.csv"]);
        let back: RunRecord = serde_json::from_str(&fs::read_to_string(d.path().join(RUN_RECORD)).unwrap()).unwrap();
        assert_eq!(back, r);
        let before = dir_digest(d.path()).unwrap();
        fs::write(d.path().join("sub/a.csv"), "y").unwrap();
        assert_ne!(before, dir_digest(d.path()).unwrap());
    }
}
