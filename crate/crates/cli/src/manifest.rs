//! Run manifests: what was run, on which inputs, with which resolved settings, producing
//! which bytes. No timestamps or host details, so reruns reproduce the manifest too.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fail::{Fail, R};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> R<String> {
    let bytes = std::fs::read(path).map_err(|e| Fail::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn digest(path: &Path) -> R<FileDigest> {
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

pub struct Recorder {
    args: Vec<String>,
    config: serde_json::Value,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(args: &[String]) -> Recorder {
        Recorder {
            args: args.to_vec(),
            config: serde_json::Value::Null,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, c: &impl Serialize) -> R<()> {
        self.config = serde_json::to_value(c)?;
        Ok(())
    }

    pub fn seed(&mut self, name: &str, v: u64) {
        self.seeds.insert(name.into(), v);
    }

    pub fn input(&mut self, p: impl Into<PathBuf>) {
        self.inputs.push(p.into());
    }

    pub fn inputs<'a>(&mut self, ps: impl IntoIterator<Item = &'a PathBuf>) {
        self.inputs.extend(ps.into_iter().cloned());
    }

    pub fn output(&mut self, p: impl Into<PathBuf>) {
        self.outputs.push(p.into());
    }

    /// Digests every recorded file and writes the manifest to `path`.
    pub fn finish(self, path: &Path) -> R<Manifest> {
        let config_bytes = serde_json::to_vec(&self.config)?;
        let m = Manifest {
            tool: "blm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            args: self.args,
            config_hash: hex::encode(Sha256::digest(&config_bytes)),
            config: self.config,
            seeds: self.seeds,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<R<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<R<_>>()?,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Fail::io(path, e))?;
        Ok(m)
    }
}

/// Manifest location for a single output file: `<file>.manifest.json`.
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn read(path: &Path) -> R<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Files whose current digest differs from the recorded one (or that are missing).
pub fn changed(files: &[FileDigest]) -> Vec<String> {
    files
        .iter()
        .filter(|f| sha256_file(Path::new(&f.path)).ok().as_deref() != Some(f.sha256.as_str()))
        .map(|f| f.path.clone())
        .collect()
}
