//! The `MANIFEST` file written next to every artifact set.
//!
//! ```text
//! tool_version 0.1.0
//! config_hash 3f0a...
//! seed master 42
//! stage ingest complete
//! artifact ingest cohort.journeys 5120 9c1e...
//! stage sgns failed walk corpus has no walk of length 2 or more
//! ```

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "MANIFEST";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageStatus {
    Complete,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactRecord {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub artifacts: Vec<ArtifactRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: Vec<(String, u64)>,
    pub stages: Vec<StageRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ArtifactRecord {
    pub fn of(file: &str, contents: &[u8]) -> Self {
        ArtifactRecord {
            file: file.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents),
        }
    }
}

impl Manifest {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = format!("tool_version {}\nconfig_hash {}\n", self.tool_version, self.config_hash);
        for (name, value) in &self.seeds {
            out.push_str(&format!("seed {name} {value}\n"));
        }
        for s in &self.stages {
            match &s.status {
                StageStatus::Complete => out.push_str(&format!("stage {} complete\n", s.name)),
                StageStatus::Failed(msg) => {
                    let msg = msg.replace('\n', " ");
                    out.push_str(&format!("stage {} failed {msg}\n", s.name));
                }
            }
            for a in &s.artifacts {
                out.push_str(&format!("artifact {} {} {} {}\n", s.name, a.file, a.bytes, a.sha256));
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |i: usize, m: &str| Error::Manifest(format!("line {}: {m}", i + 1));
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.splitn(2, ' ');
            let key = parts.next().unwrap_or("");
            let rest = parts.next().unwrap_or("").trim();
            match key {
                "" => continue,
                "tool_version" => m.tool_version = rest.to_string(),
                "config_hash" => m.config_hash = rest.to_string(),
                "seed" => {
                    let (name, v) = rest.split_once(' ').ok_or_else(|| bad(i, "bad seed line"))?;
                    let v = v.parse().map_err(|_| bad(i, "bad seed value"))?;
                    m.seeds.push((name.to_string(), v));
                }
                "stage" => {
                    let mut f = rest.splitn(3, ' ');
                    let name = f.next().unwrap_or("").to_string();
                    let status = match f.next() {
                        Some("complete") => StageStatus::Complete,
                        Some("failed") => StageStatus::Failed(f.next().unwrap_or("").to_string()),
                        _ => return Err(bad(i, "bad stage status")),
                    };
                    m.stages.push(StageRecord {
                        name,
                        status,
                        artifacts: Vec::new(),
                    });
                }
                "artifact" => {
                    let f: Vec<&str> = rest.split(' ').collect();
                    let [stage, file, bytes, sha] = f[..] else {
                        return Err(bad(i, "artifact line needs 4 fields"));
                    };
                    let record = ArtifactRecord {
                        file: file.to_string(),
                        bytes: bytes.parse().map_err(|_| bad(i, "bad artifact size"))?,
                        sha256: sha.to_string(),
                    };
                    m.stages
                        .iter_mut()
                        .rev()
                        .find(|s| s.name == stage)
                        .ok_or_else(|| bad(i, "artifact before its stage"))?
                        .artifacts
                        .push(record);
                }
                other => return Err(bad(i, &format!("unknown entry `{other}`"))),
            }
        }
        Ok(m)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))
    }
}
