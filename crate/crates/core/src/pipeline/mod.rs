//! Batch orchestration from a config file to a report.
//!
//! Stages run in a fixed order and each persists its artifacts plus an entry
//! in the output directory's `MANIFEST`. A run can resume at any stage once
//! the earlier artifacts are present and verify against the manifest.

mod config;
mod manifest;
mod stages;

pub use config::{parse_entries, EvalSource, InputSource, PipelineConfig, StageSeeds};
pub use manifest::{sha256_hex, ArtifactRecord, Manifest, StageRecord, StageStatus, MANIFEST_FILE, TOOL_VERSION};
pub use stages::{run_pipeline, PipelineError, Stage};

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::embed::{parse_embeddings, project_2d};
use crate::error::{Error, Result};

/// Writes `name,x,y` rows of the 2-D projection; returns the row count.
pub fn emit_figure_data(embeddings: &Path, out: &Path) -> Result<usize> {
    let text = fs::read_to_string(embeddings).map_err(|e| Error::io(embeddings, e))?;
    let (emb, names) = parse_embeddings(&text, &embeddings.display().to_string())?;
    let coords = project_2d(&emb)?;
    let mut csv = String::from("name,x,y\n");
    for (name, xy) in names.iter().zip(coords.iter_rows()) {
        let _ = writeln!(csv, "{name},{},{}", xy[0], xy[1]);
    }
    fs::write(out, csv).map_err(|e| Error::io(out, e))?;
    Ok(names.len())
}

/// Human-readable summary of an artifact directory. Artifacts whose size or
/// hash no longer match the manifest are flagged.
pub fn describe_artifacts(dir: &Path) -> Result<String> {
    let m = Manifest::read(dir)?;
    let mut out = String::new();
    let _ = writeln!(out, "artifacts: {}", dir.display());
    let _ = writeln!(out, "tool version: {}", m.tool_version);
    let _ = writeln!(out, "config hash: {}", m.config_hash);
    let seeds: Vec<String> = m.seeds.iter().map(|(n, v)| format!("{n}={v}")).collect();
    let _ = writeln!(out, "seeds: {}", seeds.join(" "));
    let _ = writeln!(out, "stages:");
    let mut flagged = 0;
    for stage in Stage::ALL {
        let Some(record) = m.stage(stage.name()) else {
            let _ = writeln!(out, "  {:<15} not run", stage.name());
            continue;
        };
        match &record.status {
            StageStatus::Complete => {
                let _ = writeln!(out, "  {:<15} complete", stage.name());
            }
            StageStatus::Failed(msg) => {
                let _ = writeln!(out, "  {:<15} FAILED: {msg}", stage.name());
            }
        }
        for a in &record.artifacts {
            let state = match fs::read(dir.join(&a.file)) {
                Err(_) => "MISSING",
                Ok(bytes) if ArtifactRecord::of(&a.file, &bytes) != *a => "HASH MISMATCH",
                Ok(_) => "ok",
            };
            if state != "ok" {
                flagged += 1;
            }
            let _ = writeln!(out, "    {:<20} {:>10} bytes  {state}", a.file, a.bytes);
        }
    }
    if flagged > 0 {
        let _ = writeln!(out, "{flagged} artifact(s) failed verification");
    }
    Ok(out)
}
