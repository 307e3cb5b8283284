//! `run_manifest.json`: config digest, per-stage file digests and per-AOI
//! statuses. Paths are stored relative to the output directory and inputs
//! under logical names, so two runs over copies of the same inputs produce
//! the same manifest.

use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::io::{file_sha256, read_text, write_atomic};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug)]
pub struct StageRecord {
    pub aoi_id: String,
    pub status: String,
    inputs: Map<String, Value>,
    outputs: Map<String, Value>,
    started: Instant,
    elapsed_ms: Option<u64>,
}

impl StageRecord {
    pub fn new(aoi_id: &str) -> Self {
        StageRecord {
            aoi_id: aoi_id.to_string(),
            status: "ok".to_string(),
            inputs: Map::new(),
            outputs: Map::new(),
            started: Instant::now(),
            elapsed_ms: None,
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.insert(name.to_string(), Value::String(file_sha256(path)?));
        Ok(())
    }

    pub fn output(&mut self, cfg: &RunConfig, path: &Path) -> Result<()> {
        let rel = path.strip_prefix(&cfg.output_dir).unwrap_or(path);
        let key = rel.to_string_lossy().replace('\\', "/");
        self.outputs.insert(key, Value::String(file_sha256(path)?));
        Ok(())
    }

    pub fn finish(&mut self) {
        self.elapsed_ms = Some(self.started.elapsed().as_millis() as u64);
    }

    fn to_json(&self, timings: bool) -> Value {
        let mut v = json!({
            "status": self.status,
            "inputs": self.inputs,
            "outputs": self.outputs,
        });
        if timings {
            v["elapsed_ms"] = json!(self.elapsed_ms.unwrap_or(0));
        }
        v
    }
}

/// Merges one stage's records into the manifest, keeping other stages and
/// AOIs from earlier runs.
pub fn update_manifest(cfg: &RunConfig, stage: &str, records: &[StageRecord], global: Option<&StageRecord>) -> Result<()> {
    let path = cfg.output_dir.join(MANIFEST_FILE);
    let mut doc: Value = if path.exists() {
        serde_json::from_str(&read_text(&path)?).unwrap_or_else(|_| json!({}))
    } else {
        json!({})
    };
    if !doc.is_object() {
        doc = json!({});
    }
    if doc.get("config_digest").and_then(Value::as_str) != Some(cfg.digest.as_str()) {
        doc = json!({});
    }
    doc["config_digest"] = json!(cfg.digest);
    doc["seed"] = json!(cfg.seed);
    if !doc["stages"].is_object() {
        doc["stages"] = json!({});
    }
    let section = &mut doc["stages"][stage];
    if !section.is_object() {
        *section = json!({ "aois": {} });
    }
    for r in records {
        section["aois"][r.aoi_id.as_str()] = r.to_json(cfg.record_timings);
    }
    if let Some(g) = global {
        section["global"] = g.to_json(cfg.record_timings);
    }
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidInput(e.to_string()))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())
}
