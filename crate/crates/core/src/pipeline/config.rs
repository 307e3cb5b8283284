//! Run configuration.
//!
//! ```toml
//! seed = 42                # required
//! gate_threshold = 0.15
//! tie_window = 0.01
//! n_iter = 30
//! k_folds = 5
//! output_dir = "out"
//! threads = 4              # optional; omitted uses every core
//! record_timings = false
//!
//! [[aoi]]
//! id = "brazoria_p1"
//! workflow = "tuning_extended"
//! rasters = "brazoria_p1/rasters.toml"
//! parcels = "brazoria_p1/parcels.csv"
//! panoramas = "brazoria_p1/panoramas.jsonl"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ensemble::workflow::{
    WorkflowMode, WorkflowSettings, DEFAULT_GATE_THRESHOLD, DEFAULT_K_FOLDS, DEFAULT_N_ITER, DEFAULT_TIE_WINDOW,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    #[serde(default = "default_gate")]
    gate_threshold: f64,
    #[serde(default = "default_tie")]
    tie_window: f64,
    #[serde(default = "default_n_iter")]
    n_iter: usize,
    #[serde(default = "default_k")]
    k_folds: usize,
    #[serde(default = "default_output")]
    output_dir: String,
    #[serde(default)]
    threads: Option<usize>,
    #[serde(default)]
    record_timings: bool,
    #[serde(default)]
    aoi: Vec<RawAoi>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAoi {
    id: String,
    workflow: String,
    rasters: String,
    parcels: String,
    panoramas: String,
}

fn default_gate() -> f64 {
    DEFAULT_GATE_THRESHOLD
}
fn default_tie() -> f64 {
    DEFAULT_TIE_WINDOW
}
fn default_n_iter() -> usize {
    DEFAULT_N_ITER
}
fn default_k() -> usize {
    DEFAULT_K_FOLDS
}
fn default_output() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoiConfig {
    pub id: String,
    pub workflow: WorkflowMode,
    pub rasters: PathBuf,
    pub parcels: PathBuf,
    pub panoramas: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub config_path: PathBuf,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub gate_threshold: f64,
    pub tie_window: f64,
    pub n_iter: usize,
    pub k_folds: usize,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub record_timings: bool,
    pub aois: Vec<AoiConfig>,
    /// sha256 of the settings that affect outputs (paths relative to the
    /// config file, thread count excluded).
    pub digest: String,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::input_file(path, line, e.message().to_string())
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let bad = |m: String| Error::input_file(path, 0, m);

        if !(raw.gate_threshold.is_finite()) {
            return Err(bad("gate_threshold must be finite".into()));
        }
        if !(raw.tie_window >= 0.0 && raw.tie_window.is_finite()) {
            return Err(bad("tie_window must be a non-negative number".into()));
        }
        if raw.n_iter == 0 {
            return Err(bad("n_iter must be at least 1".into()));
        }
        if raw.k_folds < 2 {
            return Err(bad("k_folds must be at least 2".into()));
        }
        if raw.threads == Some(0) {
            return Err(bad("threads must be at least 1 when given".into()));
        }
        let mut ids = BTreeSet::new();
        let mut aois = Vec::with_capacity(raw.aoi.len());
        for a in &raw.aoi {
            if a.id.is_empty() || !a.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(bad(format!(
                    "AOI id {:?} must be non-empty and use only letters, digits, '_' or '-'",
                    a.id
                )));
            }
            if a.id == crate::risk::REGIONAL_ID {
                return Err(bad(format!("AOI id {:?} is reserved", a.id)));
            }
            if !ids.insert(a.id.clone()) {
                return Err(bad(format!("duplicate AOI id {:?}", a.id)));
            }
            let workflow = WorkflowMode::parse(&a.workflow).ok_or_else(|| {
                bad(format!(
                    "AOI {}: unknown workflow {:?} (expected batch_standard or tuning_extended)",
                    a.id, a.workflow
                ))
            })?;
            let paths = [&a.rasters, &a.parcels, &a.panoramas];
            if paths[0] == paths[1] || paths[0] == paths[2] || paths[1] == paths[2] {
                return Err(bad(format!("AOI {}: rasters, parcels and panoramas must be distinct files", a.id)));
            }
            aois.push(AoiConfig {
                id: a.id.clone(),
                workflow,
                rasters: resolve(&base_dir, &a.rasters),
                parcels: resolve(&base_dir, &a.parcels),
                panoramas: resolve(&base_dir, &a.panoramas),
            });
        }
        let mut canonical = raw.clone();
        canonical.threads = None;
        let digest = super::io::sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes());
        Ok(RunConfig {
            config_path: path.to_path_buf(),
            output_dir: resolve(&base_dir, &raw.output_dir),
            base_dir,
            seed: raw.seed,
            gate_threshold: raw.gate_threshold,
            tie_window: raw.tie_window,
            n_iter: raw.n_iter,
            k_folds: raw.k_folds,
            threads: raw.threads,
            record_timings: raw.record_timings,
            aois,
            digest,
        })
    }

    pub fn workflow_settings(&self) -> WorkflowSettings {
        WorkflowSettings {
            gate_threshold: self.gate_threshold,
            tie_window: self.tie_window,
            n_iter: self.n_iter,
            k_folds: self.k_folds,
            ..WorkflowSettings::default()
        }
    }

    /// Replaces the seed (command-line override) and refreshes the digest.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if seed != self.seed {
            self.digest = super::io::sha256_hex(format!("{}:seed={seed}", self.digest).as_bytes());
            self.seed = seed;
        }
        self
    }

    /// Restricts the run to the named AOIs, in config order.
    pub fn select_aois(&self, ids: &[String]) -> Result<Vec<AoiConfig>> {
        if ids.is_empty() {
            return Ok(self.aois.clone());
        }
        for id in ids {
            if !self.aois.iter().any(|a| &a.id == id) {
                return Err(Error::InvalidInput(format!("AOI {id:?} is not in the config")));
            }
        }
        Ok(self.aois.iter().filter(|a| ids.contains(&a.id)).cloned().collect())
    }

    pub fn aoi_dir(&self, aoi_id: &str) -> PathBuf {
        self.output_dir.join(aoi_id)
    }
}
