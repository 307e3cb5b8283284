//! File-based stages: `extract` → `impute` → `assess` → `report`, plus the
//! synthetic fixture generator.
//!
//! Per-AOI outputs go to `<output_dir>/<aoi_id>/`; cross-AOI outputs and
//! `run_manifest.json` go to `<output_dir>/`.

pub mod assess;
pub mod config;
pub mod extract;
pub mod impute;
pub mod io;
pub mod manifest;
pub mod report;
pub mod sampling;
pub mod synth;

use log::error;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::risk::REGIONAL_ID;

pub use config::{AoiConfig, RunConfig};
pub use manifest::{StageRecord, MANIFEST_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Impute,
    Assess,
    Report,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Extract => "extract",
            Stage::Impute => "impute",
            Stage::Assess => "assess",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Stage::Extract, Stage::Impute, Stage::Assess, Stage::Report]
            .into_iter()
            .find(|st| st.as_str() == s)
    }
}

fn run_aoi(stage: Stage, cfg: &RunConfig, aoi: &AoiConfig) -> (StageRecord, Result<()>) {
    let mut rec = StageRecord::new(&aoi.id);
    let res = match stage {
        Stage::Extract => extract::extract_aoi(cfg, aoi, &mut rec).map(|_| ()),
        Stage::Impute => impute::impute_aoi(cfg, aoi, &mut rec).map(|_| ()),
        Stage::Assess => assess::assess_aoi(cfg, aoi, &mut rec).map(|_| ()),
        Stage::Report => Ok(()),
    };
    if let Err(e) = &res {
        rec.status = if e.is_input_error() { "input_error" } else { "failed" }.to_string();
    }
    rec.finish();
    (rec, res)
}

/// Runs one stage over the selected AOIs (all when `aoi_ids` is empty).
/// Every AOI is attempted; the first error in config order is returned after
/// the manifest is updated.
pub fn run(stage: Stage, cfg: &RunConfig, aoi_ids: &[String]) -> Result<()> {
    let aois = cfg.select_aois(aoi_ids)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker threads: {e}")))?;
    pool.install(|| {
        let results: Vec<(StageRecord, Result<()>)> = if stage == Stage::Report {
            Vec::new()
        } else {
            aois.par_iter().map(|a| run_aoi(stage, cfg, a)).collect()
        };
        let mut first_err = None;
        let mut records = Vec::with_capacity(results.len());
        for (rec, res) in results {
            if let Err(e) = res {
                error!("{}: {e}", rec.aoi_id);
                first_err.get_or_insert(e);
            }
            records.push(rec);
        }
        let global = match stage {
            Stage::Assess => {
                let mut g = StageRecord::new(REGIONAL_ID);
                let r = assess::write_global_summaries(cfg, &mut g);
                finish_global(&mut g, r, &mut first_err);
                Some(g)
            }
            Stage::Report => {
                let mut g = StageRecord::new(REGIONAL_ID);
                let r = report::report(cfg, &mut g);
                finish_global(&mut g, r, &mut first_err);
                Some(g)
            }
            _ => None,
        };
        manifest::update_manifest(cfg, stage.as_str(), &records, global.as_ref())?;
        first_err.map_or(Ok(()), Err)
    })
}

fn finish_global(g: &mut StageRecord, r: Result<()>, first_err: &mut Option<Error>) {
    if let Err(e) = r {
        g.status = if e.is_input_error() { "input_error" } else { "failed" }.to_string();
        error!("{e}");
        first_err.get_or_insert(e);
    }
    g.finish();
}

/// Runs extract, impute, assess and report in order, stopping at the first
/// failing stage.
pub fn run_all(cfg: &RunConfig, aoi_ids: &[String]) -> Result<()> {
    for stage in [Stage::Extract, Stage::Impute, Stage::Assess, Stage::Report] {
        run(stage, cfg, aoi_ids)?;
    }
    Ok(())
}
