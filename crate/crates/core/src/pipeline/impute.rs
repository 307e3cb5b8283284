//! Imputation stage: feature matrix, workflow, merged HDSL dataset.

use std::path::Path;

use log::info;

use crate::ensemble::outliers::clean_reason;
use crate::ensemble::persist::model_to_json;
use crate::ensemble::stats::{mean, std_dev};
use crate::ensemble::workflow::{run_workflow, ModelReport, WorkflowOutcome};
use crate::ensemble::Dataset;
use crate::error::{Error, Result};
use crate::features::{build_features, BoundingBox, HdslSource, StreetEncoder, FEATURE_NAMES};

use super::config::{AoiConfig, RunConfig};
use super::extract::require_estimates;
use super::io::{csv_bytes, fmt_f64, fmt_opt, load_rasters, read_parcels, remove_stale, write_atomic, CsvTable};
use super::manifest::StageRecord;
use super::sampling::sample_parcel;

pub const FEATURES_FILE: &str = "features.csv";
pub const MERGED_FILE: &str = "merged_hdsl.csv";
pub const MODEL_FILE: &str = "model.json";
pub const MODEL_REPORT_FILE: &str = "model_report.csv";
pub const IMPUTE_SUMMARY_FILE: &str = "impute_summary.csv";
pub const IMPUTE_DROPS_FILE: &str = "impute_drops.csv";

pub const MODEL_REPORT_HEADER: [&str; 14] = [
    "aoi_id",
    "workflow",
    "model",
    "outlier_config",
    "hyperparams",
    "n_train",
    "rmse_m",
    "rmse_pct",
    "r2",
    "r2_cv",
    "gap",
    "selected",
    "gate_passed",
    "status",
];

pub const IMPUTE_SUMMARY_HEADER: [&str; 12] = [
    "aoi_id",
    "gate_passed",
    "n_training",
    "n_cleaned_out",
    "n_prediction_rows",
    "n_imputed",
    "n_clamped",
    "clamp_upper_m",
    "mean_extracted_m",
    "std_extracted_m",
    "mean_imputed_m",
    "std_imputed_m",
];

pub const DROPS_HEADER: [&str; 3] = ["parcel_id", "stage", "reason"];

/// One row of the merged HDSL dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedRow {
    pub parcel_id: String,
    pub hdsl_m: Option<f64>,
    pub hdsl_source: HdslSource,
}

pub fn model_report_rows(reports: &[ModelReport]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|r| {
            let status = if r.gate_passed { "INCLUDED" } else { "EXCLUDED" };
            vec![
                r.aoi_id.clone(),
                r.workflow.as_str().to_string(),
                r.algo.map_or("", |a| a.as_str()).to_string(),
                r.outlier_config.map(|c| c.label()).unwrap_or_default(),
                r.hyperparams.map(|h| h.describe()).unwrap_or_default(),
                r.n_train.to_string(),
                fmt_opt(r.rmse_m),
                fmt_opt(r.rmse_pct),
                fmt_opt(r.r2),
                fmt_opt(r.r2_cv),
                fmt_opt(r.gap),
                r.selected.to_string(),
                r.gate_passed.to_string(),
                status.to_string(),
            ]
        })
        .collect()
}

fn summary_row(aoi_id: &str, outcome: &WorkflowOutcome, n_train: usize, n_pred: usize, extracted: &[f64]) -> Vec<String> {
    let imputed: Vec<f64> = outcome.imputations.iter().map(|i| i.value).collect();
    let stat = |v: &[f64], f: fn(&[f64]) -> f64| if v.is_empty() { String::new() } else { fmt_f64(f(v)) };
    vec![
        aoi_id.to_string(),
        outcome.gate_passed.to_string(),
        n_train.to_string(),
        outcome.n_cleaned_out.to_string(),
        n_pred.to_string(),
        imputed.len().to_string(),
        outcome.n_clamped().to_string(),
        fmt_opt(outcome.clamp_range.map(|r| r.1)),
        stat(extracted, mean),
        stat(extracted, std_dev),
        stat(&imputed, mean),
        stat(&imputed, std_dev),
    ]
}

/// Runs feature assembly and the configured workflow for one AOI.
pub fn impute_aoi(cfg: &RunConfig, aoi: &AoiConfig, record: &mut StageRecord) -> Result<bool> {
    let estimates = require_estimates(cfg, &aoi.id, "impute")?;
    let parcels = read_parcels(&aoi.parcels, &aoi.id)?;
    let rasters = load_rasters(&aoi.rasters, &aoi.id, "impute")?;
    let dir = cfg.aoi_dir(&aoi.id);
    record.input("parcels", &aoi.parcels)?;
    record.input("estimates", &dir.join(super::extract::ESTIMATES_FILE))?;
    for (name, path) in &rasters.files {
        record.input(&format!("rasters.{name}"), path)?;
    }
    if estimates.len() != parcels.len() || estimates.iter().zip(&parcels).any(|(e, p)| e.parcel_id != p.parcel_id) {
        return Err(Error::Stage {
            stage: "impute",
            aoi: aoi.id.clone(),
            message: "extract output does not match the parcel file; rerun `extract`".to_string(),
        });
    }

    let mut drops: Vec<Vec<String>> = Vec::new();
    let mut extracted: Vec<Option<f64>> = vec![None; parcels.len()];
    for (i, e) in estimates.iter().enumerate() {
        if let (true, Some(h)) = (e.is_accepted(), e.hdsl_m) {
            match clean_reason(h) {
                None => extracted[i] = Some(h),
                Some(r) => drops.push(vec![e.parcel_id.clone(), "impute".into(), r.as_str().into()]),
            }
        }
    }

    let encoder = StreetEncoder::fit(
        parcels
            .iter()
            .zip(&extracted)
            .filter(|(_, h)| h.is_some())
            .map(|(p, _)| p.street_name.as_str()),
    );
    let bbox = BoundingBox::of_points(parcels.iter().map(|p| &p.centroid));
    let mut train_rows = Vec::new();
    let mut train_y = Vec::new();
    let mut pred_rows = Vec::new();
    let mut pred_idx = Vec::new();
    let mut feature_lines = Vec::new();
    for (i, p) in parcels.iter().enumerate() {
        let samples = sample_parcel(&rasters, p.centroid).layers();
        let fv = bbox
            .as_ref()
            .ok_or_else(|| "no parcels".to_string())
            .and_then(|b| build_features(p, &samples, estimates[i].door_visible, &encoder, b).map_err(|e| e.reason()));
        match fv {
            Ok(fv) => {
                let arr = fv.to_array().to_vec();
                let role = if extracted[i].is_some() { "training" } else { "prediction" };
                let mut line = vec![p.parcel_id.clone(), role.to_string(), fmt_opt(extracted[i])];
                line.extend(arr.iter().map(|v| fmt_f64(*v)));
                feature_lines.push(line);
                match extracted[i] {
                    Some(h) => {
                        train_rows.push(arr);
                        train_y.push(h);
                    }
                    None => {
                        pred_rows.push(arr);
                        pred_idx.push(i);
                    }
                }
            }
            Err(reason) => drops.push(vec![
                p.parcel_id.clone(),
                "features".into(),
                format!("incomplete_features: {reason}"),
            ]),
        }
    }

    let training = Dataset::new(train_rows, train_y).map_err(Error::InvalidInput)?;
    let outcome = run_workflow(&aoi.id, &training, &pred_rows, aoi.workflow, &cfg.workflow_settings(), cfg.seed);
    for why in &outcome.skipped {
        info!("{}: {why}", aoi.id);
    }

    let mut merged: Vec<MergedRow> = parcels
        .iter()
        .zip(&extracted)
        .map(|(p, h)| MergedRow {
            parcel_id: p.parcel_id.clone(),
            hdsl_m: *h,
            hdsl_source: if h.is_some() { HdslSource::Extracted } else { HdslSource::Missing },
        })
        .collect();
    for imp in &outcome.imputations {
        let row = &mut merged[pred_idx[imp.row]];
        debug_assert_eq!(row.hdsl_source, HdslSource::Missing);
        row.hdsl_m = Some(imp.value);
        row.hdsl_source = HdslSource::Imputed;
    }

    let extracted_vals: Vec<f64> = extracted.iter().flatten().copied().collect();
    if !outcome.imputations.is_empty() {
        let mi = mean(&outcome.imputations.iter().map(|i| i.value).collect::<Vec<_>>());
        info!(
            "{}: imputed {} parcels; |mean(imputed) - mean(extracted)| = {:.4} m",
            aoi.id,
            outcome.imputations.len(),
            (mi - mean(&extracted_vals)).abs()
        );
    } else {
        info!("{}: no imputed values (gate passed: {})", aoi.id, outcome.gate_passed);
    }

    let mut header: Vec<&str> = vec!["parcel_id", "role", "hdsl_m"];
    header.extend(FEATURE_NAMES.iter());
    let files: Vec<(&str, Vec<u8>)> = vec![
        (FEATURES_FILE, csv_bytes(&header, feature_lines)),
        (
            MERGED_FILE,
            csv_bytes(
                &["parcel_id", "hdsl_m", "hdsl_source"],
                merged
                    .iter()
                    .map(|m| vec![m.parcel_id.clone(), fmt_opt(m.hdsl_m), m.hdsl_source.as_str().to_string()]),
            ),
        ),
        (MODEL_REPORT_FILE, csv_bytes(&MODEL_REPORT_HEADER, model_report_rows(&outcome.reports))),
        (
            IMPUTE_SUMMARY_FILE,
            csv_bytes(
                &IMPUTE_SUMMARY_HEADER,
                [summary_row(&aoi.id, &outcome, training.n_rows(), pred_rows.len(), &extracted_vals)],
            ),
        ),
        (IMPUTE_DROPS_FILE, csv_bytes(&DROPS_HEADER, drops)),
    ];
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
        record.output(cfg, &dir.join(name))?;
    }
    let model_path = dir.join(MODEL_FILE);
    match &outcome.model {
        Some(model) => {
            let text = model_to_json(model, &FEATURE_NAMES, outcome.selected_report());
            write_atomic(&model_path, text.as_bytes())?;
            record.output(cfg, &model_path)?;
        }
        None => remove_stale(&model_path)?,
    }
    record.status = if outcome.gate_passed { "ok" } else { "gated_out" }.to_string();
    Ok(outcome.gate_passed)
}

pub fn read_merged(path: &Path) -> Result<Vec<MergedRow>> {
    let t = CsvTable::read(path)?;
    let (c_id, c_h, c_s) = (t.column("parcel_id")?, t.column("hdsl_m")?, t.column("hdsl_source")?);
    let mut out = Vec::with_capacity(t.len());
    for (line, row) in t.rows() {
        let hdsl_source =
            HdslSource::parse(&row[c_s]).ok_or_else(|| t.err(line, format!("unknown hdsl_source {:?}", row[c_s])))?;
        let hdsl_m = t.opt_f64_at(line, row, c_h, "hdsl_m")?;
        if (hdsl_source == HdslSource::Missing) != hdsl_m.is_none() {
            return Err(t.err(line, "hdsl_m must be present exactly when hdsl_source is not missing"));
        }
        out.push(MergedRow {
            parcel_id: row[c_id].clone(),
            hdsl_m,
            hdsl_source,
        });
    }
    Ok(out)
}
