//! Risk assessment stage: per-parcel records, GeoJSON, and the summaries
//! rebuilt from every AOI's records on disk.

use std::path::Path;

use log::info;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::HdslSource;
use crate::risk::{aggregate, assess, sensitivity, value_filter, AoiSummary, AssessmentRecord, Category, Exposure, REGIONAL_ID};

use super::config::{AoiConfig, RunConfig};
use super::extract::require_estimates;
use super::impute::{read_merged, DROPS_HEADER, MERGED_FILE};
use super::io::{csv_bytes, fmt_f64, fmt_opt, load_rasters, read_parcels, write_atomic, CsvTable};
use super::manifest::StageRecord;
use super::sampling::sample_parcel;

pub const ASSESSMENT_FILE: &str = "assessment.csv";
pub const GEOJSON_FILE: &str = "assessment.geojson";
pub const ASSESS_DROPS_FILE: &str = "assess_drops.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";

pub const ASSESSMENT_HEADER: [&str; 14] = [
    "parcel_id",
    "aoi_id",
    "hdsl_source",
    "hdsl_m",
    "street_elev_m",
    "fathom_elev_m",
    "fdis_m",
    "damage_fraction",
    "loss_usd",
    "category",
    "value_usd",
    "exposed",
    "lat",
    "lon",
];

pub const SUMMARY_HEADER: [&str; 13] = [
    "aoi_id",
    "n_parcels",
    "n_flooded",
    "n_clearance",
    "n_in_extent_no_lfe",
    "n_outside_extent",
    "n_damaged",
    "total_loss_usd",
    "median_loss_damaged_usd",
    "max_loss_usd",
    "median_fdis_flooded_m",
    "median_clearance_m",
    "value_at_risk_usd",
];

pub const SENSITIVITY_HEADER: [&str; 16] = [
    "aoi_id",
    "extracted_only_total_loss_usd",
    "combined_total_loss_usd",
    "loss_delta_usd",
    "extracted_only_n_flooded",
    "combined_n_flooded",
    "delta_n_flooded",
    "extracted_only_n_clearance",
    "combined_n_clearance",
    "delta_n_clearance",
    "extracted_only_n_in_extent_no_lfe",
    "combined_n_in_extent_no_lfe",
    "delta_n_in_extent_no_lfe",
    "extracted_only_n_outside_extent",
    "combined_n_outside_extent",
    "delta_n_outside_extent",
];

fn record_row(r: &AssessmentRecord) -> Vec<String> {
    vec![
        r.parcel_id.clone(),
        r.aoi_id.clone(),
        r.hdsl_source.as_str().to_string(),
        fmt_opt(r.hdsl_m),
        fmt_opt(r.street_elev_m),
        fmt_opt(r.fathom_elev_m),
        fmt_opt(r.fdis_m),
        fmt_f64(r.damage_fraction),
        fmt_f64(r.loss_usd),
        r.category.as_str().to_string(),
        fmt_f64(r.value_usd),
        r.exposed.to_string(),
        fmt_f64(r.lat),
        fmt_f64(r.lon),
    ]
}

pub fn summary_row(s: &AoiSummary) -> Vec<String> {
    vec![
        s.aoi_id.clone(),
        s.n_parcels.to_string(),
        s.n_flooded.to_string(),
        s.n_clearance.to_string(),
        s.n_in_extent_no_lfe.to_string(),
        s.n_outside_extent.to_string(),
        s.n_damaged.to_string(),
        fmt_f64(s.total_loss_usd),
        fmt_f64(s.median_loss_damaged_usd),
        fmt_f64(s.max_loss_usd),
        fmt_f64(s.median_fdis_flooded_m),
        fmt_f64(s.median_clearance_m),
        fmt_f64(s.value_at_risk_usd),
    ]
}

fn geojson(records: &[AssessmentRecord]) -> Vec<u8> {
    let features: Vec<Value> = records
        .iter()
        .map(|r| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [r.lon, r.lat]},
                "properties": {
                    "parcel_id": r.parcel_id,
                    "aoi_id": r.aoi_id,
                    "hdsl_source": r.hdsl_source.as_str(),
                    "hdsl_m": r.hdsl_m,
                    "street_elev_m": r.street_elev_m,
                    "fathom_elev_m": r.fathom_elev_m,
                    "fdis_m": r.fdis_m,
                    "damage_fraction": r.damage_fraction,
                    "loss_usd": r.loss_usd,
                    "category": r.category.as_str(),
                    "value_usd": r.value_usd,
                    "exposed": r.exposed,
                },
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let mut text = serde_json::to_string_pretty(&doc).expect("json serialization");
    text.push('\n');
    text.into_bytes()
}

/// Assesses one AOI and writes its records, GeoJSON and drop log.
pub fn assess_aoi(cfg: &RunConfig, aoi: &AoiConfig, record: &mut StageRecord) -> Result<Vec<AssessmentRecord>> {
    let dir = cfg.aoi_dir(&aoi.id);
    let merged_path = dir.join(MERGED_FILE);
    if !merged_path.exists() {
        return Err(Error::Stage {
            stage: "assess",
            aoi: aoi.id.clone(),
            message: format!("impute output {} not found; run `impute` first", merged_path.display()),
        });
    }
    let merged = read_merged(&merged_path)?;
    let estimates = require_estimates(cfg, &aoi.id, "assess")?;
    let parcels = read_parcels(&aoi.parcels, &aoi.id)?;
    let rasters = load_rasters(&aoi.rasters, &aoi.id, "assess")?;
    record.input("parcels", &aoi.parcels)?;
    record.input("merged_hdsl", &merged_path)?;
    for (name, path) in &rasters.files {
        if name == "dem" || name == "fathom_100yr" {
            record.input(&format!("rasters.{name}"), path)?;
        }
    }
    let aligned = merged.len() == parcels.len()
        && estimates.len() == parcels.len()
        && parcels
            .iter()
            .zip(&merged)
            .zip(&estimates)
            .all(|((p, m), e)| p.parcel_id == m.parcel_id && p.parcel_id == e.parcel_id);
    if !aligned {
        return Err(Error::Stage {
            stage: "assess",
            aoi: aoi.id.clone(),
            message: "earlier stage outputs do not match the parcel file; rerun `extract` and `impute`".to_string(),
        });
    }

    let values: Vec<f64> = parcels.iter().map(|p| p.assessed_value_usd).collect();
    let keep = if values.is_empty() { Vec::new() } else { value_filter(&values) };
    let mut drops = Vec::new();
    let mut records = Vec::new();
    for (i, p) in parcels.iter().enumerate() {
        if !keep[i] {
            drops.push(vec![p.parcel_id.clone(), "assess".into(), "value_outside_p1_p99".into()]);
            continue;
        }
        let s = sample_parcel(&rasters, p.centroid);
        let street = if estimates[i].is_accepted() {
            estimates[i].roadside_elev_m.or(s.dem_m)
        } else {
            s.dem_m
        };
        records.push(assess(&Exposure {
            parcel_id: p.parcel_id.clone(),
            aoi_id: aoi.id.clone(),
            lat: p.centroid.lat,
            lon: p.centroid.lon,
            value_usd: p.assessed_value_usd,
            hdsl_source: merged[i].hdsl_source,
            hdsl_m: merged[i].hdsl_m,
            street_elev_m: street,
            fathom_elev_m: s.fathom_elev_m,
            in_extent: s.in_extent(),
            exposed: s.exposed(),
        }));
    }

    let files: [(&str, Vec<u8>); 3] = [
        (ASSESSMENT_FILE, csv_bytes(&ASSESSMENT_HEADER, records.iter().map(record_row))),
        (GEOJSON_FILE, geojson(&records)),
        (ASSESS_DROPS_FILE, csv_bytes(&DROPS_HEADER, drops)),
    ];
    for (name, bytes) in files {
        write_atomic(&dir.join(name), &bytes)?;
        record.output(cfg, &dir.join(name))?;
    }
    let loss: f64 = records.iter().map(|r| r.loss_usd).sum();
    info!("{}: {} parcels assessed, total loss {:.0} USD", aoi.id, records.len(), loss);
    Ok(records)
}

pub fn read_assessment(path: &Path) -> Result<Vec<AssessmentRecord>> {
    let t = CsvTable::read(path)?;
    let cols: Vec<usize> = ASSESSMENT_HEADER.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t.len());
    for (line, row) in t.rows() {
        let f = |k: usize| t.f64_at(line, row, cols[k], ASSESSMENT_HEADER[k]);
        let o = |k: usize| t.opt_f64_at(line, row, cols[k], ASSESSMENT_HEADER[k]);
        let hdsl_source = HdslSource::parse(&row[cols[2]])
            .ok_or_else(|| t.err(line, format!("unknown hdsl_source {:?}", row[cols[2]])))?;
        let category =
            Category::parse(&row[cols[9]]).ok_or_else(|| t.err(line, format!("unknown category {:?}", row[cols[9]])))?;
        let exposed = match row[cols[11]].as_str() {
            "true" => true,
            "false" => false,
            other => return Err(t.err(line, format!("exposed must be true or false, got {other:?}"))),
        };
        out.push(AssessmentRecord {
            parcel_id: row[cols[0]].clone(),
            aoi_id: row[cols[1]].clone(),
            hdsl_source,
            hdsl_m: o(3)?,
            street_elev_m: o(4)?,
            fathom_elev_m: o(5)?,
            fdis_m: o(6)?,
            damage_fraction: f(7)?,
            loss_usd: f(8)?,
            category,
            value_usd: f(10)?,
            exposed,
            lat: f(12)?,
            lon: f(13)?,
        });
    }
    Ok(out)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Partition identity for every summary and regional additivity.
pub fn check_summaries(summaries: &[AoiSummary]) -> std::result::Result<(), String> {
    for s in summaries {
        if !s.partition_holds() {
            return Err(format!("category counts do not partition the parcel total for {}", s.aoi_id));
        }
    }
    let Some((regional, aois)) = summaries.split_last() else {
        return Ok(());
    };
    if regional.aoi_id != REGIONAL_ID {
        return Err("regional summary missing".to_string());
    }
    let sum = |f: fn(&AoiSummary) -> usize| aois.iter().map(f).sum::<usize>();
    let counts_ok = regional.n_parcels == sum(|s| s.n_parcels)
        && regional.n_flooded == sum(|s| s.n_flooded)
        && regional.n_clearance == sum(|s| s.n_clearance)
        && regional.n_in_extent_no_lfe == sum(|s| s.n_in_extent_no_lfe)
        && regional.n_outside_extent == sum(|s| s.n_outside_extent)
        && regional.n_damaged == sum(|s| s.n_damaged);
    let loss: f64 = aois.iter().map(|s| s.total_loss_usd).sum();
    let var: f64 = aois.iter().map(|s| s.value_at_risk_usd).sum();
    if !counts_ok || !close(regional.total_loss_usd, loss) || !close(regional.value_at_risk_usd, var) {
        return Err("regional totals differ from the sum of AOI totals".to_string());
    }
    Ok(())
}

/// Rebuilds `summary.csv` and `sensitivity.csv` from every configured AOI
/// whose assessment exists on disk.
pub fn write_global_summaries(cfg: &RunConfig, record: &mut StageRecord) -> Result<()> {
    let mut all = Vec::new();
    for aoi in &cfg.aois {
        let path = cfg.aoi_dir(&aoi.id).join(ASSESSMENT_FILE);
        if path.exists() {
            all.extend(read_assessment(&path)?);
        }
    }
    let stage_err = |message: String| Error::Stage {
        stage: "assess",
        aoi: REGIONAL_ID.to_string(),
        message,
    };
    let summaries = aggregate(&all);
    check_summaries(&summaries).map_err(stage_err)?;
    let pairs = sensitivity(&all);
    for p in &pairs {
        if !p.extracted_only.partition_holds() {
            return Err(stage_err(format!("extracted-only counts do not partition the total for {}", p.aoi_id)));
        }
        if p.combined.total_loss_usd < p.extracted_only.total_loss_usd {
            return Err(stage_err(format!("combined loss below extracted-only loss for {}", p.aoi_id)));
        }
    }
    let sens_rows = pairs.iter().map(|p| {
        let mut row = vec![
            p.aoi_id.clone(),
            fmt_f64(p.extracted_only.total_loss_usd),
            fmt_f64(p.combined.total_loss_usd),
            fmt_f64(p.loss_delta_usd()),
        ];
        for c in Category::ALL {
            row.push(p.extracted_only.count(c).to_string());
            row.push(p.combined.count(c).to_string());
            row.push(p.count_delta(c).to_string());
        }
        row
    });
    let summary_path = cfg.output_dir.join(SUMMARY_FILE);
    let sens_path = cfg.output_dir.join(SENSITIVITY_FILE);
    write_atomic(&summary_path, &csv_bytes(&SUMMARY_HEADER, summaries.iter().map(summary_row)))?;
    write_atomic(&sens_path, &csv_bytes(&SENSITIVITY_HEADER, sens_rows))?;
    record.output(cfg, &summary_path)?;
    record.output(cfg, &sens_path)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<AoiSummary>> {
    let t = CsvTable::read(path)?;
    let cols: Vec<usize> = SUMMARY_HEADER.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (line, row) in t.rows() {
        let n = |k: usize| -> Result<usize> {
            row[cols[k]]
                .parse()
                .map_err(|_| t.err(line, format!("{} must be a count, got {:?}", SUMMARY_HEADER[k], row[cols[k]])))
        };
        let f = |k: usize| t.f64_at(line, row, cols[k], SUMMARY_HEADER[k]);
        out.push(AoiSummary {
            aoi_id: row[cols[0]].clone(),
            n_parcels: n(1)?,
            n_flooded: n(2)?,
            n_clearance: n(3)?,
            n_in_extent_no_lfe: n(4)?,
            n_outside_extent: n(5)?,
            n_damaged: n(6)?,
            total_loss_usd: f(7)?,
            median_loss_damaged_usd: f(8)?,
            max_loss_usd: f(9)?,
            median_fdis_flooded_m: f(10)?,
            median_clearance_m: f(11)?,
            value_at_risk_usd: f(12)?,
        });
    }
    Ok(out)
}
