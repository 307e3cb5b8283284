//! Elevation extraction stage: one estimate per parcel plus coverage counts.

use std::collections::BTreeMap;

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{evaluate_panorama, ElevationEstimate, ScreenStatus, ScreenThresholds};

use super::config::{AoiConfig, RunConfig};
use super::io::{csv_bytes, fmt_opt, fmt_pct, load_panorama, load_rasters, read_panorama_meta, read_parcels, write_atomic, CsvTable};
use super::manifest::StageRecord;
use super::sampling::sample_parcel;

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const COVERAGE_FILE: &str = "coverage.csv";
pub const NO_IMAGERY: &str = "no_imagery";

const ESTIMATE_HEADER: [&str; 8] = [
    "parcel_id",
    "has_imagery",
    "door_visible",
    "screen_status",
    "lfe_m",
    "roadside_elev_m",
    "hdsl_m",
    "detail",
];

pub const COVERAGE_HEADER: [&str; 8] = [
    "aoi_id",
    "total",
    "with_imagery",
    "with_imagery_pct",
    "door_visible",
    "door_visible_pct",
    "with_hdsl",
    "with_hdsl_pct",
];

/// Extraction outcome for one parcel as stored between stages.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub parcel_id: String,
    pub has_imagery: bool,
    pub door_visible: bool,
    pub screen_status: Option<ScreenStatus>,
    pub lfe_m: Option<f64>,
    pub roadside_elev_m: Option<f64>,
    pub hdsl_m: Option<f64>,
    pub detail: Option<String>,
}

impl EstimateRow {
    fn no_imagery(parcel_id: &str) -> Self {
        EstimateRow {
            parcel_id: parcel_id.to_string(),
            has_imagery: false,
            door_visible: false,
            screen_status: None,
            lfe_m: None,
            roadside_elev_m: None,
            hdsl_m: None,
            detail: None,
        }
    }

    fn from_estimate(e: ElevationEstimate) -> Self {
        EstimateRow {
            parcel_id: e.parcel_id,
            has_imagery: true,
            door_visible: e.door_visible,
            screen_status: Some(e.screen_status),
            lfe_m: e.lfe_m,
            roadside_elev_m: e.roadside_elev_m,
            hdsl_m: e.hdsl_m,
            detail: e.detail,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.screen_status == Some(ScreenStatus::Accepted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Coverage {
    pub total: usize,
    pub with_imagery: usize,
    pub door_visible: usize,
    pub with_hdsl: usize,
}

impl Coverage {
    pub fn of(rows: &[EstimateRow]) -> Self {
        Coverage {
            total: rows.len(),
            with_imagery: rows.iter().filter(|r| r.has_imagery).count(),
            door_visible: rows.iter().filter(|r| r.door_visible).count(),
            with_hdsl: rows.iter().filter(|r| r.is_accepted() && r.hdsl_m.is_some()).count(),
        }
    }

    pub fn add(&mut self, o: &Coverage) {
        self.total += o.total;
        self.with_imagery += o.with_imagery;
        self.door_visible += o.door_visible;
        self.with_hdsl += o.with_hdsl;
    }

    pub fn pct(&self, n: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.total as f64
        }
    }

    pub fn csv_row(&self, id: &str) -> Vec<String> {
        vec![
            id.to_string(),
            self.total.to_string(),
            self.with_imagery.to_string(),
            fmt_pct(self.pct(self.with_imagery)),
            self.door_visible.to_string(),
            fmt_pct(self.pct(self.door_visible)),
            self.with_hdsl.to_string(),
            fmt_pct(self.pct(self.with_hdsl)),
        ]
    }
}

fn bool_str(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

pub fn write_estimates(rows: &[EstimateRow]) -> Vec<u8> {
    csv_bytes(
        &ESTIMATE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.parcel_id.clone(),
                bool_str(r.has_imagery),
                bool_str(r.door_visible),
                r.screen_status.map_or(NO_IMAGERY, |s| s.as_str()).to_string(),
                fmt_opt(r.lfe_m),
                fmt_opt(r.roadside_elev_m),
                fmt_opt(r.hdsl_m),
                r.detail.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn parse_bool(t: &CsvTable, line: usize, s: &str) -> Result<bool> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(t.err(line, format!("expected true or false, found {s:?}"))),
    }
}

pub fn read_estimates(path: &std::path::Path) -> Result<Vec<EstimateRow>> {
    let t = CsvTable::read(path)?;
    let cols: Vec<usize> = ESTIMATE_HEADER.iter().map(|h| t.column(h)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t.len());
    for (line, row) in t.rows() {
        let status = &row[cols[3]];
        let screen_status = if status == NO_IMAGERY {
            None
        } else {
            Some(ScreenStatus::parse(status).ok_or_else(|| t.err(line, format!("unknown screen status {status:?}")))?)
        };
        out.push(EstimateRow {
            parcel_id: row[cols[0]].clone(),
            has_imagery: parse_bool(&t, line, &row[cols[1]])?,
            door_visible: parse_bool(&t, line, &row[cols[2]])?,
            screen_status,
            lfe_m: t.opt_f64_at(line, row, cols[4], "lfe_m")?,
            roadside_elev_m: t.opt_f64_at(line, row, cols[5], "roadside_elev_m")?,
            hdsl_m: t.opt_f64_at(line, row, cols[6], "hdsl_m")?,
            detail: Some(row[cols[7]].clone()).filter(|d| !d.is_empty()),
        });
    }
    Ok(out)
}

/// Runs extraction for one AOI and writes its estimates and coverage.
pub fn extract_aoi(cfg: &RunConfig, aoi: &AoiConfig, record: &mut StageRecord) -> Result<Coverage> {
    let parcels = read_parcels(&aoi.parcels, &aoi.id)?;
    let rasters = load_rasters(&aoi.rasters, &aoi.id, "extract")?;
    let metas = read_panorama_meta(&aoi.panoramas)?;
    record.input("parcels", &aoi.parcels)?;
    record.input("panoramas", &aoi.panoramas)?;
    record.input("rasters.dem", &rasters.files["dem"])?;

    let index: BTreeMap<&str, usize> = parcels.iter().enumerate().map(|(i, p)| (p.parcel_id.as_str(), i)).collect();
    let mut by_parcel: BTreeMap<usize, usize> = BTreeMap::new();
    for (k, (line, m)) in metas.iter().enumerate() {
        match index.get(m.parcel_id.as_str()) {
            Some(&i) => {
                by_parcel.insert(i, k);
            }
            None => warn!(
                "{}: {}:{line}: panorama for unknown parcel {:?} ignored",
                aoi.id,
                aoi.panoramas.display(),
                m.parcel_id
            ),
        }
    }

    let thresholds = ScreenThresholds::default();
    let rows: Vec<EstimateRow> = parcels
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<EstimateRow> {
            let Some(&k) = by_parcel.get(&i) else {
                return Ok(EstimateRow::no_imagery(&p.parcel_id));
            };
            let (line, meta) = &metas[k];
            let obs = load_panorama(&aoi.panoramas, *line, meta)?;
            let dem = sample_parcel(&rasters, p.centroid).dem_m;
            Ok(EstimateRow::from_estimate(evaluate_panorama(&obs, p.centroid, dem, &thresholds)))
        })
        .collect::<Result<_>>()?;

    let coverage = Coverage::of(&rows);
    let dir = cfg.aoi_dir(&aoi.id);
    write_atomic(&dir.join(ESTIMATES_FILE), &write_estimates(&rows))?;
    write_atomic(
        &dir.join(COVERAGE_FILE),
        &csv_bytes(&COVERAGE_HEADER, [coverage.csv_row(&aoi.id)]),
    )?;
    record.output(cfg, &dir.join(ESTIMATES_FILE))?;
    record.output(cfg, &dir.join(COVERAGE_FILE))?;
    info!(
        "{}: {} parcels, {} with imagery, {} door visible, {} with HDSL",
        aoi.id, coverage.total, coverage.with_imagery, coverage.door_visible, coverage.with_hdsl
    );
    Ok(coverage)
}

/// Reads the estimates written by [`extract_aoi`], as a stage failure when
/// they are absent.
pub fn require_estimates(cfg: &RunConfig, aoi_id: &str, stage: &'static str) -> Result<Vec<EstimateRow>> {
    let path = cfg.aoi_dir(aoi_id).join(ESTIMATES_FILE);
    if !path.exists() {
        return Err(Error::Stage {
            stage,
            aoi: aoi_id.to_string(),
            message: format!("extract output {} not found; run `extract` first", path.display()),
        });
    }
    read_estimates(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_round_trip() {
        let rows = vec![
            EstimateRow::no_imagery("a"),
            EstimateRow {
                parcel_id: "b".into(),
                has_imagery: true,
                door_visible: true,
                screen_status: Some(ScreenStatus::Accepted),
                lfe_m: Some(3.1),
                roadside_elev_m: Some(1.0 / 3.0),
                hdsl_m: Some(3.1 - 1.0 / 3.0),
                detail: None,
            },
            EstimateRow {
                parcel_id: "c,d".into(),
                has_imagery: true,
                door_visible: false,
                screen_status: Some(ScreenStatus::RejectedNoDoor),
                lfe_m: None,
                roadside_elev_m: None,
                hdsl_m: None,
                detail: Some("x, \"y\"".into()),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        std::fs::write(&p, write_estimates(&rows)).unwrap();
        assert_eq!(read_estimates(&p).unwrap(), rows);
        let c = Coverage::of(&rows);
        assert_eq!((c.total, c.with_imagery, c.door_visible, c.with_hdsl), (3, 2, 1, 1));
        assert_eq!(c.csv_row("A")[3], "66.7");
    }
}
