//! Report stage: coverage, model performance and risk tables as CSV exports
//! and one aligned text report. Always covers every configured AOI.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::risk::{AoiSummary, Category, REGIONAL_ID};

use super::assess::{read_summary, SENSITIVITY_FILE, SUMMARY_FILE};
use super::config::RunConfig;
use super::extract::{Coverage, COVERAGE_FILE, COVERAGE_HEADER};
use super::impute::MODEL_REPORT_FILE;
use super::io::{csv_bytes, fmt_pct, write_atomic, CsvTable};
use super::manifest::StageRecord;

pub const COVERAGE_TABLE_FILE: &str = "coverage_table.csv";
pub const MODEL_PERFORMANCE_FILE: &str = "model_performance.csv";
pub const RISK_TABLE_FILE: &str = "risk_table.csv";
pub const REPORT_FILE: &str = "report.txt";

pub const MODEL_PERFORMANCE_HEADER: [&str; 11] = [
    "aoi_id",
    "workflow",
    "model",
    "outlier_config",
    "n_train",
    "rmse_m",
    "rmse_pct",
    "r2",
    "r2_cv",
    "gap",
    "status",
];

pub const RISK_TABLE_HEADER: [&str; 15] = [
    "aoi_id",
    "n_parcels",
    "n_flooded",
    "flooded_pct",
    "n_clearance",
    "clearance_pct",
    "n_in_extent_no_lfe",
    "in_extent_no_lfe_pct",
    "n_outside_extent",
    "outside_extent_pct",
    "total_loss_usd",
    "median_loss_damaged_usd",
    "max_loss_usd",
    "median_fdis_flooded_m",
    "median_clearance_m",
];

fn missing(aoi: &str, what: &str, path: &std::path::Path) -> Error {
    Error::Stage {
        stage: "report",
        aoi: aoi.to_string(),
        message: format!("{what} {} not found", path.display()),
    }
}

fn read_coverage(path: &std::path::Path) -> Result<Coverage> {
    let t = CsvTable::read(path)?;
    let cols: Vec<usize> = [1, 2, 4, 6].iter().map(|&k| t.column(COVERAGE_HEADER[k])).collect::<Result<_>>()?;
    let (line, row) = t.rows().next().ok_or_else(|| t.err(1, "coverage file has no data row"))?;
    let n = |k: usize| -> Result<usize> {
        row[cols[k]].parse().map_err(|_| t.err(line, format!("bad count {:?}", row[cols[k]])))
    };
    Ok(Coverage {
        total: n(0)?,
        with_imagery: n(1)?,
        door_visible: n(2)?,
        with_hdsl: n(3)?,
    })
}

/// The selected row of a model report, or its first row when nothing was
/// selected, reshaped for the performance table.
fn performance_row(path: &std::path::Path) -> Result<Vec<String>> {
    let t = CsvTable::read(path)?;
    let names = [
        "aoi_id",
        "workflow",
        "model",
        "outlier_config",
        "n_train",
        "rmse_m",
        "rmse_pct",
        "r2",
        "r2_cv",
        "gap",
        "status",
    ];
    let cols: Vec<usize> = names.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
    let sel = t.column("selected")?;
    let rows: Vec<&[String]> = t.rows().map(|(_, r)| r).collect();
    let row = rows
        .iter()
        .find(|r| r[sel] == "true")
        .or(rows.first())
        .ok_or_else(|| t.err(1, "model report has no rows"))?;
    Ok(cols.iter().map(|&c| row[c].clone()).collect())
}

fn pct(n: usize, total: usize) -> String {
    fmt_pct(if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 })
}

fn risk_row(s: &AoiSummary) -> Vec<String> {
    let mut row = vec![s.aoi_id.clone(), s.n_parcels.to_string()];
    for c in Category::ALL {
        row.push(s.count(c).to_string());
        row.push(pct(s.count(c), s.n_parcels));
    }
    row.extend([
        format!("{:.2}", s.total_loss_usd),
        format!("{:.2}", s.median_loss_damaged_usd),
        format!("{:.2}", s.max_loss_usd),
        format!("{:.3}", s.median_fdis_flooded_m),
        format!("{:.3}", s.median_clearance_m),
    ]);
    row
}

/// Left-aligned first column, right-aligned others.
fn render_table(out: &mut String, title: &str, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
    let _ = writeln!(out, "{}", "-".repeat(total));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
    out.push('\n');
}

pub fn report(cfg: &RunConfig, record: &mut StageRecord) -> Result<()> {
    let mut coverage_rows = Vec::new();
    let mut perf_rows = Vec::new();
    let mut regional = Coverage::default();
    for aoi in &cfg.aois {
        let dir = cfg.aoi_dir(&aoi.id);
        let cov_path = dir.join(COVERAGE_FILE);
        if !cov_path.exists() {
            return Err(missing(&aoi.id, "extract output", &cov_path));
        }
        let c = read_coverage(&cov_path)?;
        regional.add(&c);
        coverage_rows.push(c.csv_row(&aoi.id));
        let model_path = dir.join(MODEL_REPORT_FILE);
        if !model_path.exists() {
            return Err(missing(&aoi.id, "impute output", &model_path));
        }
        perf_rows.push(performance_row(&model_path)?);
    }
    coverage_rows.push(regional.csv_row(REGIONAL_ID));

    let summary_path = cfg.output_dir.join(SUMMARY_FILE);
    if !summary_path.exists() {
        return Err(missing(REGIONAL_ID, "assess output", &summary_path));
    }
    let summaries = read_summary(&summary_path)?;
    let risk_rows: Vec<Vec<String>> = summaries.iter().map(risk_row).collect();

    let mut text = String::new();
    let _ = writeln!(text, "floodline run report (seed {})\n", cfg.seed);
    render_table(&mut text, "Coverage and extraction", &COVERAGE_HEADER, &coverage_rows);
    let perf_text: Vec<Vec<String>> = perf_rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, c)| match (i, c.parse::<f64>()) {
                    (5 | 7 | 8 | 9, Ok(v)) => format!("{v:.3}"),
                    (6, Ok(v)) => fmt_pct(v),
                    _ => c.clone(),
                })
                .collect()
        })
        .collect();
    render_table(&mut text, "Model performance", &MODEL_PERFORMANCE_HEADER, &perf_text);
    render_table(&mut text, "Flood risk", &RISK_TABLE_HEADER, &risk_rows);
    let sens_path = cfg.output_dir.join(SENSITIVITY_FILE);
    if sens_path.exists() {
        let t = CsvTable::read(&sens_path)?;
        let (c_id, c_e, c_c, c_d) = (
            t.column("aoi_id")?,
            t.column("extracted_only_total_loss_usd")?,
            t.column("combined_total_loss_usd")?,
            t.column("loss_delta_usd")?,
        );
        let rows: Vec<Vec<String>> = t
            .rows()
            .map(|(line, r)| -> Result<Vec<String>> {
                let f = |c: usize, n: &str| t.f64_at(line, r, c, n).map(|v| format!("{v:.2}"));
                Ok(vec![
                    r[c_id].clone(),
                    f(c_e, "extracted_only_total_loss_usd")?,
                    f(c_c, "combined_total_loss_usd")?,
                    f(c_d, "loss_delta_usd")?,
                ])
            })
            .collect::<Result<_>>()?;
        render_table(
            &mut text,
            "Sensitivity: extracted-only vs extracted plus imputed",
            &["aoi_id", "extracted_only_loss_usd", "combined_loss_usd", "delta_usd"],
            &rows,
        );
    }

    let files: [(&str, Vec<u8>); 4] = [
        (COVERAGE_TABLE_FILE, csv_bytes(&COVERAGE_HEADER, coverage_rows)),
        (MODEL_PERFORMANCE_FILE, csv_bytes(&MODEL_PERFORMANCE_HEADER, perf_rows)),
        (RISK_TABLE_FILE, csv_bytes(&RISK_TABLE_HEADER, risk_rows)),
        (REPORT_FILE, text.into_bytes()),
    ];
    for (name, bytes) in files {
        let path = cfg.output_dir.join(name);
        write_atomic(&path, &bytes)?;
        record.output(cfg, &path)?;
    }
    Ok(())
}
