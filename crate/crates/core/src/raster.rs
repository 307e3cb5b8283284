//! ESRI ASCII grid rasters and centroid sampling.
//!
//! Cell `(row, col)` covers `x in [xll + col*cs, xll + (col+1)*cs)` and
//! `y in [top - (row+1)*cs, top - row*cs)`, where `top = yll + nrows*cs` and row 0
//! is the northernmost row. A point on a vertical cell edge belongs to the
//! cell on its east side; a point on a horizontal edge to the cell on its
//! north side.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEET_TO_METERS: f64 = 0.3048;
pub const DEFAULT_NODATA: f64 = -9999.0;

/// Most cells averaged by [`neighborhood_mean`].
pub const NEIGHBORHOOD_CELLS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    #[default]
    Meters,
    Feet,
}

/// Converts a raster value to meters with a single multiplication.
pub fn to_meters(value: f64, units: Units) -> f64 {
    match units {
        Units::Meters => value,
        Units::Feet => value * FEET_TO_METERS,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
    /// Row-major, row 0 at the top (north).
    pub values: Vec<f64>,
    pub units: Units,
}

/// Value sampled from a raster, with the number of valid cells that
/// contributed. `value` is `None` exactly when no valid cell was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleResult {
    pub value: Option<f64>,
    pub valid_pixel_count: usize,
}

impl SampleResult {
    pub const MISSING: SampleResult = SampleResult {
        value: None,
        valid_pixel_count: 0,
    };

    fn single(value: f64) -> Self {
        SampleResult {
            value: Some(value),
            valid_pixel_count: 1,
        }
    }
}

impl RasterGrid {
    pub fn new(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        nodata: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if ncols == 0 || nrows == 0 {
            return Err(Error::InvalidInput("grid must have at least one row and column".into()));
        }
        if !(cellsize > 0.0) || !cellsize.is_finite() {
            return Err(Error::InvalidInput(format!("cellsize must be positive, got {cellsize}")));
        }
        if values.len() != ncols * nrows {
            return Err(Error::InvalidInput(format!(
                "grid declares {} cells but has {}",
                ncols * nrows,
                values.len()
            )));
        }
        Ok(RasterGrid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata,
            values,
            units: Units::Meters,
        })
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    /// Cell value unless it is nodata (or NaN).
    pub fn valid(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        (v != self.nodata && !v.is_nan()).then_some(v)
    }

    fn top(&self) -> f64 {
        self.yll + self.nrows as f64 * self.cellsize
    }

    /// `(row, col)` of the cell containing `(x, y)`, as signed indices that
    /// may fall outside the grid.
    fn cell_index(&self, x: f64, y: f64) -> (i64, i64) {
        let col = ((x - self.xll) / self.cellsize).floor() as i64;
        // north-side rule on horizontal edges: a point exactly on a boundary
        // belongs to the row above it.
        let row = ((self.top() - y) / self.cellsize).ceil() as i64 - 1;
        (row, col)
    }

    pub fn cell_containing(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !x.is_finite() || !y.is_finite() {
            return None;
        }
        let (row, col) = self.cell_index(x, y);
        (row >= 0 && col >= 0 && (row as usize) < self.nrows && (col as usize) < self.ncols)
            .then_some((row as usize, col as usize))
    }

    /// Center coordinate of a cell.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.top() - (row as f64 + 0.5) * self.cellsize,
        )
    }

    /// Serializes to ESRI ASCII grid text; values are written in shortest
    /// round-trip form so `parse_grid(serialize())` reproduces the grid.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 8 + 128);
        let _ = writeln!(out, "ncols {}", self.ncols);
        let _ = writeln!(out, "nrows {}", self.nrows);
        let _ = writeln!(out, "xllcorner {:?}", self.xll);
        let _ = writeln!(out, "yllcorner {:?}", self.yll);
        let _ = writeln!(out, "cellsize {:?}", self.cellsize);
        let _ = writeln!(out, "nodata_value {:?}", self.nodata);
        for row in self.values.chunks(self.ncols) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];

/// Parses an ESRI ASCII grid document. Header keys are case-insensitive;
/// `nodata_value` defaults to -9999 when absent.
pub fn parse_grid(text: &str) -> Result<RasterGrid> {
    let err = |line: usize, message: String| Error::GridParse { line, message };

    let mut header: [Option<f64>; 6] = [None; 6];
    let mut lines = text.lines().enumerate().peekable();
    let mut last_line = 0;

    // header: `key value` lines until the first line starting with a number
    while let Some(&(idx, line)) = lines.peek() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let key = parts.next().unwrap_or_default();
        if key.parse::<f64>().is_ok() {
            break;
        }
        let key_lc = key.to_ascii_lowercase();
        let slot = HEADER_KEYS
            .iter()
            .position(|k| *k == key_lc)
            .ok_or_else(|| err(idx + 1, format!("unknown header key `{key}`")))?;
        let value_tok = parts
            .next()
            .ok_or_else(|| err(idx + 1, format!("header key `{key}` has no value")))?;
        let value = value_tok
            .parse::<f64>()
            .map_err(|_| err(idx + 1, format!("non-numeric header value `{value_tok}`")))?;
        if parts.next().is_some() {
            return Err(err(idx + 1, format!("trailing tokens after `{key}`")));
        }
        if header[slot].replace(value).is_some() {
            return Err(err(idx + 1, format!("duplicate header key `{key}`")));
        }
        last_line = idx + 1;
        lines.next();
    }

    let first_data_line = lines.peek().map_or(last_line + 1, |(idx, _)| idx + 1);
    for (slot, key) in HEADER_KEYS.iter().enumerate().take(5) {
        if header[slot].is_none() {
            return Err(err(first_data_line, format!("missing header key `{key}`")));
        }
    }
    let as_count = |slot: usize| -> Result<usize> {
        let v = header[slot].unwrap_or_default();
        if v < 1.0 || v.fract() != 0.0 || v > 1e9 {
            return Err(err(first_data_line, format!("`{}` must be a positive integer", HEADER_KEYS[slot])));
        }
        Ok(v as usize)
    };
    let ncols = as_count(0)?;
    let nrows = as_count(1)?;
    let xll = header[2].unwrap_or_default();
    let yll = header[3].unwrap_or_default();
    let cellsize = header[4].unwrap_or_default();
    if !(cellsize > 0.0) || !cellsize.is_finite() {
        return Err(err(first_data_line, format!("cellsize must be positive, got {cellsize}")));
    }
    let nodata = header[5].unwrap_or(DEFAULT_NODATA);

    let expected = ncols * nrows;
    let mut values = Vec::with_capacity(expected);
    for (idx, line) in lines {
        for tok in line.split_whitespace() {
            if values.len() == expected {
                return Err(err(
                    idx + 1,
                    format!("more than the {expected} declared cells ({ncols}x{nrows})"),
                ));
            }
            let v = tok
                .parse::<f64>()
                .map_err(|_| err(idx + 1, format!("non-numeric token `{tok}`")))?;
            values.push(v);
        }
        last_line = idx + 1;
    }
    if values.len() != expected {
        return Err(err(
            last_line.max(1),
            format!("expected {expected} cells ({ncols}x{nrows}), found {}", values.len()),
        ));
    }
    RasterGrid::new(ncols, nrows, xll, yll, cellsize, nodata, values)
}

/// Value of the cell containing `(x, y)`; missing outside the grid or on nodata.
pub fn point_sample(grid: &RasterGrid, x: f64, y: f64) -> SampleResult {
    grid.cell_containing(x, y)
        .and_then(|(r, c)| grid.valid(r, c))
        .map_or(SampleResult::MISSING, SampleResult::single)
}

/// Mean of the (up to) six valid cells nearest to `(x, y)` in the 3x3 block
/// around the cell containing the point. Distance is point-to-cell-center;
/// ties are broken by `(row, col)` ascending.
pub fn neighborhood_mean(grid: &RasterGrid, x: f64, y: f64) -> SampleResult {
    if !x.is_finite() || !y.is_finite() {
        return SampleResult::MISSING;
    }
    let (row0, col0) = grid.cell_index(x, y);
    let mut cells: Vec<(f64, usize, usize, f64)> = Vec::with_capacity(9);
    for dr in -1..=1 {
        for dc in -1..=1 {
            let (r, c) = (row0 + dr, col0 + dc);
            if r < 0 || c < 0 || r as usize >= grid.nrows || c as usize >= grid.ncols {
                continue;
            }
            let (r, c) = (r as usize, c as usize);
            if let Some(v) = grid.valid(r, c) {
                let (cx, cy) = grid.cell_center(r, c);
                let d2 = (cx - x).powi(2) + (cy - y).powi(2);
                cells.push((d2, r, c, v));
            }
        }
    }
    if cells.is_empty() {
        return SampleResult::MISSING;
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cells.truncate(NEIGHBORHOOD_CELLS);
    let sum: f64 = cells.iter().map(|c| c.3).sum();
    SampleResult {
        value: Some(sum / cells.len() as f64),
        valid_pixel_count: cells.len(),
    }
}
