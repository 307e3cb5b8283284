//! Input readers, output writers and digests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{HdslSource, ParcelRecord};
use crate::geo::{decode_depth, GeoPoint, PanoramaObservation, PixelMask};
use crate::raster::{parse_grid, RasterGrid, Units};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Removes a file left over from an earlier run, if present.
pub fn remove_stale(path: &Path) -> Result<()> {
    match fs::remove_file(path) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Builds CSV text from a header and rows of already formatted fields.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

/// Shortest decimal that reads back to the same float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn fmt_pct(v: f64) -> String {
    format!("{v:.1}")
}

/// Header-indexed CSV rows with 1-based line numbers for error messages.
pub struct CsvTable {
    pub path: PathBuf,
    headers: Vec<String>,
    rows: Vec<(usize, Vec<String>)>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::input_file(path, 1, e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::input_file(path, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(CsvTable {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::input_file(&self.path, 1, format!("missing column `{name}`")))
    }

    pub fn rows(&self) -> impl Iterator<Item = (usize, &[String])> {
        self.rows.iter().map(|(l, r)| (*l, r.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::input_file(&self.path, line, msg)
    }

    pub fn f64_at(&self, line: usize, row: &[String], col: usize, name: &str) -> Result<f64> {
        let s = row[col].trim();
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(line, format!("`{name}` is not a finite number: {s:?}")))
    }

    pub fn opt_f64_at(&self, line: usize, row: &[String], col: usize, name: &str) -> Result<Option<f64>> {
        if row[col].trim().is_empty() {
            Ok(None)
        } else {
            self.f64_at(line, row, col, name).map(Some)
        }
    }
}

/// Reads `parcel_id,lat,lon,street_name,assessed_value_usd`.
pub fn read_parcels(path: &Path, aoi_id: &str) -> Result<Vec<ParcelRecord>> {
    let t = CsvTable::read(path)?;
    let (c_id, c_lat, c_lon, c_street, c_value) = (
        t.column("parcel_id")?,
        t.column("lat")?,
        t.column("lon")?,
        t.column("street_name")?,
        t.column("assessed_value_usd")?,
    );
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.len());
    for (line, row) in t.rows() {
        let id = row[c_id].trim().to_string();
        if id.is_empty() {
            return Err(t.err(line, "empty parcel_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(t.err(line, format!("duplicate parcel_id {id:?}")));
        }
        let lat = t.f64_at(line, row, c_lat, "lat")?;
        let lon = t.f64_at(line, row, c_lon, "lon")?;
        let centroid = GeoPoint::new(lat, lon).map_err(|e| t.err(line, e.to_string()))?;
        let value = t.f64_at(line, row, c_value, "assessed_value_usd")?;
        if value < 0.0 {
            return Err(t.err(line, "assessed_value_usd must be non-negative"));
        }
        out.push(ParcelRecord {
            parcel_id: id,
            aoi_id: aoi_id.to_string(),
            centroid,
            street_name: row[c_street].to_string(),
            assessed_value_usd: value,
            hdsl_m: None,
            hdsl_source: HdslSource::Missing,
        });
    }
    Ok(out)
}

/// One line of the panorama metadata file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanoramaMeta {
    pub parcel_id: String,
    pub camera_lat: f64,
    pub camera_lon: f64,
    pub camera_elev_m: f64,
    pub yaw_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub acquired: NaiveDate,
    pub depth_file: String,
    pub door_mask_file: String,
    pub roadside_mask_file: String,
    pub structure_detected: bool,
}

/// Reads panorama metadata without loading masks or depth. Blank lines are
/// skipped; a parcel may appear at most once.
pub fn read_panorama_meta(path: &Path) -> Result<Vec<(usize, PanoramaMeta)>> {
    let text = read_text(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let meta: PanoramaMeta =
            serde_json::from_str(line).map_err(|e| Error::input_file(path, i + 1, e.to_string()))?;
        if !seen.insert(meta.parcel_id.clone()) {
            return Err(Error::input_file(
                path,
                i + 1,
                format!("second panorama for parcel {:?}", meta.parcel_id),
            ));
        }
        out.push((i + 1, meta));
    }
    Ok(out)
}

fn read_mask(path: &Path, w: u32, h: u32) -> Result<PixelMask> {
    let text = read_text(path)?;
    PixelMask::parse(&text, w, h).map_err(|(line, msg)| Error::input_file(path, line, msg))
}

/// Loads the masks and depth matrix for one metadata record. Files resolve
/// relative to the metadata file's directory.
pub fn load_panorama(meta_path: &Path, line: usize, meta: &PanoramaMeta) -> Result<PanoramaObservation> {
    let base = meta_path.parent().unwrap_or(Path::new("."));
    let camera = GeoPoint::new(meta.camera_lat, meta.camera_lon).map_err(|e| Error::input_file(meta_path, line, e.to_string()))?;
    let depth_path = base.join(&meta.depth_file);
    let depth = decode_depth(&read_text(&depth_path)?).map_err(|e| Error::input_file(&depth_path, 1, e.to_string()))?;
    let obs = PanoramaObservation {
        parcel_id: meta.parcel_id.clone(),
        camera,
        camera_elev_m: meta.camera_elev_m,
        yaw_deg: meta.yaw_deg,
        width_px: meta.width_px,
        height_px: meta.height_px,
        acquired: meta.acquired,
        depth,
        door_mask: read_mask(&base.join(&meta.door_mask_file), meta.width_px, meta.height_px)?,
        roadside_mask: read_mask(&base.join(&meta.roadside_mask_file), meta.width_px, meta.height_px)?,
        structure_detected: meta.structure_detected,
    };
    obs.validate().map_err(|e| Error::input_file(meta_path, line, e.to_string()))?;
    Ok(obs)
}

/// What the flood layer's values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloodSemantic {
    #[default]
    SurfaceElevation,
    DepthAboveGround,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub path: String,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub semantic: Option<FloodSemantic>,
}

pub const LAYER_NAMES: [&str; 5] = ["hand", "d2stream_so0", "d2stream_so4", "dem", "fathom_100yr"];

/// The five rasters of one AOI.
#[derive(Debug, Clone)]
pub struct RasterSet {
    pub hand: RasterGrid,
    pub d2stream_so0: RasterGrid,
    pub d2stream_so4: RasterGrid,
    pub dem: RasterGrid,
    pub fathom: RasterGrid,
    pub fathom_semantic: FloodSemantic,
    /// Layer name to file, for digests.
    pub files: BTreeMap<String, PathBuf>,
}

/// Reads a raster manifest (`[layer] path = ..., units = ..., semantic = ...`).
/// A layer absent from the manifest is a stage failure naming the layer.
pub fn load_rasters(manifest: &Path, aoi_id: &str, stage: &'static str) -> Result<RasterSet> {
    let text = read_text(manifest)?;
    let entries: BTreeMap<String, LayerEntry> = toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::input_file(manifest, line, e.message().to_string())
    })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut files = BTreeMap::new();
    let mut load = |name: &str| -> Result<(RasterGrid, Option<FloodSemantic>)> {
        let entry = entries.get(name).ok_or_else(|| Error::Stage {
            stage,
            aoi: aoi_id.to_string(),
            message: format!("raster layer `{name}` missing from {}", manifest.display()),
        })?;
        let path = base.join(&entry.path);
        let grid = parse_grid(&read_text(&path)?).map_err(|e| match e {
            Error::GridParse { line, message } => Error::input_file(&path, line, message),
            other => other,
        })?;
        files.insert(name.to_string(), path);
        Ok((grid.with_units(entry.units), entry.semantic))
    };
    let (hand, _) = load("hand")?;
    let (d2stream_so0, _) = load("d2stream_so0")?;
    let (d2stream_so4, _) = load("d2stream_so4")?;
    let (dem, _) = load("dem")?;
    let (fathom, semantic) = load("fathom_100yr")?;
    Ok(RasterSet {
        hand,
        d2stream_so0,
        d2stream_so4,
        dem,
        fathom,
        fathom_semantic: semantic.unwrap_or_default(),
        files,
    })
}
