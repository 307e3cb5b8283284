//! Synthetic AOI fixtures with known ground truth.
//!
//! Parameter file:
//!
//! ```toml
//! seed = 7
//! output_dir = "fixture"       # relative to this file
//!
//! [run]                        # copied into the generated config.toml
//! gate_threshold = 0.15
//! n_iter = 30
//! threads = 2
//!
//! [[aoi]]
//! id = "syn_a"
//! n_parcels = 500
//! imagery_coverage = 1.0
//! door_visibility = 1.0
//! target = "linear"            # or "noise"
//! noise_sigma = 0.0
//! flood_offset_m = 1.2
//! workflow = "batch_standard"
//! ```
//!
//! Terrain and flood layers are smooth functions of grid position. Each
//! parcel sits at a fixed offset from the center of a distinct interior
//! cell. Panorama depth values and door rows are placed so that extraction
//! reproduces the recorded HDSL: `ground_truth.csv` holds the value implied
//! by the stored float32 depths, computed with the same arithmetic the
//! extractor uses, next to the generating-function value.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::ensemble::rng::{sample_without_replacement, SeedPath};
use crate::error::{Error, Result};
use crate::geo::{
    bearing, bearing_to_column, encode_depth, normalize_degrees, pitch_angle, vertical_offset, DepthMatrix,
    GeoPoint, PixelMask, EARTH_RADIUS_M,
};
use crate::raster::{RasterGrid, Units, DEFAULT_NODATA, FEET_TO_METERS};

use super::io::{csv_bytes, fmt_f64, fmt_opt, read_text, write_atomic, PanoramaMeta};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const PANORAMA_WIDTH: u32 = 1024;
pub const PANORAMA_HEIGHT: u32 = 512;
pub const CELLSIZE_DEG: f64 = 0.0001;
/// Parcel position inside its cell, as fractions of the cell size east and
/// north of the center. Chosen so the six nearest neighborhood cells have
/// no distance ties.
pub const PARCEL_OFFSET: (f64, f64) = (0.23, 0.11);
pub const CAMERA_HEIGHT_M: f64 = 2.5;
/// Horizontal distance from the camera to the roadside point.
pub const ROADSIDE_DISTANCE_M: f64 = 6.0;
const DOOR_HALF_WIDTH: u32 = 3;
const DOOR_HEIGHT_PX: u32 = 20;
const ROADSIDE_HEIGHT_PX: u32 = 2;
/// Panorama columns reserved per parcel in a shared depth file.
const SLOT_PX: u32 = 8;
const SLOTS_PER_DEPTH_FILE: usize = (PANORAMA_WIDTH / SLOT_PX) as usize;

const STREETS: [&str; 12] = [
    "Oak", "Pine", "Cedar", "Elm", "Maple", "Bayou", "Magnolia", "Pecan", "Willow", "Cypress", "Palm", "Laurel",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `intercept + elev_coef * elevation + hand_coef * HAND + N(0, noise_sigma)`.
    #[default]
    Linear,
    /// `noise_center + U(-noise_half_width, noise_half_width)`, unrelated to any feature.
    Noise,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthAoi {
    pub id: String,
    pub n_parcels: usize,
    #[serde(default = "one")]
    pub imagery_coverage: f64,
    #[serde(default = "one")]
    pub door_visibility: f64,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_intercept")]
    pub intercept: f64,
    #[serde(default = "default_elev_coef")]
    pub elev_coef: f64,
    #[serde(default = "default_hand_coef")]
    pub hand_coef: f64,
    #[serde(default = "one")]
    pub noise_center: f64,
    #[serde(default = "default_half_width")]
    pub noise_half_width: f64,
    #[serde(default = "default_flood_offset")]
    pub flood_offset_m: f64,
    /// Share of grid columns (from the east edge) where the flood layer is nodata.
    #[serde(default)]
    pub outside_fraction: f64,
    #[serde(default = "default_workflow")]
    pub workflow: String,
    #[serde(default = "default_lat")]
    pub origin_lat: f64,
    #[serde(default = "default_lon")]
    pub origin_lon: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunKnobs {
    pub gate_threshold: Option<f64>,
    pub tie_window: Option<f64>,
    pub n_iter: Option<usize>,
    pub k_folds: Option<usize>,
    pub threads: Option<usize>,
    #[serde(default = "default_run_output")]
    pub output_dir: String,
    #[serde(default)]
    pub record_timings: bool,
}

impl Default for RunKnobs {
    fn default() -> Self {
        RunKnobs {
            gate_threshold: None,
            tie_window: None,
            n_iter: None,
            k_folds: None,
            threads: None,
            output_dir: default_run_output(),
            record_timings: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    #[serde(default = "default_fixture_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub run: RunKnobs,
    pub aoi: Vec<SynthAoi>,
}

fn one() -> f64 {
    1.0
}
fn default_intercept() -> f64 {
    0.2
}
fn default_elev_coef() -> f64 {
    0.1
}
fn default_hand_coef() -> f64 {
    0.05
}
fn default_half_width() -> f64 {
    0.5
}
fn default_flood_offset() -> f64 {
    1.2
}
fn default_workflow() -> String {
    "batch_standard".to_string()
}
fn default_lat() -> f64 {
    29.3
}
fn default_lon() -> f64 {
    -95.3
}
fn default_run_output() -> String {
    "out".to_string()
}
fn default_fixture_dir() -> String {
    "fixture".to_string()
}

impl SynthAoi {
    pub fn new(id: &str, n_parcels: usize) -> Self {
        SynthAoi {
            id: id.to_string(),
            n_parcels,
            imagery_coverage: 1.0,
            door_visibility: 1.0,
            target: Target::Linear,
            noise_sigma: 0.0,
            intercept: default_intercept(),
            elev_coef: default_elev_coef(),
            hand_coef: default_hand_coef(),
            noise_center: 1.0,
            noise_half_width: default_half_width(),
            flood_offset_m: default_flood_offset(),
            outside_fraction: 0.0,
            workflow: default_workflow(),
            origin_lat: default_lat(),
            origin_lon: default_lon(),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(format!("AOI id {:?} must use only letters, digits, '_' or '-'", self.id));
        }
        if self.n_parcels == 0 {
            return Err(format!("{}: n_parcels must be at least 1", self.id));
        }
        if !unit(self.imagery_coverage) || !unit(self.door_visibility) || !unit(self.outside_fraction) {
            return Err(format!(
                "{}: imagery_coverage, door_visibility and outside_fraction must be in [0, 1]",
                self.id
            ));
        }
        let finite = [
            self.noise_sigma,
            self.intercept,
            self.elev_coef,
            self.hand_coef,
            self.noise_center,
            self.noise_half_width,
            self.flood_offset_m,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.noise_sigma < 0.0 || self.noise_half_width < 0.0 {
            return Err(format!("{}: generator parameters must be finite and spreads non-negative", self.id));
        }
        if crate::ensemble::workflow::WorkflowMode::parse(&self.workflow).is_none() {
            return Err(format!("{}: unknown workflow {:?}", self.id, self.workflow));
        }
        GeoPoint::new(self.origin_lat, self.origin_lon).map_err(|e| e.to_string())?;
        Ok(())
    }
}

impl SynthConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let cfg: SynthConfig = toml::from_str(&text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::input_file(path, line, e.message().to_string())
        })?;
        Ok(cfg)
    }
}

/// Counts drawn by the generator for one AOI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthCounts {
    pub n_parcels: usize,
    pub with_imagery: usize,
    pub door_visible: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub config_path: PathBuf,
    pub counts: Vec<(String, SynthCounts)>,
}

/// Terrain and flood layers on an `n x n` grid.
struct Terrain {
    dem: RasterGrid,
    hand: RasterGrid,
    so0: RasterGrid,
    so4: RasterGrid,
    flood_ft: RasterGrid,
}

fn terrain(aoi: &SynthAoi, n: usize, phases: [f64; 5]) -> Result<Terrain> {
    let len = n * n;
    let (mut dem, mut hand, mut so0, mut so4, mut flood) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let scale = (n - 1) as f64;
    let outside_cols = (aoi.outside_fraction * n as f64).round() as usize;
    for r in 0..n {
        for c in 0..n {
            let (u, v) = (c as f64 / scale, r as f64 / scale);
            let i = r * n + c;
            let wave = |a: f64, b: f64, p: f64| (2.0 * PI * (a * u + b * v) + p).sin();
            dem[i] = 5.0 + 8.0 * u + 4.0 * v + 0.6 * wave(1.3, 0.7, phases[0]);
            hand[i] = 0.5 + 2.5 * (0.5 + 0.5 * wave(0.9, -1.1, phases[1]));
            so0[i] = 20.0 + 180.0 * (0.5 + 0.5 * wave(0.6, 0.4, phases[2]));
            so4[i] = 150.0 + 600.0 * (0.5 + 0.5 * wave(0.3, 0.8, phases[3]));
            flood[i] = if c >= n - outside_cols {
                DEFAULT_NODATA
            } else {
                (dem[i] + aoi.flood_offset_m + 1.5 * wave(1.7, -0.6, phases[4])) / FEET_TO_METERS
            };
        }
    }
    let grid = |values: Vec<f64>| RasterGrid::new(n, n, aoi.origin_lon, aoi.origin_lat, CELLSIZE_DEG, DEFAULT_NODATA, values);
    Ok(Terrain {
        dem: grid(dem)?,
        hand: grid(hand)?,
        so0: grid(so0)?,
        so4: grid(so4)?,
        flood_ft: grid(flood)?.with_units(Units::Feet),
    })
}

/// Point at `distance_m` along `bearing_deg` from `from` (spherical Earth).
pub fn destination(from: GeoPoint, bearing_deg: f64, distance_m: f64) -> GeoPoint {
    let (phi1, lambda1) = (from.lat.to_radians(), from.lon.to_radians());
    let theta = bearing_deg.to_radians();
    let delta = distance_m / EARTH_RADIUS_M;
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint {
        lat: phi2.to_degrees(),
        lon: lambda2.to_degrees(),
    }
}

fn row_for_pitch(pitch_deg: f64) -> u32 {
    let h = f64::from(PANORAMA_HEIGHT);
    (h / 2.0 - pitch_deg * h / 180.0).round().clamp(0.0, h - 1.0) as u32
}

/// Door-bottom row and float32 depth reproducing a vertical offset `dh`
/// from the camera, at horizontal distance `dist_m`. The row is nudged
/// until its pitch has the sign of `dh` and clears the roadside rows.
fn door_geometry(dh: f64, dist_m: f64, road_row: u32) -> (u32, f32) {
    if dh == 0.0 {
        return (PANORAMA_HEIGHT / 2, dist_m as f32);
    }
    let mut y = row_for_pitch(dh.atan2(dist_m).to_degrees());
    while dh > 0.0 && pitch_angle(f64::from(y), PANORAMA_HEIGHT) <= 0.0 {
        y -= 1;
    }
    while dh < 0.0 && pitch_angle(f64::from(y), PANORAMA_HEIGHT) >= 0.0 {
        y += 1;
    }
    // keep the door-bottom depth cells off the roadside depth row
    let limit = (road_row / 2) * 2 - 2;
    if y >= limit {
        y = limit - 1;
    }
    let pitch = pitch_angle(f64::from(y), PANORAMA_HEIGHT).to_radians();
    (y, (dh / pitch.sin()) as f32)
}

struct ParcelTruth {
    parcel_id: String,
    has_imagery: bool,
    door_visible: bool,
    hdsl_generated: f64,
    hdsl: f64,
    street_elev: f64,
    lfe: Option<f64>,
    elevation: f64,
    hand: f64,
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn write_grid(path: &Path, g: &RasterGrid) -> Result<()> {
    write_atomic(path, g.to_ascii().as_bytes())
}

fn generate_aoi(aoi: &SynthAoi, seed: u64, dir: &Path) -> Result<SynthCounts> {
    aoi.validate().map_err(Error::InvalidInput)?;
    let root = SeedPath::new(seed).child_str("synth").child_str(&aoi.id);
    let n_side = (((4 * aoi.n_parcels) as f64).sqrt().ceil() as usize + 2).max(8);

    let mut rng = root.child(1).rng();
    let phases: [f64; 5] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
    let t = terrain(aoi, n_side, phases)?;

    let interior = n_side - 2;
    let mut cells = sample_without_replacement(&mut root.child(2).rng(), interior * interior, aoi.n_parcels);
    cells.sort_unstable();
    let n = cells.len();
    let mut with_imagery = vec![false; n];
    let n_img = (aoi.imagery_coverage * n as f64).round() as usize;
    let img_idx = sample_without_replacement(&mut root.child(3).rng(), n, n_img);
    for &i in &img_idx {
        with_imagery[i] = true;
    }
    let mut img_sorted = img_idx.clone();
    img_sorted.sort_unstable();
    let n_door = (aoi.door_visibility * n_img as f64).round() as usize;
    let mut door = vec![false; n];
    for k in sample_without_replacement(&mut root.child(4).rng(), n_img, n_door) {
        door[img_sorted[k]] = true;
    }

    let mut target_rng = root.child(5).rng();
    let mut camera_rng = root.child(6).rng();
    let mut value_rng = root.child(7).rng();
    let road_pitch = (-CAMERA_HEIGHT_M).atan2(ROADSIDE_DISTANCE_M).to_degrees();
    let road_row = row_for_pitch(road_pitch);
    let road_pitch_row = pitch_angle(f64::from(road_row), PANORAMA_HEIGHT);
    let road_depth = (-CAMERA_HEIGHT_M / road_pitch_row.to_radians().sin()) as f32;

    let pano_dir = dir.join("pano");
    let mut depth_files: Vec<DepthMatrix> = Vec::new();
    let mut parcel_rows = Vec::with_capacity(n);
    let mut meta_lines = String::new();
    let mut truths = Vec::with_capacity(n);
    let mut slot = 0usize;
    for (i, &cell) in cells.iter().enumerate() {
        let (r, c) = (cell / interior + 1, cell % interior + 1);
        let (cx, cy) = t.dem.cell_center(r, c);
        let house = GeoPoint::new(cy + PARCEL_OFFSET.1 * CELLSIZE_DEG, cx + PARCEL_OFFSET.0 * CELLSIZE_DEG)?;
        let parcel_id = format!("{}-{:05}", aoi.id, i + 1);
        let dem = t.dem.get(r, c);
        let hand = t.hand.get(r, c);
        let hdsl_generated = match aoi.target {
            Target::Linear => {
                let z: f64 = StandardNormal.sample(&mut target_rng);
                aoi.intercept + aoi.elev_coef * dem + aoi.hand_coef * hand + aoi.noise_sigma * z
            }
            Target::Noise => aoi.noise_center + target_rng.random_range(-1.0..=1.0) * aoi.noise_half_width,
        };
        let value = (120_000.0 + 330_000.0 * value_rng.random_range(0.0f64..1.0)).round();
        let street_k = r / 6;
        let suffix = if street_k < STREETS.len() { String::new() } else { format!(" {}", street_k / STREETS.len() + 1) };
        let street = format!("{} St{suffix}", STREETS[street_k % STREETS.len()]);
        parcel_rows.push(vec![
            parcel_id.clone(),
            fmt_f64(house.lat),
            fmt_f64(house.lon),
            street,
            fmt_f64(value),
        ]);

        let mut truth = ParcelTruth {
            parcel_id: parcel_id.clone(),
            has_imagery: with_imagery[i],
            door_visible: door[i],
            hdsl_generated,
            hdsl: hdsl_generated,
            street_elev: dem,
            lfe: None,
            elevation: dem,
            hand,
        };
        if with_imagery[i] {
            let dist = camera_rng.random_range(15.0..25.0);
            let from_house = camera_rng.random_range(0.0..360.0);
            let camera = destination(house, from_house, dist);
            let b = bearing(camera, house);
            let c0 = (slot % SLOTS_PER_DEPTH_FILE) as u32 * SLOT_PX + DOOR_HALF_WIDTH;
            let yaw = normalize_degrees(b - f64::from(c0) * 360.0 / f64::from(PANORAMA_WIDTH));
            assert_eq!(bearing_to_column(b, yaw, PANORAMA_WIDTH), c0, "slot column must round-trip");
            let file_idx = slot / SLOTS_PER_DEPTH_FILE;
            if depth_files.len() <= file_idx {
                depth_files.push(DepthMatrix::empty());
            }
            let depth = &mut depth_files[file_idx];
            slot += 1;

            let ce = dem + CAMERA_HEIGHT_M;
            let re = ce + vertical_offset(f64::from(road_depth), road_pitch_row)?;
            let cols = c0 - DOOR_HALF_WIDTH..=c0 + DOOR_HALF_WIDTH;
            let mut road_px = Vec::new();
            for x in cols.clone() {
                for y in road_row - ROADSIDE_HEIGHT_PX..=road_row {
                    road_px.push((x, y));
                }
                let (dr, dc) = DepthMatrix::cell_for_pixel(x, road_row, PANORAMA_WIDTH, PANORAMA_HEIGHT);
                depth.set(dr, dc, Some(road_depth));
            }
            let mut door_px = Vec::new();
            if door[i] {
                let (y_d, d32) = door_geometry(re + hdsl_generated - ce, dist, road_row);
                let lfe = ce + vertical_offset(f64::from(d32), pitch_angle(f64::from(y_d), PANORAMA_HEIGHT))?;
                for x in cols {
                    for y in y_d.saturating_sub(DOOR_HEIGHT_PX)..=y_d {
                        door_px.push((x, y));
                    }
                    let (dr, dc) = DepthMatrix::cell_for_pixel(x, y_d, PANORAMA_WIDTH, PANORAMA_HEIGHT);
                    depth.set(dr, dc, Some(d32));
                }
                truth.lfe = Some(lfe);
                truth.hdsl = lfe - re;
                truth.street_elev = re;
            }
            let door_file = format!("pano/{parcel_id}_door.txt");
            let road_file = format!("pano/{parcel_id}_road.txt");
            write_atomic(
                &dir.join(&door_file),
                PixelMask::from_pixels(PANORAMA_WIDTH, PANORAMA_HEIGHT, door_px)?.to_text().as_bytes(),
            )?;
            write_atomic(
                &dir.join(&road_file),
                PixelMask::from_pixels(PANORAMA_WIDTH, PANORAMA_HEIGHT, road_px)?.to_text().as_bytes(),
            )?;
            let meta = PanoramaMeta {
                parcel_id: parcel_id.clone(),
                camera_lat: camera.lat,
                camera_lon: camera.lon,
                camera_elev_m: ce,
                yaw_deg: yaw,
                width_px: PANORAMA_WIDTH,
                height_px: PANORAMA_HEIGHT,
                acquired: NaiveDate::from_ymd_opt(2019, 6, 1).expect("valid date"),
                depth_file: format!("pano/depth_{file_idx:03}.b64"),
                door_mask_file: door_file,
                roadside_mask_file: road_file,
                structure_detected: true,
            };
            meta_lines.push_str(&serde_json::to_string(&meta).map_err(|e| Error::InvalidInput(e.to_string()))?);
            meta_lines.push('\n');
        }
        truths.push(truth);
    }
    for (k, d) in depth_files.iter().enumerate() {
        let mut text = encode_depth(d);
        text.push('\n');
        write_atomic(&pano_dir.join(format!("depth_{k:03}.b64")), text.as_bytes())?;
    }
    write_atomic(&dir.join("panoramas.jsonl"), meta_lines.as_bytes())?;
    write_atomic(
        &dir.join("parcels.csv"),
        &csv_bytes(&["parcel_id", "lat", "lon", "street_name", "assessed_value_usd"], parcel_rows),
    )?;
    write_grid(&dir.join("dem.asc"), &t.dem)?;
    write_grid(&dir.join("hand.asc"), &t.hand)?;
    write_grid(&dir.join("d2stream_so0.asc"), &t.so0)?;
    write_grid(&dir.join("d2stream_so4.asc"), &t.so4)?;
    write_grid(&dir.join("fathom_100yr.asc"), &t.flood_ft)?;
    let manifest = "[hand]\npath = \"hand.asc\"\n\n\
                    [d2stream_so0]\npath = \"d2stream_so0.asc\"\n\n\
                    [d2stream_so4]\npath = \"d2stream_so4.asc\"\n\n\
                    [dem]\npath = \"dem.asc\"\nunits = \"meters\"\n\n\
                    [fathom_100yr]\npath = \"fathom_100yr.asc\"\nunits = \"feet\"\nsemantic = \"surface_elevation\"\n";
    write_atomic(&dir.join("rasters.toml"), manifest.as_bytes())?;
    write_atomic(
        &dir.join(GROUND_TRUTH_FILE),
        &csv_bytes(
            &[
                "parcel_id",
                "has_imagery",
                "door_visible",
                "hdsl_m",
                "hdsl_generated_m",
                "street_elev_m",
                "lfe_m",
                "elevation_m",
                "hand_m",
            ],
            truths.iter().map(|t| {
                vec![
                    t.parcel_id.clone(),
                    t.has_imagery.to_string(),
                    t.door_visible.to_string(),
                    fmt_f64(t.hdsl),
                    fmt_f64(t.hdsl_generated),
                    fmt_f64(t.street_elev),
                    fmt_opt(t.lfe),
                    fmt_f64(t.elevation),
                    fmt_f64(t.hand),
                ]
            }),
        ),
    )?;
    Ok(SynthCounts {
        n_parcels: n,
        with_imagery: n_img,
        door_visible: n_door,
    })
}

fn run_config_text(cfg: &SynthConfig) -> String {
    let mut s = format!("seed = {}\n", cfg.seed);
    let k = &cfg.run;
    if let Some(v) = k.gate_threshold {
        s.push_str(&format!("gate_threshold = {v:?}\n"));
    }
    if let Some(v) = k.tie_window {
        s.push_str(&format!("tie_window = {v:?}\n"));
    }
    if let Some(v) = k.n_iter {
        s.push_str(&format!("n_iter = {v}\n"));
    }
    if let Some(v) = k.k_folds {
        s.push_str(&format!("k_folds = {v}\n"));
    }
    if let Some(v) = k.threads {
        s.push_str(&format!("threads = {v}\n"));
    }
    s.push_str(&format!("output_dir = {}\n", toml_str(&k.output_dir)));
    if k.record_timings {
        s.push_str("record_timings = true\n");
    }
    for a in &cfg.aoi {
        s.push_str(&format!(
            "\n[[aoi]]\nid = {id}\nworkflow = {wf}\nrasters = {r}\nparcels = {p}\npanoramas = {q}\n",
            id = toml_str(&a.id),
            wf = toml_str(&a.workflow),
            r = toml_str(&format!("{}/rasters.toml", a.id)),
            p = toml_str(&format!("{}/parcels.csv", a.id)),
            q = toml_str(&format!("{}/panoramas.jsonl", a.id)),
        ));
    }
    s
}

/// Writes every AOI of `cfg` plus a run `config.toml` under `fixture_dir`.
pub fn generate(cfg: &SynthConfig, fixture_dir: &Path) -> Result<SynthOutput> {
    let mut ids = std::collections::BTreeSet::new();
    for a in &cfg.aoi {
        if !ids.insert(a.id.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate AOI id {:?}", a.id)));
        }
    }
    let mut counts = Vec::new();
    for a in &cfg.aoi {
        counts.push((a.id.clone(), generate_aoi(a, cfg.seed, &fixture_dir.join(&a.id))?));
    }
    let config_path = fixture_dir.join(CONFIG_FILE);
    write_atomic(&config_path, run_config_text(cfg).as_bytes())?;
    Ok(SynthOutput { config_path, counts })
}

/// Loads a parameter file and generates into its `output_dir`.
pub fn generate_from_file(path: &Path, seed: Option<u64>) -> Result<SynthOutput> {
    let mut cfg = SynthConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    generate(&cfg, &base.join(&cfg.output_dir))
}
