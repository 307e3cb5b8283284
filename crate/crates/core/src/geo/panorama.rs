use std::collections::{BTreeMap, BTreeSet};

use base64::engine::general_purpose::STANDARD;
use base64::{DecodeError, Engine as _};
use chrono::NaiveDate;

use super::GeoPoint;
use crate::error::{Error, Result};

/// Set of `(x, y)` pixels at full panorama resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PixelMask {
    pixels: BTreeSet<(u32, u32)>,
}

impl PixelMask {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a mask, rejecting pixels outside `[0, width) x [0, height)`.
    /// Repeated pixels collapse into one.
    pub fn from_pixels<I>(width: u32, height: u32, pixels: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let mut set = BTreeSet::new();
        for (x, y) in pixels {
            if x >= width || y >= height {
                return Err(Error::InvalidInput(format!(
                    "mask pixel ({x}, {y}) outside {width}x{height} panorama"
                )));
            }
            set.insert((x, y));
        }
        Ok(PixelMask { pixels: set })
    }

    pub(crate) fn pixels_mut(&mut self) -> &mut BTreeSet<(u32, u32)> {
        &mut self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.pixels.contains(&(x, y))
    }

    /// Pixels in `(x, y)` order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.pixels.iter().copied()
    }

    /// Lowest (maximum-row) pixel of every column present in the mask.
    pub(crate) fn lowest_per_column(&self) -> BTreeMap<u32, u32> {
        let mut lowest = BTreeMap::new();
        for &(x, y) in &self.pixels {
            lowest
                .entry(x)
                .and_modify(|row: &mut u32| *row = (*row).max(y))
                .or_insert(y);
        }
        lowest
    }

    /// Parses the mask text format: one `x y` integer pair per line. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, width: u32, height: u32) -> std::result::Result<Self, (usize, String)> {
        let mut pixels = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> std::result::Result<u32, (usize, String)> {
                let tok = tok.ok_or((idx + 1, "expected two integers `x y`".to_string()))?;
                tok.parse::<u32>()
                    .map_err(|_| (idx + 1, format!("invalid pixel coordinate `{tok}`")))
            };
            let x = parse(parts.next())?;
            let y = parse(parts.next())?;
            if parts.next().is_some() {
                return Err((idx + 1, "expected exactly two integers per line".into()));
            }
            if x >= width || y >= height {
                return Err((idx + 1, format!("pixel ({x}, {y}) outside {width}x{height} panorama")));
            }
            pixels.push((x, y));
        }
        Ok(PixelMask {
            pixels: pixels.into_iter().collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.pixels.len() * 10);
        for (x, y) in self.iter() {
            out.push_str(&format!("{x} {y}\n"));
        }
        out
    }
}

/// Downsampled per-pixel slant distances (meters) paired with a panorama.
///
/// Always [`DepthMatrix::ROWS`] x [`DepthMatrix::COLS`]; missing cells are stored
/// as NaN and read back as `None`.
#[derive(Debug, Clone)]
pub struct DepthMatrix {
    values: Vec<f32>,
}

impl PartialEq for DepthMatrix {
    // missing cells (NaN) compare equal to each other
    fn eq(&self, other: &Self) -> bool {
        self.values
            .iter()
            .zip(&other.values)
            .all(|(a, b)| (!a.is_finite() && !b.is_finite()) || a.to_bits() == b.to_bits())
    }
}

impl DepthMatrix {
    pub const ROWS: usize = 256;
    pub const COLS: usize = 512;
    pub const PAYLOAD_BYTES: usize = Self::ROWS * Self::COLS * 4;

    /// All cells missing.
    pub fn empty() -> Self {
        DepthMatrix {
            values: vec![f32::NAN; Self::ROWS * Self::COLS],
        }
    }

    pub fn filled(depth_m: f32) -> Self {
        let mut m = Self::empty();
        for row in 0..Self::ROWS {
            for col in 0..Self::COLS {
                m.set(row, col, Some(depth_m));
            }
        }
        m
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.values[row * Self::COLS + col];
        v.is_finite().then_some(f64::from(v))
    }

    /// Sets a cell; non-positive or non-finite depths are stored as missing.
    pub fn set(&mut self, row: usize, col: usize, depth_m: Option<f32>) {
        let v = match depth_m {
            Some(d) if d.is_finite() && d > 0.0 => d,
            _ => f32::NAN,
        };
        self.values[row * Self::COLS + col] = v;
    }

    /// Depth cell covering full-resolution panorama pixel `(x, y)`.
    pub fn cell_for_pixel(x: u32, y: u32, width_px: u32, height_px: u32) -> (usize, usize) {
        let row = (u64::from(y) * Self::ROWS as u64 / u64::from(height_px)) as usize;
        let col = (u64::from(x) * Self::COLS as u64 / u64::from(width_px)) as usize;
        (row.min(Self::ROWS - 1), col.min(Self::COLS - 1))
    }

    pub fn at_pixel(&self, x: u32, y: u32, width_px: u32, height_px: u32) -> Option<f64> {
        let (row, col) = Self::cell_for_pixel(x, y, width_px, height_px);
        self.get(row, col)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }
}

/// Encodes a depth matrix as base64 of row-major little-endian `f32` values.
/// Missing cells are written as NaN.
pub fn encode_depth(depth: &DepthMatrix) -> String {
    let mut bytes = Vec::with_capacity(DepthMatrix::PAYLOAD_BYTES);
    for v in &depth.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    STANDARD.encode(bytes)
}

/// Decodes a base64 depth payload. Leading/trailing whitespace is ignored.
pub fn decode_depth(encoded: &str) -> Result<DepthMatrix> {
    let bytes = STANDARD.decode(encoded.trim()).map_err(|e| {
        let (offset, message) = match e {
            DecodeError::InvalidByte(off, b) => (off, format!("invalid base64 byte 0x{b:02x}")),
            DecodeError::InvalidLastSymbol(off, b) => {
                (off, format!("invalid trailing base64 symbol 0x{b:02x}"))
            }
            DecodeError::InvalidLength(len) => (len, "invalid base64 length".to_string()),
            DecodeError::InvalidPadding => (encoded.trim().len(), "invalid base64 padding".to_string()),
        };
        Error::DepthFormat { offset, message }
    })?;
    if bytes.len() != DepthMatrix::PAYLOAD_BYTES {
        return Err(Error::DepthFormat {
            offset: bytes.len().min(DepthMatrix::PAYLOAD_BYTES),
            message: format!(
                "decoded {} bytes, expected {} ({}x{} float32)",
                bytes.len(),
                DepthMatrix::PAYLOAD_BYTES,
                DepthMatrix::ROWS,
                DepthMatrix::COLS
            ),
        });
    }
    let mut matrix = DepthMatrix::empty();
    for (i, chunk) in bytes.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        matrix.set(i / DepthMatrix::COLS, i % DepthMatrix::COLS, Some(v));
    }
    Ok(matrix)
}

/// One street-view panorama paired with its segmentation output.
#[derive(Debug, Clone)]
pub struct PanoramaObservation {
    pub parcel_id: String,
    pub camera: GeoPoint,
    /// Camera elevation above the vertical datum, meters.
    pub camera_elev_m: f64,
    pub yaw_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub acquired: NaiveDate,
    pub depth: DepthMatrix,
    pub door_mask: PixelMask,
    pub roadside_mask: PixelMask,
    /// Set by the segmentation stage when no building was found in frame.
    pub structure_detected: bool,
}

impl PanoramaObservation {
    /// Checks the equirectangular 2:1 shape, a finite camera elevation and yaw,
    /// and that both masks fit inside the image.
    pub fn validate(&self) -> Result<()> {
        if self.height_px == 0 || self.width_px != 2 * self.height_px {
            return Err(Error::InvalidInput(format!(
                "panorama {} is {}x{}, expected width = 2 x height",
                self.parcel_id, self.width_px, self.height_px
            )));
        }
        if !self.camera_elev_m.is_finite() || !self.yaw_deg.is_finite() {
            return Err(Error::InvalidInput(format!(
                "panorama {} has non-finite camera elevation or yaw",
                self.parcel_id
            )));
        }
        for (name, mask) in [("door", &self.door_mask), ("roadside", &self.roadside_mask)] {
            if let Some((x, y)) = mask.iter().find(|&(x, y)| x >= self.width_px || y >= self.height_px) {
                return Err(Error::InvalidInput(format!(
                    "panorama {} {name} mask pixel ({x}, {y}) out of bounds",
                    self.parcel_id
                )));
            }
        }
        Ok(())
    }
}
