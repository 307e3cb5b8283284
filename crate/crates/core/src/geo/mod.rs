//! Panorama geometry: locating a building in an equirectangular street-view
//! panorama and turning door-bottom pixels into a lowest-floor elevation.
//!
//! Conventions used throughout:
//!
//! * angles are degrees at the API boundary and radians internally;
//! * bearings are measured clockwise from north and normalized to `[0, 360)`;
//! * pixel coordinates are `(x, y)` = (column, row) with row 0 at the top of
//!   the panorama (zenith) and row `height / 2` on the horizon.

mod extract;
mod panorama;

pub use extract::{
    door_bottom_pixels, estimate_lfe, evaluate_panorama, screen, ElevationEstimate, LfeEstimate,
    LfeFailure, ScreenStatus, ScreenThresholds,
};
pub use panorama::{decode_depth, encode_depth, DepthMatrix, PanoramaObservation, PixelMask};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius used for haversine distances, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A WGS84 latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate ({lat}, {lon})"
            )));
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidInput(format!(
                "coordinate ({lat}, {lon}) out of WGS84 bounds"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }

    /// Great-circle distance in meters (haversine, mean Earth radius).
    pub fn haversine_m(&self, other: &GeoPoint) -> f64 {
        let phi1 = self.lat.to_radians();
        let phi2 = other.lat.to_radians();
        let dphi = phi2 - phi1;
        let dlambda = (other.lon - self.lon).to_radians();
        let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
        2.0 * EARTH_RADIUS_M * a.sqrt().min(1.0).asin()
    }
}

/// Normalizes any finite angle into `[0, 360)`.
pub fn normalize_degrees(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// Bearing from the camera to the house, clockwise from north, in `[0, 360)`.
pub fn bearing(camera: GeoPoint, house: GeoPoint) -> f64 {
    let lat_c = camera.lat.to_radians();
    let lat_h = house.lat.to_radians();
    let dlon = (house.lon - camera.lon).to_radians();
    let x = dlon.sin() * lat_h.cos();
    // cos(c)sin(h) - sin(c)cos(h)cos(dlon), rearranged to avoid cancellation
    // when the points are a few meters apart
    let y = (lat_h - lat_c).sin() + 2.0 * lat_c.sin() * lat_h.cos() * (dlon / 2.0).sin().powi(2);
    normalize_degrees(x.atan2(y).to_degrees())
}

/// Panorama column whose viewing azimuth equals `bearing_deg`, given the
/// camera yaw (azimuth of column 0) and the panorama width.
pub fn bearing_to_column(bearing_deg: f64, yaw_deg: f64, width_px: u32) -> u32 {
    assert!(width_px > 0, "panorama width must be positive");
    let rel = (bearing_deg - yaw_deg).rem_euclid(360.0);
    let col = (rel / 360.0 * f64::from(width_px)).round() as u64;
    (col % u64::from(width_px)) as u32
}

/// The ±45° horizontal search window around a panorama column, as a
/// half-open interval `[center - width/8, center + width/8)` that wraps across
/// the panorama seam.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnWindow {
    start: u32,
    len: u32,
    width: u32,
}

impl ColumnWindow {
    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// First column of the window (after wrapping).
    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn contains(&self, col: u32) -> bool {
        if col >= self.width {
            return false;
        }
        let offset = (i64::from(col) - i64::from(self.start)).rem_euclid(i64::from(self.width));
        offset < i64::from(self.len)
    }

    /// Columns in window order, starting at the left edge.
    pub fn columns(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len).map(move |i| (self.start + i) % self.width)
    }
}

/// Builds the ±45° window (a quarter of the panorama width) centered on `center_col`.
pub fn segmentation_window(center_col: u32, width_px: u32) -> ColumnWindow {
    assert!(width_px > 0, "panorama width must be positive");
    let half = width_px / 8;
    let start = (i64::from(center_col) - i64::from(half)).rem_euclid(i64::from(width_px)) as u32;
    ColumnWindow {
        start,
        len: 2 * half,
        width: width_px,
    }
}

/// Pitch angle of panorama row `p_y`, degrees: positive above the horizon,
/// +90 at the top row.
pub fn pitch_angle(p_y: f64, height_px: u32) -> f64 {
    let h = f64::from(height_px);
    (h / 2.0 - p_y) / h * 180.0
}

/// Vertical offset between the camera and a point seen at `pitch_deg` at slant
/// distance `depth_m`.
pub fn vertical_offset(depth_m: f64, pitch_deg: f64) -> Result<f64> {
    if !(depth_m > 0.0) || !depth_m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "depth must be positive and finite, got {depth_m}"
        )));
    }
    Ok(depth_m * pitch_deg.to_radians().sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn bearing_cardinal_directions() {
        assert_eq!(bearing(pt(0.0, 0.0), pt(1.0, 0.0)), 0.0);
        assert!((bearing(pt(0.0, 0.0), pt(0.0, 1.0)) - 90.0).abs() < 1e-12);
        assert!((bearing(pt(0.0, 0.0), pt(-1.0, 0.0)) - 180.0).abs() < 1e-12);
        assert!((bearing(pt(0.0, 0.0), pt(0.0, -1.0)) - 270.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_points() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.5).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn haversine_one_degree_of_latitude() {
        let d = pt(0.0, 0.0).haversine_m(&pt(1.0, 0.0));
        let expected = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert!((d - expected).abs() < 1e-6);
        assert_eq!(pt(29.7, -95.4).haversine_m(&pt(29.7, -95.4)), 0.0);
    }

    #[test]
    fn column_mapping() {
        assert_eq!(bearing_to_column(0.0, 0.0, 16384), 0);
        assert_eq!(bearing_to_column(180.0, 0.0, 16384), 8192);
        assert_eq!(bearing_to_column(90.0, 45.0, 512), 64);
        // just below a full turn rounds back onto column 0
        assert_eq!(bearing_to_column(359.99, 0.0, 512), 0);
        assert_eq!(bearing_to_column(10.0, 20.0, 360), 350);
    }

    #[test]
    fn window_wraps_across_seam() {
        let w = segmentation_window(0, 512);
        assert_eq!(w.len(), 128);
        let cols: Vec<u32> = w.columns().collect();
        let mut expected: Vec<u32> = (448..512).collect();
        expected.extend(0..64);
        assert_eq!(cols, expected);
        assert!(w.contains(448) && w.contains(63));
        assert!(!w.contains(64) && !w.contains(447));
    }

    #[test]
    fn window_sizes() {
        let w = segmentation_window(100, 16384);
        assert_eq!(w.len(), 4096);
        assert_eq!(w.start(), 16384 - 1948);
        assert!(w.contains(2147) && !w.contains(2148));
        for center in 0..8 {
            assert_eq!(segmentation_window(center, 8).len(), 2);
        }
    }

    #[test]
    fn pitch_boundaries() {
        assert_eq!(pitch_angle(4096.0, 8192), 0.0);
        assert_eq!(pitch_angle(0.0, 8192), 90.0);
        assert_eq!(pitch_angle(6144.0, 8192), -45.0);
    }

    #[test]
    fn vertical_offset_values() {
        assert_eq!(vertical_offset(10.0, 0.0).unwrap(), 0.0);
        assert!((vertical_offset(10.0, 90.0).unwrap() - 10.0).abs() < 1e-12);
        let v = vertical_offset(8.2, -14.3).unwrap();
        assert!((v - (-2.025_391_904_326_492)).abs() < 1e-12, "{v}");
        assert!(vertical_offset(0.0, 10.0).is_err());
        assert!(vertical_offset(-1.0, 10.0).is_err());
    }
}
