use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{
    bearing, bearing_to_column, pitch_angle, segmentation_window, vertical_offset, ColumnWindow,
    GeoPoint, PanoramaObservation, PixelMask,
};

/// Outcome of the three-tier quality screen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenStatus {
    Accepted,
    RejectedDate,
    RejectedDistance,
    RejectedNoStructure,
    RejectedNoDoor,
    RejectedImplausible,
}

impl ScreenStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScreenStatus::Accepted => "accepted",
            ScreenStatus::RejectedDate => "rejected_date",
            ScreenStatus::RejectedDistance => "rejected_distance",
            ScreenStatus::RejectedNoStructure => "rejected_no_structure",
            ScreenStatus::RejectedNoDoor => "rejected_no_door",
            ScreenStatus::RejectedImplausible => "rejected_implausible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "accepted" => ScreenStatus::Accepted,
            "rejected_date" => ScreenStatus::RejectedDate,
            "rejected_distance" => ScreenStatus::RejectedDistance,
            "rejected_no_structure" => ScreenStatus::RejectedNoStructure,
            "rejected_no_door" => ScreenStatus::RejectedNoDoor,
            "rejected_implausible" => ScreenStatus::RejectedImplausible,
            _ => return None,
        })
    }

    /// True when the panorama failed tier one (date, distance, structure).
    pub fn is_tier_one_rejection(&self) -> bool {
        matches!(
            self,
            ScreenStatus::RejectedDate | ScreenStatus::RejectedDistance | ScreenStatus::RejectedNoStructure
        )
    }
}

/// Screening thresholds. Defaults: acquisitions before 2015-01-01 rejected,
/// camera more than 50 m from the centroid rejected, LFE more than 5 m away
/// from the DEM terrain elevation rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenThresholds {
    pub earliest_date: NaiveDate,
    pub max_camera_distance_m: f64,
    pub max_dem_deviation_m: f64,
}

impl Default for ScreenThresholds {
    fn default() -> Self {
        ScreenThresholds {
            earliest_date: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            max_camera_distance_m: 50.0,
            max_dem_deviation_m: 5.0,
        }
    }
}

/// Per-parcel Stage 1 result. `hdsl_m` is computed exactly once, as
/// `lfe_m - roadside_elev_m`, when both are known.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationEstimate {
    pub parcel_id: String,
    pub lfe_m: Option<f64>,
    pub roadside_elev_m: Option<f64>,
    pub hdsl_m: Option<f64>,
    pub door_visible: bool,
    pub screen_status: ScreenStatus,
    /// Free-text reason attached to rejections that are not self-explanatory.
    pub detail: Option<String>,
}

impl ElevationEstimate {
    pub fn is_accepted(&self) -> bool {
        self.screen_status == ScreenStatus::Accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfeEstimate {
    pub lfe_m: f64,
    pub roadside_elev_m: f64,
    pub door_pixels: usize,
    pub roadside_pixels: usize,
}

impl LfeEstimate {
    pub fn hdsl_m(&self) -> f64 {
        self.lfe_m - self.roadside_elev_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfeFailure {
    /// No door pixel inside the ±45° window: the door is not visible.
    NoDoorPixels,
    /// Door pixels found but every matching depth cell is missing.
    NoDoorDepth,
    NoRoadsidePixels,
    NoRoadsideDepth,
}

impl LfeFailure {
    pub fn describe(&self) -> &'static str {
        match self {
            LfeFailure::NoDoorPixels => "no door pixels in search window",
            LfeFailure::NoDoorDepth => "no valid depth at door-bottom pixels",
            LfeFailure::NoRoadsidePixels => "no roadside pixels in search window",
            LfeFailure::NoRoadsideDepth => "no valid depth at roadside pixels",
        }
    }
}

/// Keeps the lowest (maximum-row) mask pixel of every window column.
pub fn door_bottom_pixels(mask: &PixelMask, window: &ColumnWindow) -> PixelMask {
    let mut out = PixelMask::new();
    for (x, y) in mask.lowest_per_column() {
        if window.contains(x) {
            out.pixels_mut().insert((x, y));
        }
    }
    out
}

fn window_for(obs: &PanoramaObservation, house: GeoPoint) -> ColumnWindow {
    let b = bearing(obs.camera, house);
    segmentation_window(bearing_to_column(b, obs.yaw_deg, obs.width_px), obs.width_px)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Median of `CE + depth * sin(pitch)` over the bottom pixels, skipping pixels
/// whose depth cell is missing.
fn elevation_from_pixels(obs: &PanoramaObservation, pixels: &PixelMask) -> Option<f64> {
    let mut values: Vec<f64> = pixels
        .iter()
        .filter_map(|(x, y)| {
            let depth = obs.depth.at_pixel(x, y, obs.width_px, obs.height_px)?;
            let pitch = pitch_angle(f64::from(y), obs.height_px);
            vertical_offset(depth, pitch).ok().map(|dh| obs.camera_elev_m + dh)
        })
        .collect();
    median(&mut values)
}

/// Lowest-floor and roadside elevations from one panorama.
pub fn estimate_lfe(obs: &PanoramaObservation, house: GeoPoint) -> Result<LfeEstimate, LfeFailure> {
    let window = window_for(obs, house);
    let door = door_bottom_pixels(&obs.door_mask, &window);
    if door.is_empty() {
        return Err(LfeFailure::NoDoorPixels);
    }
    let lfe_m = elevation_from_pixels(obs, &door).ok_or(LfeFailure::NoDoorDepth)?;

    let road = door_bottom_pixels(&obs.roadside_mask, &window);
    if road.is_empty() {
        return Err(LfeFailure::NoRoadsidePixels);
    }
    let roadside_elev_m = elevation_from_pixels(obs, &road).ok_or(LfeFailure::NoRoadsideDepth)?;

    Ok(LfeEstimate {
        lfe_m,
        roadside_elev_m,
        door_pixels: door.len(),
        roadside_pixels: road.len(),
    })
}

/// Three-tier quality screen. A missing LFE or DEM elevation at tier three
/// cannot be validated and is rejected as implausible.
pub fn screen(
    obs: &PanoramaObservation,
    parcel_centroid: GeoPoint,
    dem_elev_m: Option<f64>,
    lfe_m: Option<f64>,
    thresholds: &ScreenThresholds,
) -> ScreenStatus {
    if obs.acquired < thresholds.earliest_date {
        return ScreenStatus::RejectedDate;
    }
    if obs.camera.haversine_m(&parcel_centroid) > thresholds.max_camera_distance_m {
        return ScreenStatus::RejectedDistance;
    }
    if !obs.structure_detected {
        return ScreenStatus::RejectedNoStructure;
    }
    if door_bottom_pixels(&obs.door_mask, &window_for(obs, parcel_centroid)).is_empty() {
        return ScreenStatus::RejectedNoDoor;
    }
    match (lfe_m, dem_elev_m) {
        (Some(lfe), Some(dem)) if (lfe - dem).abs() <= thresholds.max_dem_deviation_m => {
            ScreenStatus::Accepted
        }
        _ => ScreenStatus::RejectedImplausible,
    }
}

/// Full Stage 1 evaluation of one parcel's panorama.
pub fn evaluate_panorama(
    obs: &PanoramaObservation,
    parcel_centroid: GeoPoint,
    dem_elev_m: Option<f64>,
    thresholds: &ScreenThresholds,
) -> ElevationEstimate {
    let mut est = ElevationEstimate {
        parcel_id: obs.parcel_id.clone(),
        lfe_m: None,
        roadside_elev_m: None,
        hdsl_m: None,
        door_visible: false,
        screen_status: ScreenStatus::Accepted,
        detail: None,
    };

    // tier one does not depend on the estimate
    let tier_one = screen(obs, parcel_centroid, dem_elev_m, None, thresholds);
    if tier_one.is_tier_one_rejection() {
        est.screen_status = tier_one;
        return est;
    }

    let lfe = estimate_lfe(obs, parcel_centroid);
    est.door_visible = !matches!(lfe, Err(LfeFailure::NoDoorPixels));
    let lfe_m = match lfe {
        Ok(e) => Some(e.lfe_m),
        Err(LfeFailure::NoRoadsidePixels | LfeFailure::NoRoadsideDepth) => {
            // LFE is known, but without RE there is no HDSL; still screened
            // against the DEM so the rejection reason stays informative.
            elevation_from_pixels(
                obs,
                &door_bottom_pixels(&obs.door_mask, &window_for(obs, parcel_centroid)),
            )
        }
        Err(_) => None,
    };
    est.screen_status = screen(obs, parcel_centroid, dem_elev_m, lfe_m, thresholds);
    est.lfe_m = lfe_m;

    match lfe {
        Ok(e) if est.screen_status == ScreenStatus::Accepted => {
            est.roadside_elev_m = Some(e.roadside_elev_m);
            est.hdsl_m = Some(e.lfe_m - e.roadside_elev_m);
        }
        Ok(_) => {
            if dem_elev_m.is_none() {
                est.detail = Some("no DEM elevation at parcel centroid".into());
            }
        }
        Err(failure) => {
            if est.screen_status == ScreenStatus::Accepted {
                est.screen_status = ScreenStatus::RejectedImplausible;
            }
            if failure != LfeFailure::NoDoorPixels {
                est.detail = Some(failure.describe().to_string());
            }
        }
    }
    est
}
