//! Per-parcel raster samples, in meters.

use crate::features::LayerSamples;
use crate::geo::GeoPoint;
use crate::raster::{neighborhood_mean, point_sample, to_meters, RasterGrid};

use super::io::{FloodSemantic, RasterSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParcelSamples {
    pub hand_m: Option<f64>,
    pub d2stream_so0_m: Option<f64>,
    pub d2stream_so4_m: Option<f64>,
    pub dem_m: Option<f64>,
    /// Flood layer neighborhood mean as stored (before any conversion).
    pub flood_raw: Option<f64>,
    /// Flood surface elevation, meters.
    pub fathom_elev_m: Option<f64>,
}

impl ParcelSamples {
    pub fn in_extent(&self) -> bool {
        self.flood_raw.is_some()
    }

    pub fn exposed(&self) -> bool {
        self.flood_raw.is_some_and(|v| v > 0.0)
    }

    pub fn layers(&self) -> LayerSamples {
        LayerSamples {
            hand_m: self.hand_m,
            d2stream_so0_m: self.d2stream_so0_m,
            d2stream_so4_m: self.d2stream_so4_m,
            elevation_m: self.dem_m,
            fathom_elev_m: self.fathom_elev_m,
        }
    }
}

fn point_m(grid: &RasterGrid, p: GeoPoint) -> Option<f64> {
    point_sample(grid, p.lon, p.lat).value.map(|v| to_meters(v, grid.units))
}

/// Point samples for terrain layers; six-cell neighborhood mean for the
/// flood layer, which is converted to a surface elevation.
pub fn sample_parcel(r: &RasterSet, p: GeoPoint) -> ParcelSamples {
    let dem_m = point_m(&r.dem, p);
    let flood_raw = neighborhood_mean(&r.fathom, p.lon, p.lat).value;
    let flood_m = flood_raw.map(|v| to_meters(v, r.fathom.units));
    let fathom_elev_m = match r.fathom_semantic {
        FloodSemantic::SurfaceElevation => flood_m,
        FloodSemantic::DepthAboveGround => flood_m.zip(dem_m).map(|(d, g)| d + g),
    };
    ParcelSamples {
        hand_m: point_m(&r.hand, p),
        d2stream_so0_m: point_m(&r.d2stream_so0, p),
        d2stream_so4_m: point_m(&r.d2stream_so4, p),
        dem_m,
        flood_raw,
        fathom_elev_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Units, DEFAULT_NODATA};
    use std::collections::BTreeMap;

    fn grid(v: f64, units: Units) -> RasterGrid {
        RasterGrid::new(3, 3, 0.0, 0.0, 1.0, DEFAULT_NODATA, vec![v; 9])
            .unwrap()
            .with_units(units)
    }

    #[test]
    fn depth_layers_add_terrain() {
        let mut set = RasterSet {
            hand: grid(1.0, Units::Meters),
            d2stream_so0: grid(2.0, Units::Meters),
            d2stream_so4: grid(3.0, Units::Meters),
            dem: grid(10.0, Units::Feet),
            fathom: grid(2.0, Units::Feet),
            fathom_semantic: FloodSemantic::DepthAboveGround,
            files: BTreeMap::new(),
        };
        let p = GeoPoint::new(1.5, 1.5).unwrap();
        let s = sample_parcel(&set, p);
        assert_eq!(s.dem_m, Some(10.0 * 0.3048));
        assert_eq!(s.fathom_elev_m, Some(2.0 * 0.3048 + 10.0 * 0.3048));
        assert!(s.exposed());
        set.fathom_semantic = FloodSemantic::SurfaceElevation;
        assert_eq!(sample_parcel(&set, p).fathom_elev_m, Some(2.0 * 0.3048));
        let outside = sample_parcel(&set, GeoPoint::new(10.0, 10.0).unwrap());
        assert!(!outside.in_extent());
        assert_eq!(outside.hand_m, None);
    }
}
