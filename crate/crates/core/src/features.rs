//! Predictor vector for HDSL imputation: location, street, door visibility,
//! terrain, hydrology and flood-exposure columns plus their interaction terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

/// Every predictor column. Table rows list latitude and longitude together,
/// so the "16 features" are 17 matrix columns.
pub const FEATURE_COUNT: usize = 17;

/// Column order of the feature matrix. Training and prediction rows share it.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "latitude",
    "longitude",
    "street_name_encoded",
    "door_visible",
    "HAND_m",
    "D2stream_so0_m",
    "D2stream_so4_m",
    "elevation",
    "mean_fathom_meter",
    "water_depth",
    "HAND_stream_ratio",
    "HAND_stream_product",
    "elevation_squared",
    "elevation_HAND_diff",
    "water_depth_combined",
    "water_depth_max",
    "geo_cluster",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HdslSource {
    Extracted,
    Imputed,
    Missing,
}

impl HdslSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            HdslSource::Extracted => "extracted",
            HdslSource::Imputed => "imputed",
            HdslSource::Missing => "missing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "extracted" => Some(HdslSource::Extracted),
            "imputed" => Some(HdslSource::Imputed),
            "missing" => Some(HdslSource::Missing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParcelRecord {
    pub parcel_id: String,
    pub aoi_id: String,
    pub centroid: GeoPoint,
    pub street_name: String,
    pub assessed_value_usd: f64,
    pub hdsl_m: Option<f64>,
    pub hdsl_source: HdslSource,
}

/// Case-folded, whitespace-trimmed street name.
pub fn normalize_street(name: &str) -> String {
    name.trim().to_lowercase()
}

/// Label encoding of street names, fitted on training rows. Names are sorted
/// lexicographically after normalization; unseen or empty names map to a
/// reserved code equal to the number of known names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreetEncoder {
    codes: BTreeMap<String, u32>,
}

impl StreetEncoder {
    pub fn fit<'a, I>(names: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let unique: std::collections::BTreeSet<String> = names
            .into_iter()
            .map(normalize_street)
            .filter(|n| !n.is_empty())
            .collect();
        StreetEncoder {
            codes: unique.into_iter().zip(0u32..).collect(),
        }
    }

    pub fn reserved_code(&self) -> u32 {
        self.codes.len() as u32
    }

    pub fn encode(&self, name: &str) -> u32 {
        self.codes
            .get(&normalize_street(name))
            .copied()
            .unwrap_or_else(|| self.reserved_code())
    }

    pub fn mapping(&self) -> &BTreeMap<String, u32> {
        &self.codes
    }
}

/// Latitude/longitude bounding box of an AOI's parcel centroids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub fn of_points<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a GeoPoint>,
    {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BoundingBox {
            lat_min: first.lat,
            lat_max: first.lat,
            lon_min: first.lon,
            lon_max: first.lon,
        };
        for p in it {
            b.lat_min = b.lat_min.min(p.lat);
            b.lat_max = b.lat_max.max(p.lat);
            b.lon_min = b.lon_min.min(p.lon);
            b.lon_max = b.lon_max.max(p.lon);
        }
        Some(b)
    }
}

fn bin5(v: f64, lo: f64, hi: f64) -> u32 {
    let extent = hi - lo;
    if !(extent > 0.0) {
        return 0;
    }
    let b = ((v - lo) / extent * 5.0).floor();
    b.clamp(0.0, 4.0) as u32
}

/// Cell index of a 5x5 lat/lon grid over the bounding box: `row * 5 + col`,
/// with row from latitude and col from longitude.
pub fn geo_cluster(p: GeoPoint, bbox: &BoundingBox) -> u32 {
    bin5(p.lat, bbox.lat_min, bbox.lat_max) * 5 + bin5(p.lon, bbox.lon_min, bbox.lon_max)
}

/// Raster samples for one parcel, all already converted to meters.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LayerSamples {
    pub hand_m: Option<f64>,
    pub d2stream_so0_m: Option<f64>,
    pub d2stream_so4_m: Option<f64>,
    pub elevation_m: Option<f64>,
    /// Flood surface elevation (neighborhood mean), meters.
    pub fathom_elev_m: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub latitude: f64,
    pub longitude: f64,
    pub street_name_encoded: u32,
    pub door_visible: bool,
    pub hand_m: f64,
    pub d2stream_so0_m: f64,
    pub d2stream_so4_m: f64,
    pub elevation: f64,
    pub mean_fathom_meter: f64,
    pub water_depth: f64,
    pub hand_stream_ratio: f64,
    pub hand_stream_product: f64,
    pub elevation_squared: f64,
    pub elevation_hand_diff: f64,
    pub water_depth_combined: f64,
    pub water_depth_max: f64,
    pub geo_cluster: u32,
}

/// Why a parcel could not get a complete feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incomplete {
    pub missing: Vec<&'static str>,
}

impl Incomplete {
    pub fn reason(&self) -> String {
        format!("missing {}", self.missing.join("+"))
    }
}

impl FeatureVector {
    /// Computes every derived column from the base measurements.
    #[allow(clippy::too_many_arguments)]
    pub fn from_base(
        centroid: GeoPoint,
        street_name_encoded: u32,
        door_visible: bool,
        hand_m: f64,
        d2stream_so0_m: f64,
        d2stream_so4_m: f64,
        elevation: f64,
        mean_fathom_meter: f64,
        geo_cluster: u32,
    ) -> Self {
        let water_depth = mean_fathom_meter - elevation;
        FeatureVector {
            latitude: centroid.lat,
            longitude: centroid.lon,
            street_name_encoded,
            door_visible,
            hand_m,
            d2stream_so0_m,
            d2stream_so4_m,
            elevation,
            mean_fathom_meter,
            water_depth,
            hand_stream_ratio: hand_m / (d2stream_so0_m + 1.0),
            hand_stream_product: hand_m * d2stream_so0_m,
            elevation_squared: elevation * elevation,
            elevation_hand_diff: elevation - hand_m,
            water_depth_combined: mean_fathom_meter + water_depth,
            water_depth_max: mean_fathom_meter.max(water_depth),
            geo_cluster,
        }
    }

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.latitude,
            self.longitude,
            f64::from(self.street_name_encoded),
            if self.door_visible { 1.0 } else { 0.0 },
            self.hand_m,
            self.d2stream_so0_m,
            self.d2stream_so4_m,
            self.elevation,
            self.mean_fathom_meter,
            self.water_depth,
            self.hand_stream_ratio,
            self.hand_stream_product,
            self.elevation_squared,
            self.elevation_hand_diff,
            self.water_depth_combined,
            self.water_depth_max,
            f64::from(self.geo_cluster),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Assembles the feature vector for one parcel, or reports which samples were
/// missing. Street codes come from an encoder fitted on training rows only.
pub fn build_features(
    parcel: &ParcelRecord,
    samples: &LayerSamples,
    door_visible: bool,
    encoder: &StreetEncoder,
    bbox: &BoundingBox,
) -> Result<FeatureVector, Incomplete> {
    let mut missing = Vec::new();
    let mut need = |name: &'static str, v: Option<f64>| -> f64 {
        match v {
            Some(x) if x.is_finite() => x,
            _ => {
                missing.push(name);
                f64::NAN
            }
        }
    };
    let hand = need("HAND_m", samples.hand_m);
    let so0 = need("D2stream_so0_m", samples.d2stream_so0_m);
    let so4 = need("D2stream_so4_m", samples.d2stream_so4_m);
    let elev = need("elevation", samples.elevation_m);
    let fathom = need("mean_fathom_meter", samples.fathom_elev_m);
    if !missing.is_empty() {
        return Err(Incomplete { missing });
    }
    let fv = FeatureVector::from_base(
        parcel.centroid,
        encoder.encode(&parcel.street_name),
        door_visible,
        hand,
        so0,
        so4,
        elev,
        fathom,
        geo_cluster(parcel.centroid, bbox),
    );
    if !fv.is_finite() {
        return Err(Incomplete {
            missing: vec!["finite derived features"],
        });
    }
    Ok(fv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn street_encoding() {
        let enc = StreetEncoder::fit(["Oak St", "Ash St"]);
        assert_eq!(enc.mapping().get("ash st"), Some(&0));
        assert_eq!(enc.mapping().get("oak st"), Some(&1));
        assert_eq!(enc.encode("  OAK st "), 1);
        assert_eq!(enc.encode("Elm St"), 2);
        assert_eq!(enc.encode(""), 2);

        let empty = StreetEncoder::fit(std::iter::empty());
        assert!(empty.mapping().is_empty());
        assert_eq!(empty.reserved_code(), 0);

        let dedup = StreetEncoder::fit(["A", "A", "B"]);
        assert_eq!(dedup.mapping().len(), 2);
        assert_eq!(dedup.encode("a"), 0);
        assert_eq!(dedup.encode("b"), 1);
    }

    #[test]
    fn cluster_corners_and_center() {
        let b = BoundingBox {
            lat_min: 10.0,
            lat_max: 20.0,
            lon_min: -5.0,
            lon_max: 5.0,
        };
        assert_eq!(geo_cluster(pt(10.0, -5.0), &b), 0);
        assert_eq!(geo_cluster(pt(20.0, 5.0), &b), 24);
        assert_eq!(geo_cluster(pt(15.0, 0.0), &b), 12);
        assert_eq!(geo_cluster(pt(10.0, 5.0), &b), 4);
        assert_eq!(geo_cluster(pt(20.0, -5.0), &b), 20);
        let flat = BoundingBox {
            lat_min: 10.0,
            lat_max: 10.0,
            lon_min: -5.0,
            lon_max: 5.0,
        };
        assert_eq!(geo_cluster(pt(10.0, 5.0), &flat), 4);
    }

    fn parcel() -> ParcelRecord {
        ParcelRecord {
            parcel_id: "p".into(),
            aoi_id: "a".into(),
            centroid: pt(29.7, -95.4),
            street_name: "Main St".into(),
            assessed_value_usd: 1.0,
            hdsl_m: None,
            hdsl_source: HdslSource::Missing,
        }
    }

    fn bbox() -> BoundingBox {
        BoundingBox {
            lat_min: 29.6,
            lat_max: 29.8,
            lon_min: -95.5,
            lon_max: -95.3,
        }
    }

    #[test]
    fn derived_columns() {
        let samples = LayerSamples {
            hand_m: Some(2.0),
            d2stream_so0_m: Some(1.0),
            d2stream_so4_m: Some(40.0),
            elevation_m: Some(3.0),
            fathom_elev_m: Some(4.5),
        };
        let enc = StreetEncoder::fit(["Main St"]);
        let fv = build_features(&parcel(), &samples, true, &enc, &bbox()).unwrap();
        assert_eq!(fv.hand_stream_ratio, 1.0);
        assert_eq!(fv.hand_stream_product, 2.0);
        assert_eq!(fv.elevation_squared, 9.0);
        assert_eq!(fv.elevation_hand_diff, 1.0);
        assert_eq!(fv.water_depth, 1.5);
        assert_eq!(fv.water_depth_combined, 6.0);
        assert_eq!(fv.water_depth_max, 4.5);
        assert_eq!(fv.geo_cluster, 12);
        assert_eq!(fv.street_name_encoded, 0);
        let arr = fv.to_array();
        assert_eq!(arr.len(), FEATURE_COUNT);
        assert_eq!(arr[3], 1.0);
    }

    #[test]
    fn missing_sample_is_incomplete() {
        let samples = LayerSamples {
            hand_m: Some(2.0),
            d2stream_so0_m: None,
            d2stream_so4_m: Some(40.0),
            elevation_m: Some(3.0),
            fathom_elev_m: None,
        };
        let err = build_features(&parcel(), &samples, false, &StreetEncoder::default(), &bbox()).unwrap_err();
        assert_eq!(err.missing, vec!["D2stream_so0_m", "mean_fathom_meter"]);
    }

    proptest! {
        #[test]
        fn street_encoding_is_permutation_invariant(
            names in proptest::collection::vec("[a-d ]{0,4}", 0..12),
            seed in any::<u64>(),
        ) {
            let mut shuffled = names.clone();
            let mut s = seed | 1;
            for i in (1..shuffled.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                shuffled.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let a = StreetEncoder::fit(names.iter().map(String::as_str));
            let b = StreetEncoder::fit(shuffled.iter().map(String::as_str));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cluster_is_translation_consistent(
            lat in 0.0f64..1.0, lon in 0.0f64..1.0,
            dlat in -40.0f64..40.0, dlon in -80.0f64..80.0,
        ) {
            let b = BoundingBox { lat_min: 0.0, lat_max: 1.0, lon_min: 0.0, lon_max: 1.0 };
            let shifted = BoundingBox { lat_min: dlat, lat_max: dlat + 1.0, lon_min: dlon, lon_max: dlon + 1.0 };
            let a = geo_cluster(pt(lat, lon), &b);
            let c = geo_cluster(pt(lat + dlat, lon + dlon), &shifted);
            // shifting can move a point by one ulp across a bin edge; only
            // accept disagreement when the point sits on an edge
            let on_edge = [lat, lon].iter().any(|v| ((v * 5.0) - (v * 5.0).round()).abs() < 1e-9);
            prop_assert!(a == c || on_edge);
            prop_assert!(a <= 24);
        }

        #[test]
        fn derived_features_recompute_exactly(
            hand in 0.0f64..30.0, so0 in 0.0f64..500.0, so4 in 0.0f64..5000.0,
            elev in -2.0f64..80.0, fathom in -2.0f64..80.0,
        ) {
            let fv = FeatureVector::from_base(pt(29.7, -95.4), 3, false, hand, so0, so4, elev, fathom, 7);
            prop_assert_eq!(fv.hand_stream_ratio.to_bits(), (fv.hand_m / (fv.d2stream_so0_m + 1.0)).to_bits());
            prop_assert_eq!(fv.hand_stream_product.to_bits(), (fv.hand_m * fv.d2stream_so0_m).to_bits());
            prop_assert_eq!(fv.elevation_squared.to_bits(), (fv.elevation * fv.elevation).to_bits());
            prop_assert_eq!(fv.elevation_hand_diff.to_bits(), (fv.elevation - fv.hand_m).to_bits());
            prop_assert_eq!(fv.water_depth_combined.to_bits(), (fv.mean_fathom_meter + fv.water_depth).to_bits());
            prop_assert!(fv.water_depth_max >= fv.mean_fathom_meter);
            prop_assert!(fv.water_depth_max >= fv.water_depth);
        }
    }
}
