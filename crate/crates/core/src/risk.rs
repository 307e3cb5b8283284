//! Interior flood depth, depth-damage losses, outcome categories and
//! aggregate summaries.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ensemble::stats::{median, quantile_sorted, sorted_copy};
use crate::features::HdslSource;

pub const FEET_PER_METER: f64 = 1.0 / 0.3048;
pub const METERS_PER_FOOT: f64 = 0.3048;

/// Residential depth-damage curve without basement: (depth in feet,
/// fraction of value lost).
pub const DDF_POINTS: [(f64, f64); 13] = [
    (-2.0, 0.0),
    (-1.0, 0.025),
    (0.0, 0.134),
    (1.0, 0.233),
    (2.0, 0.321),
    (3.0, 0.401),
    (4.0, 0.471),
    (5.0, 0.532),
    (6.0, 0.586),
    (7.0, 0.637),
    (8.0, 0.672),
    (12.0, 0.772),
    (16.0, 0.807),
];

pub const REGIONAL_ID: &str = "REGIONAL";

/// Damage fraction for an interior depth in feet. Zero at or below the first
/// control point, the last fraction at or above the last one, linear in
/// between.
pub fn ddf_feet(depth_ft: f64) -> f64 {
    let (x_first, y_first) = DDF_POINTS[0];
    let (x_last, y_last) = DDF_POINTS[DDF_POINTS.len() - 1];
    if depth_ft <= x_first {
        return y_first;
    }
    if depth_ft >= x_last {
        return y_last;
    }
    for w in DDF_POINTS.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if depth_ft == x0 {
            return y0;
        }
        if depth_ft < x1 {
            return y0 + (y1 - y0) * (depth_ft - x0) / (x1 - x0);
        }
    }
    y_last
}

/// Damage fraction for an interior depth in meters.
pub fn ddf(fdis_m: f64) -> f64 {
    ddf_feet(fdis_m / METERS_PER_FOOT)
}

/// Flood depth inside the structure: flood surface minus lowest floor.
pub fn fdis(fathom_elev_m: f64, street_elev_m: f64, hdsl_m: f64) -> f64 {
    fathom_elev_m - (street_elev_m + hdsl_m)
}

/// Dollar loss; only interior inundation (positive depth) causes loss.
pub fn loss(value_usd: f64, fdis_m: f64) -> f64 {
    if fdis_m > 0.0 {
        value_usd * ddf(fdis_m)
    } else {
        0.0
    }
}

/// Keep-mask dropping values strictly outside the 1st–99th percentile range.
pub fn value_filter(values: &[f64]) -> Vec<bool> {
    if values.is_empty() {
        return Vec::new();
    }
    let s = sorted_copy(values);
    let lo = quantile_sorted(&s, 0.01);
    let hi = quantile_sorted(&s, 0.99);
    values.iter().map(|v| *v >= lo && *v <= hi).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Flooded,
    Clearance,
    InExtentNoLfe,
    OutsideExtent,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Flooded,
        Category::Clearance,
        Category::InExtentNoLfe,
        Category::OutsideExtent,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Flooded => "flooded",
            Category::Clearance => "clearance",
            Category::InExtentNoLfe => "in_extent_no_lfe",
            Category::OutsideExtent => "outside_extent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Category and depth for one parcel. A parcel without a street elevation
/// has no lowest floor either.
pub fn classify(fathom_elev_m: Option<f64>, street_elev_m: Option<f64>, hdsl_m: Option<f64>) -> (Category, Option<f64>) {
    let Some(f) = fathom_elev_m else {
        return (Category::OutsideExtent, None);
    };
    match (street_elev_m, hdsl_m) {
        (Some(s), Some(h)) => {
            let d = fdis(f, s, h);
            if d > 0.0 {
                (Category::Flooded, Some(d))
            } else {
                (Category::Clearance, Some(d))
            }
        }
        _ => (Category::InExtentNoLfe, None),
    }
}

/// Everything needed to assess one parcel.
#[derive(Debug, Clone, PartialEq)]
pub struct Exposure {
    pub parcel_id: String,
    pub aoi_id: String,
    pub lat: f64,
    pub lon: f64,
    pub value_usd: f64,
    pub hdsl_source: HdslSource,
    pub hdsl_m: Option<f64>,
    pub street_elev_m: Option<f64>,
    pub fathom_elev_m: Option<f64>,
    /// The flood layer has data at the parcel. Can be true with no flood
    /// elevation when a depth layer lacks the ground elevation to convert it.
    pub in_extent: bool,
    /// The flood layer's own sample is positive (value at risk).
    pub exposed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRecord {
    pub parcel_id: String,
    pub aoi_id: String,
    pub lat: f64,
    pub lon: f64,
    pub value_usd: f64,
    pub hdsl_source: HdslSource,
    pub hdsl_m: Option<f64>,
    pub street_elev_m: Option<f64>,
    pub fathom_elev_m: Option<f64>,
    pub fdis_m: Option<f64>,
    pub damage_fraction: f64,
    pub loss_usd: f64,
    pub category: Category,
    pub exposed: bool,
}

pub fn assess(e: &Exposure) -> AssessmentRecord {
    let hdsl = match e.hdsl_source {
        HdslSource::Missing => None,
        _ => e.hdsl_m,
    };
    let (category, fdis_m) = if e.in_extent && e.fathom_elev_m.is_none() {
        (Category::InExtentNoLfe, None)
    } else if !e.in_extent {
        (Category::OutsideExtent, None)
    } else {
        classify(e.fathom_elev_m, e.street_elev_m, hdsl)
    };
    let (damage_fraction, loss_usd) = match (category, fdis_m) {
        (Category::Flooded, Some(d)) => (ddf(d), loss(e.value_usd, d)),
        _ => (0.0, 0.0),
    };
    AssessmentRecord {
        parcel_id: e.parcel_id.clone(),
        aoi_id: e.aoi_id.clone(),
        lat: e.lat,
        lon: e.lon,
        value_usd: e.value_usd,
        hdsl_source: e.hdsl_source,
        hdsl_m: hdsl,
        street_elev_m: e.street_elev_m,
        fathom_elev_m: e.fathom_elev_m,
        fdis_m,
        damage_fraction,
        loss_usd,
        category,
        exposed: e.exposed,
    }
}

/// The record as it would be without imputed values: imputed parcels inside
/// the flood extent lose their lowest floor.
pub fn extracted_only(r: &AssessmentRecord) -> AssessmentRecord {
    if r.hdsl_source != HdslSource::Imputed {
        return r.clone();
    }
    let mut out = r.clone();
    out.hdsl_m = None;
    out.fdis_m = None;
    out.damage_fraction = 0.0;
    out.loss_usd = 0.0;
    if out.category != Category::OutsideExtent {
        out.category = Category::InExtentNoLfe;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiSummary {
    pub aoi_id: String,
    pub n_parcels: usize,
    pub n_flooded: usize,
    pub n_clearance: usize,
    pub n_in_extent_no_lfe: usize,
    pub n_outside_extent: usize,
    pub n_damaged: usize,
    pub total_loss_usd: f64,
    pub median_loss_damaged_usd: f64,
    pub max_loss_usd: f64,
    pub median_fdis_flooded_m: f64,
    pub median_clearance_m: f64,
    pub value_at_risk_usd: f64,
}

impl AoiSummary {
    pub fn count(&self, c: Category) -> usize {
        match c {
            Category::Flooded => self.n_flooded,
            Category::Clearance => self.n_clearance,
            Category::InExtentNoLfe => self.n_in_extent_no_lfe,
            Category::OutsideExtent => self.n_outside_extent,
        }
    }

    pub fn partition_holds(&self) -> bool {
        Category::ALL.iter().map(|c| self.count(*c)).sum::<usize>() == self.n_parcels
    }
}

fn median_or_zero(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        median(v)
    }
}

/// Summary of a set of records under one id. Empty medians are reported as 0.
pub fn summarize<'a>(id: &str, records: impl IntoIterator<Item = &'a AssessmentRecord>) -> AoiSummary {
    let mut s = AoiSummary {
        aoi_id: id.to_string(),
        n_parcels: 0,
        n_flooded: 0,
        n_clearance: 0,
        n_in_extent_no_lfe: 0,
        n_outside_extent: 0,
        n_damaged: 0,
        total_loss_usd: 0.0,
        median_loss_damaged_usd: 0.0,
        max_loss_usd: 0.0,
        median_fdis_flooded_m: 0.0,
        median_clearance_m: 0.0,
        value_at_risk_usd: 0.0,
    };
    let (mut losses, mut depths, mut clearances) = (Vec::new(), Vec::new(), Vec::new());
    for r in records {
        s.n_parcels += 1;
        match r.category {
            Category::Flooded => {
                s.n_flooded += 1;
                if let Some(d) = r.fdis_m {
                    depths.push(d);
                }
            }
            Category::Clearance => {
                s.n_clearance += 1;
                if let Some(d) = r.fdis_m {
                    clearances.push(-d);
                }
            }
            Category::InExtentNoLfe => s.n_in_extent_no_lfe += 1,
            Category::OutsideExtent => s.n_outside_extent += 1,
        }
        if r.loss_usd > 0.0 {
            losses.push(r.loss_usd);
            s.total_loss_usd += r.loss_usd;
            s.max_loss_usd = s.max_loss_usd.max(r.loss_usd);
        }
        if r.exposed {
            s.value_at_risk_usd += r.value_usd;
        }
    }
    s.n_damaged = losses.len();
    s.median_loss_damaged_usd = median_or_zero(&losses);
    s.median_fdis_flooded_m = median_or_zero(&depths);
    s.median_clearance_m = median_or_zero(&clearances);
    s
}

/// One summary per AOI (sorted by id) followed by the regional summary.
pub fn aggregate(records: &[AssessmentRecord]) -> Vec<AoiSummary> {
    let mut by_aoi: BTreeMap<&str, Vec<&AssessmentRecord>> = BTreeMap::new();
    for r in records {
        by_aoi.entry(r.aoi_id.as_str()).or_default().push(r);
    }
    let mut out: Vec<AoiSummary> = by_aoi.iter().map(|(id, rs)| summarize(id, rs.iter().copied())).collect();
    out.push(summarize(REGIONAL_ID, records));
    out
}

/// Extracted-only versus extracted-plus-imputed summaries for one id.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityPair {
    pub aoi_id: String,
    pub extracted_only: AoiSummary,
    pub combined: AoiSummary,
}

impl SensitivityPair {
    pub fn loss_delta_usd(&self) -> f64 {
        self.combined.total_loss_usd - self.extracted_only.total_loss_usd
    }

    pub fn count_delta(&self, c: Category) -> i64 {
        self.combined.count(c) as i64 - self.extracted_only.count(c) as i64
    }
}

pub fn sensitivity(records: &[AssessmentRecord]) -> Vec<SensitivityPair> {
    let reduced: Vec<AssessmentRecord> = records.iter().map(extracted_only).collect();
    aggregate(&reduced)
        .into_iter()
        .zip(aggregate(records))
        .map(|(e, c)| SensitivityPair {
            aoi_id: c.aoi_id.clone(),
            extracted_only: e,
            combined: c,
        })
        .collect()
}
