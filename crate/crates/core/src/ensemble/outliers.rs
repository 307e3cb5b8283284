//! Target cleaning and the outlier-handling configurations.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, sorted_copy};
use super::Dataset;

/// Targets above this many meters are treated as extraction failures.
pub const MAX_PLAUSIBLE_HDSL_M: f64 = 1000.0;

/// IQR filtering needs four rows for quartiles to mean anything.
pub const MIN_ROWS_FOR_IQR: usize = 4;

pub const IQR_MULTIPLIERS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierConfig {
    None,
    PercentileClip1To99,
    IqrFilter { multiplier: f64 },
}

impl OutlierConfig {
    /// The six configurations searched by the tuning workflow, in order.
    pub fn all() -> Vec<OutlierConfig> {
        let mut v = vec![OutlierConfig::None, OutlierConfig::PercentileClip1To99];
        v.extend(IQR_MULTIPLIERS.iter().map(|&m| OutlierConfig::IqrFilter { multiplier: m }));
        v
    }

    pub fn iqr(multiplier: f64) -> Self {
        OutlierConfig::IqrFilter { multiplier }
    }

    pub fn label(&self) -> String {
        match self {
            OutlierConfig::None => "none".to_string(),
            OutlierConfig::PercentileClip1To99 => "percentile_clip_1_99".to_string(),
            OutlierConfig::IqrFilter { multiplier } => format!("iqr_filter_{multiplier:.1}"),
        }
    }
}

impl fmt::Display for OutlierConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Why a target was removed by [`clean_targets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CleanReason {
    NonFinite,
    Negative,
    TooLarge,
}

impl CleanReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CleanReason::NonFinite => "hdsl_non_finite",
            CleanReason::Negative => "hdsl_negative",
            CleanReason::TooLarge => "hdsl_above_1000m",
        }
    }
}

pub fn clean_reason(hdsl: f64) -> Option<CleanReason> {
    if !hdsl.is_finite() {
        Some(CleanReason::NonFinite)
    } else if hdsl < 0.0 {
        Some(CleanReason::Negative)
    } else if hdsl > MAX_PLAUSIBLE_HDSL_M {
        Some(CleanReason::TooLarge)
    } else {
        None
    }
}

/// Keeps the rows whose target is a plausible height difference.
pub fn clean_targets(data: &Dataset) -> Dataset {
    let keep: Vec<usize> = (0..data.n_rows())
        .filter(|&i| clean_reason(data.targets[i]).is_none())
        .collect();
    data.subset(&keep)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutlierOutcome {
    Applied(Dataset),
    Inapplicable(String),
}

pub fn apply_outliers(data: &Dataset, cfg: OutlierConfig) -> OutlierOutcome {
    match cfg {
        OutlierConfig::None => OutlierOutcome::Applied(data.clone()),
        OutlierConfig::PercentileClip1To99 => {
            if data.n_rows() == 0 {
                return OutlierOutcome::Inapplicable("no rows to clip".to_string());
            }
            let s = sorted_copy(&data.targets);
            let lo = quantile_sorted(&s, 0.01);
            let hi = quantile_sorted(&s, 0.99);
            let mut out = data.clone();
            for t in &mut out.targets {
                *t = t.clamp(lo, hi);
            }
            OutlierOutcome::Applied(out)
        }
        OutlierConfig::IqrFilter { multiplier } => {
            if data.n_rows() < MIN_ROWS_FOR_IQR {
                return OutlierOutcome::Inapplicable(format!(
                    "{} rows, IQR filtering needs at least {MIN_ROWS_FOR_IQR}",
                    data.n_rows()
                ));
            }
            let (lo, hi) = iqr_bounds(&data.targets, multiplier);
            let keep: Vec<usize> = (0..data.n_rows())
                .filter(|&i| (lo..=hi).contains(&data.targets[i]))
                .collect();
            OutlierOutcome::Applied(data.subset(&keep))
        }
    }
}

/// `[Q1 - k IQR, Q3 + k IQR]` of the values.
pub fn iqr_bounds(values: &[f64], multiplier: f64) -> (f64, f64) {
    let s = sorted_copy(values);
    let q1 = quantile_sorted(&s, 0.25);
    let q3 = quantile_sorted(&s, 0.75);
    let iqr = q3 - q1;
    (q1 - multiplier * iqr, q3 + multiplier * iqr)
}
