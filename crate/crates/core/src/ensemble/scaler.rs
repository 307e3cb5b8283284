//! Median/IQR feature scaling.

use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, sorted_copy};

/// Per-feature centering and scaling state. A feature whose interquartile
/// range is zero is only centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    pub medians: Vec<f64>,
    pub iqrs: Vec<f64>,
}

impl RobustScaler {
    /// Fits on row-major data. Panics on an empty matrix.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "scaler needs at least one row");
        let p = rows[0].len();
        let mut medians = Vec::with_capacity(p);
        let mut iqrs = Vec::with_capacity(p);
        for f in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            let s = sorted_copy(&col);
            medians.push(quantile_sorted(&s, 0.5));
            iqrs.push((quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)).max(0.0));
        }
        RobustScaler { medians, iqrs }
    }

    pub fn n_features(&self) -> usize {
        self.medians.len()
    }

    fn divisor(&self, f: usize) -> f64 {
        if self.iqrs[f] > 0.0 {
            self.iqrs[f]
        } else {
            1.0
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(f, v)| (v - self.medians[f]) / self.divisor(f))
            .collect()
    }

    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        for (f, v) in x.iter().enumerate() {
            out[f] = (v - self.medians[f]) / self.divisor(f);
        }
    }

    pub fn inverse_transform(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(f, v)| v * self.divisor(f) + self.medians[f])
            .collect()
    }
}
