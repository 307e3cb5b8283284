//! Regression metrics.

/// Root-mean-square error, percent of mean observation, and coefficient of
/// determination (absent when observations are constant).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub rmse_pct: f64,
    pub r2: Option<f64>,
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> f64 {
    assert_eq!(pred.len(), obs.len());
    assert!(!obs.is_empty(), "metrics need at least one observation");
    let sse: f64 = pred.iter().zip(obs).map(|(p, o)| (o - p).powi(2)).sum();
    (sse / obs.len() as f64).sqrt()
}

pub fn r2(pred: &[f64], obs: &[f64]) -> Option<f64> {
    assert_eq!(pred.len(), obs.len());
    let mean = super::stats::mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - mean).powi(2)).sum();
    if !(ss_tot > 0.0) {
        return None;
    }
    let ss_res: f64 = pred.iter().zip(obs).map(|(p, o)| (o - p).powi(2)).sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn metrics(pred: &[f64], obs: &[f64]) -> Metrics {
    let e = rmse(pred, obs);
    Metrics {
        rmse: e,
        rmse_pct: 100.0 * e / super::stats::mean(obs),
        r2: r2(pred, obs),
    }
}

/// Mean of the defined fold scores; absent when none is defined.
pub fn mean_defined(scores: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = scores.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let m = metrics(&[1.0, 1.0], &[0.0, 2.0]);
        assert_eq!(m.rmse, 1.0);
        assert_eq!(m.r2, Some(0.0));
        assert_eq!(m.rmse_pct, 100.0);
        let perfect = metrics(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]);
        assert_eq!((perfect.rmse, perfect.r2), (0.0, Some(1.0)));
        assert_eq!(r2(&[1.0, 2.0], &[3.0, 3.0]), None);
        let obs = [1.0, 2.0, 6.0];
        assert_eq!(r2(&[3.0, 3.0, 3.0], &obs), Some(0.0));
    }

    #[test]
    fn fold_average_skips_undefined() {
        assert_eq!(mean_defined(&[Some(0.5), None, Some(1.0)]), Some(0.75));
        assert_eq!(mean_defined(&[None]), None);
    }
}
