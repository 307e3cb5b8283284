//! Random Forest and Gradient Boosting ensembles over [`RegressionTree`]s.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::outliers::OutlierConfig;
use super::rng::{below, SeedPath};
use super::scaler::RobustScaler;
use super::tree::{grow_tree, Presorted, RegressionTree, TreeFit, TreeParams};
use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    RandomForest,
    GradientBoost,
}

impl Algo {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algo::RandomForest => "random_forest",
            Algo::GradientBoost => "gradient_boost",
        }
    }

    pub fn short(&self) -> &'static str {
        match self {
            Algo::RandomForest => "RF",
            Algo::GradientBoost => "GB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "random_forest" => Some(Algo::RandomForest),
            "gradient_boost" => Some(Algo::GradientBoost),
            _ => None,
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Count(usize),
    All,
}

impl MaxFeatures {
    fn resolve(self) -> Option<usize> {
        match self {
            MaxFeatures::Count(k) => Some(k),
            MaxFeatures::All => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub algo: Algo,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Random Forest only; boosting always examines every feature.
    pub max_features: MaxFeatures,
    /// Gradient Boosting only.
    pub learning_rate: f64,
}

impl Hyperparams {
    pub fn random_forest(n_trees: usize, max_depth: Option<usize>, min_samples_leaf: usize, max_features: MaxFeatures) -> Self {
        Hyperparams {
            algo: Algo::RandomForest,
            n_trees,
            max_depth,
            min_samples_leaf,
            max_features,
            learning_rate: 1.0,
        }
    }

    pub fn gradient_boost(n_trees: usize, learning_rate: f64, max_depth: Option<usize>, min_samples_leaf: usize) -> Self {
        Hyperparams {
            algo: Algo::GradientBoost,
            n_trees,
            max_depth,
            min_samples_leaf,
            max_features: MaxFeatures::All,
            learning_rate,
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features: match self.algo {
                Algo::RandomForest => self.max_features.resolve(),
                Algo::GradientBoost => None,
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_trees == 0 {
            return Err("ensemble needs at least one tree".to_string());
        }
        if self.min_samples_leaf == 0 {
            return Err("min_samples_leaf must be at least 1".to_string());
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return Err("max_features must be at least 1".to_string());
        }
        if self.algo == Algo::GradientBoost && !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }

    /// Compact description used in reports.
    pub fn describe(&self) -> String {
        let depth = self.max_depth.map_or("none".to_string(), |d| d.to_string());
        match self.algo {
            Algo::RandomForest => {
                let mf = match self.max_features {
                    MaxFeatures::Count(k) => k.to_string(),
                    MaxFeatures::All => "all".to_string(),
                };
                format!(
                    "trees={} max_depth={} min_samples_leaf={} max_features={}",
                    self.n_trees, depth, self.min_samples_leaf, mf
                )
            }
            Algo::GradientBoost => format!(
                "trees={} learning_rate={} max_depth={} min_samples_leaf={}",
                self.n_trees, self.learning_rate, depth, self.min_samples_leaf
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub hyperparams: Hyperparams,
    pub outlier_config: OutlierConfig,
    pub scaler: RobustScaler,
    pub trees: Vec<RegressionTree>,
    /// Starting value for boosting; zero for forests.
    pub base_prediction: f64,
    pub importances: Vec<f64>,
    /// No split anywhere in the ensemble; importances are all zero.
    pub importance_degenerate: bool,
    pub seed: u64,
}

impl EnsembleModel {
    /// Fits the scaler and the ensemble on `data`. Tree `t` draws from
    /// `seed.child(t)`.
    pub fn fit(data: &Dataset, hyper: &Hyperparams, outlier_config: OutlierConfig, seed: SeedPath) -> Result<Self, String> {
        hyper.validate()?;
        if data.n_rows() == 0 {
            return Err("no training rows".to_string());
        }
        let scaler = RobustScaler::fit(&data.features);
        let scaled: Vec<Vec<f64>> = data.features.iter().map(|r| scaler.transform(r)).collect();
        let pre = Presorted::new(&scaled);
        let (fits, base) = match hyper.algo {
            Algo::RandomForest => (fit_forest(&pre, &data.targets, hyper, seed), 0.0),
            Algo::GradientBoost => {
                let base = super::stats::mean(&data.targets);
                (fit_boost(&pre, &scaled, &data.targets, base, hyper, seed).0, base)
            }
        };
        Ok(Self::assemble(*hyper, outlier_config, scaler, fits, base, seed))
    }

    fn assemble(
        hyperparams: Hyperparams,
        outlier_config: OutlierConfig,
        scaler: RobustScaler,
        fits: Vec<TreeFit>,
        base_prediction: f64,
        seed: SeedPath,
    ) -> Self {
        let p = scaler.n_features();
        let mut gains = vec![0.0; p];
        for fit in &fits {
            for (g, v) in gains.iter_mut().zip(&fit.gains) {
                *g += v;
            }
        }
        let (importances, importance_degenerate) = normalize_importances(&gains);
        EnsembleModel {
            hyperparams,
            outlier_config,
            scaler,
            trees: fits.into_iter().map(|f| f.tree).collect(),
            base_prediction,
            importances,
            importance_degenerate,
            seed: seed.value(),
        }
    }

    pub fn algo(&self) -> Algo {
        self.hyperparams.algo
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_features()
    }

    /// Per-tree outputs for one raw (unscaled) feature vector.
    pub fn tree_predictions(&self, x: &[f64]) -> Vec<f64> {
        let z = self.scaler.transform(x);
        self.trees.iter().map(|t| t.predict(&z)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        match self.hyperparams.algo {
            Algo::RandomForest => {
                let (mut s, mut lo, mut hi) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
                for t in &self.trees {
                    let p = t.predict(&z);
                    s += p;
                    lo = lo.min(p);
                    hi = hi.max(p);
                }
                // the mean can round one ulp past the extreme tree outputs
                (s / self.trees.len() as f64).clamp(lo, hi)
            }
            Algo::GradientBoost => {
                let eta = self.hyperparams.learning_rate;
                self.trees.iter().fold(self.base_prediction, |acc, t| acc + eta * t.predict(&z))
            }
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }
}

fn normalize_importances(gains: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = gains.iter().sum();
    if total > 0.0 && total.is_finite() {
        (gains.iter().map(|g| g / total).collect(), false)
    } else {
        (vec![0.0; gains.len()], true)
    }
}

/// Bootstrap multiplicities: `n` draws with replacement.
pub fn bootstrap_weights(n: usize, rng: &mut rand_pcg::Pcg64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[below(rng, n)] += 1.0;
    }
    w
}

fn fit_forest(pre: &Presorted, y: &[f64], hyper: &Hyperparams, seed: SeedPath) -> Vec<TreeFit> {
    let params = hyper.tree_params();
    (0..hyper.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.child(t as u64).rng();
            let w = bootstrap_weights(pre.n_rows(), &mut rng);
            grow_tree(pre, y, &w, params, &mut rng)
        })
        .collect()
}

/// Boosting rounds; also returns the training RMSE after each round.
fn fit_boost(
    pre: &Presorted,
    scaled: &[Vec<f64>],
    y: &[f64],
    base: f64,
    hyper: &Hyperparams,
    seed: SeedPath,
) -> (Vec<TreeFit>, Vec<f64>) {
    let params = hyper.tree_params();
    let eta = hyper.learning_rate;
    let n = y.len();
    let ones = vec![1.0; n];
    let mut current = vec![base; n];
    let mut residual = vec![0.0; n];
    let mut fits = Vec::with_capacity(hyper.n_trees);
    let mut history = Vec::with_capacity(hyper.n_trees);
    for m in 0..hyper.n_trees {
        for i in 0..n {
            residual[i] = y[i] - current[i];
        }
        let mut rng = seed.child(m as u64).rng();
        let fit = grow_tree(pre, &residual, &ones, params, &mut rng);
        for i in 0..n {
            current[i] += eta * fit.tree.predict(&scaled[i]);
        }
        let sse: f64 = (0..n).map(|i| (y[i] - current[i]).powi(2)).sum();
        history.push((sse / n as f64).sqrt());
        fits.push(fit);
    }
    (fits, history)
}

/// Training RMSE after each boosting round, for the given data.
pub fn boosting_history(data: &Dataset, hyper: &Hyperparams, seed: SeedPath) -> Vec<f64> {
    let scaler = RobustScaler::fit(&data.features);
    let scaled: Vec<Vec<f64>> = data.features.iter().map(|r| scaler.transform(r)).collect();
    let pre = Presorted::new(&scaled);
    let base = super::stats::mean(&data.targets);
    fit_boost(&pre, &scaled, &data.targets, base, hyper, seed).1
}
