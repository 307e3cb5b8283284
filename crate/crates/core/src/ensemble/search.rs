//! Randomized hyperparameter search.

use rayon::prelude::*;

use super::cv::{kfold_cv, CvResult};
use super::model::{Algo, Hyperparams, MaxFeatures};
use super::outliers::OutlierConfig;
use super::rng::{sample_without_replacement, SeedPath};
use super::Dataset;

/// Candidate values for every searched hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub rf_trees: Vec<usize>,
    pub rf_max_depth: Vec<Option<usize>>,
    pub rf_min_samples_leaf: Vec<usize>,
    pub rf_max_features: Vec<MaxFeatures>,
    pub gb_trees: Vec<usize>,
    pub gb_learning_rate: Vec<f64>,
    pub gb_max_depth: Vec<Option<usize>>,
    pub gb_min_samples_leaf: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            rf_trees: vec![50, 100, 200, 300, 500],
            rf_max_depth: vec![Some(4), Some(6), Some(8), Some(12), Some(16), None],
            rf_min_samples_leaf: vec![1, 2, 4, 8],
            rf_max_features: vec![MaxFeatures::Count(4), MaxFeatures::Count(5), MaxFeatures::All],
            gb_trees: vec![50, 100, 200, 300, 500],
            gb_learning_rate: vec![0.01, 0.03, 0.05, 0.1, 0.2, 0.3],
            gb_max_depth: vec![Some(2), Some(3), Some(4), Some(6)],
            gb_min_samples_leaf: vec![1, 2, 4, 8],
        }
    }
}

impl SearchSpace {
    /// Every configuration for `algo`, in a fixed enumeration order.
    pub fn enumerate(&self, algo: Algo) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        match algo {
            Algo::RandomForest => {
                for &t in &self.rf_trees {
                    for &d in &self.rf_max_depth {
                        for &l in &self.rf_min_samples_leaf {
                            for &f in &self.rf_max_features {
                                out.push(Hyperparams::random_forest(t, d, l, f));
                            }
                        }
                    }
                }
            }
            Algo::GradientBoost => {
                for &t in &self.gb_trees {
                    for &e in &self.gb_learning_rate {
                        for &d in &self.gb_max_depth {
                            for &l in &self.gb_min_samples_leaf {
                                out.push(Hyperparams::gradient_boost(t, e, d, l));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// `n_iter` distinct configurations drawn uniformly, or the whole space
    /// when it is smaller.
    pub fn sample(&self, algo: Algo, n_iter: usize, seed: SeedPath) -> Vec<Hyperparams> {
        let all = self.enumerate(algo);
        let picks = sample_without_replacement(&mut seed.rng(), all.len(), n_iter);
        picks.into_iter().map(|i| all[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub hyperparams: Hyperparams,
    pub cv: CvResult,
}

/// Result of searching one (outlier configuration, algorithm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchCell {
    pub outlier_config: OutlierConfig,
    pub algo: Algo,
    pub evaluated: Vec<Evaluated>,
}

impl SearchCell {
    /// Highest cross-validated R²; the earliest draw wins ties and undefined
    /// scores never win.
    pub fn best(&self) -> Option<&Evaluated> {
        let mut best: Option<&Evaluated> = None;
        for e in &self.evaluated {
            let Some(score) = e.cv.r2_cv else { continue };
            if best.is_none_or(|b| score > b.cv.r2_cv.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(e);
            }
        }
        best
    }
}

pub struct SearchSeeds {
    pub sample: SeedPath,
    pub split: SeedPath,
    pub fit: SeedPath,
}

/// Scores `n_iter` sampled configurations by k-fold CV on already processed
/// rows. Every configuration sees the same fold partition; draw `i` trains
/// with `seeds.fit.child(i)`.
pub fn randomized_search(
    data: &Dataset,
    algo: Algo,
    outlier_config: OutlierConfig,
    space: &SearchSpace,
    n_iter: usize,
    k_folds: usize,
    seeds: &SearchSeeds,
) -> SearchCell {
    let configs = space.sample(algo, n_iter, seeds.sample);
    let evaluated = configs
        .par_iter()
        .enumerate()
        .map(|(i, h)| Evaluated {
            hyperparams: *h,
            cv: kfold_cv(data, k_folds, h, outlier_config, seeds.split, seeds.fit.child(i as u64)),
        })
        .collect();
    SearchCell {
        outlier_config,
        algo,
        evaluated,
    }
}
