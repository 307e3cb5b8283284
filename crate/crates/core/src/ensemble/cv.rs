//! Fold partitions, cross-validation and hold-out evaluation.

use rayon::prelude::*;

use super::metrics::{mean_defined, metrics, r2, Metrics};
use super::model::{EnsembleModel, Hyperparams};
use super::outliers::OutlierConfig;
use super::rng::{shuffle, SeedPath};
use super::Dataset;

/// Shuffles `0..n` and cuts it into `k` folds whose sizes differ by at most
/// one; the first `n % k` folds take the extra row.
pub fn kfold_partition(n: usize, k: usize, seed: SeedPath) -> Vec<Vec<usize>> {
    assert!(k > 0, "fold count must be positive");
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut seed.rng(), &mut idx);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    folds
}

/// Train/validation rows: shuffled, with the last fifth held out.
pub fn holdout_split(n: usize, seed: SeedPath) -> (Vec<usize>, Vec<usize>) {
    assert!(n >= 2, "hold-out split needs at least two rows");
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut seed.rng(), &mut idx);
    let n_val = ((0.2 * n as f64).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    (idx, val)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_r2: Vec<Option<f64>>,
    pub r2_cv: Option<f64>,
}

/// K-fold cross-validated R². Fewer rows than folds gives an undefined score.
/// Fold `f` trains with seed `fit_seed.child(f)`.
pub fn kfold_cv(
    data: &Dataset,
    k: usize,
    hyper: &Hyperparams,
    outlier: OutlierConfig,
    split_seed: SeedPath,
    fit_seed: SeedPath,
) -> CvResult {
    if k < 2 || data.n_rows() < k {
        return CvResult {
            fold_r2: Vec::new(),
            r2_cv: None,
        };
    }
    let folds = kfold_partition(data.n_rows(), k, split_seed);
    let fold_r2: Vec<Option<f64>> = folds
        .par_iter()
        .enumerate()
        .map(|(f, val)| {
            let mut in_val = vec![false; data.n_rows()];
            for &i in val {
                in_val[i] = true;
            }
            let train: Vec<usize> = (0..data.n_rows()).filter(|&i| !in_val[i]).collect();
            let model = EnsembleModel::fit(&data.subset(&train), hyper, outlier, fit_seed.child(f as u64)).ok()?;
            let pred: Vec<f64> = val.iter().map(|&i| model.predict(&data.features[i])).collect();
            let obs: Vec<f64> = val.iter().map(|&i| data.targets[i]).collect();
            r2(&pred, &obs)
        })
        .collect();
    let r2_cv = mean_defined(&fold_r2);
    CvResult { fold_r2, r2_cv }
}

/// Fits on the training part of a hold-out split and scores the rest.
pub fn holdout_eval(
    data: &Dataset,
    hyper: &Hyperparams,
    outlier: OutlierConfig,
    split_seed: SeedPath,
    fit_seed: SeedPath,
) -> Option<Metrics> {
    if data.n_rows() < 2 {
        return None;
    }
    let (train, val) = holdout_split(data.n_rows(), split_seed);
    let model = EnsembleModel::fit(&data.subset(&train), hyper, outlier, fit_seed).ok()?;
    let pred: Vec<f64> = val.iter().map(|&i| model.predict(&data.features[i])).collect();
    let obs: Vec<f64> = val.iter().map(|&i| data.targets[i]).collect();
    Some(metrics(&pred, &obs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_sizes_for_thirteen_rows() {
        let folds = kfold_partition(13, 5, SeedPath::new(4));
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 2, 2]);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..13).collect::<Vec<_>>());
    }

    #[test]
    fn holdout_sizes() {
        let (t, v) = holdout_split(10, SeedPath::new(1));
        assert_eq!((t.len(), v.len()), (8, 2));
        let (t, v) = holdout_split(2, SeedPath::new(1));
        assert_eq!((t.len(), v.len()), (1, 1));
        let (t, v) = holdout_split(13, SeedPath::new(1));
        assert_eq!((t.len(), v.len()), (10, 3));
    }

    #[test]
    fn too_few_rows_is_undefined() {
        let d = Dataset::new(vec![vec![0.0]; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let h = Hyperparams::gradient_boost(5, 0.1, Some(2), 1);
        let r = kfold_cv(&d, 5, &h, OutlierConfig::None, SeedPath::new(0), SeedPath::new(1));
        assert_eq!(r.r2_cv, None);
    }
}
