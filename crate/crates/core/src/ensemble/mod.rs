//! Tree ensembles for imputing missing height differences: robust scaling,
//! outlier handling, CART trees, Random Forest, Gradient Boosting, metrics,
//! cross-validation, randomized search, and per-AOI gating.

pub mod cv;
pub mod metrics;
pub mod model;
pub mod outliers;
pub mod persist;
pub mod rng;
pub mod scaler;
pub mod search;
pub mod stats;
pub mod tree;
pub mod workflow;

pub use cv::{holdout_split, kfold_cv, kfold_partition, CvResult};
pub use metrics::{metrics, Metrics};
pub use model::{Algo, EnsembleModel, Hyperparams, MaxFeatures};
pub use outliers::{apply_outliers, clean_targets, OutlierConfig, OutlierOutcome};
pub use persist::{model_from_json, model_to_json};
pub use rng::SeedPath;
pub use scaler::RobustScaler;
pub use search::{randomized_search, SearchSpace};
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};
pub use workflow::{run_workflow, select_and_gate, ModelReport, WorkflowMode, WorkflowOutcome, WorkflowSettings};

/// Row-major feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self, String> {
        if features.len() != targets.len() {
            return Err(format!("{} feature rows but {} targets", features.len(), targets.len()));
        }
        if let Some(first) = features.first() {
            let p = first.len();
            if let Some(i) = features.iter().position(|r| r.len() != p) {
                return Err(format!("row {i} has {} features, expected {p}", features[i].len()));
            }
        }
        Ok(Dataset { features, targets })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}
