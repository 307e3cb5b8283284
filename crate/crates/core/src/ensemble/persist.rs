//! Model files: JSON documents in which every float is a decimal string with
//! 17 significant digits, so a saved model reloads bit for bit.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::model::{Algo, EnsembleModel, Hyperparams, MaxFeatures};
use super::outliers::OutlierConfig;
use super::scaler::RobustScaler;
use super::tree::{Node, RegressionTree};
use super::workflow::ModelReport;

pub const MODEL_FORMAT: &str = "floodline-model/1";

/// A float rendered as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dec17(pub f64);

pub fn dec17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Serialize for Dec17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&dec17(self.0))
    }
}

impl<'de> Deserialize<'de> for Dec17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse::<f64>()
            .map(Dec17)
            .map_err(|e| D::Error::custom(format!("bad decimal {s:?}: {e}")))
    }
}

fn decs(v: &[f64]) -> Vec<Dec17> {
    v.iter().copied().map(Dec17).collect()
}

fn undec(v: &[Dec17]) -> Vec<f64> {
    v.iter().map(|d| d.0).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct HyperDoc {
    n_trees: usize,
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    max_features: Option<usize>,
    learning_rate: Dec17,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeDoc {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    threshold: Option<Dec17>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    value: Option<Dec17>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerDoc {
    medians: Vec<Dec17>,
    iqrs: Vec<Dec17>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDoc {
    aoi_id: String,
    workflow: String,
    algo: Option<String>,
    outlier_config: Option<String>,
    n_train: usize,
    rmse_m: Option<Dec17>,
    rmse_pct: Option<Dec17>,
    r2: Option<Dec17>,
    r2_cv: Option<Dec17>,
    gap: Option<Dec17>,
    selected: bool,
    gate_passed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    algo: Algo,
    seed: String,
    outlier_config: String,
    hyperparams: HyperDoc,
    feature_names: Vec<String>,
    scaler: ScalerDoc,
    base_prediction: Dec17,
    feature_importances: Vec<Dec17>,
    importance_degenerate: bool,
    trees: Vec<Vec<NodeDoc>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    report: Option<ReportDoc>,
}

pub fn parse_outlier_label(s: &str) -> Option<OutlierConfig> {
    OutlierConfig::all().into_iter().find(|c| c.label() == s)
}

/// Serializes a model, optionally with its report, as pretty-printed JSON.
pub fn model_to_json(model: &EnsembleModel, feature_names: &[&str], report: Option<&ModelReport>) -> String {
    let h = &model.hyperparams;
    let doc = ModelDoc {
        format: MODEL_FORMAT.to_string(),
        algo: h.algo,
        seed: model.seed.to_string(),
        outlier_config: model.outlier_config.label(),
        hyperparams: HyperDoc {
            n_trees: h.n_trees,
            max_depth: h.max_depth,
            min_samples_leaf: h.min_samples_leaf,
            max_features: match h.max_features {
                MaxFeatures::Count(k) => Some(k),
                MaxFeatures::All => None,
            },
            learning_rate: Dec17(h.learning_rate),
        },
        feature_names: feature_names.iter().map(|s| s.to_string()).collect(),
        scaler: ScalerDoc {
            medians: decs(&model.scaler.medians),
            iqrs: decs(&model.scaler.iqrs),
        },
        base_prediction: Dec17(model.base_prediction),
        feature_importances: decs(&model.importances),
        importance_degenerate: model.importance_degenerate,
        trees: model
            .trees
            .iter()
            .map(|t| {
                t.nodes()
                    .iter()
                    .map(|n| match *n {
                        Node::Leaf { value } => NodeDoc {
                            feature: None,
                            threshold: None,
                            left: None,
                            right: None,
                            value: Some(Dec17(value)),
                        },
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeDoc {
                            feature: Some(feature),
                            threshold: Some(Dec17(threshold)),
                            left: Some(left),
                            right: Some(right),
                            value: None,
                        },
                    })
                    .collect()
            })
            .collect(),
        report: report.map(|r| ReportDoc {
            aoi_id: r.aoi_id.clone(),
            workflow: r.workflow.as_str().to_string(),
            algo: r.algo.map(|a| a.as_str().to_string()),
            outlier_config: r.outlier_config.map(|c| c.label()),
            n_train: r.n_train,
            rmse_m: r.rmse_m.map(Dec17),
            rmse_pct: r.rmse_pct.map(Dec17),
            r2: r.r2.map(Dec17),
            r2_cv: r.r2_cv.map(Dec17),
            gap: r.gap.map(Dec17),
            selected: r.selected,
            gate_passed: r.gate_passed,
        }),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model document serializes");
    s.push('\n');
    s
}

/// Loads a model written by [`model_to_json`].
pub fn model_from_json(text: &str) -> Result<EnsembleModel, String> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if doc.format != MODEL_FORMAT {
        return Err(format!("unsupported model format {:?}", doc.format));
    }
    let outlier_config =
        parse_outlier_label(&doc.outlier_config).ok_or_else(|| format!("unknown outlier config {:?}", doc.outlier_config))?;
    let hd = &doc.hyperparams;
    let hyperparams = Hyperparams {
        algo: doc.algo,
        n_trees: hd.n_trees,
        max_depth: hd.max_depth,
        min_samples_leaf: hd.min_samples_leaf,
        max_features: hd.max_features.map_or(MaxFeatures::All, MaxFeatures::Count),
        learning_rate: hd.learning_rate.0,
    };
    hyperparams.validate()?;
    let scaler = RobustScaler {
        medians: undec(&doc.scaler.medians),
        iqrs: undec(&doc.scaler.iqrs),
    };
    let p = scaler.n_features();
    if scaler.iqrs.len() != p || doc.feature_importances.len() != p {
        return Err("feature count mismatch between scaler and importances".to_string());
    }
    let mut trees = Vec::with_capacity(doc.trees.len());
    for (t, nodes) in doc.trees.iter().enumerate() {
        let nodes = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match (n.feature, n.threshold, n.left, n.right, n.value) {
                (None, None, None, None, Some(v)) => Ok(Node::Leaf { value: v.0 }),
                (Some(feature), Some(th), Some(left), Some(right), None) => Ok(Node::Split {
                    feature,
                    threshold: th.0,
                    left,
                    right,
                }),
                _ => Err(format!("tree {t} node {i} is neither a leaf nor a split")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        trees.push(RegressionTree::from_nodes(nodes, p).map_err(|e| format!("tree {t}: {e}"))?);
    }
    if trees.len() != hyperparams.n_trees {
        return Err(format!("expected {} trees, found {}", hyperparams.n_trees, trees.len()));
    }
    Ok(EnsembleModel {
        hyperparams,
        outlier_config,
        scaler,
        trees,
        base_prediction: doc.base_prediction.0,
        importances: undec(&doc.feature_importances),
        importance_degenerate: doc.importance_degenerate,
        seed: doc.seed.parse().map_err(|_| format!("bad seed {:?}", doc.seed))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::rng::SeedPath;
    use crate::ensemble::Dataset;

    #[test]
    fn dec17_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 0.0, f64::MAX] {
            assert_eq!(dec17(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(dec17(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn model_round_trips() {
        let d = Dataset::new(
            (0..30).map(|i| vec![f64::from(i) * 0.37, f64::from(i % 4)]).collect(),
            (0..30).map(|i| (f64::from(i) * 0.7).sin()).collect(),
        )
        .unwrap();
        for h in [
            Hyperparams::random_forest(5, Some(3), 1, MaxFeatures::Count(1)),
            Hyperparams::gradient_boost(7, 0.3, Some(2), 2),
        ] {
            let m = EnsembleModel::fit(&d, &h, OutlierConfig::iqr(2.5), SeedPath::new(8)).unwrap();
            let text = model_to_json(&m, &["a", "b"], None);
            let back = model_from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(model_to_json(&back, &["a", "b"], None), text);
        }
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(model_from_json("{}").is_err());
        assert!(model_from_json("not json").is_err());
    }
}
