//! The two training workflows, model selection and per-AOI gating.

use std::fmt;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::cv::{holdout_eval, kfold_cv};
use super::model::{Algo, EnsembleModel, Hyperparams, MaxFeatures};
use super::outliers::{apply_outliers, clean_targets, OutlierConfig, OutlierOutcome};
use super::rng::SeedPath;
use super::search::{randomized_search, SearchSeeds, SearchSpace};
use super::stats::quantile;
use super::Dataset;

pub const DEFAULT_GATE_THRESHOLD: f64 = 0.15;
pub const DEFAULT_TIE_WINDOW: f64 = 0.01;
pub const DEFAULT_N_ITER: usize = 30;
pub const DEFAULT_K_FOLDS: usize = 5;
/// Upper clamp for imputed values, as a quantile of the cleaned targets.
pub const CLAMP_QUANTILE: f64 = 0.995;

const P_HOLDOUT_SPLIT: u64 = 1;
const P_CV_SPLIT: u64 = 2;
const P_SEARCH: u64 = 3;
const P_CV_FIT: u64 = 4;
const P_HOLDOUT_FIT: u64 = 5;
const P_FINAL_FIT: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowMode {
    BatchStandard,
    TuningExtended,
}

impl WorkflowMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            WorkflowMode::BatchStandard => "batch_standard",
            WorkflowMode::TuningExtended => "tuning_extended",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "batch_standard" => Some(WorkflowMode::BatchStandard),
            "tuning_extended" => Some(WorkflowMode::TuningExtended),
            _ => None,
        }
    }
}

impl fmt::Display for WorkflowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowSettings {
    pub gate_threshold: f64,
    pub tie_window: f64,
    pub n_iter: usize,
    pub k_folds: usize,
    pub space: SearchSpace,
}

impl Default for WorkflowSettings {
    fn default() -> Self {
        WorkflowSettings {
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            tie_window: DEFAULT_TIE_WINDOW,
            n_iter: DEFAULT_N_ITER,
            k_folds: DEFAULT_K_FOLDS,
            space: SearchSpace::default(),
        }
    }
}

/// Fixed configurations of the batch workflow.
pub fn batch_standard_hyperparams() -> [Hyperparams; 2] {
    [
        Hyperparams::random_forest(300, None, 1, MaxFeatures::Count(5)),
        Hyperparams::gradient_boost(300, 0.1, Some(3), 1),
    ]
}

pub fn batch_standard_outliers() -> OutlierConfig {
    OutlierConfig::iqr(3.0)
}

/// Performance of one candidate model. `rmse_m`, `rmse_pct` and `r2` are
/// hold-out scores; `gap` is `r2 - r2_cv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub aoi_id: String,
    pub workflow: WorkflowMode,
    pub algo: Option<Algo>,
    pub outlier_config: Option<OutlierConfig>,
    pub hyperparams: Option<Hyperparams>,
    pub n_train: usize,
    pub rmse_m: Option<f64>,
    pub rmse_pct: Option<f64>,
    pub r2: Option<f64>,
    pub r2_cv: Option<f64>,
    pub gap: Option<f64>,
    pub selected: bool,
    pub gate_passed: bool,
}

impl ModelReport {
    fn empty(aoi_id: &str, workflow: WorkflowMode) -> Self {
        ModelReport {
            aoi_id: aoi_id.to_string(),
            workflow,
            algo: None,
            outlier_config: None,
            hyperparams: None,
            n_train: 0,
            rmse_m: None,
            rmse_pct: None,
            r2: None,
            r2_cv: None,
            gap: None,
            selected: false,
            gate_passed: false,
        }
    }

    pub fn set_scores(&mut self, rmse_m: Option<f64>, rmse_pct: Option<f64>, r2: Option<f64>, r2_cv: Option<f64>) {
        self.rmse_m = rmse_m;
        self.rmse_pct = rmse_pct;
        self.r2 = r2;
        self.r2_cv = r2_cv;
        self.gap = match (r2, r2_cv) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
    }
}

/// Marks the selected candidate and the AOI gate on every report.
///
/// Candidates are ranked by cross-validated R²; among those within
/// `tie_window` of the best, the smallest absolute gap wins (an undefined gap
/// loses), then the earlier candidate. The gate passes when the best score
/// reaches `threshold`.
pub fn select_and_gate(reports: &mut [ModelReport], threshold: f64, tie_window: f64) -> Option<usize> {
    for r in reports.iter_mut() {
        r.selected = false;
        r.gate_passed = false;
    }
    let best = reports
        .iter()
        .filter_map(|r| r.r2_cv)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))?;
    let mut chosen: Option<(usize, f64)> = None;
    for (i, r) in reports.iter().enumerate() {
        let Some(score) = r.r2_cv else { continue };
        if score < best - tie_window {
            continue;
        }
        let abs_gap = r.gap.map_or(f64::INFINITY, f64::abs);
        if chosen.is_none_or(|(_, g)| abs_gap < g) {
            chosen = Some((i, abs_gap));
        }
    }
    let (idx, _) = chosen?;
    let passed = best >= threshold;
    for r in reports.iter_mut() {
        r.gate_passed = passed;
    }
    reports[idx].selected = true;
    Some(idx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Imputation {
    /// Index into the prediction rows.
    pub row: usize,
    pub value: f64,
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct WorkflowOutcome {
    pub reports: Vec<ModelReport>,
    pub selected: Option<usize>,
    pub gate_passed: bool,
    pub model: Option<EnsembleModel>,
    pub n_cleaned_out: usize,
    pub clamp_range: Option<(f64, f64)>,
    pub imputations: Vec<Imputation>,
    /// Outlier configurations that could not be applied, with reasons.
    pub skipped: Vec<String>,
}

impl WorkflowOutcome {
    pub fn n_clamped(&self) -> usize {
        self.imputations.iter().filter(|i| i.clamped).count()
    }

    pub fn selected_report(&self) -> Option<&ModelReport> {
        self.selected.map(|i| &self.reports[i])
    }
}

fn config_index(cfg: OutlierConfig) -> u64 {
    OutlierConfig::all().iter().position(|c| *c == cfg).unwrap_or(0) as u64
}

fn algo_index(algo: Algo) -> u64 {
    match algo {
        Algo::RandomForest => 0,
        Algo::GradientBoost => 1,
    }
}

/// Trains, selects and gates a model for one AOI, then imputes every
/// prediction row when the gate passes.
///
/// `training` holds raw extracted targets; cleaning and outlier handling
/// happen here.
pub fn run_workflow(
    aoi_id: &str,
    training: &Dataset,
    prediction_rows: &[Vec<f64>],
    mode: WorkflowMode,
    settings: &WorkflowSettings,
    seed: u64,
) -> WorkflowOutcome {
    let root = SeedPath::new(seed).child_str(aoi_id);
    let cleaned = clean_targets(training);
    let n_cleaned_out = training.n_rows() - cleaned.n_rows();
    let mut outcome = WorkflowOutcome {
        reports: Vec::new(),
        selected: None,
        gate_passed: false,
        model: None,
        n_cleaned_out,
        clamp_range: None,
        imputations: Vec::new(),
        skipped: Vec::new(),
    };
    if cleaned.n_rows() == 0 {
        outcome.reports.push(ModelReport::empty(aoi_id, mode));
        outcome.skipped.push("no training rows".to_string());
        return outcome;
    }

    let mut processed_by_cfg: Vec<(OutlierConfig, Dataset)> = Vec::new();
    let configs = match mode {
        WorkflowMode::BatchStandard => vec![batch_standard_outliers()],
        WorkflowMode::TuningExtended => OutlierConfig::all(),
    };
    for cfg in configs {
        match apply_outliers(&cleaned, cfg) {
            OutlierOutcome::Applied(d) if d.n_rows() >= 2 => processed_by_cfg.push((cfg, d)),
            OutlierOutcome::Applied(d) => {
                let reason = format!("{cfg}: {} rows left after outlier handling", d.n_rows());
                info!("{aoi_id}: skipping {reason}");
                outcome.skipped.push(reason);
            }
            OutlierOutcome::Inapplicable(why) => {
                info!("{aoi_id}: skipping {cfg}: {why}");
                outcome.skipped.push(format!("{cfg}: {why}"));
            }
        }
    }

    let mut winners: Vec<(Hyperparams, OutlierConfig)> = Vec::new();
    match mode {
        WorkflowMode::BatchStandard => {
            if let Some((cfg, data)) = processed_by_cfg.first() {
                let ci = config_index(*cfg);
                let mut reports = Vec::new();
                for h in batch_standard_hyperparams() {
                    let ai = algo_index(h.algo);
                    let m = holdout_eval(
                        data,
                        &h,
                        *cfg,
                        root.child(P_HOLDOUT_SPLIT).child(ci),
                        root.child(P_HOLDOUT_FIT).child(ci).child(ai),
                    );
                    let mut r = ModelReport::empty(aoi_id, mode);
                    r.algo = Some(h.algo);
                    r.outlier_config = Some(*cfg);
                    r.hyperparams = Some(h);
                    r.n_train = data.n_rows();
                    r.set_scores(m.map(|m| m.rmse), m.map(|m| m.rmse_pct), m.and_then(|m| m.r2), None);
                    reports.push(r);
                    winners.push((h, *cfg));
                }
                let score = |r: &ModelReport| r.r2.unwrap_or(f64::NEG_INFINITY);
                let keep = if score(&reports[1]) > score(&reports[0]) { 1 } else { 0 };
                let h = winners[keep].0;
                let cv = kfold_cv(
                    data,
                    settings.k_folds,
                    &h,
                    *cfg,
                    root.child(P_CV_SPLIT).child(ci),
                    root.child(P_CV_FIT).child(ci).child(algo_index(h.algo)).child(0),
                );
                let r = &mut reports[keep];
                let (rm, rp, r2) = (r.rmse_m, r.rmse_pct, r.r2);
                r.set_scores(rm, rp, r2, cv.r2_cv);
                r.selected = true;
                let passed = cv.r2_cv.is_some_and(|v| v >= settings.gate_threshold);
                for r in &mut reports {
                    r.gate_passed = passed;
                }
                outcome.selected = Some(keep);
                outcome.gate_passed = passed;
                outcome.reports = reports;
            }
        }
        WorkflowMode::TuningExtended => {
            let mut reports = Vec::new();
            for (cfg, data) in &processed_by_cfg {
                let ci = config_index(*cfg);
                for algo in [Algo::RandomForest, Algo::GradientBoost] {
                    let ai = algo_index(algo);
                    let seeds = SearchSeeds {
                        sample: root.child(P_SEARCH).child(ci).child(ai),
                        split: root.child(P_CV_SPLIT).child(ci),
                        fit: root.child(P_CV_FIT).child(ci).child(ai),
                    };
                    let cell = randomized_search(data, algo, *cfg, &settings.space, settings.n_iter, settings.k_folds, &seeds);
                    let Some(best) = cell.best() else {
                        debug!("{aoi_id}: {cfg}/{algo} produced no defined CV score");
                        continue;
                    };
                    let m = holdout_eval(
                        data,
                        &best.hyperparams,
                        *cfg,
                        root.child(P_HOLDOUT_SPLIT).child(ci),
                        root.child(P_HOLDOUT_FIT).child(ci).child(ai),
                    );
                    let mut r = ModelReport::empty(aoi_id, mode);
                    r.algo = Some(algo);
                    r.outlier_config = Some(*cfg);
                    r.hyperparams = Some(best.hyperparams);
                    r.n_train = data.n_rows();
                    r.set_scores(m.map(|m| m.rmse), m.map(|m| m.rmse_pct), m.and_then(|m| m.r2), best.cv.r2_cv);
                    reports.push(r);
                    winners.push((best.hyperparams, *cfg));
                }
            }
            outcome.selected = select_and_gate(&mut reports, settings.gate_threshold, settings.tie_window);
            outcome.gate_passed = reports.first().is_some_and(|r| r.gate_passed);
            outcome.reports = reports;
        }
    }

    if outcome.reports.is_empty() {
        outcome.reports.push(ModelReport::empty(aoi_id, mode));
    }
    if !outcome.gate_passed {
        return outcome;
    }
    let idx = outcome.selected.expect("gate passed without a selection");
    let (h, cfg) = winners[idx];
    let data = &processed_by_cfg
        .iter()
        .find(|(c, _)| *c == cfg)
        .expect("selected configuration was processed")
        .1;
    let model = match EnsembleModel::fit(data, &h, cfg, root.child(P_FINAL_FIT)) {
        Ok(m) => m,
        Err(e) => {
            outcome.skipped.push(format!("final fit failed: {e}"));
            outcome.gate_passed = false;
            for r in &mut outcome.reports {
                r.gate_passed = false;
            }
            return outcome;
        }
    };
    let upper = quantile(&cleaned.targets, CLAMP_QUANTILE);
    outcome.clamp_range = Some((0.0, upper));
    outcome.imputations = model
        .predict_many(prediction_rows)
        .into_iter()
        .enumerate()
        .map(|(row, raw)| {
            let value = raw.clamp(0.0, upper);
            Imputation {
                row,
                value,
                clamped: value != raw,
            }
        })
        .collect();
    outcome.model = Some(model);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(r2: Option<f64>, r2_cv: Option<f64>) -> ModelReport {
        let mut r = ModelReport::empty("a", WorkflowMode::TuningExtended);
        r.set_scores(Some(0.1), Some(1.0), r2, r2_cv);
        r
    }

    #[test]
    fn selection_prefers_small_gap_within_window() {
        let mut rs = vec![report(Some(1.10), Some(0.90)), report(Some(0.905), Some(0.895))];
        assert_eq!(select_and_gate(&mut rs, 0.15, 0.01), Some(1));
        assert!(rs[1].selected && !rs[0].selected);
        assert!(rs.iter().all(|r| r.gate_passed));
    }

    #[test]
    fn single_candidate_and_gate() {
        let mut rs = vec![report(Some(0.82), Some(0.80))];
        assert_eq!(select_and_gate(&mut rs, 0.15, 0.01), Some(0));
        assert!(rs[0].gate_passed);
        let mut low = vec![report(Some(0.2), Some(0.14))];
        select_and_gate(&mut low, 0.15, 0.01);
        assert!(!low[0].gate_passed);
        let mut none = vec![report(None, None)];
        assert_eq!(select_and_gate(&mut none, 0.15, 0.01), None);
    }

    #[test]
    fn gap_is_exact_difference() {
        let r = report(Some(0.7), Some(0.65));
        assert_eq!(r.gap, Some(0.7 - 0.65));
    }

    #[test]
    fn empty_training_fails_gate() {
        let d = Dataset::new(vec![], vec![]).unwrap();
        let out = run_workflow("x", &d, &[vec![1.0]], WorkflowMode::TuningExtended, &WorkflowSettings::default(), 1);
        assert!(!out.gate_passed);
        assert!(out.imputations.is_empty());
        assert_eq!(out.reports.len(), 1);
    }
}
