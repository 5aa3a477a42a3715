//! Interest classification: splits, four classifier families, grid search
//! and evaluation metrics.

mod dataset;
mod forest;
mod gbt;
mod grid;
mod metrics;
mod naive_bayes;
mod report;
mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::{split_dataset, stratified_folds, Dataset};
pub use forest::{ForestParams, RandomForest};
pub use gbt::{sigmoid, GbtParams, GradientBoosting};
pub use grid::{default_grid, grid_points, grid_search, CvRow, GridPreset, GridSearchResult};
pub use metrics::{auc, classification_report, f1, ClassMetrics, ClassificationReport};
pub use naive_bayes::NaiveBayes;
pub use report::{ClassReport, EvalReport};
pub use svm::{normalize_margins, LinearSvm};

use crate::domain::InterestLabel;
use crate::error::{Error, Result};

/// Hyperparameter name → value. Integer-valued parameters are stored as f64.
pub type Hyperparameters = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainerKind {
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "svm")]
    LinearSvm,
    #[serde(rename = "rf")]
    RandomForest,
    #[serde(rename = "gbt")]
    Gbt,
}

impl TrainerKind {
    pub const ALL: [TrainerKind; 4] =
        [TrainerKind::NaiveBayes, TrainerKind::LinearSvm, TrainerKind::RandomForest, TrainerKind::Gbt];

    pub fn as_str(&self) -> &'static str {
        match self {
            TrainerKind::NaiveBayes => "nb",
            TrainerKind::LinearSvm => "svm",
            TrainerKind::RandomForest => "rf",
            TrainerKind::Gbt => "gbt",
        }
    }

    /// Name used in evaluation reports.
    pub fn report_name(&self) -> &'static str {
        match self {
            TrainerKind::NaiveBayes => "naive-bayes",
            TrainerKind::LinearSvm => "gs-svm",
            TrainerKind::RandomForest => "gs-random-forest",
            TrainerKind::Gbt => "gbt",
        }
    }

    pub fn defaults(&self) -> Hyperparameters {
        let pairs: &[(&str, f64)] = match self {
            TrainerKind::NaiveBayes => &[("alpha", 1.0)],
            TrainerKind::LinearSvm => &[("lambda", 0.01), ("epochs", svm::DEFAULT_EPOCHS as f64)],
            TrainerKind::RandomForest => &[("n_trees", 100.0), ("max_depth", 8.0)],
            TrainerKind::Gbt => &[("n_rounds", 100.0), ("shrinkage", 0.1), ("max_depth", 3.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    /// Defaults overlaid with `overrides`; unknown names are rejected.
    pub fn resolve(&self, overrides: &Hyperparameters) -> Result<Hyperparameters> {
        let mut hp = self.defaults();
        for (k, v) in overrides {
            match hp.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::invalid(format!("{} has no hyperparameter {k}", self.as_str())));
                }
            }
        }
        Ok(hp)
    }
}

impl fmt::Display for TrainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrainerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TrainerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model {s:?}; expected nb, svm, rf or gbt")))
    }
}

fn count_param(hp: &Hyperparameters, name: &str) -> Result<usize> {
    let v = hp[name];
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "snake_case")]
pub enum ModelState {
    NaiveBayes(NaiveBayes),
    LinearSvm(LinearSvm),
    RandomForest(RandomForest),
    Gbt(GradientBoosting),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: TrainerKind,
    pub state: ModelState,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

/// Trains one model. Naive Bayes reads the dataset's term lists; the other
/// families read its feature rows.
pub fn train(kind: TrainerKind, data: &Dataset, overrides: &Hyperparameters, seed: u64) -> Result<TrainedModel> {
    let hp = kind.resolve(overrides)?;
    let state = match kind {
        TrainerKind::NaiveBayes => {
            let docs = data.docs().ok_or_else(|| Error::invalid("naive Bayes needs term lists in the dataset"))?;
            ModelState::NaiveBayes(NaiveBayes::train(docs, data.labels(), hp["alpha"])?)
        }
        TrainerKind::LinearSvm => {
            ModelState::LinearSvm(LinearSvm::train(data, hp["lambda"], count_param(&hp, "epochs")?, seed)?)
        }
        TrainerKind::RandomForest => {
            let params = ForestParams::new(count_param(&hp, "n_trees")?, count_param(&hp, "max_depth")?);
            ModelState::RandomForest(RandomForest::train(data, params, seed)?)
        }
        TrainerKind::Gbt => {
            let params = GbtParams {
                n_rounds: count_param(&hp, "n_rounds")?,
                shrinkage: hp["shrinkage"],
                max_depth: count_param(&hp, "max_depth")?,
            };
            ModelState::Gbt(GradientBoosting::train(data, params, seed)?)
        }
    };
    Ok(TrainedModel { kind, state, hyperparameters: hp, seed })
}

impl TrainedModel {
    fn feature_dim(&self) -> Option<usize> {
        match &self.state {
            ModelState::NaiveBayes(_) => None,
            ModelState::LinearSvm(m) => Some(m.dim()),
            ModelState::RandomForest(m) => Some(m.dim()),
            ModelState::Gbt(m) => Some(m.dim()),
        }
    }

    /// Scores feature rows: positive-vote fraction (rf), probability (gbt)
    /// or raw margin (svm). Higher means more interested.
    pub fn predict_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let dim = self
            .feature_dim()
            .ok_or_else(|| Error::invalid("naive Bayes scores term lists, not feature rows"))?;
        if let Some(row) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "dimension mismatch: model trained on {dim} features, got {}",
                row.len()
            )));
        }
        Ok(match &self.state {
            ModelState::LinearSvm(m) => rows.iter().map(|r| m.margin(r)).collect(),
            ModelState::RandomForest(m) => rows.iter().map(|r| m.vote_fraction(r)).collect(),
            ModelState::Gbt(m) => rows.iter().map(|r| m.probability(r)).collect(),
            ModelState::NaiveBayes(_) => unreachable!(),
        })
    }

    /// Scores every row of `data`, using term lists for naive Bayes.
    pub fn score(&self, data: &Dataset) -> Result<Vec<f64>> {
        match &self.state {
            ModelState::NaiveBayes(nb) => {
                let docs = data.docs().ok_or_else(|| Error::invalid("naive Bayes needs term lists in the dataset"))?;
                Ok(docs.iter().map(|d| nb.posterior(d)).collect())
            }
            _ => self.predict_scores(data.features()),
        }
    }

    fn threshold(&self) -> f64 {
        match self.kind {
            TrainerKind::LinearSvm => 0.0,
            _ => 0.5,
        }
    }

    pub fn labels_from_scores(&self, scores: &[f64]) -> Vec<InterestLabel> {
        let t = self.threshold();
        scores.iter().map(|s| InterestLabel::from(*s > t)).collect()
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<InterestLabel>> {
        Ok(self.labels_from_scores(&self.score(data)?))
    }

    /// Scores in `[0, 1]` for AUC; svm margins are rescaled.
    pub fn auc_scores(&self, scores: &[f64]) -> Vec<f64> {
        match self.kind {
            TrainerKind::LinearSvm => normalize_margins(scores),
            _ => scores.to_vec(),
        }
    }

    pub fn notes(&self) -> Vec<String> {
        match &self.state {
            ModelState::LinearSvm(m) if !m.degenerate_features().is_empty() => vec![format!(
                "svm: {} constant feature column(s) in training data: {:?}",
                m.degenerate_features().len(),
                m.degenerate_features()
            )],
            _ => Vec::new(),
        }
    }

    /// Predicts `data` and builds the classification report.
    pub fn evaluate(&self, data: &Dataset) -> Result<ClassificationReport> {
        let scores = self.score(data)?;
        let preds = self.labels_from_scores(&scores);
        let mut report = classification_report(data.labels(), &preds, Some(&self.auc_scores(&scores)))?;
        report.notes.extend(self.notes());
        Ok(report)
    }
}
