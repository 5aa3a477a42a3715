use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClassificationReport, CvRow, Hyperparameters, TrainerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Evaluation report as written by `eval --report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub classes: BTreeMap<String, ClassReport>,
    pub auc: Option<f64>,
    pub confusion: [[usize; 2]; 2],
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub train_frac: f64,
    pub folds: usize,
    pub grid: String,
    pub n_train: usize,
    pub n_test: usize,
    pub cv: Vec<CvRow>,
    pub notes: Vec<String>,
}

impl EvalReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: TrainerKind,
        report: &ClassificationReport,
        seed: u64,
        hyperparameters: Hyperparameters,
        train_frac: f64,
        folds: usize,
        grid: &str,
        n_train: usize,
        n_test: usize,
        cv: Vec<CvRow>,
    ) -> Self {
        let classes = report
            .classes
            .iter()
            .enumerate()
            .map(|(c, m)| {
                (
                    c.to_string(),
                    ClassReport { precision: m.precision, recall: m.recall, f1: m.f1, support: m.support },
                )
            })
            .collect();
        EvalReport {
            model: kind.report_name().to_string(),
            classes,
            auc: report.auc,
            confusion: report.confusion,
            seed,
            hyperparameters,
            train_frac,
            folds,
            grid: grid.to_string(),
            n_train,
            n_test,
            cv,
            notes: report.notes.clone(),
        }
    }
}
