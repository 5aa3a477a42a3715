use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{classification_report, stratified_folds, train, Dataset, Hyperparameters, TrainedModel, TrainerKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridPreset {
    Default,
    /// Default grids, except boosting uses shrinkage 1e-3 for 30 rounds.
    Reference,
}

impl FromStr for GridPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(GridPreset::Default),
            "reference" => Ok(GridPreset::Reference),
            other => Err(Error::invalid(format!("unknown grid preset {other:?}; expected default or reference"))),
        }
    }
}

pub fn default_grid(kind: TrainerKind, preset: GridPreset) -> BTreeMap<String, Vec<f64>> {
    let entries: &[(&str, &[f64])] = match (kind, preset) {
        (TrainerKind::NaiveBayes, _) => &[("alpha", &[0.5, 1.0])],
        (TrainerKind::LinearSvm, _) => &[("lambda", &[1e-4, 1e-3, 1e-2, 1e-1]), ("epochs", &[50.0])],
        (TrainerKind::RandomForest, _) => &[("n_trees", &[50.0, 100.0]), ("max_depth", &[4.0, 8.0])],
        (TrainerKind::Gbt, GridPreset::Default) => {
            &[("n_rounds", &[100.0]), ("shrinkage", &[0.1]), ("max_depth", &[2.0, 3.0])]
        }
        (TrainerKind::Gbt, GridPreset::Reference) => &[("n_rounds", &[30.0]), ("shrinkage", &[0.001]), ("max_depth", &[3.0])],
    };
    entries.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

/// Cartesian product in key order, the last key varying fastest.
pub fn grid_points(grid: &BTreeMap<String, Vec<f64>>) -> Result<Vec<Hyperparameters>> {
    if grid.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    if let Some((k, _)) = grid.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::invalid(format!("grid axis {k} has no values")));
    }
    let mut points = vec![Hyperparameters::new()];
    for (k, values) in grid {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(k.clone(), *v);
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub hyperparameters: Hyperparameters,
    pub fold_macro_f1: Vec<f64>,
    pub mean_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: Hyperparameters,
    pub table: Vec<CvRow>,
    /// Best point refit on all of `data`.
    pub model: TrainedModel,
}

/// Stratified k-fold grid search on mean macro-F1. Ties keep the earliest
/// grid point.
pub fn grid_search(
    kind: TrainerKind,
    data: &Dataset,
    grid: &BTreeMap<String, Vec<f64>>,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    let points = grid_points(grid)?;
    let fold_rows = stratified_folds(data.labels(), folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = fold_rows
        .iter()
        .map(|held_out| {
            let train_rows: Vec<usize> = (0..data.len()).filter(|i| held_out.binary_search(i).is_err()).collect();
            (data.subset(&train_rows), data.subset(held_out))
        })
        .collect();

    let mut table = Vec::with_capacity(points.len());
    for hp in points {
        let mut scores = Vec::with_capacity(folds);
        for (tr, va) in &splits {
            let model = train(kind, tr, &hp, seed)?;
            let preds = model.predict(va)?;
            scores.push(classification_report(va.labels(), &preds, None)?.macro_f1());
        }
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        table.push(CvRow { hyperparameters: hp, fold_macro_f1: scores, mean_macro_f1: mean });
    }
    let best = table
        .iter()
        .fold(None::<&CvRow>, |acc, row| match acc {
            Some(b) if b.mean_macro_f1 >= row.mean_macro_f1 => Some(b),
            _ => Some(row),
        })
        .expect("grid has at least one point")
        .hyperparameters
        .clone();
    let model = train(kind, data, &best, seed)?;
    Ok(GridSearchResult { best, table, model })
}
