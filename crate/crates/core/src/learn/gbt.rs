use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, MaxFeatures, Tree, TreeParams};
use super::Dataset;
use crate::domain::InterestLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_rounds: 100, shrinkage: 0.1, max_depth: 3 }
    }
}

impl GbtParams {
    /// `shrinkage = 1e-3` for 30 rounds.
    pub fn reference() -> Self {
        GbtParams { n_rounds: 30, shrinkage: 0.001, max_depth: 3 }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gradient-boosted regression trees on the binary logistic loss.
///
/// Each round fits a squared-error tree to the residuals `y − p` and sets
/// each leaf to the one-step Newton value `Σ r / Σ p(1−p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    base_score: f64,
    shrinkage: f64,
    trees: Vec<Tree>,
    /// Mean training log-loss after 0, 1, …, n_rounds rounds.
    loss_trace: Vec<f64>,
    dim: usize,
}

fn log_loss(ys: &[f64], f: &[f64]) -> f64 {
    let total: f64 = ys
        .iter()
        .zip(f)
        .map(|(y, fi)| {
            // log(1 + e^{-z}) with z = ±f, written stably
            let z = if *y > 0.5 { *fi } else { -fi };
            if z > 0.0 {
                (-z).exp().ln_1p()
            } else {
                -z + z.exp().ln_1p()
            }
        })
        .sum();
    total / ys.len() as f64
}

impl GradientBoosting {
    pub fn train(data: &Dataset, params: GbtParams, seed: u64) -> Result<Self> {
        data.require_both_classes()?;
        if params.n_rounds == 0 {
            return Err(Error::invalid("gbt: n_rounds must be at least 1"));
        }
        if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
            return Err(Error::invalid(format!("gbt: shrinkage {} outside (0, 1]", params.shrinkage)));
        }
        let ys: Vec<f64> = data.labels().iter().map(|l| f64::from(l.value())).collect();
        let n = ys.len() as f64;
        let p = ys.iter().sum::<f64>() / n;
        let base_score = (p / (1.0 - p)).ln();
        let mut f = vec![base_score; ys.len()];
        let mut loss_trace = vec![log_loss(&ys, &f)];
        let tree_params = TreeParams {
            criterion: Criterion::SquaredError,
            max_depth: params.max_depth,
            max_features: MaxFeatures::All,
            min_samples_split: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trees = Vec::with_capacity(params.n_rounds);
        for _ in 0..params.n_rounds {
            let probs: Vec<f64> = f.iter().map(|x| sigmoid(*x)).collect();
            let residuals: Vec<f64> = ys.iter().zip(&probs).map(|(y, p)| y - p).collect();
            let newton = |rows: &[usize]| {
                let num: f64 = rows.iter().map(|&i| residuals[i]).sum();
                let den: f64 = rows.iter().map(|&i| probs[i] * (1.0 - probs[i])).sum();
                if den < 1e-12 {
                    0.0
                } else {
                    num / den
                }
            };
            let tree = grow(data.features(), &residuals, (0..ys.len()).collect(), &tree_params, &mut rng, newton);
            for (fi, row) in f.iter_mut().zip(data.features()) {
                *fi += params.shrinkage * tree.predict(row);
            }
            loss_trace.push(log_loss(&ys, &f));
            trees.push(tree);
        }
        Ok(GradientBoosting { base_score, shrinkage: params.shrinkage, trees, loss_trace, dim: data.dim() })
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn n_rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Raw additive score after the first `rounds` trees.
    pub fn staged_margin(&self, row: &[f64], rounds: usize) -> f64 {
        self.base_score
            + self.trees.iter().take(rounds).map(|t| self.shrinkage * t.predict(row)).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.staged_margin(row, self.trees.len()))
    }

    pub fn predict(&self, row: &[f64]) -> InterestLabel {
        InterestLabel::from(self.probability(row) > 0.5)
    }
}
