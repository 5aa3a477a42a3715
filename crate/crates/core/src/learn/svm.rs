use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::domain::InterestLabel;
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 50;

/// Linear SVM trained by seeded stochastic subgradient descent on the
/// L2-regularised hinge loss (step `1/(λ·t)`).
///
/// Features are standardised with training statistics. Weights are learned
/// with an augmented constant column; the final intercept is then set to
/// the exact minimiser of the training hinge loss for those weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    weights: Vec<f64>,
    bias: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
    lambda: f64,
    epochs: usize,
    /// Feature columns that were constant in training.
    degenerate: Vec<usize>,
}

fn sign(label: InterestLabel) -> f64 {
    if label.is_interested() {
        1.0
    } else {
        -1.0
    }
}

impl LinearSvm {
    pub fn train(data: &Dataset, lambda: f64, epochs: usize, seed: u64) -> Result<Self> {
        data.require_both_classes()?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("svm: lambda {lambda} must be positive")));
        }
        if epochs == 0 {
            return Err(Error::invalid("svm: epochs must be at least 1"));
        }
        let d = data.dim();
        let n = data.len() as f64;
        let mut mean = vec![0.0; d];
        for row in data.features() {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for row in data.features() {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let mut degenerate = Vec::new();
        let scale: Vec<f64> = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if *v <= 1e-24 {
                    degenerate.push(j);
                    1.0
                } else {
                    v.sqrt()
                }
            })
            .collect();
        let xs: Vec<Vec<f64>> = data
            .features()
            .iter()
            .map(|row| {
                let mut z: Vec<f64> = row.iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect();
                z.push(1.0);
                z
            })
            .collect();
        let ys: Vec<f64> = data.labels().iter().copied().map(sign).collect();

        let mut w = vec![0.0; d + 1];
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radius = 1.0 / lambda.sqrt();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let margin = ys[i] * dot(&w, &xs[i]);
                let shrink = 1.0 - eta * lambda;
                w.iter_mut().for_each(|wj| *wj *= shrink);
                if margin < 1.0 {
                    for (wj, xj) in w.iter_mut().zip(&xs[i]) {
                        *wj += eta * ys[i] * xj;
                    }
                }
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > radius {
                    w.iter_mut().for_each(|wj| *wj *= radius / norm);
                }
            }
        }
        w.pop();
        let scores: Vec<f64> = xs.iter().map(|x| dot(&w, &x[..d])).collect();
        let bias = best_intercept(&scores, &ys);
        Ok(LinearSvm { weights: w, bias, mean, scale, lambda, epochs, degenerate })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }

    pub fn degenerate_features(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Signed distance-like margin `w·z + b` of one row.
    pub fn margin(&self, row: &[f64]) -> f64 {
        let z = row.iter().zip(&self.mean).zip(&self.scale).map(|((x, m), s)| (x - m) / s);
        z.zip(&self.weights).map(|(zj, wj)| zj * wj).sum::<f64>() + self.bias
    }

    pub fn predict(&self, row: &[f64]) -> InterestLabel {
        InterestLabel::from(self.margin(row) > 0.0)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Intercept minimising `Σ max(0, 1 − y(s + b))`. The loss is convex and
/// piecewise linear, so a breakpoint attains the minimum; ties prefer the
/// smallest `|b|`.
fn best_intercept(scores: &[f64], ys: &[f64]) -> f64 {
    let loss = |b: f64| -> f64 { scores.iter().zip(ys).map(|(s, y)| (1.0 - y * (s + b)).max(0.0)).sum() };
    let mut candidates: Vec<f64> = scores.iter().zip(ys).map(|(s, y)| y - s).collect();
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (f64::INFINITY, 0.0f64);
    for b in candidates {
        let l = loss(b);
        let better = l < best.0 - 1e-12
            || ((l - best.0).abs() <= 1e-12 && (b.abs() < best.1.abs() || (b.abs() == best.1.abs() && b < best.1)));
        if better {
            best = (l, b);
        }
    }
    best.1
}

/// Maps margins into `[0, 1]` over the symmetric range `[-M, M]`,
/// `M = max |margin|`, so a zero margin lands on 0.5. Used only as AUC input.
pub fn normalize_margins(margins: &[f64]) -> Vec<f64> {
    let m = margins.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if m == 0.0 {
        return vec![0.5; margins.len()];
    }
    margins.iter().map(|x| 0.5 + x / (2.0 * m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> Vec<InterestLabel> {
        v.iter().map(|&x| InterestLabel::new(x).unwrap()).collect()
    }

    #[test]
    fn one_dimensional_separation() {
        let d = Dataset::from_rows(vec![vec![-1.0], vec![1.0]], labels(&[0, 1])).unwrap();
        let svm = LinearSvm::train(&d, 0.01, DEFAULT_EPOCHS, 1).unwrap();
        assert_eq!(svm.predict(&[2.0]), InterestLabel::INTERESTED);
        assert_eq!(svm.predict(&[-2.0]), InterestLabel::UNINTERESTED);
    }

    #[test]
    fn heavy_regularisation_predicts_prior_class() {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..30 {
            let x = i as f64 / 10.0;
            rows.push(vec![x]);
            ys.push(u8::from(i >= 9)); // 21 positives vs 9 negatives
        }
        let d = Dataset::from_rows(rows, labels(&ys)).unwrap();
        let loose = LinearSvm::train(&d, 1e-3, 50, 2).unwrap();
        let tight = LinearSvm::train(&d, 1e6, 50, 2).unwrap();
        let wn = |s: &LinearSvm| s.weights().iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(wn(&tight) < 1e-3 * wn(&loose));
        for row in d.features() {
            assert_eq!(tight.predict(row), InterestLabel::INTERESTED);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let rows = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let ys: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        let d = Dataset::from_rows(rows, labels(&ys)).unwrap();
        let a = LinearSvm::train(&d, 0.1, 10, 5).unwrap();
        let b = LinearSvm::train(&d, 0.1, 10, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_features_are_flagged() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]];
        let d = Dataset::from_rows(rows, labels(&[0, 0, 1, 1])).unwrap();
        let svm = LinearSvm::train(&d, 0.01, 20, 0).unwrap();
        assert_eq!(svm.degenerate_features(), &[0]);
        assert_eq!(svm.predict(&[1.0, 3.0]), InterestLabel::INTERESTED);
    }

    #[test]
    fn margin_normalisation() {
        assert_eq!(normalize_margins(&[0.0, 2.0, -1.0]), vec![0.5, 1.0, 0.25]);
        assert_eq!(normalize_margins(&[0.0, 0.0]), vec![0.5, 0.5]);
    }

    #[test]
    fn intercept_search() {
        // all scores zero: majority class sign wins
        assert_eq!(best_intercept(&[0.0; 5], &[1.0, 1.0, 1.0, -1.0, -1.0]), 1.0);
        assert_eq!(best_intercept(&[0.0; 4], &[1.0, 1.0, -1.0, -1.0]), 0.0);
    }
}
