use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, mean_of, Criterion, MaxFeatures, Tree, TreeParams};
use super::Dataset;
use crate::domain::InterestLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl ForestParams {
    pub fn new(n_trees: usize, max_depth: usize) -> Self {
        ForestParams { n_trees, max_depth, bootstrap: true, max_features: MaxFeatures::Sqrt }
    }
}

/// Bagged Gini trees with per-split feature subsampling. Tree `i` draws its
/// bootstrap sample and feature subsets from seed `seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    pub fn train(data: &Dataset, params: ForestParams, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("random forest: empty dataset"));
        }
        if params.n_trees == 0 {
            return Err(Error::invalid("random forest: n_trees must be at least 1"));
        }
        let ys: Vec<f64> = data.labels().iter().map(|l| f64::from(l.value())).collect();
        let tree_params = TreeParams {
            criterion: Criterion::Gini,
            max_depth: params.max_depth,
            max_features: params.max_features,
            min_samples_split: 2,
        };
        let n = data.len();
        let trees = (0..params.n_trees)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
                let rows = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow(data.features(), &ys, rows, &tree_params, &mut rng, mean_of(&ys))
            })
            .collect();
        Ok(RandomForest { trees, dim: data.dim() })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fraction of trees voting for class 1. A tree votes 1 when its leaf's
    /// positive fraction exceeds one half.
    pub fn vote_fraction(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(row) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Majority vote; ties go to class 0.
    pub fn predict(&self, row: &[f64]) -> InterestLabel {
        InterestLabel::from(self.vote_fraction(row) > 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[u8]) -> Vec<InterestLabel> {
        v.iter().map(|&x| InterestLabel::new(x).unwrap()).collect()
    }

    #[test]
    fn single_stump_fits_split_data() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let d = Dataset::from_rows(rows, labels(&ys)).unwrap();
        let params = ForestParams { bootstrap: false, ..ForestParams::new(1, 1) };
        let rf = RandomForest::train(&d, params, 0).unwrap();
        for (row, y) in d.features().iter().zip(d.labels()) {
            assert_eq!(rf.predict(row), *y);
        }
        assert_eq!(rf.vote_fraction(&[9.0]), 1.0);
    }

    /// Greedy CART by direct enumeration: every feature, every observed value
    /// pair midpoint, impurity counted from scratch.
    enum Oracle {
        Leaf(f64),
        Split(usize, f64, Box<Oracle>, Box<Oracle>),
    }

    fn gini_count(rows: &[(Vec<f64>, u8)]) -> f64 {
        if rows.is_empty() {
            return 0.0;
        }
        let n = rows.len() as f64;
        let p = rows.iter().filter(|r| r.1 == 1).count() as f64 / n;
        n * (1.0 - p * p - (1.0 - p) * (1.0 - p))
    }

    fn oracle(rows: Vec<(Vec<f64>, u8)>, depth: usize) -> Oracle {
        let frac = rows.iter().filter(|r| r.1 == 1).count() as f64 / rows.len() as f64;
        let parent = gini_count(&rows);
        if depth == 0 || parent < 1e-12 || rows.len() < 2 {
            return Oracle::Leaf(frac);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].0.len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.0[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let (l, r): (Vec<_>, Vec<_>) = rows.iter().cloned().partition(|x| x.0[f] <= t);
                let imp = gini_count(&l) + gini_count(&r);
                if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                    best = Some((imp, f, t));
                }
            }
        }
        match best {
            Some((imp, f, t)) if imp < parent - 1e-12 => {
                let (l, r): (Vec<_>, Vec<_>) = rows.into_iter().partition(|x| x.0[f] <= t);
                Oracle::Split(f, t, Box::new(oracle(l, depth - 1)), Box::new(oracle(r, depth - 1)))
            }
            _ => Oracle::Leaf(frac),
        }
    }

    fn oracle_predict(o: &Oracle, x: &[f64]) -> f64 {
        match o {
            Oracle::Leaf(v) => *v,
            Oracle::Split(f, t, l, r) => oracle_predict(if x[*f] <= *t { l } else { r }, x),
        }
    }

    #[test]
    fn single_full_tree_matches_exhaustive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rows: Vec<Vec<f64>> = (0..24).map(|_| (0..3).map(|_| f64::from(rng.gen_range(0..8u8))).collect()).collect();
        let ys: Vec<u8> = rows.iter().map(|r| u8::from(r[0] + 2.0 * r[2] > 9.0 || r[1] == 3.0)).collect();
        let d = Dataset::from_rows(rows.clone(), labels(&ys)).unwrap();
        for depth in 1..5 {
            let params = ForestParams { bootstrap: false, max_features: MaxFeatures::All, ..ForestParams::new(1, depth) };
            let rf = RandomForest::train(&d, params, 3).unwrap();
            let o = oracle(rows.iter().cloned().zip(ys.iter().copied()).collect(), depth);
            for _ in 0..200 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..9.0)).collect();
                let want = u8::from(oracle_predict(&o, &x) > 0.5);
                assert_eq!(rf.predict(&x).value(), want, "depth {depth} at {x:?}");
            }
        }
    }

    #[test]
    fn deterministic_and_rejects_empty() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64, (i % 5) as f64, i as f64]).collect();
        let ys: Vec<u8> = (0..30).map(|i| u8::from(i % 7 > 3)).collect();
        let d = Dataset::from_rows(rows, labels(&ys)).unwrap();
        assert_eq!(RandomForest::train(&d, ForestParams::new(10, 4), 8).unwrap(), RandomForest::train(&d, ForestParams::new(10, 4), 8).unwrap());
        let empty = Dataset::from_rows(vec![], vec![]).unwrap();
        assert!(RandomForest::train(&empty, ForestParams::new(3, 3), 0).is_err());
    }
}
