use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::domain::InterestLabel;
use crate::error::{Error, Result};

/// Labelled samples. `docs` is either empty or holds one term list per row
/// (used by the naive Bayes text model).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<InterestLabel>,
    ids: Vec<String>,
    docs: Vec<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<InterestLabel>, ids: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() || ids.len() != labels.len() {
            return Err(Error::invalid(format!(
                "dataset rows disagree: {} feature rows, {} labels, {} ids",
                features.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some(d) = features.first().map(Vec::len) {
            if let Some(i) = features.iter().position(|r| r.len() != d) {
                return Err(Error::invalid(format!("row {} has dimension {}, expected {d}", ids[i], features[i].len())));
            }
        }
        if features.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite features"));
        }
        Ok(Dataset { features, labels, ids, docs: Vec::new() })
    }

    /// Convenience constructor with generated ids `r0`, `r1`, ….
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<InterestLabel>) -> Result<Self> {
        let ids = (0..labels.len()).map(|i| format!("r{i}")).collect();
        Self::new(features, labels, ids)
    }

    pub fn with_docs(mut self, docs: Vec<Vec<String>>) -> Result<Self> {
        if docs.len() != self.labels.len() {
            return Err(Error::invalid(format!("{} docs for {} rows", docs.len(), self.labels.len())));
        }
        self.docs = docs;
        Ok(self)
    }

    /// Rows for every image of the corpus, in corpus order. Every image
    /// must carry a label.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let unlabeled: Vec<&str> =
            corpus.images().iter().filter(|i| i.label.is_none()).map(|i| i.id.as_str()).collect();
        if !unlabeled.is_empty() {
            return Err(Error::invalid(format!("unlabelled images: {}", unlabeled.join(", "))));
        }
        let features = corpus.features().iter().map(|f| f.values().to_vec()).collect();
        let labels = corpus.images().iter().filter_map(|i| i.label).collect();
        let ids = corpus.ids().map(str::to_string).collect();
        let docs = (0..corpus.len()).map(|p| corpus.terms(p).to_vec()).collect();
        Self::new(features, labels, ids)?.with_docs(docs)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[InterestLabel] {
        &self.labels
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn docs(&self) -> Option<&[Vec<String>]> {
        (!self.docs.is_empty() || self.is_empty()).then_some(self.docs.as_slice())
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|l| l.is_interested()).count();
        [self.len() - pos, pos]
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
            docs: if self.docs.is_empty() {
                Vec::new()
            } else {
                rows.iter().map(|&i| self.docs[i].clone()).collect()
            },
        }
    }

    pub(crate) fn require_both_classes(&self) -> Result<()> {
        let [neg, pos] = self.class_counts();
        if neg == 0 || pos == 0 {
            return Err(Error::invalid("training data must contain both classes"));
        }
        Ok(())
    }

    fn rows_by_class(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, l) in self.labels.iter().enumerate() {
            out[l.index()].push(i);
        }
        out
    }
}

/// Number of training rows per class: floors of `frac·n_c`, with the rows
/// still missing from `floor(frac·N)` handed to the largest remainders.
fn stratum_sizes(counts: [usize; 2], train_frac: f64) -> [usize; 2] {
    let total = counts[0] + counts[1];
    let target = (train_frac * total as f64).floor() as usize;
    let exact = counts.map(|c| train_frac * c as f64);
    let mut sizes = exact.map(|e| e.floor() as usize);
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut missing = target.saturating_sub(sizes[0] + sizes[1]);
    for c in order.into_iter().cycle().take(4) {
        if missing == 0 {
            break;
        }
        if sizes[c] < counts[c] {
            sizes[c] += 1;
            missing -= 1;
        }
    }
    sizes
}

/// Stratified, seeded train/test split. Row order within each part follows
/// the input order.
pub fn split_dataset(data: &Dataset, train_frac: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid(format!("train_frac {train_frac} outside (0, 1)")));
    }
    if data.len() < 2 {
        return Err(Error::invalid("need at least two rows to split"));
    }
    let mut by_class = data.rows_by_class();
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::Stratification(format!("class {c} has {} member(s), need at least 2", rows.len())));
        }
    }
    let sizes = stratum_sizes([by_class[0].len(), by_class[1].len()], train_frac);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (rows, n_train) in by_class.iter_mut().zip(sizes) {
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..n_train]);
        test.extend_from_slice(&rows[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

/// Stratified k-fold assignment: returns the held-out rows of each fold.
pub fn stratified_folds(labels: &[InterestLabel], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, rows) in by_class.iter().enumerate() {
        if rows.len() < folds {
            return Err(Error::Stratification(format!(
                "class {c} has {} member(s), fewer than {folds} folds",
                rows.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for rows in by_class.iter_mut() {
        rows.shuffle(&mut rng);
        for &r in rows.iter() {
            out[next % folds].push(r);
            next += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}
