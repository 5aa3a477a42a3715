use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse term-weight vector keyed by term.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TermVector(BTreeMap<String, f64>);

impl TermVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(t, w)| (t.as_str(), *w))
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &TermVector) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.0.iter().map(|(t, w)| w * large.get(t)).sum()
    }

    /// Cosine similarity; zero when either vector has zero norm.
    pub fn cosine(&self, other: &TermVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

impl FromIterator<(String, f64)> for TermVector {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        let mut map = BTreeMap::new();
        for (t, w) in iter {
            *map.entry(t).or_insert(0.0) += w;
        }
        TermVector(map)
    }
}

/// Raw term frequencies of a token list.
pub fn term_counts<S: AsRef<str>>(terms: &[S]) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for t in terms {
        *counts.entry(t.as_ref().to_string()).or_insert(0.0) += 1.0;
    }
    counts
}

/// Document-frequency statistics over a corpus of term lists.
///
/// Vocabulary order is descending document frequency, then ascending term.
/// Feature vectors use a prefix of this order.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    vocabulary: Vec<String>,
    doc_freq: Vec<u32>,
    n_docs: u32,
    index: HashMap<String, usize>,
}

impl TfIdfModel {
    pub fn from_parts(vocabulary: Vec<String>, doc_freq: Vec<u32>, n_docs: u32) -> Result<Self> {
        if vocabulary.len() != doc_freq.len() {
            return Err(Error::Format(format!(
                "vocabulary has {} terms but {} document frequencies",
                vocabulary.len(),
                doc_freq.len()
            )));
        }
        if n_docs == 0 {
            return Err(Error::invalid("tf-idf model over an empty corpus"));
        }
        if let Some(pos) = doc_freq.iter().position(|&d| d == 0 || d > n_docs) {
            return Err(Error::Format(format!(
                "term {:?} has document frequency {} outside 1..={n_docs}",
                vocabulary[pos], doc_freq[pos]
            )));
        }
        let index: HashMap<String, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != vocabulary.len() {
            return Err(Error::Format("vocabulary contains duplicate terms".into()));
        }
        Ok(TfIdfModel {
            vocabulary,
            doc_freq,
            n_docs,
            index,
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }

    pub fn n_docs(&self) -> u32 {
        self.n_docs
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> u32 {
        self.position(term).map_or(0, |i| self.doc_freq[i])
    }

    /// `ln((1 + N) / (1 + df)) + 1`. Unseen terms use `df = 0`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = f64::from(self.n_docs);
        ((1.0 + n) / (1.0 + f64::from(self.doc_freq(term)))).ln() + 1.0
    }

    /// Weights arbitrary non-negative term frequencies by idf.
    pub fn weigh<'a, I>(&self, tf: I) -> TermVector
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        tf.into_iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(t, w)| (t.to_string(), w * self.idf(t)))
            .collect()
    }

    /// tf-idf vector of a token list.
    pub fn vectorize<S: AsRef<str>>(&self, terms: &[S]) -> TermVector {
        let counts = term_counts(terms);
        self.weigh(counts.iter().map(|(t, c)| (t.as_str(), *c)))
    }
}

pub fn build_tfidf<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<TfIdfModel> {
    if docs.is_empty() {
        return Err(Error::invalid("cannot build tf-idf over an empty corpus"));
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        let mut uniq: Vec<&str> = doc.iter().map(AsRef::as_ref).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(&str, u32)> = df.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (vocabulary, doc_freq) = entries.into_iter().map(|(t, d)| (t.to_string(), d)).unzip();
    TfIdfModel::from_parts(vocabulary, doc_freq, docs.len() as u32)
}
