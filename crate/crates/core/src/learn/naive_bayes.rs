use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::InterestLabel;
use crate::error::{Error, Result};

/// Multinomial naive Bayes over keyword counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    alpha: f64,
    log_prior: [f64; 2],
    /// Smoothed log P(term | class) per vocabulary term.
    log_likelihood: BTreeMap<String, [f64; 2]>,
}

impl NaiveBayes {
    pub fn train<S: AsRef<str>>(docs: &[Vec<S>], labels: &[InterestLabel], alpha: f64) -> Result<Self> {
        if docs.len() != labels.len() {
            return Err(Error::invalid("naive Bayes: docs and labels differ in length"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("naive Bayes: alpha {alpha} must be positive")));
        }
        let mut class_docs = [0usize; 2];
        let mut counts: BTreeMap<&str, [f64; 2]> = BTreeMap::new();
        let mut totals = [0.0f64; 2];
        for (doc, label) in docs.iter().zip(labels) {
            let c = label.index();
            class_docs[c] += 1;
            for t in doc {
                counts.entry(t.as_ref()).or_insert([0.0; 2])[c] += 1.0;
                totals[c] += 1.0;
            }
        }
        if class_docs.contains(&0) {
            return Err(Error::invalid("naive Bayes needs both classes in training data"));
        }
        let n = labels.len() as f64;
        let v = counts.len() as f64;
        let log_prior = class_docs.map(|k| (k as f64 / n).ln());
        let log_likelihood = counts
            .into_iter()
            .map(|(t, c)| {
                let ll = [0, 1].map(|k| ((c[k] + alpha) / (totals[k] + alpha * v)).ln());
                (t.to_string(), ll)
            })
            .collect();
        Ok(NaiveBayes { alpha, log_prior, log_likelihood })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary(&self) -> BTreeSet<&str> {
        self.log_likelihood.keys().map(String::as_str).collect()
    }

    /// Joint log-probabilities `[log P(0, doc), log P(1, doc)]` up to a shared
    /// constant. Out-of-vocabulary terms are ignored.
    pub fn joint_log_likelihood<S: AsRef<str>>(&self, doc: &[S]) -> [f64; 2] {
        let mut jll = self.log_prior;
        for t in doc {
            if let Some(ll) = self.log_likelihood.get(t.as_ref()) {
                jll[0] += ll[0];
                jll[1] += ll[1];
            }
        }
        jll
    }

    /// Posterior probability of class 1.
    pub fn posterior<S: AsRef<str>>(&self, doc: &[S]) -> f64 {
        let [a, b] = self.joint_log_likelihood(doc);
        1.0 / (1.0 + (a - b).exp())
    }

    /// Argmax posterior; ties go to class 0.
    pub fn predict<S: AsRef<str>>(&self, doc: &[S]) -> InterestLabel {
        let [a, b] = self.joint_log_likelihood(doc);
        InterestLabel::from(b > a)
    }
}
