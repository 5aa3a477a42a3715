//! Precomputed image embedding sidecar.
//!
//! Format: UTF-8 text, one record per line, `<image_id>\t<v1>,<v2>,...,<vD>`,
//! no header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl Embeddings {
    pub fn new(vectors: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut dim = None;
        for (id, v) in &vectors {
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::Format(format!(
                        "embedding for {id} has dimension {} but earlier rows have {d}",
                        v.len()
                    )))
                }
                _ => {}
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format(format!("embedding for {id} has non-finite values")));
            }
        }
        Ok(Embeddings {
            dim: dim.unwrap_or(0),
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn covers<'a>(&self, mut ids: impl Iterator<Item = &'a str>) -> bool {
        ids.all(|id| self.vectors.contains_key(id))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.vectors {
            out.push_str(id);
            out.push('\t');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                // `{}` on f64 prints the shortest string that parses back exactly.
                let _ = write!(out, "{x}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut vectors = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("line {}: missing tab separator", lineno + 1)))?;
            let v = values
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            if vectors.insert(id.to_string(), v).is_some() {
                return Err(Error::Format(format!("line {}: duplicate id {id}", lineno + 1)));
            }
        }
        Embeddings::new(vectors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Loads an embedding sidecar. Ids absent from `known_ids` (when given) are
/// kept but reported in the returned warning list.
pub fn load_embeddings(path: &Path, known_ids: Option<&BTreeSet<String>>) -> Result<(Embeddings, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let emb = Embeddings::parse(&text)?;
    let warnings = match known_ids {
        Some(known) => emb
            .ids()
            .filter(|id| !known.contains(*id))
            .map(|id| format!("embedding for unknown image id {id}"))
            .collect(),
        None => Vec::new(),
    };
    Ok((emb, warnings))
}

/// Cosine similarity of two dense vectors, zero when either has zero norm.
pub fn dense_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
