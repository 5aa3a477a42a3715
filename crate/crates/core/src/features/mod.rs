//! Classical visual and textual features.

mod embeddings;
mod histogram;
mod stopwords;
mod text;
mod tfidf;

use std::collections::BTreeSet;

pub use embeddings::{dense_cosine, load_embeddings, Embeddings};
pub use histogram::{extract_color_histogram, ColorHistogram, Raster, DEFAULT_BINS_PER_CHANNEL};
pub use stopwords::{is_stopword, STOPWORDS};
pub use text::tokenize_and_clean;
pub use tfidf::{build_tfidf, term_counts, TermVector, TfIdfModel};

use crate::domain::ImageDoc;
use crate::error::{Error, Result};

pub const DEFAULT_TOP_K_TERMS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shape {
    pub width: u32,
    pub height: u32,
    pub aspect_ratio: f64,
}

pub fn extract_shape(image: &ImageDoc) -> Result<Shape> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::invalid(format!(
            "image {} has non-positive dimensions {}x{}",
            image.id, image.width, image.height
        )));
    }
    Ok(Shape {
        width: image.width,
        height: image.height,
        aspect_ratio: f64::from(image.width) / f64::from(image.height),
    })
}

/// Cleaned text terms of an image: title, then description, then cue terms.
pub fn image_terms(image: &ImageDoc) -> Vec<String> {
    let mut terms = tokenize_and_clean(&image.title);
    terms.extend(tokenize_and_clean(&image.description));
    for cue in &image.cues {
        for t in &cue.terms {
            terms.extend(tokenize_and_clean(t));
        }
    }
    terms
}

/// Corpus-level statistics used to normalise per-image features.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub max_width: u32,
    pub max_height: u32,
    pub ids: BTreeSet<String>,
}

impl CorpusStats {
    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a ImageDoc>) -> Self {
        let mut stats = CorpusStats {
            max_width: 0,
            max_height: 0,
            ids: BTreeSet::new(),
        };
        for img in images {
            stats.max_width = stats.max_width.max(img.width);
            stats.max_height = stats.max_height.max(img.height);
            stats.ids.insert(img.id.clone());
        }
        stats
    }
}

/// `[width/max_w, height/max_h, aspect, histogram…, tf-idf block…]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dim_for(bins_per_channel: usize, top_k: usize) -> usize {
        3 + bins_per_channel.pow(3) + top_k
    }
}

/// Assembles the feature vector for one image.
///
/// The tf-idf block holds the image's L2-normalised tf-idf weights for the
/// first `vocab_top_k` vocabulary terms, zero-padded when the vocabulary is
/// smaller.
pub fn image_feature_vector(
    image: &ImageDoc,
    histogram: &ColorHistogram,
    stats: &CorpusStats,
    tfidf: &TfIdfModel,
    vocab_top_k: usize,
) -> Result<FeatureVector> {
    if !stats.ids.contains(&image.id) {
        return Err(Error::invalid(format!(
            "image {} is not part of the corpus statistics",
            image.id
        )));
    }
    let shape = extract_shape(image)?;
    let mut values = Vec::with_capacity(3 + histogram.bins().len() + vocab_top_k);
    values.push(f64::from(shape.width) / f64::from(stats.max_width));
    values.push(f64::from(shape.height) / f64::from(stats.max_height));
    values.push(shape.aspect_ratio);
    values.extend_from_slice(histogram.bins());

    let tv = tfidf.vectorize(&image_terms(image));
    let norm = tv.norm();
    values.extend((0..vocab_top_k).map(|i| match tfidf.vocabulary().get(i) {
        Some(term) if norm > 0.0 => tv.get(term) / norm,
        _ => 0.0,
    }));
    Ok(FeatureVector(values))
}
