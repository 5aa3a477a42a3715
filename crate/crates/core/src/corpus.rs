//! In-memory corpus: images plus everything precomputed from them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::ImageDoc;
use crate::error::{Error, Result};
use crate::features::{
    build_tfidf, image_feature_vector, image_terms, ColorHistogram, CorpusStats, Embeddings, FeatureVector,
    TermVector, TfIdfModel, DEFAULT_BINS_PER_CHANNEL, DEFAULT_TOP_K_TERMS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub bins_per_channel: usize,
    pub top_k_terms: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            bins_per_channel: DEFAULT_BINS_PER_CHANNEL,
            top_k_terms: DEFAULT_TOP_K_TERMS,
        }
    }
}

/// Which vectors drive visual similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisualMode {
    /// `1 − ½·L1` over colour histograms.
    Histogram,
    /// Cosine over sidecar embeddings; active only when every image has one.
    Embedding,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    name: String,
    images: Vec<ImageDoc>,
    index: HashMap<String, usize>,
    histograms: Vec<ColorHistogram>,
    terms: Vec<Vec<String>>,
    doc_vectors: Vec<TermVector>,
    tfidf: TfIdfModel,
    stats: CorpusStats,
    features: Vec<FeatureVector>,
    embeddings: Option<Embeddings>,
    config: FeatureConfig,
}

impl Corpus {
    /// Builds a corpus from images and their colour histograms (same order).
    pub fn build(
        name: impl Into<String>,
        images: Vec<ImageDoc>,
        histograms: Vec<ColorHistogram>,
        config: FeatureConfig,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::invalid("corpus has no images"));
        }
        let terms: Vec<Vec<String>> = images.iter().map(image_terms).collect();
        let tfidf = build_tfidf(&terms)?;
        Self::assemble(name.into(), images, histograms, terms, tfidf, None, config)
    }

    /// Reassembles a corpus from persisted parts, checking that the stored
    /// features agree with what the parts imply.
    pub fn from_parts(
        name: impl Into<String>,
        images: Vec<ImageDoc>,
        histograms: Vec<ColorHistogram>,
        tfidf: TfIdfModel,
        features: Vec<FeatureVector>,
        config: FeatureConfig,
    ) -> Result<Self> {
        let terms: Vec<Vec<String>> = images.iter().map(image_terms).collect();
        let corpus = Self::assemble(name.into(), images, histograms, terms, tfidf, None, config)?;
        if corpus.features != features {
            return Err(Error::Format(
                "stored feature matrix disagrees with manifest and vocabulary".into(),
            ));
        }
        Ok(corpus)
    }

    fn assemble(
        name: String,
        images: Vec<ImageDoc>,
        histograms: Vec<ColorHistogram>,
        terms: Vec<Vec<String>>,
        tfidf: TfIdfModel,
        embeddings: Option<Embeddings>,
        config: FeatureConfig,
    ) -> Result<Self> {
        if images.len() != histograms.len() {
            return Err(Error::invalid(format!(
                "{} images but {} histograms",
                images.len(),
                histograms.len()
            )));
        }
        let mut index = HashMap::with_capacity(images.len());
        let mut violations = Vec::new();
        for (i, img) in images.iter().enumerate() {
            if index.insert(img.id.clone(), i).is_some() {
                violations.push(format!("duplicate image id {}", img.id));
            }
            violations.extend(img.violations());
        }
        if let Some(h) = histograms.iter().find(|h| h.bins_per_channel() != config.bins_per_channel) {
            violations.push(format!(
                "histogram has {} bins per channel, config says {}",
                h.bins_per_channel(),
                config.bins_per_channel
            ));
        }
        if !violations.is_empty() {
            return Err(Error::Schema(violations));
        }
        let stats = CorpusStats::from_images(&images);
        let doc_vectors = terms.iter().map(|t| tfidf.vectorize(t)).collect();
        let features = images
            .iter()
            .zip(&histograms)
            .map(|(img, h)| image_feature_vector(img, h, &stats, &tfidf, config.top_k_terms))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            name,
            images,
            index,
            histograms,
            terms,
            doc_vectors,
            tfidf,
            stats,
            features,
            embeddings,
            config,
        })
    }

    pub fn with_embeddings(mut self, embeddings: Embeddings) -> Self {
        self.embeddings = Some(embeddings);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    pub fn images(&self) -> &[ImageDoc] {
        &self.images
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.images.iter().map(|i| i.id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn image(&self, id: &str) -> Option<&ImageDoc> {
        self.position(id).map(|i| &self.images[i])
    }

    pub(crate) fn require(&self, id: &str) -> Result<usize> {
        self.position(id).ok_or_else(|| Error::UnknownId {
            kind: "image",
            id: id.to_string(),
        })
    }

    pub fn histogram(&self, pos: usize) -> &ColorHistogram {
        &self.histograms[pos]
    }

    pub fn histograms(&self) -> &[ColorHistogram] {
        &self.histograms
    }

    pub fn terms(&self, pos: usize) -> &[String] {
        &self.terms[pos]
    }

    pub fn doc_vector(&self, pos: usize) -> &TermVector {
        &self.doc_vectors[pos]
    }

    pub fn tfidf(&self) -> &TfIdfModel {
        &self.tfidf
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn embeddings(&self) -> Option<&Embeddings> {
        self.embeddings.as_ref()
    }

    pub fn visual_mode(&self) -> VisualMode {
        match &self.embeddings {
            Some(e) if !e.is_empty() && e.covers(self.ids()) => VisualMode::Embedding,
            _ => VisualMode::Histogram,
        }
    }

    /// Vector used for visual similarity of the image at `pos`.
    pub fn visual_vector(&self, pos: usize) -> &[f64] {
        match (self.visual_mode(), &self.embeddings) {
            (VisualMode::Embedding, Some(e)) => e.get(&self.images[pos].id).expect("covered"),
            _ => self.histograms[pos].bins(),
        }
    }

    /// Distinct categories in first-seen order.
    pub fn categories(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in self.images.iter().filter_map(|i| i.category.as_deref()) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}
