//! Search, similar-image retrieval, scent re-ranking and preference options.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::domain::ImageDoc;
use crate::error::{Error, Result};
use crate::features::tokenize_and_clean;
use crate::scent::{score_with_text, visual_similarity, ScentConfig, ScentScore, SessionProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub image_id: String,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scent: Option<ScentScore>,
    pub matched_cues: Vec<String>,
}

/// Descending score, then ascending id.
pub fn rank_order(a: &RankedItem, b: &RankedItem) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.image_id.cmp(&b.image_id))
}

fn matched_cues(image: &ImageDoc, wanted: impl Fn(&str) -> bool) -> Vec<String> {
    image
        .cues
        .iter()
        .filter(|c| c.terms.iter().flat_map(|t| tokenize_and_clean(t)).any(|t| wanted(&t)))
        .map(|c| c.id.clone())
        .collect()
}

/// tf-idf cosine search over image text. Zero-score images are left out.
pub fn search(query: &str, corpus: &Corpus, k: usize) -> Result<Vec<RankedItem>> {
    let terms = tokenize_and_clean(query);
    if terms.is_empty() {
        return Err(Error::InvalidQuery(format!("query {query:?} has no terms after cleaning")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let qv = corpus.tfidf().vectorize(&terms);
    let wanted: BTreeSet<&str> = terms.iter().map(String::as_str).collect();
    let mut items: Vec<RankedItem> = corpus
        .images()
        .iter()
        .enumerate()
        .filter_map(|(pos, img)| {
            let score = qv.cosine(corpus.doc_vector(pos));
            (score > 0.0).then(|| RankedItem {
                image_id: img.id.clone(),
                score,
                scent: None,
                matched_cues: matched_cues(img, |t| wanted.contains(t)),
            })
        })
        .collect();
    items.sort_by(rank_order);
    items.truncate(k);
    Ok(items)
}

/// Images most similar to `seed`: ½ text cosine + ½ visual similarity.
pub fn similar_images(seed: &str, corpus: &Corpus, k: usize) -> Result<Vec<RankedItem>> {
    let seed_pos = corpus.position(seed).ok_or_else(|| Error::NotFound {
        kind: "image",
        id: seed.to_string(),
    })?;
    let seed_vec = corpus.doc_vector(seed_pos);
    let seed_visual = corpus.visual_vector(seed_pos);
    let mode = corpus.visual_mode();
    let mut items: Vec<RankedItem> = (0..corpus.len())
        .filter(|&pos| pos != seed_pos)
        .map(|pos| {
            let text = seed_vec.cosine(corpus.doc_vector(pos)).clamp(0.0, 1.0);
            let visual = visual_similarity(seed_visual, corpus.visual_vector(pos), mode);
            RankedItem {
                image_id: corpus.images()[pos].id.clone(),
                score: 0.5 * text + 0.5 * visual,
                scent: None,
                matched_cues: Vec::new(),
            }
        })
        .collect();
    items.sort_by(rank_order);
    items.truncate(k);
    Ok(items)
}

/// Scores candidates by discounted scent at the profile's current
/// iteration. Duplicate candidate ids are scored once.
pub fn rank_by_scent(
    candidates: &[String],
    profile: &SessionProfile,
    corpus: &Corpus,
    config: &ScentConfig,
) -> Result<Vec<RankedItem>> {
    let positions = candidates
        .iter()
        .map(|id| corpus.require(id))
        .collect::<Result<BTreeSet<usize>>>()?;
    let pv = profile.term_vector(corpus);
    let mut items = positions
        .into_iter()
        .map(|pos| {
            let text = pv.cosine(corpus.doc_vector(pos)).clamp(0.0, 1.0);
            let scent = score_with_text(profile, pos, text, corpus, config)?;
            let image = &corpus.images()[pos];
            Ok(RankedItem {
                image_id: image.id.clone(),
                score: scent.discounted,
                scent: Some(scent),
                matched_cues: matched_cues(image, |t| profile.term_weights.contains_key(t)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    items.sort_by(rank_order);
    Ok(items)
}

/// The `m` most frequent cue terms across `results`, skipping `exclude`,
/// ties alphabetical.
pub fn preference_options(results: &[RankedItem], corpus: &Corpus, m: usize, exclude: &[String]) -> Vec<String> {
    let mut tally: BTreeMap<String, usize> = BTreeMap::new();
    for item in results {
        let Some(image) = corpus.image(&item.image_id) else {
            continue;
        };
        for cue in &image.cues {
            for term in cue.terms.iter().flat_map(|t| tokenize_and_clean(t)) {
                if !exclude.contains(&term) {
                    *tally.entry(term).or_insert(0) += 1;
                }
            }
        }
    }
    let mut terms: Vec<(String, usize)> = tally.into_iter().collect();
    terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    terms.into_iter().take(m).map(|(t, _)| t).collect()
}
