//! Information scent: session profiles built from implicit feedback, scent
//! scoring, diminishing returns, access cost and diet accounting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, VisualMode};
use crate::error::{Error, Result};
use crate::features::{dense_cosine, tokenize_and_clean, TermVector};

pub const CLICK_WEIGHT: f64 = 1.0;
pub const EXAMINE_WEIGHT: f64 = 0.5;
pub const PREFERENCE_WEIGHT: f64 = 1.0;

/// Scent parameters. Surfaced as config keys `scent.text_weight`,
/// `scent.visual_weight`, `scent.gamma` and `scent.kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScentConfig {
    pub text_weight: f64,
    pub visual_weight: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl Default for ScentConfig {
    fn default() -> Self {
        ScentConfig {
            text_weight: 0.5,
            visual_weight: 0.5,
            gamma: 0.85,
            kappa: 0.05,
        }
    }
}

impl ScentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.text_weight >= 0.0
            && self.visual_weight >= 0.0
            && self.text_weight + self.visual_weight > 0.0
            && self.gamma > 0.0
            && self.gamma <= 1.0
            && self.kappa >= 0.0
            && self.kappa.is_finite()
            && (self.text_weight + self.visual_weight).is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid scent config {self:?}")))
        }
    }

    /// Applies one `scent.<name>=<value>` override; rejected values leave
    /// the config unchanged.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let mut next = *self;
        let slot = match key {
            "scent.text_weight" => &mut next.text_weight,
            "scent.visual_weight" => &mut next.visual_weight,
            "scent.gamma" => &mut next.gamma,
            "scent.kappa" => &mut next.kappa,
            other => return Err(Error::invalid(format!("unknown config key {other}"))),
        };
        *slot = value;
        next.validate().map_err(|_| Error::invalid(format!("{key}={value} gives an invalid scent config")))?;
        *self = next;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    CueClick,
    PreferenceSelect,
    ImageSelect,
    Skip,
    Examine,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::CueClick => "cue_click",
            EventKind::PreferenceSelect => "preference_select",
            EventKind::ImageSelect => "image_select",
            EventKind::Skip => "skip",
            EventKind::Examine => "examine",
        }
    }
}

/// One observed user action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    #[serde(default)]
    pub seq: u64,
}

impl InteractionEvent {
    fn new(kind: EventKind) -> Self {
        InteractionEvent {
            kind,
            image_id: None,
            cue_id: None,
            term: None,
            seq: 0,
        }
    }

    pub fn cue_click(image_id: &str, cue_id: &str) -> Self {
        InteractionEvent {
            image_id: Some(image_id.into()),
            cue_id: Some(cue_id.into()),
            ..Self::new(EventKind::CueClick)
        }
    }

    pub fn preference_select(term: &str) -> Self {
        InteractionEvent {
            term: Some(term.into()),
            ..Self::new(EventKind::PreferenceSelect)
        }
    }

    pub fn image_select(image_id: &str) -> Self {
        InteractionEvent {
            image_id: Some(image_id.into()),
            ..Self::new(EventKind::ImageSelect)
        }
    }

    pub fn skip(image_id: &str) -> Self {
        InteractionEvent {
            image_id: Some(image_id.into()),
            ..Self::new(EventKind::Skip)
        }
    }

    pub fn examine(image_id: &str) -> Self {
        InteractionEvent {
            image_id: Some(image_id.into()),
            ..Self::new(EventKind::Examine)
        }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }

    fn required<'a>(&self, field: &'a Option<String>, name: &str) -> Result<&'a str> {
        field
            .as_deref()
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::invalid(format!("{} event requires {name}", self.kind.as_str())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consumed {
    pub image_id: String,
    pub scent: f64,
}

/// Accumulated implicit-feedback state of one session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionProfile {
    pub term_weights: BTreeMap<String, f64>,
    pub visual_centroid: Option<Vec<f64>>,
    /// Number of images folded into `visual_centroid`.
    pub visual_count: u32,
    pub iteration: u32,
    pub diet_total: f64,
    pub consumed: Vec<Consumed>,
}

impl SessionProfile {
    /// Profile seeded with cleaned query terms at click weight.
    pub fn seeded(query: &str) -> Self {
        let mut p = SessionProfile::default();
        p.add_terms(tokenize_and_clean(query), CLICK_WEIGHT);
        p
    }

    fn add_terms(&mut self, terms: impl IntoIterator<Item = String>, weight: f64) {
        for t in terms {
            *self.term_weights.entry(t).or_insert(0.0) += weight;
        }
    }

    fn blend_visual(&mut self, v: &[f64]) {
        let n = f64::from(self.visual_count);
        match &mut self.visual_centroid {
            Some(c) if c.len() == v.len() => {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci = (*ci * n + vi) / (n + 1.0);
                }
            }
            _ => self.visual_centroid = Some(v.to_vec()),
        }
        self.visual_count += 1;
    }

    /// Profile terms weighted by idf.
    pub fn term_vector(&self, corpus: &Corpus) -> TermVector {
        corpus
            .tfidf()
            .weigh(self.term_weights.iter().map(|(t, w)| (t.as_str(), *w)))
    }

    /// Applies `event` in place. On error the profile is left untouched.
    pub fn apply(&mut self, event: &InteractionEvent, corpus: &Corpus, config: &ScentConfig) -> Result<()> {
        *self = update_profile(self, event, corpus, config)?;
        Ok(())
    }
}

/// Returns the profile after `event`.
///
/// * `cue_click`: cue terms at +1.0; the image's visual vector joins the centroid's running mean
/// * `examine`: title terms at +0.5
/// * `preference_select`: the term at +1.0 and one more refinement iteration
/// * `image_select`: appends the image at its current discounted scent to the diet
/// * `skip`: no change
pub fn update_profile(
    profile: &SessionProfile,
    event: &InteractionEvent,
    corpus: &Corpus,
    config: &ScentConfig,
) -> Result<SessionProfile> {
    let image_pos = match &event.image_id {
        Some(id) => Some(corpus.require(id)?),
        None => None,
    };
    let need_image = || {
        event.required(&event.image_id, "image_id")?;
        Ok::<usize, Error>(image_pos.expect("checked above"))
    };
    let mut next = profile.clone();
    match event.kind {
        EventKind::CueClick => {
            let pos = need_image()?;
            let cue_id = event.required(&event.cue_id, "cue_id")?;
            let image = &corpus.images()[pos];
            let cue = image.cue(cue_id).ok_or_else(|| Error::UnknownId {
                kind: "cue",
                id: cue_id.to_string(),
            })?;
            next.add_terms(cue.terms.iter().flat_map(|t| tokenize_and_clean(t)), CLICK_WEIGHT);
            next.blend_visual(corpus.visual_vector(pos));
        }
        EventKind::Examine => {
            let pos = need_image()?;
            next.add_terms(tokenize_and_clean(&corpus.images()[pos].title), EXAMINE_WEIGHT);
        }
        EventKind::PreferenceSelect => {
            let term = event.required(&event.term, "term")?;
            let terms = tokenize_and_clean(term);
            if terms.is_empty() {
                return Err(Error::invalid(format!("preference term {term:?} is empty after cleaning")));
            }
            next.add_terms(terms, PREFERENCE_WEIGHT);
            next.iteration += 1;
        }
        EventKind::ImageSelect => {
            let pos = need_image()?;
            let score = raw_scent_at(profile, pos, corpus, config)?;
            next.consumed.push(Consumed {
                image_id: corpus.images()[pos].id.clone(),
                scent: score.discounted,
            });
            next.diet_total += score.discounted;
        }
        EventKind::Skip => {}
    }
    Ok(next)
}

/// Raw and discounted scent with per-component breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScentScore {
    pub raw: f64,
    pub discounted: f64,
    #[serde(rename = "text")]
    pub text_component: f64,
    #[serde(rename = "visual")]
    pub visual_component: f64,
    #[serde(rename = "iteration")]
    pub iteration_at_scoring: u32,
}

/// Visual similarity in `[0, 1]`, symmetric, 1 for identical vectors.
pub fn visual_similarity(a: &[f64], b: &[f64], mode: VisualMode) -> f64 {
    let s = match mode {
        VisualMode::Histogram => 1.0 - 0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>(),
        VisualMode::Embedding => dense_cosine(a, b),
    };
    s.clamp(0.0, 1.0)
}

/// Combines components into raw scent. Without a visual component the
/// weights renormalise onto text alone.
pub fn combine(text: f64, visual: Option<f64>, config: &ScentConfig) -> f64 {
    match visual {
        Some(v) => {
            let total = config.text_weight + config.visual_weight;
            ((config.text_weight * text + config.visual_weight * v) / total).clamp(0.0, 1.0)
        }
        None => text.clamp(0.0, 1.0),
    }
}

pub fn raw_scent(profile: &SessionProfile, image_id: &str, corpus: &Corpus, config: &ScentConfig) -> Result<ScentScore> {
    let pos = corpus.require(image_id)?;
    raw_scent_at(profile, pos, corpus, config)
}

pub(crate) fn raw_scent_at(
    profile: &SessionProfile,
    pos: usize,
    corpus: &Corpus,
    config: &ScentConfig,
) -> Result<ScentScore> {
    let text = profile.term_vector(corpus).cosine(corpus.doc_vector(pos)).clamp(0.0, 1.0);
    score_with_text(profile, pos, text, corpus, config)
}

/// Scores with a precomputed text component, for ranking many candidates
/// against one profile vector.
pub(crate) fn score_with_text(
    profile: &SessionProfile,
    pos: usize,
    text: f64,
    corpus: &Corpus,
    config: &ScentConfig,
) -> Result<ScentScore> {
    let visual = profile
        .visual_centroid
        .as_deref()
        .map(|c| visual_similarity(c, corpus.visual_vector(pos), corpus.visual_mode()));
    let raw = combine(text, visual, config);
    Ok(ScentScore {
        raw,
        discounted: discounted_scent(raw, profile.iteration, config.gamma)?,
        text_component: text,
        visual_component: visual.unwrap_or(0.0),
        iteration_at_scoring: profile.iteration,
    })
}

/// `raw · gamma^iteration`.
pub fn discounted_scent(raw: f64, iteration: u32, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&raw) {
        return Err(Error::invalid(format!("raw scent {raw} outside [0, 1]")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid(format!("gamma {gamma} outside (0, 1]")));
    }
    Ok(raw * gamma.powf(f64::from(iteration)))
}

/// `kappa · log2(1 + rank)` for a 1-based rank.
pub fn access_cost(rank: usize, kappa: f64) -> Result<f64> {
    if rank < 1 {
        return Err(Error::invalid("rank is 1-based"));
    }
    if !(kappa >= 0.0) {
        return Err(Error::invalid(format!("kappa {kappa} must be non-negative")));
    }
    Ok(kappa * (1.0 + rank as f64).log2())
}

pub fn diet_total(profile: &SessionProfile) -> f64 {
    profile.consumed.iter().map(|c| c.scent).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragedRanking {
    /// `(image id, mean discounted scent)`, descending, ties by id.
    pub ranked: Vec<(String, f64)>,
    pub median: f64,
    pub interesting: Vec<String>,
    pub uninteresting: Vec<String>,
}

/// Averages per-run scents over the runs in which each image surfaced and
/// splits at the median: images at or above it are interesting.
pub fn averaged_scent_ranking(runs: &[BTreeMap<String, f64>]) -> Result<AveragedRanking> {
    if runs.is_empty() {
        return Err(Error::invalid("averaged ranking needs at least one run"));
    }
    let mut per_image: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for (id, s) in run {
            per_image.entry(id).or_default().push(*s);
        }
    }
    let mut ranked: Vec<(String, f64)> = per_image
        .into_iter()
        .map(|(id, mut scents)| {
            // summing in sorted order keeps the mean independent of run order
            scents.sort_by(f64::total_cmp);
            let mean = scents.iter().sum::<f64>() / scents.len() as f64;
            (id.to_string(), mean)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let n = ranked.len();
    let median = if n == 0 {
        0.0
    } else if n % 2 == 1 {
        ranked[n / 2].1
    } else {
        (ranked[n / 2 - 1].1 + ranked[n / 2].1) / 2.0
    };
    let (interesting, uninteresting): (Vec<_>, Vec<_>) = ranked.iter().partition(|(_, m)| *m >= median);
    Ok(AveragedRanking {
        interesting: interesting.into_iter().map(|(id, _)| id.clone()).collect(),
        uninteresting: uninteresting.into_iter().map(|(id, _)| id.clone()).collect(),
        median,
        ranked,
    })
}
