//! The live preference loop shared by the HTTP service and the simulator.
//!
//! A session keeps a candidate pool: the initial query's search hits, grown
//! by the search hits of every selected preference term. Recommendations
//! are the pool re-ranked by discounted scent.

use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::features::tokenize_and_clean;
use crate::recommend::{preference_options, rank_by_scent, search, RankedItem};
use crate::scent::{EventKind, InteractionEvent, ScentConfig, SessionProfile};

pub const DEFAULT_POOL_SIZE: usize = 50;
pub const DEFAULT_PREFERENCE_COUNT: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    query: String,
    query_terms: Vec<String>,
    profile: SessionProfile,
    pool: Vec<String>,
    events: Vec<InteractionEvent>,
    #[serde(skip)]
    config: ScentConfig,
    pool_size: usize,
}

impl Session {
    pub fn start(query: &str, corpus: &Corpus, config: ScentConfig, pool_size: usize) -> Result<Self> {
        config.validate()?;
        let hits = search(query, corpus, pool_size)?;
        Ok(Session {
            query: query.to_string(),
            query_terms: tokenize_and_clean(query),
            profile: SessionProfile::seeded(query),
            pool: hits.into_iter().map(|h| h.image_id).collect(),
            events: Vec::new(),
            config,
            pool_size,
        })
    }

    /// Rebuilds a session from its event log.
    pub fn replay(
        query: &str,
        events: &[InteractionEvent],
        corpus: &Corpus,
        config: ScentConfig,
        pool_size: usize,
    ) -> Result<Self> {
        let mut s = Session::start(query, corpus, config, pool_size)?;
        for ev in events {
            s.record(ev.clone(), corpus)?;
        }
        Ok(s)
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn query_terms(&self) -> &[String] {
        &self.query_terms
    }

    pub fn profile(&self) -> &SessionProfile {
        &self.profile
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn config(&self) -> &ScentConfig {
        &self.config
    }

    /// Applies an event, assigning it the next sequence index.
    pub fn record(&mut self, mut event: InteractionEvent, corpus: &Corpus) -> Result<&InteractionEvent> {
        event.seq = self.events.len() as u64;
        self.profile.apply(&event, corpus, &self.config)?;
        if event.kind == EventKind::PreferenceSelect {
            let term = event.term.as_deref().unwrap_or_default();
            match search(term, corpus, self.pool_size) {
                Ok(hits) => {
                    for h in hits {
                        if !self.pool.contains(&h.image_id) {
                            self.pool.push(h.image_id);
                        }
                    }
                }
                Err(Error::InvalidQuery(_)) => {}
                Err(e) => return Err(e),
            }
        }
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    pub fn recommendations(&self, corpus: &Corpus, k: usize) -> Result<Vec<RankedItem>> {
        let mut items = rank_by_scent(&self.pool, &self.profile, corpus, &self.config)?;
        items.truncate(k);
        Ok(items)
    }

    /// Preference chips for `items`, leaving out query terms and terms already chosen.
    pub fn preferences(&self, items: &[RankedItem], corpus: &Corpus, m: usize) -> Vec<String> {
        let mut exclude = self.query_terms.clone();
        for ev in self.events.iter().filter(|e| e.kind == EventKind::PreferenceSelect) {
            exclude.extend(tokenize_and_clean(ev.term.as_deref().unwrap_or_default()));
        }
        preference_options(items, corpus, m, &exclude)
    }
}
