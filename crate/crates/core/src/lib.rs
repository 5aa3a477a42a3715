//! Content-based image recommendation driven by information scent.
//!
//! Images carry proximal cues (visual regions, keywords, bookmark tags).
//! Implicit feedback on those cues builds a session profile, candidates are
//! ranked by discounted scent, and an offline pipeline classifies images as
//! interested or uninterested.

pub mod corpus;
pub mod domain;
pub mod error;
pub mod features;
pub mod forage;
pub mod ingest;
pub mod learn;
pub mod recommend;
pub mod scent;
pub mod session;

pub use corpus::{Corpus, FeatureConfig, VisualMode};
pub use error::{Error, Result};
