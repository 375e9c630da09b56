//! Concept realm construction and analytics over issue-tracker data.
//!
//! The pipeline runs in stages:
//!
//! 1. [`corpus`] parses a JSON Lines export, preprocesses text and builds a
//!    filtered vocabulary.
//! 2. [`topicmodel`] trains a collapsed Gibbs LDA model and infers per-document
//!    concept weights.
//! 3. [`modelselect`] sweeps the number of concepts and picks the one with the
//!    best coherence minus overlap.
//! 4. [`realm`] associates every issue and comment with a weight vector and
//!    computes scaled and absolute concept frequencies per time window.
//! 5. [`analytics`] runs alignment, evolution, keeper, turnover, entropy and
//!    reciprocal-rank analyses over a realm.
//! 6. [`report`] persists everything as CSV/JSON with a content-hashed manifest.
//!
//! [`synth`] generates deterministic fixture corpora with planted structure.

pub mod analytics;
pub mod corpus;
mod error;
pub mod modelselect;
pub mod realm;
pub mod report;
pub mod rng;
pub mod synth;
pub mod topicmodel;

pub use error::{Error, Result};

/// Version of the persisted model, realm and manifest layouts.
pub const FORMAT_VERSION: u32 = 1;
