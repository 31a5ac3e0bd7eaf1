//! Core library for studying moderation outcomes in a community
//! conversation record: reconstructing block spans from a moderation
//! log, labeling post-block trajectories, matching comparable users,
//! extracting engagement and linguistic-cue features, and fitting a
//! small linear model over the result.

pub mod cues;
pub mod error;
pub mod features;
pub mod ingest;
pub mod matching;
pub mod model;
pub mod report;
pub mod stats;
pub mod synth;
pub mod trajectory;
pub mod types;

pub use types::*;
