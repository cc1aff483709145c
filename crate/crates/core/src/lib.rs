//! Service, segment and visit embeddings for timestamped medical-event
//! journeys.
//!
//! Stages, bottom-up:
//!
//! - [`ehr`]: journey data model, ingestion, synthetic cohorts, 24-hour segmentation.
//! - [`graph`]: windowed service co-occurrence graph and biased random walks.
//! - [`embed`]: skip-gram service embeddings, PCA projection, embedding files.
//! - [`gat`]: graph attention layer with manual gradients.
//! - [`visit`]: segment and visit embeddings refined by auxiliary code prediction.
//! - [`eval`]: logistic regression and classification metrics.
//! - [`pipeline`]: config-driven batch runs with resumable artifacts.

pub mod ehr;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gat;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod visit;

pub use error::{Error, Result};
pub use exec::Execution;
