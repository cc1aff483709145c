//! Segment and visit embeddings.
//!
//! Segment vectors start as the mean of their codes' service embeddings, are
//! refined by an attention layer over each admission's chain of segments while
//! predicting the codes of the current and the next segment, and are then
//! pooled into one vector per admission. Visit vectors are refined again over a
//! k-nearest-neighbor graph while predicting every code of the admission.

mod decoder;
mod segments;
mod visits;

pub use decoder::AuxDecoder;
pub use segments::{
    init_segment_embeddings, refine_segments, train_segment_refiner, SegmentEmbeddingSet, SegmentRefiner,
};
pub use visits::{
    build_visit_graph, pool_visit, train_visit_refiner, VisitEmbedding, VisitRefiner, VisitSource,
};

use crate::error::{Error, Result};
use crate::gat::{Activation, GatConfig, DEFAULT_LEAK};

/// Hyperparameters shared by the segment and visit refiners.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinerConfig {
    pub heads: usize,
    pub layers: usize,
    pub activation: Activation,
    pub leak: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Admissions per update for the segment refiner.
    pub batch_size: usize,
    /// Weight of the next-segment task.
    pub lambda_next: f64,
    /// Neighbors per visit in the visit graph.
    pub knn: usize,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        RefinerConfig {
            heads: 1,
            layers: 1,
            activation: Activation::Elu,
            leak: DEFAULT_LEAK,
            epochs: 50,
            learning_rate: 0.05,
            batch_size: 8,
            lambda_next: 1.0,
            knn: 10,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("refiner learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.lambda_next >= 0.0 && self.lambda_next.is_finite()) {
            return Err(Error::invalid("lambda_next must be non-negative"));
        }
        self.gat(2).validate()
    }

    /// Square layer config: the refined width equals the input width.
    pub fn gat(&self, dim: usize) -> GatConfig {
        GatConfig {
            dim_in: dim,
            dim_out: dim,
            heads: self.heads,
            layers: self.layers,
            leak: self.leak,
            activation: self.activation,
        }
    }
}
