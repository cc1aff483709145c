//! Dense embedding tables, their text format, skip-gram training and PCA.

mod io;
mod pca;
mod sgns;

pub use io::{parse_embeddings, write_embeddings};
pub(crate) use io::{parse_blocks, write_block};
pub use pca::project_2d;
pub use sgns::{sgns_pair_gradients, sgns_pair_loss, train_sgns, SgnsConfig, SgnsGradients, SgnsOutcome};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Service,
    Segment,
    Visit,
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Service => "service",
            EntityKind::Segment => "segment",
            EntityKind::Visit => "visit",
        })
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "service" => Ok(EntityKind::Service),
            "segment" => Ok(EntityKind::Segment),
            "visit" => Ok(EntityKind::Visit),
            other => Err(Error::invalid(format!("unknown entity kind `{other}`"))),
        }
    }
}

/// One row per entity; always finite with at least two columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    kind: EntityKind,
    values: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(kind: EntityKind, values: Matrix) -> Result<Self> {
        if values.cols() < 2 {
            return Err(Error::invalid(format!(
                "embedding dimension must be at least 2, got {}",
                values.cols()
            )));
        }
        if !values.is_finite() {
            return Err(Error::NonFinite("embedding matrix"));
        }
        Ok(EmbeddingMatrix { kind, values })
    }

    pub fn kind(&self) -> EntityKind {
        self.kind
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }
}
