use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AuxDecoder, RefinerConfig, SegmentEmbeddingSet};
use crate::error::{Error, Result};
use crate::exec::derive_seed;
use crate::gat::{GatModel, NodeGraph};
use crate::linalg::{cosine, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisitSource {
    MeanPooled,
    Refined,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitEmbedding {
    pub admission_id: String,
    pub vector: Vec<f64>,
    pub source: VisitSource,
}

pub fn pool_visit(set: &SegmentEmbeddingSet) -> Result<VisitEmbedding> {
    if set.is_empty() {
        return Err(Error::invalid(format!("admission {} has no segments", set.admission_id)));
    }
    // running mean: exact when every segment vector is identical
    let mut vector = vec![0.0; set.dim()];
    for (k, row) in set.vectors.iter_rows().enumerate() {
        let inv = 1.0 / (k + 1) as f64;
        for (m, &x) in vector.iter_mut().zip(row) {
            *m += (x - *m) * inv;
        }
    }
    Ok(VisitEmbedding {
        admission_id: set.admission_id.clone(),
        vector,
        source: VisitSource::MeanPooled,
    })
}

/// Each visit attends to itself and its `k` most cosine-similar visits
/// (ties broken by index).
pub fn build_visit_graph(visits: &[VisitEmbedding], k: usize) -> Result<NodeGraph> {
    let rows: Vec<Vec<f64>> = visits.iter().map(|v| v.vector.clone()).collect();
    let features = Matrix::from_rows(&rows)?;
    let n = visits.len();
    let neighbors = (0..n)
        .map(|i| {
            let mut others: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, cosine(&rows[i], &rows[j])))
                .collect();
            others.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            std::iter::once(i)
                .chain(others.into_iter().take(k).map(|(j, _)| j))
                .collect()
        })
        .collect();
    NodeGraph::new(features, neighbors)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitRefiner {
    pub model: GatModel,
    pub decoder: AuxDecoder,
    pub epoch_losses: Vec<f64>,
    /// Final forward pass over every visit.
    pub refined: Vec<VisitEmbedding>,
}

/// Full-batch training over one visit graph. `train_mask` (default: all)
/// selects the visits whose code-prediction loss drives the updates; every
/// visit still takes part in attention and in the final forward pass.
pub fn train_visit_refiner(
    visits: &[VisitEmbedding],
    visit_targets: &[Vec<usize>],
    train_mask: Option<&[bool]>,
    vocab_size: usize,
    cfg: &RefinerConfig,
    seed: u64,
) -> Result<VisitRefiner> {
    cfg.validate()?;
    if visits.is_empty() {
        return Err(Error::invalid("visit refiner needs at least one visit"));
    }
    if visit_targets.len() != visits.len() {
        return Err(Error::shape(format!("{} target sets", visits.len()), visit_targets.len()));
    }
    if let Some(&bad) = visit_targets.iter().flatten().find(|&&c| c >= vocab_size) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: vocab_size,
        });
    }
    let dim = visits[0].vector.len();
    if visits.iter().any(|v| v.vector.len() != dim) {
        return Err(Error::invalid("visit vectors have mixed dimensions"));
    }
    let mask: Vec<bool> = match train_mask {
        Some(m) if m.len() != visits.len() => return Err(Error::shape(visits.len(), m.len())),
        Some(m) => m.to_vec(),
        None => vec![true; visits.len()],
    };
    let trained = mask.iter().filter(|&&m| m).count();
    if trained == 0 {
        return Err(Error::invalid("train mask selects no visits"));
    }

    let graph = build_visit_graph(visits, cfg.knn)?;
    let mut model = GatModel::init(&cfg.gat(dim), seed)?;
    let mut decoder = AuxDecoder::init(dim, vocab_size, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)));
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let scale = 1.0 / trained as f64;

    for _ in 0..cfg.epochs {
        let mut d_decoder = AuxDecoder::zeros_like(&decoder);
        let (_, loss, grads) = model.forward_backward(&graph, |out| {
            let mut loss = 0.0;
            let mut grad = Matrix::zeros(out.rows(), out.cols());
            for (i, targets) in visit_targets.iter().enumerate() {
                if !mask[i] {
                    continue;
                }
                let (l, dx) = decoder.accumulate(out.row(i), targets, scale, &mut d_decoder);
                loss += scale * l;
                grad.row_mut(i).copy_from_slice(&dx);
            }
            Ok((loss, grad))
        })?;
        epoch_losses.push(loss);
        model = model.sgd_step(&grads, cfg.learning_rate)?;
        decoder.sgd_step(&d_decoder, cfg.learning_rate)?;
    }

    let out = model.forward(&graph)?;
    if !out.is_finite() {
        return Err(Error::NonFinite("refined visit embeddings"));
    }
    let refined = visits
        .iter()
        .zip(out.iter_rows())
        .map(|(v, row)| VisitEmbedding {
            admission_id: v.admission_id.clone(),
            vector: row.to_vec(),
            source: VisitSource::Refined,
        })
        .collect();
    Ok(VisitRefiner {
        model,
        decoder,
        epoch_losses,
        refined,
    })
}
