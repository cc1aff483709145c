use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AuxDecoder, RefinerConfig};
use crate::ehr::SegmentedAdmission;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::exec::{self, derive_seed, Execution};
use crate::gat::{GatModel, GatModelGrads, NodeGraph};
use crate::linalg::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbeddingSet {
    pub admission_id: String,
    /// One row per segment.
    pub vectors: Matrix,
    pub current_targets: Vec<Vec<usize>>,
    /// `None` for the final segment.
    pub next_targets: Vec<Option<Vec<usize>>>,
}

impl SegmentEmbeddingSet {
    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }
}

/// Mean of the service embeddings of each segment's distinct codes; empty
/// segments get the zero vector.
pub fn init_segment_embeddings(seg: &SegmentedAdmission, svc: &EmbeddingMatrix) -> Result<SegmentEmbeddingSet> {
    let k = seg.segments.len();
    let mut vectors = Matrix::zeros(k, svc.dim());
    let mut current_targets = Vec::with_capacity(k);
    for (s, segment) in seg.segments.iter().enumerate() {
        let codes: Vec<usize> = segment.code_indices.iter().copied().collect();
        if let Some(&bad) = codes.iter().find(|&&c| c >= svc.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: svc.rows(),
            });
        }
        let row = vectors.row_mut(s);
        for &c in &codes {
            axpy(1.0, svc.row(c), row);
        }
        if !codes.is_empty() {
            let inv = 1.0 / codes.len() as f64;
            row.iter_mut().for_each(|v| *v *= inv);
        }
        current_targets.push(codes);
    }
    let next_targets = (0..k).map(|s| current_targets.get(s + 1).cloned()).collect();
    Ok(SegmentEmbeddingSet {
        admission_id: seg.admission_id.clone(),
        vectors,
        current_targets,
        next_targets,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRefiner {
    pub model: GatModel,
    pub current: AuxDecoder,
    pub next: AuxDecoder,
    /// Mean per-admission loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

struct AdmissionGrads {
    loss: f64,
    model: GatModelGrads,
    current: AuxDecoder,
    next: AuxDecoder,
}

/// `L = mean_s BCE(current_s) + λ · mean_{s with a successor} BCE(next_s)`
/// for one admission, with gradients of every trainable tensor.
fn admission_grads(refiner: &SegmentRefiner, set: &SegmentEmbeddingSet, lambda_next: f64) -> Result<AdmissionGrads> {
    let graph = NodeGraph::chain(set.vectors.clone());
    let mut d_current = AuxDecoder::zeros_like(&refiner.current);
    let mut d_next = AuxDecoder::zeros_like(&refiner.next);
    let k = set.len();
    let with_next = set.next_targets.iter().filter(|t| t.is_some()).count();
    let (_, loss, model) = refiner.model.forward_backward(&graph, |out| {
        let mut loss = 0.0;
        let mut grad = Matrix::zeros(out.rows(), out.cols());
        let cur_scale = 1.0 / k as f64;
        for s in 0..k {
            let (l, dx) = refiner
                .current
                .accumulate(out.row(s), &set.current_targets[s], cur_scale, &mut d_current);
            loss += cur_scale * l;
            axpy(1.0, &dx, grad.row_mut(s));
            if let Some(next) = &set.next_targets[s] {
                let scale = lambda_next / with_next as f64;
                let (l, dx) = refiner.next.accumulate(out.row(s), next, scale, &mut d_next);
                loss += scale * l;
                axpy(1.0, &dx, grad.row_mut(s));
            }
        }
        Ok((loss, grad))
    })?;
    Ok(AdmissionGrads {
        loss,
        model,
        current: d_current,
        next: d_next,
    })
}

fn check_sets(sets: &[SegmentEmbeddingSet], dim: usize) -> Result<()> {
    for s in sets {
        if s.dim() != dim {
            return Err(Error::shape(format!("segment dim {dim}"), s.dim()));
        }
        if s.is_empty() {
            return Err(Error::invalid(format!("admission {} has no segments", s.admission_id)));
        }
    }
    Ok(())
}

/// Mini-batch SGD over admissions. Per-admission gradients may be computed in
/// parallel; they are summed in a fixed order, so results do not depend on
/// the execution mode.
pub fn train_segment_refiner(
    sets: &[SegmentEmbeddingSet],
    vocab_size: usize,
    cfg: &RefinerConfig,
    seed: u64,
    exec: Execution,
) -> Result<SegmentRefiner> {
    cfg.validate()?;
    let dim = sets
        .first()
        .ok_or_else(|| Error::invalid("segment refiner needs at least one admission"))?
        .dim();
    check_sets(sets, dim)?;
    if let Some(&bad) = sets
        .iter()
        .flat_map(|s| s.current_targets.iter().flatten())
        .find(|&&c| c >= vocab_size)
    {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: vocab_size,
        });
    }

    let model = GatModel::init(&cfg.gat(dim), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let current = AuxDecoder::init(dim, vocab_size, &mut rng);
    let next = AuxDecoder::init(dim, vocab_size, &mut rng);
    let mut refiner = SegmentRefiner {
        model,
        current,
        next,
        epoch_losses: Vec::with_capacity(cfg.epochs),
    };

    let mut order: Vec<usize> = (0..sets.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 100 + epoch as u64)));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results = exec::map_slice(exec, batch, |&i| admission_grads(&refiner, &sets[i], cfg.lambda_next));
            let mut model_grads = GatModelGrads::zeros_like(&refiner.model, 0);
            let mut d_current = AuxDecoder::zeros_like(&refiner.current);
            let mut d_next = AuxDecoder::zeros_like(&refiner.next);
            for r in results {
                let r = r?;
                epoch_loss += r.loss;
                model_grads.add_params(&r.model)?;
                d_current.add_assign(&r.current)?;
                d_next.add_assign(&r.next)?;
            }
            let scale = 1.0 / batch.len() as f64;
            model_grads.scale(scale);
            d_current.w.scale(scale);
            d_current.bias.iter_mut().for_each(|v| *v *= scale);
            d_next.w.scale(scale);
            d_next.bias.iter_mut().for_each(|v| *v *= scale);

            refiner.model = refiner.model.sgd_step(&model_grads, cfg.learning_rate)?;
            refiner.current.sgd_step(&d_current, cfg.learning_rate)?;
            refiner.next.sgd_step(&d_next, cfg.learning_rate)?;
        }
        refiner.epoch_losses.push(epoch_loss / sets.len() as f64);
    }
    Ok(refiner)
}

/// Replaces every admission's segment vectors with the model's output over
/// its segment chain.
pub fn refine_segments(model: &GatModel, sets: &[SegmentEmbeddingSet], exec: Execution) -> Result<Vec<SegmentEmbeddingSet>> {
    check_sets(sets, model.dim_in())?;
    exec::map_slice(exec, sets, |s| {
        let out = model.forward(&NodeGraph::chain(s.vectors.clone()))?;
        if !out.is_finite() {
            return Err(Error::NonFinite("refined segment embeddings"));
        }
        Ok(SegmentEmbeddingSet {
            vectors: out,
            ..s.clone()
        })
    })
    .into_iter()
    .collect()
}
