//! Skip-gram with negative sampling over walk corpora.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingMatrix, EntityKind};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, sigmoid, softplus, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsConfig {
    pub dim: usize,
    pub context_window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial rate; decays linearly towards `1e-4 ×` this value.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 64,
            context_window: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid("embedding dimension must be at least 2"));
        }
        if self.context_window == 0 || self.negatives == 0 {
            return Err(Error::invalid("context window and negatives must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SgnsOutcome {
    /// Center-word table.
    pub embedding: EmbeddingMatrix,
    /// Mean pre-update pair loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// `-log σ(u·v) - Σ log σ(-u·n)`
pub fn sgns_pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    softplus(-dot(center, context))
        + negatives
            .iter()
            .map(|n| softplus(dot(center, n)))
            .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_pair_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> SgnsGradients {
    let pos = dot(center, context);
    // d/dx softplus(-x) = -σ(-x) = σ(x) - 1
    let g_pos = sigmoid(pos) - 1.0;
    let mut g_center: Vec<f64> = context.iter().map(|c| g_pos * c).collect();
    let g_context: Vec<f64> = center.iter().map(|u| g_pos * u).collect();
    let mut loss = softplus(-pos);
    let mut g_negs = Vec::with_capacity(negatives.len());
    for n in negatives {
        let s = dot(center, n);
        loss += softplus(s);
        let g = sigmoid(s);
        axpy(g, n, &mut g_center);
        g_negs.push(center.iter().map(|u| g * u).collect());
    }
    SgnsGradients {
        loss,
        center: g_center,
        context: g_context,
        negatives: g_negs,
    }
}

struct NegativeSampler {
    cdf: Vec<f64>,
}

impl NegativeSampler {
    /// Unigram counts raised to the 3/4 power.
    fn new(walks: &[Vec<usize>], vocab_size: usize) -> Self {
        let mut counts = vec![0u64; vocab_size];
        for w in walks {
            for &t in w {
                counts[t] += 1;
            }
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        cdf.iter_mut().for_each(|c| *c /= acc);
        NegativeSampler { cdf }
    }

    fn draw(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    fn draw_excluding(&self, rng: &mut impl Rng, excluded: usize) -> Option<usize> {
        // bounded retries; tiny vocabularies may only contain `excluded`
        (0..16).map(|_| self.draw(rng)).find(|&k| k != excluded)
    }
}

/// Trains on every (center, context) pair within `context_window` positions.
/// Single-threaded and deterministic for a fixed seed.
pub fn train_sgns(walks: &[Vec<usize>], vocab_size: usize, cfg: &SgnsConfig) -> Result<SgnsOutcome> {
    cfg.validate()?;
    if !walks.iter().any(|w| w.len() >= 2) {
        return Err(Error::invalid("walk corpus has no walk of length 2 or more"));
    }
    if let Some(&bad) = walks.iter().flatten().find(|&&t| t >= vocab_size) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            size: vocab_size,
        });
    }

    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f64;
    let init: Vec<f64> = (0..vocab_size * dim).map(|_| rng.gen_range(-half..half)).collect();
    let mut center = Matrix::from_vec(vocab_size, dim, init)?;
    let mut context = Matrix::zeros(vocab_size, dim);
    let sampler = NegativeSampler::new(walks, vocab_size);

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|i| {
                    let lo = i.saturating_sub(cfg.context_window);
                    let hi = (i + cfg.context_window).min(w.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    let total_steps = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut negs: Vec<usize> = Vec::with_capacity(cfg.negatives);

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for walk in walks {
            for (i, &c) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.context_window);
                let hi = (i + cfg.context_window).min(walk.len() - 1);
                for (j, &o) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    let lr = cfg.learning_rate * (1.0 - step as f64 / total_steps).max(1e-4);
                    step += 1;

                    negs.clear();
                    negs.extend((0..cfg.negatives).filter_map(|_| sampler.draw_excluding(&mut rng, o)));
                    let grads = {
                        let neg_rows: Vec<&[f64]> = negs.iter().map(|&k| context.row(k)).collect();
                        sgns_pair_gradients(center.row(c), context.row(o), &neg_rows)
                    };
                    loss_sum += grads.loss;

                    axpy(-lr, &grads.center, center.row_mut(c));
                    axpy(-lr, &grads.context, context.row_mut(o));
                    for (&k, g) in negs.iter().zip(&grads.negatives) {
                        axpy(-lr, g, context.row_mut(k));
                    }
                }
            }
        }
        epoch_losses.push(loss_sum / pairs_per_epoch.max(1) as f64);
    }

    if !center.is_finite() {
        return Err(Error::NonFinite("skip-gram embeddings"));
    }
    Ok(SgnsOutcome {
        embedding: EmbeddingMatrix::new(EntityKind::Service, center)?,
        epoch_losses,
    })
}
