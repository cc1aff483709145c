//! Stacks of multi-head attention layers. Heads within a layer run
//! independently and their outputs are concatenated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layer::{backward_from_trace, forward_trace, HeadTrace};
use super::{sgd_step, Activation, GatGrads, GatParams, NodeGraph, DEFAULT_LEAK};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct GatConfig {
    pub dim_in: usize,
    /// Output width of every layer; split evenly between heads.
    pub dim_out: usize,
    pub heads: usize,
    pub layers: usize,
    pub leak: f64,
    pub activation: Activation,
}

impl GatConfig {
    pub fn new(dim_in: usize, dim_out: usize) -> Self {
        GatConfig {
            dim_in,
            dim_out,
            heads: 1,
            layers: 1,
            leak: DEFAULT_LEAK,
            activation: Activation::Elu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_in == 0 || self.dim_out == 0 || self.heads == 0 || self.layers == 0 {
            return Err(Error::invalid("GAT dimensions, heads and layers must be positive"));
        }
        if !self.dim_out.is_multiple_of(self.heads) {
            return Err(Error::invalid(format!(
                "output width {} is not divisible by {} heads",
                self.dim_out, self.heads
            )));
        }
        if !self.leak.is_finite() {
            return Err(Error::NonFinite("leak slope"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatModel {
    /// `layers[l][h]`
    pub layers: Vec<Vec<GatParams>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatModelGrads {
    pub layers: Vec<Vec<GatGrads>>,
    /// Gradient with respect to the input features of the first layer.
    pub features: Matrix,
}

struct LayerTrace {
    input: NodeGraph,
    heads: Vec<HeadTrace>,
}

impl GatModel {
    pub fn init(cfg: &GatConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_dim = cfg.dim_out / cfg.heads;
        let layers = (0..cfg.layers)
            .map(|l| {
                let dim_in = if l == 0 { cfg.dim_in } else { cfg.dim_out };
                (0..cfg.heads)
                    .map(|_| GatParams::init(dim_in, head_dim, cfg.leak, cfg.activation, &mut rng))
                    .collect()
            })
            .collect();
        Ok(GatModel { layers })
    }

    pub fn from_single(params: GatParams) -> Self {
        GatModel {
            layers: vec![vec![params]],
        }
    }

    pub fn dim_in(&self) -> usize {
        self.layers[0][0].dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.layers
            .last()
            .map_or(0, |heads| heads.iter().map(GatParams::dim_out).sum())
    }

    fn trace(&self, g: &NodeGraph) -> Result<(Vec<LayerTrace>, Matrix)> {
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut input = g.clone();
        for heads in &self.layers {
            let head_traces = heads
                .iter()
                .map(|p| forward_trace(p, &input))
                .collect::<Result<Vec<_>>>()?;
            let outs: Vec<Matrix> = head_traces.iter().map(|t| t.out.clone()).collect();
            let next = input.with_features(Matrix::hconcat(&outs))?;
            traces.push(LayerTrace {
                input,
                heads: head_traces,
            });
            input = next;
        }
        let out = input.features().clone();
        Ok((traces, out))
    }

    pub fn forward(&self, g: &NodeGraph) -> Result<Matrix> {
        self.trace(g).map(|(_, out)| out)
    }

    /// Forward output plus gradients of `Σ upstream(out) ⊙ out`, where the
    /// closure maps the forward output to its cotangent and a scalar reported alongside.
    pub fn forward_backward<F>(&self, g: &NodeGraph, upstream: F) -> Result<(Matrix, f64, GatModelGrads)>
    where
        F: FnOnce(&Matrix) -> Result<(f64, Matrix)>,
    {
        let (traces, out) = self.trace(g)?;
        let (value, mut grad) = upstream(&out)?;
        if grad.shape() != out.shape() {
            return Err(Error::shape(format!("{:?}", out.shape()), format!("{:?}", grad.shape())));
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (heads, trace) in self.layers.iter().zip(&traces).rev() {
            let mut d_input = Matrix::zeros(trace.input.len(), heads[0].dim_in());
            let mut head_grads = Vec::with_capacity(heads.len());
            let mut offset = 0;
            for (p, t) in heads.iter().zip(&trace.heads) {
                let block = grad.column_block(offset, p.dim_out());
                offset += p.dim_out();
                let b = backward_from_trace(p, &trace.input, t, &block)?;
                d_input.add_assign(&b.features)?;
                head_grads.push(b.params);
            }
            layer_grads.push(head_grads);
            grad = d_input;
        }
        layer_grads.reverse();
        Ok((
            out,
            value,
            GatModelGrads {
                layers: layer_grads,
                features: grad,
            },
        ))
    }

    /// Gradients of `Σ upstream ⊙ forward(g)`.
    pub fn backward(&self, g: &NodeGraph, upstream: &Matrix) -> Result<GatModelGrads> {
        self.forward_backward(g, |_| Ok((0.0, upstream.clone())))
            .map(|(_, _, grads)| grads)
    }

    pub fn sgd_step(&self, grads: &GatModelGrads, lr: f64) -> Result<GatModel> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape(self.layers.len(), grads.layers.len()));
        }
        let layers = self
            .layers
            .iter()
            .zip(&grads.layers)
            .map(|(heads, gs)| {
                if heads.len() != gs.len() {
                    return Err(Error::shape(heads.len(), gs.len()));
                }
                heads.iter().zip(gs).map(|(p, g)| sgd_step(p, g, lr)).collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GatModel { layers })
    }
}

impl GatModelGrads {
    pub fn zeros_like(model: &GatModel, rows: usize) -> Self {
        GatModelGrads {
            layers: model
                .layers
                .iter()
                .map(|heads| heads.iter().map(GatGrads::zeros_like).collect())
                .collect(),
            features: Matrix::zeros(rows, model.dim_in()),
        }
    }

    /// Adds parameter gradients; feature gradients are not accumulated.
    pub fn add_params(&mut self, other: &GatModelGrads) -> Result<()> {
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.add_assign(b)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.layers.iter_mut().flatten().for_each(|g| g.scale(factor));
        self.features.scale(factor);
    }
}
