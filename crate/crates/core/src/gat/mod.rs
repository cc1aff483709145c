//! Graph attention layer with hand-derived gradients.
//!
//! A head maps features through a shared linear map `z = h·W`, scores every
//! edge `i → j` with `e_ij = leaky(a₁·z_i + a₂·z_j)`, normalizes the scores
//! over `N(i)` with a softmax, aggregates `m_i = Σ_j α_ij z_j` and applies the
//! output activation. `N(i)` always contains `i`, so the node's own state takes
//! part in its update.

mod checkpoint;
mod layer;
mod model;

pub use checkpoint::{parse_checkpoint, write_checkpoint};
pub use layer::{attention_scores, gat_backward, gat_forward, normalize_attention, GatBackward};
pub use model::{GatConfig, GatModel, GatModelGrads};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Default negative slope inside attention scoring.
pub const DEFAULT_LEAK: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    Linear,
    #[default]
    Elu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Elu => "elu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "elu" => Ok(Activation::Elu),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Parameters of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct GatParams {
    /// `dim_in × dim_out`
    pub w: Matrix,
    /// `[a₁; a₂]`, length `2 · dim_out`.
    pub attention: Vec<f64>,
    pub leak: f64,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatGrads {
    pub w: Matrix,
    pub attention: Vec<f64>,
}

impl GatGrads {
    pub fn zeros_like(p: &GatParams) -> Self {
        GatGrads {
            w: Matrix::zeros(p.w.rows(), p.w.cols()),
            attention: vec![0.0; p.attention.len()],
        }
    }

    pub fn add_assign(&mut self, other: &GatGrads) -> Result<()> {
        self.w.add_assign(&other.w)?;
        if self.attention.len() != other.attention.len() {
            return Err(Error::shape(self.attention.len(), other.attention.len()));
        }
        for (a, b) in self.attention.iter_mut().zip(&other.attention) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.w.scale(factor);
        self.attention.iter_mut().for_each(|v| *v *= factor);
    }
}

impl GatParams {
    /// Glorot-uniform initialization.
    pub fn init(dim_in: usize, dim_out: usize, leak: f64, activation: Activation, rng: &mut impl Rng) -> Self {
        let w_range = (6.0 / (dim_in + dim_out) as f64).sqrt();
        let w = (0..dim_in * dim_out).map(|_| rng.gen_range(-w_range..w_range)).collect();
        let a_range = (6.0 / (2 * dim_out + 1) as f64).sqrt();
        let attention = (0..2 * dim_out).map(|_| rng.gen_range(-a_range..a_range)).collect();
        GatParams {
            w: Matrix::from_vec(dim_in, dim_out, w).expect("sized by construction"),
            attention,
            leak,
            activation,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.w.rows()
    }

    pub fn dim_out(&self) -> usize {
        self.w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.attention.len() != 2 * self.dim_out() {
            return Err(Error::shape(
                format!("attention vector of length {}", 2 * self.dim_out()),
                self.attention.len(),
            ));
        }
        if !self.w.is_finite() || !self.attention.iter().all(|v| v.is_finite()) || !self.leak.is_finite() {
            return Err(Error::NonFinite("attention parameters"));
        }
        Ok(())
    }
}

/// `params - lr · grads`, elementwise.
pub fn sgd_step(params: &GatParams, grads: &GatGrads, lr: f64) -> Result<GatParams> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {lr}")));
    }
    if grads.w.shape() != params.w.shape() || grads.attention.len() != params.attention.len() {
        return Err(Error::shape(
            format!("{:?} / {}", params.w.shape(), params.attention.len()),
            format!("{:?} / {}", grads.w.shape(), grads.attention.len()),
        ));
    }
    if !grads.w.is_finite() || !grads.attention.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("gradients"));
    }
    let mut next = params.clone();
    for (p, g) in next.w.as_mut_slice().iter_mut().zip(grads.w.as_slice()) {
        *p -= lr * g;
    }
    for (p, g) in next.attention.iter_mut().zip(&grads.attention) {
        *p -= lr * g;
    }
    Ok(next)
}

/// Node features plus neighbor lists; every list contains its own node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGraph {
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
}

impl NodeGraph {
    /// Adds a leading self-loop to any list that lacks one.
    pub fn new(features: Matrix, mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = features.rows();
        if neighbors.len() != n {
            return Err(Error::shape(format!("{n} neighbor lists"), neighbors.len()));
        }
        for (i, list) in neighbors.iter_mut().enumerate() {
            if let Some(&bad) = list.iter().find(|&&j| j >= n) {
                return Err(Error::IndexOutOfRange { index: bad, size: n });
            }
            if !list.contains(&i) {
                list.insert(0, i);
            }
        }
        Ok(NodeGraph { neighbors, features })
    }

    /// Self-loops plus edges between consecutive rows.
    pub fn chain(features: Matrix) -> Self {
        let n = features.rows();
        let neighbors = (0..n)
            .map(|i| {
                let mut list = vec![i];
                if i > 0 {
                    list.push(i - 1);
                }
                if i + 1 < n {
                    list.push(i + 1);
                }
                list
            })
            .collect();
        NodeGraph { neighbors, features }
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.len() {
            return Err(Error::shape(format!("{} feature rows", self.len()), features.rows()));
        }
        Ok(NodeGraph {
            neighbors: self.neighbors.clone(),
            features,
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn params() -> GatParams {
        GatParams::init(3, 2, DEFAULT_LEAK, Activation::Elu, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn sgd_arithmetic() {
        let p = params();
        let zero = GatGrads::zeros_like(&p);
        assert_eq!(sgd_step(&p, &zero, 0.5).unwrap(), p);

        let mut origin = p.clone();
        origin.w.as_mut_slice().fill(0.0);
        origin.attention.fill(0.0);
        let g = GatGrads {
            w: p.w.clone(),
            attention: p.attention.clone(),
        };
        let moved = sgd_step(&origin, &g, 1.0).unwrap();
        for (m, v) in moved.w.as_slice().iter().zip(p.w.as_slice()) {
            assert_eq!(*m, -*v);
        }
    }

    #[test]
    fn two_half_steps_equal_one_step() {
        let p = params();
        let g = GatGrads {
            w: Matrix::from_vec(3, 2, vec![0.5, -0.25, 1.0, 2.0, -4.0, 0.125]).unwrap(),
            attention: vec![1.0, -1.0, 0.5, 0.25],
        };
        let mut half = g.clone();
        half.scale(0.5);
        let once = sgd_step(&p, &g, 0.5).unwrap();
        let twice = sgd_step(&sgd_step(&p, &half, 0.5).unwrap(), &half, 0.5).unwrap();
        for (a, b) in once.w.as_slice().iter().zip(twice.w.as_slice()) {
            assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn sgd_rejects_bad_input() {
        let p = params();
        let mut g = GatGrads::zeros_like(&p);
        assert!(sgd_step(&p, &g, 0.0).is_err());
        g.attention[0] = f64::NAN;
        assert!(sgd_step(&p, &g, 0.1).is_err());
        let wrong = GatGrads {
            w: Matrix::zeros(2, 2),
            attention: vec![0.0; 4],
        };
        assert!(sgd_step(&p, &wrong, 0.1).is_err());
    }

    #[test]
    fn node_graph_adds_self_loops() {
        let g = NodeGraph::new(Matrix::zeros(3, 2), vec![vec![1], vec![], vec![2, 0]]).unwrap();
        assert_eq!(g.neighbors(0), &[0, 1]);
        assert_eq!(g.neighbors(1), &[1]);
        assert_eq!(g.neighbors(2), &[2, 0]);
        assert!(NodeGraph::new(Matrix::zeros(2, 2), vec![vec![5], vec![]]).is_err());
        let chain = NodeGraph::chain(Matrix::zeros(3, 1));
        assert_eq!(chain.neighbors(1), &[1, 0, 2]);
    }
}
