use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, sigmoid, softplus, Matrix};

/// Linear map from an embedding to one logit per code, trained with
/// independent sigmoid cross-entropy terms.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDecoder {
    /// `dim × vocab`
    pub w: Matrix,
    pub bias: Vec<f64>,
}

impl AuxDecoder {
    pub fn init(dim: usize, vocab: usize, rng: &mut impl Rng) -> Self {
        let range = (6.0 / (dim + vocab) as f64).sqrt();
        let w = (0..dim * vocab).map(|_| rng.gen_range(-range..range)).collect();
        AuxDecoder {
            w: Matrix::from_vec(dim, vocab, w).expect("sized by construction"),
            bias: vec![0.0; vocab],
        }
    }

    pub fn zeros_like(other: &AuxDecoder) -> Self {
        AuxDecoder {
            w: Matrix::zeros(other.w.rows(), other.w.cols()),
            bias: vec![0.0; other.bias.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn vocab(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (k, &v) in x.iter().enumerate() {
            axpy(v, self.w.row(k), &mut out);
        }
        out
    }

    /// Summed binary cross-entropy of `x` against the code set `targets`.
    pub fn loss(&self, x: &[f64], targets: &[usize]) -> f64 {
        let y = dense_targets(targets, self.vocab());
        self.logits(x)
            .iter()
            .zip(&y)
            .map(|(&l, &t)| softplus(l) - if t { l } else { 0.0 })
            .sum()
    }

    /// Adds `scale · ∂loss/∂θ` into `grads` and returns the loss together with
    /// `scale · ∂loss/∂x`.
    pub fn accumulate(&self, x: &[f64], targets: &[usize], scale: f64, grads: &mut AuxDecoder) -> (f64, Vec<f64>) {
        let y = dense_targets(targets, self.vocab());
        let logits = self.logits(x);
        let mut loss = 0.0;
        let mut d_logits = Vec::with_capacity(logits.len());
        for (&l, &t) in logits.iter().zip(&y) {
            let target = if t { 1.0 } else { 0.0 };
            loss += softplus(l) - target * l;
            d_logits.push(scale * (sigmoid(l) - target));
        }
        for (k, &v) in x.iter().enumerate() {
            axpy(v, &d_logits, grads.w.row_mut(k));
        }
        axpy(1.0, &d_logits, &mut grads.bias);
        let dx = (0..self.dim())
            .map(|k| self.w.row(k).iter().zip(&d_logits).map(|(a, b)| a * b).sum())
            .collect();
        (loss, dx)
    }

    pub fn add_assign(&mut self, other: &AuxDecoder) -> Result<()> {
        self.w.add_assign(&other.w)?;
        axpy(1.0, &other.bias, &mut self.bias);
        Ok(())
    }

    pub fn sgd_step(&mut self, grads: &AuxDecoder, lr: f64) -> Result<()> {
        if !grads.w.is_finite() || !grads.bias.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("decoder gradients"));
        }
        axpy(-lr, grads.w.as_slice(), self.w.as_mut_slice());
        axpy(-lr, &grads.bias, &mut self.bias);
        Ok(())
    }

    pub fn bias_matrix(&self) -> Matrix {
        Matrix::from_vec(1, self.bias.len(), self.bias.clone()).expect("one row")
    }
}

fn dense_targets(targets: &[usize], vocab: usize) -> Vec<bool> {
    let mut y = vec![false; vocab];
    for &t in targets {
        if t < vocab {
            y[t] = true;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dec = AuxDecoder::init(3, 5, &mut rng);
        let x = vec![0.4, -1.2, 0.7];
        let targets = [1, 3];
        let mut grads = AuxDecoder::zeros_like(&dec);
        let (loss, dx) = dec.accumulate(&x, &targets, 1.0, &mut grads);
        assert!((loss - dec.loss(&x, &targets)).abs() < 1e-12);
        let eps = 1e-6;
        for k in 0..3 {
            let mut plus = x.clone();
            plus[k] += eps;
            let mut minus = x.clone();
            minus[k] -= eps;
            let fd = (dec.loss(&plus, &targets) - dec.loss(&minus, &targets)) / (2.0 * eps);
            assert!((fd - dx[k]).abs() < 1e-7);
        }
        for c in 0..5 {
            let mut plus = dec.clone();
            plus.bias[c] += eps;
            let mut minus = dec.clone();
            minus.bias[c] -= eps;
            let fd = (plus.loss(&x, &targets) - minus.loss(&x, &targets)) / (2.0 * eps);
            assert!((fd - grads.bias[c]).abs() < 1e-7);
        }
    }
}
