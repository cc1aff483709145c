use crate::error::{Error, Result};
use crate::linalg::{dot, sigmoid, softplus, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegConfig {
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this.
    pub tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            max_iterations: 10_000,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    x: &'a Matrix,
    y: Vec<f64>,
    lambda: f64,
}

impl Problem<'_> {
    /// Mean cross-entropy plus `λ‖w‖²`; the bias is not penalized.
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let m = self.x.rows() as f64;
        let data: f64 = self
            .x
            .iter_rows()
            .zip(&self.y)
            .map(|(row, &y)| {
                let z = dot(row, w) + b;
                softplus(z) - y * z
            })
            .sum();
        data / m + self.lambda * dot(w, w)
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let m = self.x.rows() as f64;
        let mut gw = vec![0.0; w.len()];
        let mut gb = 0.0;
        for (row, &y) in self.x.iter_rows().zip(&self.y) {
            let r = sigmoid(dot(row, w) + b) - y;
            gb += r;
            for (g, &v) in gw.iter_mut().zip(row) {
                *g += r * v;
            }
        }
        for (g, &wk) in gw.iter_mut().zip(w) {
            *g = *g / m + 2.0 * self.lambda * wk;
        }
        (gw, gb / m)
    }
}

/// Full-batch gradient descent with a diagonal curvature preconditioner and
/// Armijo backtracking. Deterministic.
pub fn train_logreg(x: &Matrix, y: &[bool], lambda: f64, cfg: &LogRegConfig) -> Result<LogRegModel> {
    let m = x.rows();
    if y.len() != m {
        return Err(Error::shape(format!("{m} labels"), y.len()));
    }
    if m < 2 {
        return Err(Error::invalid("logistic regression needs at least 2 samples"));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::invalid("logistic regression needs both classes"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("logistic regression features"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("l2_lambda must be non-negative, got {lambda}")));
    }

    let d = x.cols();
    let problem = Problem {
        x,
        y: y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        lambda,
    };
    // upper bounds on the diagonal of the Hessian
    let mut curvature = vec![2.0 * lambda; d];
    for row in x.iter_rows() {
        for (c, &v) in curvature.iter_mut().zip(row) {
            *c += 0.25 * v * v / m as f64;
        }
    }
    let curvature: Vec<f64> = curvature.into_iter().map(|c| c.max(1e-12)).collect();
    let bias_curvature = 0.25;

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = problem.objective(&w, b);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        let (gw, gb) = problem.gradient(&w, b);
        let norm = (dot(&gw, &gw) + gb * gb).sqrt();
        if norm < cfg.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let dw: Vec<f64> = gw.iter().zip(&curvature).map(|(g, c)| -g / c).collect();
        let db = -gb / bias_curvature;
        let slope = dot(&gw, &dw) + gb * db;
        let mut step = 1.0;
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&dw).map(|(wk, dk)| wk + step * dk).collect();
            let cand_b = b + step * db;
            let cand_f = problem.objective(&cand_w, cand_b);
            if cand_f <= f + 1e-4 * step * slope || step < 1e-12 {
                w = cand_w;
                b = cand_b;
                f = cand_f;
                break;
            }
            step *= 0.5;
        }
    }
    Ok(LogRegModel {
        weights: w,
        bias: b,
        l2_lambda: lambda,
        iterations,
        converged,
    })
}

pub fn predict_proba(model: &LogRegModel, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.weights.len() {
        return Err(Error::shape(format!("{} features", model.weights.len()), x.cols()));
    }
    Ok(x.iter_rows().map(|row| sigmoid(dot(row, &model.weights) + model.bias)).collect())
}
