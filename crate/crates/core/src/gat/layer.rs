use super::{GatGrads, GatParams, NodeGraph};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

fn leaky(x: f64, leak: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        leak * x
    }
}

fn leaky_slope(x: f64, leak: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        leak
    }
}

/// Per-edge raw scores `a₁·z_i + a₂·z_j`, in adjacency order.
fn raw_scores(params: &GatParams, z: &Matrix, neighbors: &[usize], i: usize) -> Vec<f64> {
    let d = params.dim_out();
    let (a_self, a_other) = params.attention.split_at(d);
    let own = dot(a_self, z.row(i));
    neighbors.iter().map(|&j| own + dot(a_other, z.row(j))).collect()
}

fn check_features(params: &GatParams, g: &NodeGraph) -> Result<()> {
    params.validate()?;
    if g.features().cols() != params.dim_in() {
        return Err(Error::shape(
            format!("{} feature columns", params.dim_in()),
            g.features().cols(),
        ));
    }
    Ok(())
}

pub fn attention_scores(params: &GatParams, g: &NodeGraph, i: usize) -> Result<Vec<(usize, f64)>> {
    if i >= g.len() {
        return Err(Error::IndexOutOfRange { index: i, size: g.len() });
    }
    check_features(params, g)?;
    let z = g.features().matmul(&params.w)?;
    let neighbors = g.neighbors(i);
    Ok(neighbors
        .iter()
        .zip(raw_scores(params, &z, neighbors, i))
        .map(|(&j, s)| (j, leaky(s, params.leak)))
        .collect())
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&e| (e - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Max-shifted softmax over one node's scores.
pub fn normalize_attention(scores: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalize an empty score list"));
    }
    if scores.iter().any(|(_, e)| !e.is_finite()) {
        return Err(Error::NonFinite("attention scores"));
    }
    let raw: Vec<f64> = scores.iter().map(|&(_, e)| e).collect();
    Ok(scores.iter().map(|&(j, _)| j).zip(softmax(&raw)).collect())
}

/// Intermediate values of one forward pass of a head.
pub(crate) struct HeadTrace {
    pub z: Matrix,
    /// Per node, pre-activation scores in adjacency order.
    pub raw: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub pre: Matrix,
    pub out: Matrix,
}

pub(crate) fn forward_trace(params: &GatParams, g: &NodeGraph) -> Result<HeadTrace> {
    check_features(params, g)?;
    let z = g.features().matmul(&params.w)?;
    let n = g.len();
    let d = params.dim_out();
    let mut raw = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut pre = Matrix::zeros(n, d);
    let mut out = Matrix::zeros(n, d);
    for i in 0..n {
        let neighbors = g.neighbors(i);
        let s = raw_scores(params, &z, neighbors, i);
        let e: Vec<f64> = s.iter().map(|&x| leaky(x, params.leak)).collect();
        let a = softmax(&e);
        let m = pre.row_mut(i);
        for (&j, &w) in neighbors.iter().zip(&a) {
            axpy(w, z.row(j), m);
        }
        for (o, &v) in out.row_mut(i).iter_mut().zip(pre.row(i)) {
            *o = params.activation.apply(v);
        }
        raw.push(s);
        alpha.push(a);
    }
    Ok(HeadTrace {
        z,
        raw,
        alpha,
        pre,
        out,
    })
}

pub fn gat_forward(params: &GatParams, g: &NodeGraph) -> Result<Matrix> {
    forward_trace(params, g).map(|t| t.out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatBackward {
    pub params: GatGrads,
    pub features: Matrix,
}

pub(crate) fn backward_from_trace(
    params: &GatParams,
    g: &NodeGraph,
    trace: &HeadTrace,
    upstream: &Matrix,
) -> Result<GatBackward> {
    let n = g.len();
    let d = params.dim_out();
    if upstream.shape() != (n, d) {
        return Err(Error::shape(format!("{:?}", (n, d)), format!("{:?}", upstream.shape())));
    }
    let (a_self, a_other) = params.attention.split_at(d);
    let mut dz = Matrix::zeros(n, d);
    let mut da_self = vec![0.0; d];
    let mut da_other = vec![0.0; d];
    let mut dm = vec![0.0; d];

    for i in 0..n {
        for ((g_m, &u), &m) in dm.iter_mut().zip(upstream.row(i)).zip(trace.pre.row(i)) {
            *g_m = u * params.activation.derivative(m);
        }
        let neighbors = g.neighbors(i);
        let alpha = &trace.alpha[i];
        // dL/dα_ij = dm_i · z_j ; the aggregation also routes α_ij·dm_i into z_j
        let d_alpha: Vec<f64> = neighbors.iter().map(|&j| dot(&dm, trace.z.row(j))).collect();
        for (&j, &a) in neighbors.iter().zip(alpha) {
            axpy(a, &dm, dz.row_mut(j));
        }
        // softmax Jacobian: de_ij = α_ij (dα_ij - Σ_k α_ik dα_ik)
        let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, g)| a * g).sum();
        for (k, &j) in neighbors.iter().enumerate() {
            let de = alpha[k] * (d_alpha[k] - mean);
            let ds = de * leaky_slope(trace.raw[i][k], params.leak);
            if ds == 0.0 {
                continue;
            }
            axpy(ds, trace.z.row(i), &mut da_self);
            axpy(ds, trace.z.row(j), &mut da_other);
            axpy(ds, a_self, dz.row_mut(i));
            axpy(ds, a_other, dz.row_mut(j));
        }
    }

    let w = g.features().t_matmul(&dz)?;
    let features = dz.matmul_t(&params.w)?;
    da_self.extend(da_other);
    Ok(GatBackward {
        params: GatGrads {
            w,
            attention: da_self,
        },
        features,
    })
}

/// Gradients of `Σ upstream ⊙ gat_forward(params, g)` with respect to
/// `W`, the attention vector and the node features.
pub fn gat_backward(params: &GatParams, g: &NodeGraph, upstream: &Matrix) -> Result<GatBackward> {
    let trace = forward_trace(params, g)?;
    backward_from_trace(params, g, &trace, upstream)
}
