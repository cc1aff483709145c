//! Checkpoints reuse the embedding block layout, one block per tensor:
//! `<rows> <cols> tensor:<name>` followed by rows named `r0`, `r1`, ...

use std::collections::BTreeMap;

use super::{Activation, GatModel, GatParams};
use crate::embed::{parse_blocks, write_block};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn row_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i}")).collect()
}

/// Writes the model plus any extra named tensors (decoders etc).
pub fn write_checkpoint(model: &GatModel, extras: &[(&str, &Matrix)]) -> Result<String> {
    let first = &model.layers[0][0];
    let mut out = format!(
        "# gat-checkpoint layers={} heads={} leak={:e} activation={}\n",
        model.layers.len(),
        model.layers[0].len(),
        first.leak,
        first.activation
    );
    for (l, heads) in model.layers.iter().enumerate() {
        for (h, p) in heads.iter().enumerate() {
            write_block(&mut out, &format!("tensor:layer{l}.head{h}.w"), &row_names(p.w.rows()), &p.w)?;
            let a = Matrix::from_vec(1, p.attention.len(), p.attention.clone())?;
            write_block(&mut out, &format!("tensor:layer{l}.head{h}.attention"), &row_names(1), &a)?;
        }
    }
    for (name, m) in extras {
        write_block(&mut out, &format!("tensor:{name}"), &row_names(m.rows()), m)?;
    }
    Ok(out)
}

pub fn parse_checkpoint(text: &str, source: &str) -> Result<(GatModel, BTreeMap<String, Matrix>)> {
    let bad = |m: String| Error::Parse {
        path: source.to_string(),
        line: 1,
        message: m,
    };
    let header = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# gat-checkpoint"))
        .ok_or_else(|| bad("missing `# gat-checkpoint` header".into()))?;
    let mut meta = BTreeMap::new();
    for tok in header.split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            meta.insert(k, v);
        }
    }
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| bad(format!("header lacks `{k}`")));
    let layers: usize = get("layers")?.parse().map_err(|_| bad("bad layer count".into()))?;
    let heads: usize = get("heads")?.parse().map_err(|_| bad("bad head count".into()))?;
    let leak: f64 = get("leak")?.parse().map_err(|_| bad("bad leak".into()))?;
    let activation: Activation = get("activation")?.parse()?;

    let mut tensors: BTreeMap<String, Matrix> = BTreeMap::new();
    for block in parse_blocks(text, source)? {
        let name = block
            .tag
            .strip_prefix("tensor:")
            .ok_or_else(|| bad(format!("unexpected block `{}`", block.tag)))?;
        tensors.insert(name.to_string(), block.values);
    }
    let mut model_layers = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut hs = Vec::with_capacity(heads);
        for h in 0..heads {
            let w = tensors
                .remove(&format!("layer{l}.head{h}.w"))
                .ok_or_else(|| bad(format!("missing layer{l}.head{h}.w")))?;
            let a = tensors
                .remove(&format!("layer{l}.head{h}.attention"))
                .ok_or_else(|| bad(format!("missing layer{l}.head{h}.attention")))?;
            let p = GatParams {
                w,
                attention: a.into_vec(),
                leak,
                activation,
            };
            p.validate()?;
            hs.push(p);
        }
        model_layers.push(hs);
    }
    if model_layers.is_empty() || model_layers[0].is_empty() {
        return Err(bad("checkpoint holds no heads".into()));
    }
    Ok((GatModel { layers: model_layers }, tensors))
}
