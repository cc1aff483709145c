//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use healthgat::ehr::{Admission, Event};
use healthgat::embed::{sgns_pair_gradients, sgns_pair_loss};
use healthgat::gat::{gat_backward, gat_forward, Activation, GatParams, NodeGraph, DEFAULT_LEAK};
use healthgat::linalg::{dot, Matrix};
use rand::Rng;

// ---------------------------------------------------------------- journeys

pub fn admission(id: &str, events: &[(u32, usize)]) -> Admission {
    let mut events: Vec<Event> = events.iter().map(|&(time, code)| Event { time, code }).collect();
    events.sort();
    let duration_minutes = events.last().map_or(1, |e| e.time + 1);
    Admission {
        admission_id: id.to_string(),
        patient_id: format!("P{id}"),
        events,
        labels: BTreeMap::new(),
        duration_minutes,
    }
}

/// Up to four admissions with at most `max_events` events in total.
pub fn random_admissions(rng: &mut impl Rng, max_events: usize, vocab: usize, horizon: u32) -> Vec<Admission> {
    let count = rng.gen_range(1..=4);
    let mut budget = rng.gen_range(0..=max_events);
    (0..count)
        .map(|k| {
            let n = if k + 1 == count { budget } else { rng.gen_range(0..=budget) };
            budget -= n;
            let events: Vec<(u32, usize)> =
                (0..n).map(|_| (rng.gen_range(0..horizon), rng.gen_range(0..vocab))).collect();
            admission(&format!("A{k}"), &events)
        })
        .collect()
}

/// Every unordered event pair with distinct codes within the window, per admission.
pub fn cooccurrence_oracle(admissions: &[Admission], window: u32) -> BTreeMap<(usize, usize), u64> {
    let mut out = BTreeMap::new();
    for a in admissions {
        for i in 0..a.events.len() {
            for j in i + 1..a.events.len() {
                let (x, y) = (a.events[i], a.events[j]);
                if x.code != y.code && x.time.abs_diff(y.time) <= window {
                    *out.entry((x.code.min(y.code), x.code.max(y.code))).or_insert(0) += 1;
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------- gradients

/// Relative error with a floor on the denominator so near-zero entries are
/// judged on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

pub struct GatInstance {
    pub params: GatParams,
    pub graph: NodeGraph,
    pub upstream: Matrix,
}

pub fn random_neighbors(rng: &mut impl Rng, n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| (0..n).filter(|&j| j == i || rng.gen_bool(0.5)).collect())
        .collect()
}

/// At most 5 nodes and 4 dimensions.
pub fn random_gat_instance(rng: &mut impl Rng) -> GatInstance {
    let n = rng.gen_range(1..=5);
    let dim_in = rng.gen_range(1..=4);
    let dim_out = rng.gen_range(1..=4);
    let activation = if rng.gen_bool(0.5) { Activation::Elu } else { Activation::Linear };
    let params = GatParams {
        w: random_matrix(rng, dim_in, dim_out),
        attention: (0..2 * dim_out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        leak: DEFAULT_LEAK,
        activation,
    };
    let graph = NodeGraph::new(random_matrix(rng, n, dim_in), random_neighbors(rng, n)).unwrap();
    let upstream = random_matrix(rng, n, dim_out);
    GatInstance { params, graph, upstream }
}

/// Smallest |a₁·z_i + a₂·z_j| over all edges: distance from the leaky-ReLU kink.
pub fn min_abs_raw_score(inst: &GatInstance) -> f64 {
    let p = &inst.params;
    let z = inst.graph.features().matmul(&p.w).unwrap();
    let (a1, a2) = p.attention.split_at(p.dim_out());
    let mut min = f64::INFINITY;
    for i in 0..inst.graph.len() {
        for &j in inst.graph.neighbors(i) {
            min = min.min((dot(a1, z.row(i)) + dot(a2, z.row(j))).abs());
        }
    }
    min
}

fn gat_objective(params: &GatParams, graph: &NodeGraph, upstream: &Matrix) -> f64 {
    let out = gat_forward(params, graph).unwrap();
    dot(out.as_slice(), upstream.as_slice())
}

/// Max relative error between `gat_backward` and central differences over
/// every weight, attention and feature entry.
pub fn gat_fd_max_rel_err(inst: &GatInstance, eps: f64) -> f64 {
    let analytic = gat_backward(&inst.params, &inst.graph, &inst.upstream).unwrap();
    let mut worst: f64 = 0.0;
    let f = |p: &GatParams, g: &NodeGraph| gat_objective(p, g, &inst.upstream);

    for k in 0..inst.params.w.as_slice().len() {
        let (mut plus, mut minus) = (inst.params.clone(), inst.params.clone());
        plus.w.as_mut_slice()[k] += eps;
        minus.w.as_mut_slice()[k] -= eps;
        let numeric = (f(&plus, &inst.graph) - f(&minus, &inst.graph)) / (2.0 * eps);
        worst = worst.max(rel_err(analytic.params.w.as_slice()[k], numeric));
    }
    for k in 0..inst.params.attention.len() {
        let (mut plus, mut minus) = (inst.params.clone(), inst.params.clone());
        plus.attention[k] += eps;
        minus.attention[k] -= eps;
        let numeric = (f(&plus, &inst.graph) - f(&minus, &inst.graph)) / (2.0 * eps);
        worst = worst.max(rel_err(analytic.params.attention[k], numeric));
    }
    let h = inst.graph.features();
    for k in 0..h.as_slice().len() {
        let (mut plus, mut minus) = (h.clone(), h.clone());
        plus.as_mut_slice()[k] += eps;
        minus.as_mut_slice()[k] -= eps;
        let gp = inst.graph.with_features(plus).unwrap();
        let gm = inst.graph.with_features(minus).unwrap();
        let numeric = (f(&inst.params, &gp) - f(&inst.params, &gm)) / (2.0 * eps);
        worst = worst.max(rel_err(analytic.features.as_slice()[k], numeric));
    }
    worst
}

/// Max relative error of the SGNS pair gradients on a random instance.
pub fn sgns_fd_max_rel_err(rng: &mut impl Rng, eps: f64) -> f64 {
    let dim = rng.gen_range(1..=4);
    let k = rng.gen_range(1..=3);
    let mut vec = || -> Vec<f64> { (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let center = vec();
    let context = vec();
    let negatives: Vec<Vec<f64>> = (0..k).map(|_| vec()).collect();
    let loss = |u: &[f64], v: &[f64], n: &[Vec<f64>]| {
        let r: Vec<&[f64]> = n.iter().map(Vec::as_slice).collect();
        sgns_pair_loss(u, v, &r)
    };
    let neg_refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let g = sgns_pair_gradients(&center, &context, &neg_refs);
    let mut worst: f64 = 0.0;
    for d in 0..dim {
        let (mut p, mut m) = (center.clone(), center.clone());
        p[d] += eps;
        m[d] -= eps;
        let numeric = (loss(&p, &context, &negatives) - loss(&m, &context, &negatives)) / (2.0 * eps);
        worst = worst.max(rel_err(g.center[d], numeric));

        let (mut p, mut m) = (context.clone(), context.clone());
        p[d] += eps;
        m[d] -= eps;
        let numeric = (loss(&center, &p, &negatives) - loss(&center, &m, &negatives)) / (2.0 * eps);
        worst = worst.max(rel_err(g.context[d], numeric));

        for s in 0..k {
            let (mut p, mut m) = (negatives.clone(), negatives.clone());
            p[s][d] += eps;
            m[s][d] -= eps;
            let numeric = (loss(&center, &context, &p) - loss(&center, &context, &m)) / (2.0 * eps);
            worst = worst.max(rel_err(g.negatives[s][d], numeric));
        }
    }
    worst
}

// ---------------------------------------------------------------- metrics

pub fn f1_definition(tp: usize, fp: usize, fne: usize) -> f64 {
    if tp + fp + fne == 0 {
        0.0
    } else {
        (2 * tp) as f64 / (2 * tp + fp + fne) as f64
    }
}

/// `(micro, macro, per_class)` from explicit per-class confusion counts.
pub fn f1_oracle(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> (f64, f64, Vec<f64>) {
    let mut total = (0, 0, 0);
    let mut per_class = Vec::new();
    for (t, p) in truth.iter().zip(pred) {
        let tp = (0..t.len()).filter(|&i| t[i] && p[i]).count();
        let fp = (0..t.len()).filter(|&i| !t[i] && p[i]).count();
        let fne = (0..t.len()).filter(|&i| t[i] && !p[i]).count();
        total = (total.0 + tp, total.1 + fp, total.2 + fne);
        per_class.push(f1_definition(tp, fp, fne));
    }
    let macro_f1 = per_class.iter().sum::<f64>() / per_class.len() as f64;
    (f1_definition(total.0, total.1, total.2), macro_f1, per_class)
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting one half.
pub fn auroc_oracle(y: &[bool], s: &[f64]) -> Option<f64> {
    let (mut pairs, mut wins) = (0usize, 0.0);
    for i in (0..y.len()).filter(|&i| y[i]) {
        for j in (0..y.len()).filter(|&j| !y[j]) {
            pairs += 1;
            if s[i] > s[j] {
                wins += 1.0;
            } else if s[i] == s[j] {
                wins += 0.5;
            }
        }
    }
    (pairs > 0).then(|| wins / pairs as f64)
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Mean over positives of precision among items scoring at least as high,
/// summed as an exact fraction and rounded once.
pub fn ap_oracle(y: &[bool], s: &[f64]) -> Option<f64> {
    let positives: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    if positives.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0u128, 1u128);
    for &i in &positives {
        let above = (0..y.len()).filter(|&j| s[j] >= s[i]).count() as u128;
        let hits = (0..y.len()).filter(|&j| y[j] && s[j] >= s[i]).count() as u128;
        num = num * above + hits * den;
        den *= above;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    den *= positives.len() as u128;
    let g = gcd(num, den);
    Some((num / g) as f64 / (den / g) as f64)
}

/// Every binary label vector paired with every score vector over `grid`, up to length `max_len`.
pub fn exhaustive_inputs(max_len: usize, grid: &[f64]) -> Vec<(Vec<bool>, Vec<f64>)> {
    let mut out = Vec::new();
    for n in 1..=max_len {
        for bits in 0..1usize << n {
            let y: Vec<bool> = (0..n).map(|i| bits >> i & 1 == 1).collect();
            let combos = grid.len().pow(n as u32);
            for mut c in 0..combos {
                let s: Vec<f64> = (0..n)
                    .map(|_| {
                        let v = grid[c % grid.len()];
                        c /= grid.len();
                        v
                    })
                    .collect();
                out.push((y.clone(), s));
            }
        }
    }
    out
}

// ---------------------------------------------------------------- pipeline

pub fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/demo.cfg")
}

pub fn healthgat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_healthgat"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_demo(out: &Path, extra: &[&str]) -> Output {
    let cfg = demo_config();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    healthgat(&args)
}

pub type ReportRow = (String, Vec<Option<f64>>);

/// `report.csv` rows as `(task, [prevalence, micro, macro, auroc, auprc, f1])`.
pub fn read_report(path: &Path) -> Vec<ReportRow> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let mut cells = line.split(',');
            let task = cells.next().unwrap().to_string();
            (task, cells.map(|c| c.parse().ok()).collect())
        })
        .collect()
}
