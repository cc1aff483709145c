//! Second-order (return / in-out biased) random walks.
//!
//! From node `v` reached via `t`, the unnormalized weight of neighbor `x` is
//! `w(v, x) / p` if `x == t`, `w(v, x)` if `x` neighbors `t`, and `w(v, x) / q`
//! otherwise. The first step has no predecessor and follows `w(v, x)`.
//! Second-order rows are evaluated on the fly from the sorted adjacency, so
//! memory stays linear in the number of edges.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::CooccurrenceGraph;
use crate::error::{Error, Result};
use crate::exec::{self, derive_seed, Execution};

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    return_param: f64,
    inout_param: f64,
    neighbors: Vec<Vec<(usize, f64)>>,
    /// Cumulative first-step probabilities, aligned with `neighbors`.
    first_step_cdf: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub length: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            walks_per_node: 10,
            length: 40,
            seed: 0,
        }
    }
}

pub fn build_transitions(g: &CooccurrenceGraph, p: f64, q: f64) -> Result<TransitionTable> {
    if !(p > 0.0 && p.is_finite()) || !(q > 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!(
            "walk parameters must be positive, got p={p} q={q}"
        )));
    }
    let neighbors: Vec<Vec<(usize, f64)>> = (0..g.len())
        .map(|i| g.neighbors(i).iter().map(|&(j, w)| (j, w as f64)).collect())
        .collect();
    let first_step_cdf = neighbors
        .iter()
        .map(|row| cumulative(row.iter().map(|&(_, w)| w)))
        .collect();
    Ok(TransitionTable {
        return_param: p,
        inout_param: q,
        neighbors,
        first_step_cdf,
    })
}

fn cumulative(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    if acc > 0.0 {
        out.iter_mut().for_each(|c| *c /= acc);
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
    }
    out
}

impl TransitionTable {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn return_param(&self) -> f64 {
        self.return_param
    }

    pub fn inout_param(&self) -> f64 {
        self.inout_param
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.neighbors[v]
    }

    fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors[a]
            .binary_search_by_key(&b, |&(k, _)| k)
            .is_ok()
    }

    fn biased_weights(&self, prev: usize, current: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors[current].iter().map(move |&(x, w)| {
            let bias = if x == prev {
                1.0 / self.return_param
            } else if self.is_adjacent(prev, x) {
                1.0
            } else {
                1.0 / self.inout_param
            };
            (x, w * bias)
        })
    }

    /// Normalized next-step distribution at `current`, optionally given the previous node.
    pub fn probabilities(&self, prev: Option<usize>, current: usize) -> Result<Vec<(usize, f64)>> {
        self.check_node(current)?;
        if let Some(t) = prev {
            self.check_node(t)?;
        }
        if self.neighbors[current].is_empty() {
            return Err(Error::IsolatedNode(current));
        }
        let weights: Vec<(usize, f64)> = match prev {
            None => self.neighbors[current].clone(),
            Some(t) => self.biased_weights(t, current).collect(),
        };
        let total: f64 = weights.iter().map(|&(_, w)| w).sum();
        Ok(weights.into_iter().map(|(x, w)| (x, w / total)).collect())
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.neighbors.len() {
            return Err(Error::IndexOutOfRange {
                index: v,
                size: self.neighbors.len(),
            });
        }
        Ok(())
    }

    /// Draws the next node by inverse-CDF sampling with `u` uniform in `[0, 1)`.
    fn step(&self, prev: Option<usize>, current: usize, u: f64) -> usize {
        let row = &self.neighbors[current];
        match prev {
            None => {
                let cdf = &self.first_step_cdf[current];
                let pos = cdf.partition_point(|&c| c <= u).min(row.len() - 1);
                row[pos].0
            }
            Some(t) => {
                let total: f64 = self.biased_weights(t, current).map(|(_, w)| w).sum();
                let target = u * total;
                let mut acc = 0.0;
                let mut chosen = row[row.len() - 1].0;
                for (x, w) in self.biased_weights(t, current) {
                    acc += w;
                    if target < acc {
                        chosen = x;
                        break;
                    }
                }
                chosen
            }
        }
    }

    fn walk_with(&self, start: usize, length: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut walk = Vec::with_capacity(length);
        walk.push(start);
        let mut prev = None;
        while walk.len() < length {
            let current = *walk.last().expect("walk starts non-empty");
            let next = self.step(prev, current, rng.gen::<f64>());
            prev = Some(current);
            walk.push(next);
        }
        walk
    }
}

pub fn sample_walk(t: &TransitionTable, start: usize, length: usize, seed: u64) -> Result<Vec<usize>> {
    t.check_node(start)?;
    if length == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    if t.neighbors[start].is_empty() {
        return Err(Error::IsolatedNode(start));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(t.walk_with(start, length, &mut rng))
}

/// `walks_per_node` rounds over every non-isolated node. Each walk draws from
/// its own seed stream, so the corpus is identical in both execution modes.
pub fn generate_walks(t: &TransitionTable, cfg: &WalkConfig, exec: Execution) -> Result<Vec<Vec<usize>>> {
    if cfg.length == 0 {
        return Err(Error::invalid("walk length must be at least 1"));
    }
    let starts: Vec<usize> = (0..t.len()).filter(|&v| !t.neighbors[v].is_empty()).collect();
    let total = starts.len() * cfg.walks_per_node;
    Ok(exec::map_range(exec, total, |k| {
        let start = starts[k % starts.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, k as u64));
        t.walk_with(start, cfg.length, &mut rng)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, u64)]) -> CooccurrenceGraph {
        CooccurrenceGraph::from_upper_edges(n, 60, edges.iter().copied()).unwrap()
    }

    fn prob_of(dist: &[(usize, f64)], x: usize) -> f64 {
        dist.iter().find(|&&(k, _)| k == x).map_or(0.0, |&(_, p)| p)
    }

    #[test]
    fn path_graph_unbiased() {
        let t = build_transitions(&graph(3, &[(0, 1, 1), (1, 2, 1)]), 1.0, 1.0).unwrap();
        let d = t.probabilities(Some(0), 1).unwrap();
        assert_eq!(prob_of(&d, 0), 0.5);
        assert_eq!(prob_of(&d, 2), 0.5);
    }

    #[test]
    fn path_graph_inout_bias() {
        // weights {1/p, 1/q} = {1, 0.25} normalize to {0.8, 0.2}
        let t = build_transitions(&graph(3, &[(0, 1, 1), (1, 2, 1)]), 1.0, 4.0).unwrap();
        let d = t.probabilities(Some(0), 1).unwrap();
        assert!((prob_of(&d, 0) - 0.8).abs() < 1e-15);
        assert!((prob_of(&d, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn triangle_neighbor_of_prev_has_unit_bias() {
        let t = build_transitions(&graph(4, &[(0, 1, 1), (1, 2, 1), (0, 2, 1), (1, 3, 1)]), 2.0, 0.5)
            .unwrap();
        let d = t.probabilities(Some(0), 1).unwrap();
        // raw {0: 1/2, 2: 1, 3: 2}
        assert!((prob_of(&d, 0) - 0.5 / 3.5).abs() < 1e-15);
        assert!((prob_of(&d, 2) - 1.0 / 3.5).abs() < 1e-15);
        assert!((prob_of(&d, 3) - 2.0 / 3.5).abs() < 1e-15);
    }

    #[test]
    fn isolated_and_bad_params() {
        let g = graph(3, &[(0, 1, 1)]);
        assert!(build_transitions(&g, 0.0, 1.0).is_err());
        assert!(build_transitions(&g, 1.0, -1.0).is_err());
        let t = build_transitions(&g, 1.0, 1.0).unwrap();
        assert!(t.neighbors(2).is_empty());
        assert!(matches!(sample_walk(&t, 2, 3, 0), Err(Error::IsolatedNode(2))));
        assert!(matches!(t.probabilities(None, 2), Err(Error::IsolatedNode(2))));
        assert!(sample_walk(&t, 0, 0, 0).is_err());
        assert!(sample_walk(&t, 9, 2, 0).is_err());
    }

    #[test]
    fn forced_and_trivial_walks() {
        let t = build_transitions(&graph(2, &[(0, 1, 3)]), 1.0, 1.0).unwrap();
        assert_eq!(sample_walk(&t, 0, 1, 5).unwrap(), vec![0]);
        assert_eq!(sample_walk(&t, 0, 4, 5).unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn walks_follow_edges_and_are_reproducible() {
        let g = graph(5, &[(0, 1, 2), (1, 2, 1), (2, 3, 5), (3, 4, 1), (0, 4, 1)]);
        let t = build_transitions(&g, 0.5, 2.0).unwrap();
        let cfg = WalkConfig {
            walks_per_node: 3,
            length: 20,
            seed: 9,
        };
        let a = generate_walks(&t, &cfg, Execution::Sequential).unwrap();
        let b = generate_walks(&t, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 15);
        for w in &a {
            assert_eq!(w.len(), 20);
            for pair in w.windows(2) {
                assert!(g.weight(pair[0], pair[1]) > 0);
            }
        }
    }
}
