use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::ehr::Admission;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// One hour.
pub const DEFAULT_WINDOW_MINUTES: u32 = 60;

/// Symmetric integer adjacency over services, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    n: usize,
    window_minutes: u32,
    /// Per node: `(neighbor, weight)` sorted by neighbor, weights > 0.
    adjacency: Vec<Vec<(usize, u64)>>,
}

impl CooccurrenceGraph {
    pub fn from_upper_edges(
        n: usize,
        window_minutes: u32,
        edges: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); n];
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    index: i.max(j),
                    size: n,
                });
            }
            if i == j || w == 0 {
                continue;
            }
            *rows[i].entry(j).or_default() += w;
            *rows[j].entry(i).or_default() += w;
        }
        Ok(CooccurrenceGraph {
            n,
            window_minutes,
            adjacency: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn window_minutes(&self) -> u32 {
        self.window_minutes
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, u64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, i: usize, j: usize) -> u64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0, |pos| self.adjacency[i][pos].1)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Upper-triangle `i,j,weight` lines.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# nodes={} window_minutes={}\n", self.n, self.window_minutes);
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, w) in row.iter().filter(|&&(j, _)| j > i) {
                let _ = writeln!(out, "{i},{j},{w}");
            }
        }
        out
    }
}

/// Parses the output of [`CooccurrenceGraph::to_edge_list`].
pub fn parse_edge_list(text: &str, source: &str) -> Result<CooccurrenceGraph> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut header: Option<(usize, u32)> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if let Some(meta) = line.strip_prefix('#') {
            let mut n = None;
            let mut window = None;
            for tok in meta.split_whitespace() {
                if let Some(v) = tok.strip_prefix("nodes=") {
                    n = v.parse().ok();
                } else if let Some(v) = tok.strip_prefix("window_minutes=") {
                    window = v.parse().ok();
                }
            }
            if let (Some(n), Some(w)) = (n, window) {
                header = Some((n, w));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        let parsed = match parts.as_slice() {
            [i, j, w] => i
                .parse::<usize>()
                .and_then(|i| Ok((i, j.parse::<usize>()?, w.parse::<u64>()?)))
                .ok(),
            _ => None,
        };
        let (i, j, w) = parsed.ok_or_else(|| err(line_no, format!("bad edge line `{line}`")))?;
        if i >= j {
            return Err(err(line_no, "edges must be upper-triangle (i < j)".into()));
        }
        edges.push((i, j, w));
    }
    let (n, window) = header.ok_or_else(|| err(1, "missing `# nodes=.. window_minutes=..` header".into()))?;
    CooccurrenceGraph::from_upper_edges(n, window, edges)
}

/// Counts, per admission, every unordered pair of events with distinct codes
/// whose timestamps differ by at most `window_minutes`.
pub fn build_cooccurrence(
    admissions: &[Admission],
    vocab_size: usize,
    window_minutes: u32,
    exec: Execution,
) -> Result<CooccurrenceGraph> {
    if window_minutes == 0 {
        return Err(Error::invalid("window_minutes must be at least 1"));
    }
    for a in admissions {
        if let Some(e) = a.events.iter().find(|e| e.code >= vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: e.code,
                size: vocab_size,
            });
        }
    }

    let per_admission = exec::map_slice(exec, admissions, |a| {
        let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let events = &a.events;
        for (x, ex) in events.iter().enumerate() {
            for ey in &events[x + 1..] {
                // events are time-sorted, so the scan stops at the window edge
                if ey.time - ex.time > window_minutes {
                    break;
                }
                if ex.code != ey.code {
                    let key = (ex.code.min(ey.code), ex.code.max(ey.code));
                    *counts.entry(key).or_default() += 1;
                }
            }
        }
        counts
    });

    let mut total: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for counts in per_admission {
        for (k, v) in counts {
            *total.entry(k).or_default() += v;
        }
    }
    CooccurrenceGraph::from_upper_edges(
        vocab_size,
        window_minutes,
        total.into_iter().map(|((i, j), w)| (i, j, w)),
    )
}
