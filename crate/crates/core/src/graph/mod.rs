//! Service co-occurrence graph and second-order random walks over it.

mod cooccurrence;
mod walk;

pub use cooccurrence::{build_cooccurrence, parse_edge_list, CooccurrenceGraph, DEFAULT_WINDOW_MINUTES};
pub use walk::{build_transitions, generate_walks, sample_walk, TransitionTable, WalkConfig};
