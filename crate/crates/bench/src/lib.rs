//! Shared fixtures for the benchmark targets.

use fraisse_core::sir::{default_ambient, SirKind};
use fraisse_core::structure::{FinStructure, VertexId};

/// Depth-3 saturated graph ambient, the usual probe target.
pub fn graph_ambient() -> FinStructure {
    default_ambient(SirKind::FreeGraph, 3, 11).expect("ambient builds")
}

/// Path with `len` edges as a graph.
pub fn path_graph(len: u32) -> FinStructure {
    FinStructure::graph(
        (0..=len).map(VertexId),
        (0..len).map(|i| (VertexId(i), VertexId(i + 1))),
    )
}

/// Path with `len` edges as an n-gon fragment, parts alternating.
pub fn path_fragment(n: u32, len: u32) -> FinStructure {
    FinStructure::ngon(
        n,
        (0..=len).map(VertexId),
        (0..=len).map(|i| (VertexId(i), (i % 2) as u8)),
        (0..len).map(|i| (VertexId(i), VertexId(i + 1))),
        0,
    )
}
