//! Graphviz export for graphs and polygon fragments.
//!
//! Bipartite fragments draw part 0 as circles and part 1 as boxes. When the
//! caller knows which vertices each completion round added, those groups get
//! filled in distinct colors so the growth pattern is visible at a glance.

use crate::error::{Error, Result};
use crate::structure::{ClassData, FinStructure, VertexId};
use std::collections::BTreeMap;
use std::fmt::Write;

/// Fill colors by round, starting with round 1. Round 0 (the seed) stays
/// unfilled. Cycles if the completion ran deeper than the palette.
const ROUND_FILLS: [&str; 5] = ["#cfe8ff", "#ffd9a8", "#d5f0c9", "#ecd2f5", "#f5cecc"];

pub fn to_dot(s: &FinStructure) -> Result<String> {
    to_dot_rounds(s, &[])
}

/// `rounds[i]` lists the vertices adjoined in completion round `i + 1`.
pub fn to_dot_rounds(s: &FinStructure, rounds: &[Vec<VertexId>]) -> Result<String> {
    let (edges, part): (_, Option<&BTreeMap<VertexId, u8>>) = match &s.data {
        ClassData::Graph { edges } => (edges, None),
        ClassData::NGon { edges, part, .. } => (edges, Some(part)),
        _ => {
            return Err(Error::BadParameter(format!(
                "dot export covers graphs and polygon fragments, not {}",
                s.class
            )))
        }
    };
    let mut round_of = BTreeMap::new();
    for (i, group) in rounds.iter().enumerate() {
        for &v in group {
            round_of.insert(v, i);
        }
    }
    let mut out = String::from("graph fragment {\n");
    for &v in &s.vertices {
        let mut attrs = Vec::new();
        if let Some(part) = part {
            let shape = match part.get(&v) {
                Some(1) => "box",
                _ => "circle",
            };
            attrs.push(format!("shape={shape}"));
        }
        if let Some(&i) = round_of.get(&v) {
            attrs.push("style=filled".into());
            attrs.push(format!(
                "fillcolor=\"{}\"",
                ROUND_FILLS[i % ROUND_FILLS.len()]
            ));
        }
        if attrs.is_empty() {
            writeln!(out, "  v{};", v.0).unwrap();
        } else {
            writeln!(out, "  v{} [{}];", v.0, attrs.join(", ")).unwrap();
        }
    }
    for e in edges {
        writeln!(out, "  v{} -- v{};", e.0 .0, e.1 .0).unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::ClassTag;

    fn v(i: u32) -> VertexId {
        VertexId(i)
    }

    #[test]
    fn plain_graph_export() {
        let g = FinStructure::graph([v(0), v(1), v(2)], [(v(0), v(1))]);
        let dot = to_dot(&g).unwrap();
        assert_eq!(dot, "graph fragment {\n  v0;\n  v1;\n  v2;\n  v0 -- v1;\n}\n");
    }

    #[test]
    fn parts_pick_shapes_and_rounds_pick_fills() {
        let s = FinStructure::ngon(
            3,
            [v(0), v(1), v(2)],
            [(v(0), 0), (v(1), 1), (v(2), 0)],
            [(v(0), v(1)), (v(1), v(2))],
            1,
        );
        let dot = to_dot_rounds(&s, &[vec![v(2)]]).unwrap();
        assert!(dot.contains("v0 [shape=circle];"));
        assert!(dot.contains("v1 [shape=box];"));
        assert!(dot.contains("v2 [shape=circle, style=filled, fillcolor=\"#cfe8ff\"];"));
        assert!(dot.contains("v1 -- v2;"));
    }

    #[test]
    fn unsupported_classes_are_refused() {
        let p = FinStructure::empty(ClassTag::Poset);
        assert!(matches!(to_dot(&p), Err(Error::BadParameter(_))));
    }
}
