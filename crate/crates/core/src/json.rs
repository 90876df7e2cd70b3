//! Wire format for finite structures.
//!
//! One JSON object per structure. `class` selects the shape; the other
//! fields are present exactly when the class uses them:
//!
//! ```text
//! {"class": "graph",  "vertices": [0,1], "edges": [[0,1]]}
//! {"class": "poset",  "vertices": [0,1], "order": [[0,1]]}
//! {"class": "metric", "vertices": [0,1], "dist": [[0,1,"3/2"]]}
//! {"class": "ngon", "n": 3, "vertices": [0,1], "part": {"0":0,"1":1},
//!  "edges": [[0,1]], "depth": 0}
//! ```
//!
//! Distances are exact rationals written as `"p"` or `"p/q"`. Poset `order`
//! lists strict pairs `a < b`; import re-closes transitively, so a file may
//! list only a generating set. Part keys are decimal vertex ids (JSON object
//! keys must be strings). `depth` is optional on input and defaults to 0.

use crate::error::{Error, Result};
use crate::structure::{ClassData, FinStructure, VertexId};
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Serde mirror of [`FinStructure`]. Field order here is the field order on
/// the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawStructure {
    pub class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    pub vertices: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<BTreeMap<String, u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(u32, u32)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<(u32, u32)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<(u32, u32, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
}

pub fn format_rational(r: Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(text: &str) -> Result<Rational64> {
    let bad = || Error::Malformed(format!("bad rational {text:?}"));
    match text.split_once('/') {
        None => text
            .trim()
            .parse::<i64>()
            .map(Rational64::from_integer)
            .map_err(|_| bad()),
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(p, q))
        }
    }
}

pub fn to_raw(s: &FinStructure) -> RawStructure {
    let vertices: Vec<u32> = s.vertices.iter().map(|v| v.0).collect();
    let mut raw = RawStructure {
        class: String::new(),
        n: None,
        vertices,
        part: None,
        edges: None,
        order: None,
        dist: None,
        depth: None,
    };
    match &s.data {
        ClassData::Graph { edges } => {
            raw.class = "graph".into();
            raw.edges = Some(edges.iter().map(|e| (e.0 .0, e.1 .0)).collect());
        }
        ClassData::Poset { order } => {
            raw.class = "poset".into();
            raw.order = Some(order.iter().map(|&(a, b)| (a.0, b.0)).collect());
        }
        ClassData::Metric { dist } => {
            raw.class = "metric".into();
            raw.dist = Some(
                dist.iter()
                    .map(|(e, d)| (e.0 .0, e.1 .0, format_rational(*d)))
                    .collect(),
            );
        }
        ClassData::NGon { edges, part, depth } => {
            raw.class = "ngon".into();
            raw.n = s.ngon_n();
            raw.part = Some(part.iter().map(|(v, p)| (v.0.to_string(), *p)).collect());
            raw.edges = Some(edges.iter().map(|e| (e.0 .0, e.1 .0)).collect());
            raw.depth = Some(*depth);
        }
    }
    raw
}

/// Builds the structure without checking class invariants. Callers that
/// want to report a validity verdict separately from parse failures (the
/// `validate` command) use this and run `validate` themselves; everybody
/// else goes through [`from_raw`].
pub fn build_raw(raw: &RawStructure) -> Result<FinStructure> {
    let verts: Vec<VertexId> = raw.vertices.iter().map(|&v| VertexId(v)).collect();
    let pairs = |field: &Option<Vec<(u32, u32)>>| -> Vec<(VertexId, VertexId)> {
        field
            .as_deref()
            .unwrap_or_default()
            .iter()
            .map(|&(a, b)| (VertexId(a), VertexId(b)))
            .collect()
    };
    let s = match raw.class.as_str() {
        "graph" => FinStructure::graph(verts, pairs(&raw.edges)),
        "poset" => FinStructure::poset(verts, pairs(&raw.order)),
        "metric" => {
            let mut dists = Vec::new();
            for (a, b, d) in raw.dist.as_deref().unwrap_or_default() {
                dists.push((VertexId(*a), VertexId(*b), parse_rational(d)?));
            }
            FinStructure::metric(verts, dists)
        }
        "ngon" => {
            let n = raw
                .n
                .ok_or_else(|| Error::Malformed("ngon structure needs \"n\"".into()))?;
            if n < 3 {
                return Err(Error::Malformed(format!("ngon needs n >= 3, got {n}")));
            }
            let mut part = Vec::new();
            for (k, &p) in raw.part.as_ref().into_iter().flatten() {
                let v: u32 = k
                    .parse()
                    .map_err(|_| Error::Malformed(format!("bad part key {k:?}")))?;
                part.push((VertexId(v), p));
            }
            FinStructure::ngon(
                n,
                verts,
                part,
                pairs(&raw.edges),
                raw.depth.unwrap_or(0),
            )
        }
        other => {
            return Err(Error::Malformed(format!(
                "unknown class {other:?} (expected graph, poset, metric, or ngon)"
            )))
        }
    };
    Ok(s)
}

pub fn from_raw(raw: &RawStructure) -> Result<FinStructure> {
    let s = build_raw(raw)?;
    if let Err(v) = s.validate() {
        return Err(Error::Malformed(format!("invalid {}: {v}", raw.class)));
    }
    Ok(s)
}

pub fn to_json(s: &FinStructure) -> String {
    serde_json::to_string(&to_raw(s)).expect("structure serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<FinStructure> {
    let raw: RawStructure =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    from_raw(&raw)
}
