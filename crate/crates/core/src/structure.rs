//! Finite structures in the four supported classes.
//!
//! A [`FinStructure`] is an immutable value: every operation returns a fresh
//! structure. Vertex ids are opaque integers with no packed meaning, which is
//! what makes relabeling tests honest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;

use crate::error::{Error, Result, Violation};
use crate::ngon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassTag {
    Graph,
    Poset,
    RatMetric,
    /// Bipartite fragment of a generalized n-gon; carries the gonality.
    NGon(u32),
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassTag::Graph => write!(f, "graph"),
            ClassTag::Poset => write!(f, "poset"),
            ClassTag::RatMetric => write!(f, "metric"),
            ClassTag::NGon(n) => write!(f, "ngon({n})"),
        }
    }
}

/// Unordered vertex pair, stored min-first. Equal endpoints are representable
/// so that malformed input survives until `validate` can name it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(pub VertexId, pub VertexId);

impl Edge {
    pub fn new(a: VertexId, b: VertexId) -> Edge {
        if a <= b {
            Edge(a, b)
        } else {
            Edge(b, a)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassData {
    Graph {
        edges: BTreeSet<Edge>,
    },
    /// Strict order pairs (a, b) meaning a < b, kept transitively closed.
    /// Reflexivity is implicit in `leq`.
    Poset {
        order: BTreeSet<(VertexId, VertexId)>,
    },
    /// Distances on unordered pairs of distinct vertices; d(v, v) = 0 is
    /// implicit. Exact rationals, never floats.
    Metric {
        dist: BTreeMap<Edge, Rational64>,
    },
    NGon {
        edges: BTreeSet<Edge>,
        /// Bipartition label per vertex, 0 or 1.
        part: BTreeMap<VertexId, u8>,
        /// How many completion rounds produced this fragment. Bookkeeping
        /// only: excluded from isomorphism and canonical keys.
        depth: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinStructure {
    pub class: ClassTag,
    pub vertices: BTreeSet<VertexId>,
    pub data: ClassData,
}

fn transitive_close(mut order: BTreeSet<(VertexId, VertexId)>) -> BTreeSet<(VertexId, VertexId)> {
    loop {
        let mut new = Vec::new();
        for &(a, b) in &order {
            for &(b2, c) in order.range((b, VertexId(0))..) {
                if b2 != b {
                    break;
                }
                if a != c && !order.contains(&(a, c)) {
                    new.push((a, c));
                }
            }
        }
        if new.is_empty() {
            return order;
        }
        order.extend(new);
    }
}

impl FinStructure {
    pub fn graph(
        vertices: impl IntoIterator<Item = VertexId>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> FinStructure {
        FinStructure {
            class: ClassTag::Graph,
            vertices: vertices.into_iter().collect(),
            data: ClassData::Graph {
                edges: edges.into_iter().map(|(a, b)| Edge::new(a, b)).collect(),
            },
        }
    }

    /// Stores the transitive closure of the given strict pairs. A cyclic
    /// input closes to a symmetric pair, which `validate` then reports as an
    /// antisymmetry violation.
    pub fn poset(
        vertices: impl IntoIterator<Item = VertexId>,
        relations: impl IntoIterator<Item = (VertexId, VertexId)>,
    ) -> FinStructure {
        let strict: BTreeSet<_> = relations.into_iter().filter(|(a, b)| a != b).collect();
        FinStructure {
            class: ClassTag::Poset,
            vertices: vertices.into_iter().collect(),
            data: ClassData::Poset {
                order: transitive_close(strict),
            },
        }
    }

    pub fn metric(
        vertices: impl IntoIterator<Item = VertexId>,
        dists: impl IntoIterator<Item = (VertexId, VertexId, Rational64)>,
    ) -> FinStructure {
        let mut map = BTreeMap::new();
        for (a, b, d) in dists {
            if a == b && d.is_zero() {
                continue;
            }
            map.insert(Edge::new(a, b), d);
        }
        FinStructure {
            class: ClassTag::RatMetric,
            vertices: vertices.into_iter().collect(),
            data: ClassData::Metric { dist: map },
        }
    }

    pub fn ngon(
        n: u32,
        vertices: impl IntoIterator<Item = VertexId>,
        part: impl IntoIterator<Item = (VertexId, u8)>,
        edges: impl IntoIterator<Item = (VertexId, VertexId)>,
        depth: u32,
    ) -> FinStructure {
        FinStructure {
            class: ClassTag::NGon(n),
            vertices: vertices.into_iter().collect(),
            data: ClassData::NGon {
                edges: edges.into_iter().map(|(a, b)| Edge::new(a, b)).collect(),
                part: part.into_iter().collect(),
                depth,
            },
        }
    }

    pub fn empty(class: ClassTag) -> FinStructure {
        match class {
            ClassTag::Graph => FinStructure::graph([], []),
            ClassTag::Poset => FinStructure::poset([], []),
            ClassTag::RatMetric => FinStructure::metric([], []),
            ClassTag::NGon(n) => FinStructure::ngon(n, [], [], [], 0),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    /// Smallest id not used by any vertex.
    pub fn next_id(&self) -> VertexId {
        VertexId(self.vertices.iter().next_back().map_or(0, |v| v.0 + 1))
    }

    pub fn ngon_n(&self) -> Option<u32> {
        match self.class {
            ClassTag::NGon(n) => Some(n),
            _ => None,
        }
    }

    pub fn edges(&self) -> Option<&BTreeSet<Edge>> {
        match &self.data {
            ClassData::Graph { edges } | ClassData::NGon { edges, .. } => Some(edges),
            _ => None,
        }
    }

    pub fn adjacent(&self, a: VertexId, b: VertexId) -> bool {
        a != b
            && self
                .edges()
                .map_or(false, |e| e.contains(&Edge::new(a, b)))
    }

    pub fn neighbors(&self, v: VertexId) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        if let Some(edges) = self.edges() {
            for e in edges {
                if e.0 == v && e.1 != v {
                    out.insert(e.1);
                }
                if e.1 == v && e.0 != v {
                    out.insert(e.0);
                }
            }
        }
        out
    }

    pub fn adjacency(&self) -> BTreeMap<VertexId, Vec<VertexId>> {
        let mut adj: BTreeMap<VertexId, Vec<VertexId>> =
            self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        if let Some(edges) = self.edges() {
            for e in edges {
                if e.0 != e.1 {
                    if let Some(l) = adj.get_mut(&e.0) {
                        l.push(e.1);
                    }
                    if let Some(l) = adj.get_mut(&e.1) {
                        l.push(e.0);
                    }
                }
            }
        }
        adj
    }

    /// a <= b in the stored order. Reflexive by definition.
    pub fn leq(&self, a: VertexId, b: VertexId) -> bool {
        if a == b {
            return true;
        }
        match &self.data {
            ClassData::Poset { order } => order.contains(&(a, b)),
            _ => false,
        }
    }

    /// Exact distance between two vertices; None when the pair is missing
    /// from the table (invalid metric) or the class is wrong.
    pub fn dist(&self, a: VertexId, b: VertexId) -> Option<Rational64> {
        if a == b {
            return Some(Rational64::zero());
        }
        match &self.data {
            ClassData::Metric { dist } => dist.get(&Edge::new(a, b)).copied(),
            _ => None,
        }
    }

    pub fn part_of(&self, v: VertexId) -> Option<u8> {
        match &self.data {
            ClassData::NGon { part, .. } => part.get(&v).copied(),
            _ => None,
        }
    }

    pub fn completion_depth(&self) -> Option<u32> {
        match &self.data {
            ClassData::NGon { depth, .. } => Some(*depth),
            _ => None,
        }
    }

    pub fn with_depth(&self, d: u32) -> FinStructure {
        let mut s = self.clone();
        if let ClassData::NGon { depth, .. } = &mut s.data {
            *depth = d;
        }
        s
    }

    /// Total check of the class invariants. Reports the first violation with
    /// a witness; never errors.
    pub fn validate(&self) -> std::result::Result<(), Violation> {
        match &self.data {
            ClassData::Graph { edges } => self.validate_edges(edges),
            ClassData::Poset { order } => self.validate_order(order),
            ClassData::Metric { dist } => self.validate_metric(dist),
            ClassData::NGon { edges, part, .. } => self.validate_ngon(edges, part),
        }
    }

    fn validate_edges(&self, edges: &BTreeSet<Edge>) -> std::result::Result<(), Violation> {
        for e in edges {
            if e.0 == e.1 {
                return Err(Violation(format!("self-loop at vertex {}", e.0)));
            }
            for v in [e.0, e.1] {
                if !self.contains(v) {
                    return Err(Violation(format!("edge endpoint {v} is not a vertex")));
                }
            }
        }
        Ok(())
    }

    fn validate_order(
        &self,
        order: &BTreeSet<(VertexId, VertexId)>,
    ) -> std::result::Result<(), Violation> {
        for &(a, b) in order {
            if a == b {
                return Err(Violation(format!("reflexive pair stored for {a}")));
            }
            for v in [a, b] {
                if !self.contains(v) {
                    return Err(Violation(format!("order pair endpoint {v} is not a vertex")));
                }
            }
            if order.contains(&(b, a)) {
                return Err(Violation(format!("antisymmetry fails: {a} < {b} < {a}")));
            }
        }
        for &(a, b) in order {
            for &(b2, c) in order.range((b, VertexId(0))..) {
                if b2 != b {
                    break;
                }
                if a != c && !order.contains(&(a, c)) {
                    return Err(Violation(format!(
                        "transitivity fails: {a} < {b} < {c} but not {a} < {c}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate_metric(
        &self,
        dist: &BTreeMap<Edge, Rational64>,
    ) -> std::result::Result<(), Violation> {
        for (e, d) in dist {
            if e.0 == e.1 {
                return Err(Violation(format!("nonzero self-distance at {}", e.0)));
            }
            for v in [e.0, e.1] {
                if !self.contains(v) {
                    return Err(Violation(format!("distance endpoint {v} is not a vertex")));
                }
            }
            if *d <= Rational64::zero() {
                return Err(Violation(format!("d({}, {}) = {d} is not positive", e.0, e.1)));
            }
        }
        let vs: Vec<_> = self.vertices.iter().copied().collect();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                if !dist.contains_key(&Edge::new(vs[i], vs[j])) {
                    return Err(Violation(format!("d({}, {}) is missing", vs[i], vs[j])));
                }
            }
        }
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                let dij = dist[&Edge::new(vs[i], vs[j])];
                for k in 0..vs.len() {
                    if k == i || k == j {
                        continue;
                    }
                    let dik = dist[&Edge::new(vs[i], vs[k])];
                    let dkj = dist[&Edge::new(vs[k], vs[j])];
                    if dij > dik + dkj {
                        return Err(Violation(format!(
                            "triangle inequality fails: d({}, {}) = {dij} > {dik} + {dkj} via {}",
                            vs[i], vs[j], vs[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_ngon(
        &self,
        edges: &BTreeSet<Edge>,
        part: &BTreeMap<VertexId, u8>,
    ) -> std::result::Result<(), Violation> {
        let n = self.ngon_n().unwrap();
        if n < 3 {
            return Err(Violation(format!("gonality {n} < 3")));
        }
        self.validate_edges(edges)?;
        for &v in &self.vertices {
            match part.get(&v) {
                None => return Err(Violation(format!("vertex {v} has no bipartition label"))),
                Some(p) if *p > 1 => {
                    return Err(Violation(format!("vertex {v} has label {p}, expected 0 or 1")))
                }
                _ => {}
            }
        }
        for e in edges {
            if part.get(&e.0) == part.get(&e.1) {
                return Err(Violation(format!(
                    "edge {}-{} joins two vertices of the same part",
                    e.0, e.1
                )));
            }
        }
        if let Some(g) = ngon::girth(self).expect("edge-bearing class") {
            if g < 2 * n {
                return Err(Violation(format!("girth {g} < {}", 2 * n)));
            }
        }
        Ok(())
    }

    /// Induced substructure on `s`. All relation data restricted; class and
    /// (for fragments) depth are preserved.
    pub fn induced(&self, s: &BTreeSet<VertexId>) -> Result<FinStructure> {
        for &v in s {
            if !self.contains(v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        let data = match &self.data {
            ClassData::Graph { edges } => ClassData::Graph {
                edges: edges
                    .iter()
                    .filter(|e| s.contains(&e.0) && s.contains(&e.1))
                    .copied()
                    .collect(),
            },
            ClassData::Poset { order } => ClassData::Poset {
                order: order
                    .iter()
                    .filter(|(a, b)| s.contains(a) && s.contains(b))
                    .copied()
                    .collect(),
            },
            ClassData::Metric { dist } => ClassData::Metric {
                dist: dist
                    .iter()
                    .filter(|(e, _)| s.contains(&e.0) && s.contains(&e.1))
                    .map(|(e, d)| (*e, *d))
                    .collect(),
            },
            ClassData::NGon { edges, part, depth } => ClassData::NGon {
                edges: edges
                    .iter()
                    .filter(|e| s.contains(&e.0) && s.contains(&e.1))
                    .copied()
                    .collect(),
                part: part
                    .iter()
                    .filter(|(v, _)| s.contains(v))
                    .map(|(v, p)| (*v, *p))
                    .collect(),
                depth: *depth,
            },
        };
        Ok(FinStructure {
            class: self.class,
            vertices: s.clone(),
            data,
        })
    }

    /// Rename every vertex through `map`, which must be total on the vertex
    /// set and injective.
    pub fn relabel(&self, map: &BTreeMap<VertexId, VertexId>) -> Result<FinStructure> {
        let mut seen = BTreeSet::new();
        for &v in &self.vertices {
            let w = map.get(&v).ok_or(Error::UnknownVertex(v))?;
            if !seen.insert(*w) {
                return Err(Error::BadParameter(format!(
                    "relabeling is not injective at {w}"
                )));
            }
        }
        let f = |v: VertexId| map[&v];
        let data = match &self.data {
            ClassData::Graph { edges } => ClassData::Graph {
                edges: edges.iter().map(|e| Edge::new(f(e.0), f(e.1))).collect(),
            },
            ClassData::Poset { order } => ClassData::Poset {
                order: order.iter().map(|&(a, b)| (f(a), f(b))).collect(),
            },
            ClassData::Metric { dist } => ClassData::Metric {
                dist: dist
                    .iter()
                    .map(|(e, d)| (Edge::new(f(e.0), f(e.1)), *d))
                    .collect(),
            },
            ClassData::NGon { edges, part, depth } => ClassData::NGon {
                edges: edges.iter().map(|e| Edge::new(f(e.0), f(e.1))).collect(),
                part: part.iter().map(|(v, p)| (f(*v), *p)).collect(),
                depth: *depth,
            },
        };
        Ok(FinStructure {
            class: self.class,
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            data,
        })
    }

    /// Substructure generated by `s`. The relational classes are closed
    /// under taking subsets, so this is `s` itself; fragments close under
    /// interior vertices of short unique paths and may report that the
    /// ambient fragment is too shallow to know the answer.
    pub fn generated(&self, s: &BTreeSet<VertexId>) -> Result<BTreeSet<VertexId>> {
        for &v in s {
            if !self.contains(v) {
                return Err(Error::UnknownVertex(v));
            }
        }
        match self.class {
            ClassTag::NGon(_) => ngon::generated_closure(self, s),
            _ => Ok(s.clone()),
        }
    }
}
