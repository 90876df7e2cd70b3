//! Embedding search, base-fixing isomorphism, automorphism enumeration,
//! and canonical keys.
//!
//! The search is exhaustive backtracking with degree pruning. That is the
//! right tool at this scale: patterns are capped (default 10 vertices) and
//! correctness matters more than asymptotics.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::structure::{ClassData, FinStructure, VertexId};

pub const DEFAULT_SEARCH_BOUND: usize = 10;

#[derive(Debug, Clone)]
pub struct SearchOpts {
    /// Cap on pattern size; larger patterns refuse to search.
    pub bound: usize,
    /// Stop after this many embeddings.
    pub max_results: Option<usize>,
    /// Cap on attempted assignments before giving up with an error.
    pub node_budget: Option<u64>,
}

impl Default for SearchOpts {
    fn default() -> Self {
        SearchOpts {
            bound: DEFAULT_SEARCH_BOUND,
            max_results: None,
            node_budget: None,
        }
    }
}

impl SearchOpts {
    pub fn first_only() -> Self {
        SearchOpts {
            max_results: Some(1),
            ..Default::default()
        }
    }

    pub fn with_bound(bound: usize) -> Self {
        SearchOpts {
            bound,
            ..Default::default()
        }
    }
}

/// A structure-preserving and -reflecting injection dom -> cod, carried
/// together with both endpoints so it can be verified in isolation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub dom: FinStructure,
    pub cod: FinStructure,
    pub map: BTreeMap<VertexId, VertexId>,
}

pub(crate) fn pair_ok(dom: &FinStructure, a: VertexId, b: VertexId, cod: &FinStructure, fa: VertexId, fb: VertexId) -> bool {
    match &dom.data {
        ClassData::Graph { .. } | ClassData::NGon { .. } => {
            dom.adjacent(a, b) == cod.adjacent(fa, fb)
        }
        ClassData::Poset { .. } => {
            dom.leq(a, b) == cod.leq(fa, fb) && dom.leq(b, a) == cod.leq(fb, fa)
        }
        ClassData::Metric { .. } => dom.dist(a, b) == cod.dist(fa, fb),
    }
}

pub(crate) fn unary_ok(dom: &FinStructure, a: VertexId, cod: &FinStructure, fa: VertexId) -> bool {
    match &dom.data {
        ClassData::NGon { .. } => dom.part_of(a) == cod.part_of(fa),
        _ => true,
    }
}

/// Per-vertex count of relation entries, one pass; used for pruning only.
fn rel_degrees(s: &FinStructure) -> BTreeMap<VertexId, usize> {
    let mut deg: BTreeMap<VertexId, usize> = s.vertices.iter().map(|&v| (v, 0)).collect();
    let mut bump = |v: VertexId| {
        if let Some(d) = deg.get_mut(&v) {
            *d += 1;
        }
    };
    match &s.data {
        ClassData::Graph { edges } | ClassData::NGon { edges, .. } => {
            for e in edges {
                if e.0 != e.1 {
                    bump(e.0);
                    bump(e.1);
                }
            }
        }
        ClassData::Poset { order } => {
            for &(a, b) in order {
                bump(a);
                bump(b);
            }
        }
        ClassData::Metric { .. } => {}
    }
    deg
}

impl Embedding {
    pub fn identity(s: &FinStructure) -> Embedding {
        Embedding {
            dom: s.clone(),
            cod: s.clone(),
            map: s.vertices.iter().map(|&v| (v, v)).collect(),
        }
    }

    pub fn apply(&self, v: VertexId) -> Option<VertexId> {
        self.map.get(&v).copied()
    }

    /// Full check that this really is an induced embedding.
    pub fn verify(&self) -> Result<()> {
        if self.dom.class != self.cod.class {
            return Err(Error::ClassMismatch {
                expected: self.dom.class.to_string(),
                found: self.cod.class.to_string(),
            });
        }
        let mut seen = BTreeSet::new();
        for &v in &self.dom.vertices {
            let fv = self.apply(v).ok_or(Error::UnknownVertex(v))?;
            if !self.cod.contains(fv) {
                return Err(Error::UnknownVertex(fv));
            }
            if !seen.insert(fv) {
                return Err(Error::BadParameter(format!("map is not injective at {fv}")));
            }
            if !unary_ok(&self.dom, v, &self.cod, fv) {
                return Err(Error::InternalInvariant(format!(
                    "part label of {v} not preserved"
                )));
            }
        }
        let vs: Vec<VertexId> = self.dom.vertices.iter().copied().collect();
        for (i, &a) in vs.iter().enumerate() {
            for &b in &vs[i + 1..] {
                if !pair_ok(&self.dom, a, b, &self.cod, self.map[&a], self.map[&b]) {
                    return Err(Error::InternalInvariant(format!(
                        "relation on ({a}, {b}) not preserved"
                    )));
                }
            }
        }
        Ok(())
    }

    /// self: A -> B composed with next: B -> C, giving A -> C.
    pub fn compose(&self, next: &Embedding) -> Result<Embedding> {
        let mut map = BTreeMap::new();
        for (&v, &w) in &self.map {
            let u = next.apply(w).ok_or(Error::UnknownVertex(w))?;
            map.insert(v, u);
        }
        Ok(Embedding {
            dom: self.dom.clone(),
            cod: next.cod.clone(),
            map,
        })
    }

    /// Inverse of a bijective embedding (|dom| = |cod|).
    pub fn inverse(&self) -> Result<Embedding> {
        if self.map.len() != self.cod.len() {
            return Err(Error::BadParameter(
                "only bijective embeddings invert".into(),
            ));
        }
        Ok(Embedding {
            dom: self.cod.clone(),
            cod: self.dom.clone(),
            map: self.map.iter().map(|(&v, &w)| (w, v)).collect(),
        })
    }
}

struct Search<'a> {
    pat: &'a FinStructure,
    tgt: &'a FinStructure,
    order: Vec<VertexId>,
    pat_deg: BTreeMap<VertexId, usize>,
    tgt_deg: BTreeMap<VertexId, usize>,
    opts: &'a SearchOpts,
    nodes: u64,
    found: Vec<Embedding>,
}

impl Search<'_> {
    fn run(
        &mut self,
        assigned: &mut BTreeMap<VertexId, VertexId>,
        used: &mut BTreeSet<VertexId>,
    ) -> Result<bool> {
        if let Some(max) = self.opts.max_results {
            if self.found.len() >= max {
                return Ok(true);
            }
        }
        let depth = assigned.len();
        if depth == self.order.len() {
            self.found.push(Embedding {
                dom: self.pat.clone(),
                cod: self.tgt.clone(),
                map: assigned.clone(),
            });
            return Ok(self.opts.max_results.map_or(false, |m| self.found.len() >= m));
        }
        let v = self.order[depth];
        let dv = self.pat_deg[&v];
        for &c in &self.tgt.vertices {
            if used.contains(&c) || !unary_ok(self.pat, v, self.tgt, c) {
                continue;
            }
            if self.tgt_deg[&c] < dv {
                continue;
            }
            self.nodes += 1;
            if let Some(budget) = self.opts.node_budget {
                if self.nodes > budget {
                    return Err(Error::SearchBoundExceeded(format!(
                        "embedding search spent more than {budget} nodes"
                    )));
                }
            }
            if assigned.iter().all(|(&p, &t)| pair_ok(self.pat, p, v, self.tgt, t, c)) {
                assigned.insert(v, c);
                used.insert(c);
                let stop = self.run(assigned, used)?;
                assigned.remove(&v);
                used.remove(&c);
                if stop {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// All embeddings of `pattern` into `target` extending `fixing`, by
/// exhaustive backtracking. Deterministic order.
pub fn find_embeddings(
    pattern: &FinStructure,
    target: &FinStructure,
    fixing: &BTreeMap<VertexId, VertexId>,
    opts: &SearchOpts,
) -> Result<Vec<Embedding>> {
    if pattern.class != target.class {
        return Err(Error::ClassMismatch {
            expected: pattern.class.to_string(),
            found: target.class.to_string(),
        });
    }
    if pattern.len() > opts.bound {
        return Err(Error::SearchBoundExceeded(format!(
            "pattern has {} vertices, search bound is {}",
            pattern.len(),
            opts.bound
        )));
    }
    let mut assigned = BTreeMap::new();
    let mut used = BTreeSet::new();
    for (&v, &w) in fixing {
        if !pattern.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
        if !target.contains(w) {
            return Err(Error::UnknownVertex(w));
        }
        if !used.insert(w) {
            return Err(Error::BadParameter(format!(
                "fixing map is not injective at {w}"
            )));
        }
        assigned.insert(v, w);
    }
    // Pinned vertices must already be consistent among themselves.
    let pinned: Vec<VertexId> = assigned.keys().copied().collect();
    for (i, &a) in pinned.iter().enumerate() {
        if !unary_ok(pattern, a, target, assigned[&a]) {
            return Ok(Vec::new());
        }
        for &b in &pinned[i + 1..] {
            if !pair_ok(pattern, a, b, target, assigned[&a], assigned[&b]) {
                return Ok(Vec::new());
            }
        }
    }
    // Unpinned vertices, most-constrained first.
    let pat_deg = rel_degrees(pattern);
    let mut order: Vec<VertexId> = pinned;
    let mut free: Vec<VertexId> = pattern
        .vertices
        .iter()
        .copied()
        .filter(|v| !assigned.contains_key(v))
        .collect();
    free.sort_by_key(|&v| (std::cmp::Reverse(pat_deg[&v]), v));
    order.extend(free);
    let mut search = Search {
        pat: pattern,
        tgt: target,
        order,
        pat_deg,
        tgt_deg: rel_degrees(target),
        opts,
        nodes: 0,
        found: Vec::new(),
    };
    search.run(&mut assigned, &mut used)?;
    Ok(search.found)
}

/// Witness isomorphism fixing `over` pointwise, if one exists.
pub fn are_isomorphic(
    a: &FinStructure,
    b: &FinStructure,
    over: &BTreeSet<VertexId>,
    opts: &SearchOpts,
) -> Result<Option<Embedding>> {
    if a.class != b.class {
        return Err(Error::ClassMismatch {
            expected: a.class.to_string(),
            found: b.class.to_string(),
        });
    }
    if a.len() != b.len() {
        return Ok(None);
    }
    let fixing: BTreeMap<VertexId, VertexId> = over.iter().map(|&v| (v, v)).collect();
    let mut o = opts.clone();
    o.max_results = Some(1);
    Ok(find_embeddings(a, b, &fixing, &o)?.into_iter().next())
}

/// Every automorphism, identity included.
pub fn automorphisms(s: &FinStructure, opts: &SearchOpts) -> Result<Vec<Embedding>> {
    find_embeddings(s, s, &BTreeMap::new(), opts)
}

/// Isomorphism-invariant fingerprint: the lexicographically least encoding
/// of the relation data over all orderings that keep a marked base pinned
/// first (in ascending id order).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub String);

impl std::fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Relation code of the ordered pair (earlier, later), plus the later
/// vertex's unary data. Row for position i encodes vertex order[i] against
/// order[0..i].
fn encode_row(s: &FinStructure, order: &[VertexId], i: usize, out: &mut Vec<u8>) {
    let v = order[i];
    match &s.data {
        ClassData::Graph { .. } => {
            for &u in &order[..i] {
                out.push(b'0' + s.adjacent(u, v) as u8);
            }
        }
        ClassData::Poset { .. } => {
            for &u in &order[..i] {
                out.push(b'0' + s.leq(u, v) as u8 + 2 * s.leq(v, u) as u8);
            }
        }
        ClassData::Metric { .. } => {
            for &u in &order[..i] {
                match s.dist(u, v) {
                    Some(d) => out.extend_from_slice(format!("{d};").as_bytes()),
                    None => out.push(b'?'),
                }
            }
        }
        ClassData::NGon { .. } => {
            out.push(b'0' + s.part_of(v).unwrap_or(9));
            for &u in &order[..i] {
                out.push(b'0' + s.adjacent(u, v) as u8);
            }
        }
    }
    out.push(b'|');
}

fn minimize(
    s: &FinStructure,
    order: &mut Vec<VertexId>,
    remaining: &mut Vec<VertexId>,
    buf: &mut Vec<u8>,
    best: &mut Option<Vec<u8>>,
) {
    if remaining.is_empty() {
        if best.as_ref().map_or(true, |b| buf.as_slice() < b.as_slice()) {
            *best = Some(buf.clone());
        }
        return;
    }
    for idx in 0..remaining.len() {
        let v = remaining.remove(idx);
        order.push(v);
        let mark = buf.len();
        encode_row(s, order, order.len() - 1, buf);
        // Lexicographic prefix pruning against the best completed encoding.
        let viable = match best.as_ref() {
            None => true,
            Some(b) => {
                let end = buf.len().min(b.len());
                buf.as_slice() <= &b[..end]
            }
        };
        if viable {
            minimize(s, order, remaining, buf, best);
        }
        buf.truncate(mark);
        order.pop();
        remaining.insert(idx, v);
    }
}

pub fn canonical_key(
    s: &FinStructure,
    base: &BTreeSet<VertexId>,
    opts: &SearchOpts,
) -> Result<CanonicalKey> {
    if s.len() > opts.bound {
        return Err(Error::SearchBoundExceeded(format!(
            "canonical key over {} vertices, bound is {}",
            s.len(),
            opts.bound
        )));
    }
    for &v in base {
        if !s.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let mut buf = format!("{};{};{};", s.class, s.len(), base.len()).into_bytes();
    let mut order: Vec<VertexId> = base.iter().copied().collect();
    for i in 0..order.len() {
        encode_row(s, &order, i, &mut buf);
    }
    let mut remaining: Vec<VertexId> = s
        .vertices
        .iter()
        .copied()
        .filter(|v| !base.contains(v))
        .collect();
    if remaining.is_empty() {
        return Ok(CanonicalKey(String::from_utf8_lossy(&buf).into_owned()));
    }
    let mut best = None;
    minimize(s, &mut order, &mut remaining, &mut buf, &mut best);
    let body = best.expect("at least one ordering exists");
    Ok(CanonicalKey(String::from_utf8_lossy(&body).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: u32) -> VertexId {
        VertexId(n)
    }

    fn triangle() -> FinStructure {
        FinStructure::graph(
            (0..3).map(v),
            [(v(0), v(1)), (v(1), v(2)), (v(0), v(2))],
        )
    }

    #[test]
    fn vertex_into_triangle() {
        let a = FinStructure::graph([v(9)], []);
        let found =
            find_embeddings(&a, &triangle(), &BTreeMap::new(), &SearchOpts::default()).unwrap();
        assert_eq!(found.len(), 3);
        for e in &found {
            e.verify().unwrap();
        }
    }

    #[test]
    fn edge_into_isolated_pair_fails() {
        let a = FinStructure::graph([v(0), v(1)], [(v(0), v(1))]);
        let b = FinStructure::graph([v(0), v(1)], []);
        let found = find_embeddings(&a, &b, &BTreeMap::new(), &SearchOpts::default()).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn identity_fixing_pins_everything() {
        let t = triangle();
        let id: BTreeMap<_, _> = t.vertices.iter().map(|&u| (u, u)).collect();
        let found = find_embeddings(&t, &t, &id, &SearchOpts::default()).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].map, id);
    }

    #[test]
    fn triangle_automorphisms() {
        assert_eq!(automorphisms(&triangle(), &SearchOpts::default()).unwrap().len(), 6);
        let path = FinStructure::graph((0..3).map(v), [(v(0), v(1)), (v(1), v(2))]);
        assert_eq!(automorphisms(&path, &SearchOpts::default()).unwrap().len(), 2);
    }

    #[test]
    fn base_placement_decides_isomorphism() {
        // Both are 2-edge stars; the marked vertex is the center of one and
        // a leaf of the other.
        let a = FinStructure::graph((0..3).map(v), [(v(0), v(1)), (v(1), v(2))]);
        let b = FinStructure::graph((0..3).map(v), [(v(0), v(1)), (v(0), v(2))]);
        let free = are_isomorphic(&a, &b, &BTreeSet::new(), &SearchOpts::default()).unwrap();
        assert!(free.is_some());
        let over: BTreeSet<_> = [v(1)].into();
        let pinned = are_isomorphic(&a, &b, &over, &SearchOpts::default()).unwrap();
        assert!(pinned.is_none());
    }

    #[test]
    fn keys_are_relabeling_invariant() {
        let t = triangle();
        let map: BTreeMap<_, _> = [(v(0), v(7)), (v(1), v(3)), (v(2), v(5))].into();
        let t2 = t.relabel(&map).unwrap();
        let opts = SearchOpts::default();
        let none = BTreeSet::new();
        assert_eq!(
            canonical_key(&t, &none, &opts).unwrap(),
            canonical_key(&t2, &none, &opts).unwrap()
        );
    }

    #[test]
    fn keys_separate_nonisomorphic() {
        let path = FinStructure::graph((0..3).map(v), [(v(0), v(1)), (v(1), v(2))]);
        let iso3 = FinStructure::graph((0..3).map(v), []);
        let opts = SearchOpts::default();
        let none = BTreeSet::new();
        assert_ne!(
            canonical_key(&path, &none, &opts).unwrap(),
            canonical_key(&iso3, &none, &opts).unwrap()
        );
    }

    #[test]
    fn embeddings_compose() {
        let a = FinStructure::graph([v(0)], []);
        let t = triangle();
        let e1 = find_embeddings(&a, &t, &BTreeMap::new(), &SearchOpts::default()).unwrap();
        let autos = automorphisms(&t, &SearchOpts::default()).unwrap();
        let composed = e1[0].compose(&autos[3]).unwrap();
        composed.verify().unwrap();
    }

    #[test]
    fn poset_embedding_respects_order() {
        let chain = FinStructure::poset([v(0), v(1)], [(v(0), v(1))]);
        let target = FinStructure::poset(
            [v(0), v(1), v(2)],
            [(v(0), v(1)), (v(0), v(2))],
        );
        let found =
            find_embeddings(&chain, &target, &BTreeMap::new(), &SearchOpts::default()).unwrap();
        // 0<1, 0<2 and nothing else: two comparable pairs.
        assert_eq!(found.len(), 2);
    }

    #[test]
    fn metric_embedding_is_exact() {
        use num_rational::Rational64;
        let r = |p| Rational64::from_integer(p);
        let a = FinStructure::metric([v(0), v(1)], [(v(0), v(1), r(2))]);
        let b = FinStructure::metric(
            [v(0), v(1), v(2)],
            [
                (v(0), v(1), r(1)),
                (v(1), v(2), r(2)),
                (v(0), v(2), r(2)),
            ],
        );
        let found = find_embeddings(&a, &b, &BTreeMap::new(), &SearchOpts::default()).unwrap();
        // Ordered pairs at distance exactly 2: (1,2), (2,1), (0,2), (2,0).
        assert_eq!(found.len(), 4);
    }
}
