//! Generalized n-gon machinery: the graph metric, girth and diameter, the
//! path functions f_k, the characteristic chi_n, the n-strong relation with
//! its certificate search, and free n-completion.
//!
//! Everything here works on finite fragments. A fragment only overestimates
//! distances of the completed geometry, so metric answers come with an
//! explicit caveat channel when the fragment is too shallow to know.
//!
//! Two facts about completion are load-bearing and used without re-proof at
//! each call site:
//!   1. a visible distance < n never changes under further completion (two
//!      distinct short paths would close a cycle of length < 2n), and
//!   2. a pair whose visible distance exceeds n settles at exactly n when
//!      the bipartition parity of the pair matches the parity of n, and
//!      strictly below n otherwise (with interior vertices the fragment has
//!      not materialized yet).
//! Pairs of the second, parity-mismatched kind are what `DepthInsufficient`
//! reports.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::structure::{FinStructure, VertexId};

/// Default cap on |V_Y \ V_X| for the exact n-strong minimizer.
pub const DEFAULT_STRONG_BOUND: usize = 20;

/// Pairs currently at distance n+1, i.e. the pairs the next completion
/// round patches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionFrontier {
    pub pending: Vec<(VertexId, VertexId)>,
    pub round: u32,
}

/// Outcome of the n-strong minimizer. `witness` is the minimizing induced
/// subgraph (always includes all of X) and `value` its relative
/// characteristic; `verdict` is `value >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrongCertificate {
    pub verdict: bool,
    pub witness: BTreeSet<VertexId>,
    pub value: i64,
}

/// Value of f_k. When the fragment cannot rule out that a deeper fragment
/// would answer differently (visible distance >= n), `depth_caveat` is set
/// and `vertex` is the fallback x.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FkValue {
    pub vertex: VertexId,
    pub depth_caveat: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionReport {
    pub result: FinStructure,
    pub rounds: u32,
    pub fixpoint: bool,
    /// Vertices created per round, for highlighting in exports.
    pub added: Vec<Vec<VertexId>>,
}

struct Idx {
    verts: Vec<VertexId>,
    pos: BTreeMap<VertexId, usize>,
    adj: Vec<Vec<usize>>,
}

fn idx(s: &FinStructure) -> Result<Idx> {
    let edges = s.edges().ok_or_else(|| Error::ClassMismatch {
        expected: "graph or ngon".into(),
        found: s.class.to_string(),
    })?;
    let verts: Vec<VertexId> = s.vertices.iter().copied().collect();
    let pos: BTreeMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut adj = vec![Vec::new(); verts.len()];
    for e in edges {
        if e.0 == e.1 {
            continue;
        }
        let (a, b) = (pos[&e.0], pos[&e.1]);
        adj[a].push(b);
        adj[b].push(a);
    }
    Ok(Idx { verts, pos, adj })
}

/// BFS distances from `src`, skipping the single edge `banned` if given.
fn bfs(ix: &Idx, src: usize, banned: Option<(usize, usize)>) -> Vec<Option<u32>> {
    let mut dist = vec![None; ix.verts.len()];
    dist[src] = Some(0);
    let mut queue = std::collections::VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &w in &ix.adj[u] {
            if let Some((a, b)) = banned {
                if (u == a && w == b) || (u == b && w == a) {
                    continue;
                }
            }
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Shortest-path distance in the fragment; None when unreachable.
pub fn graph_metric(s: &FinStructure, x: VertexId, y: VertexId) -> Result<Option<u32>> {
    for v in [x, y] {
        if !s.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let ix = idx(s)?;
    Ok(bfs(&ix, ix.pos[&x], None)[ix.pos[&y]])
}

pub(crate) fn bfs_from(s: &FinStructure, x: VertexId) -> Result<BTreeMap<VertexId, u32>> {
    if !s.contains(x) {
        return Err(Error::UnknownVertex(x));
    }
    let ix = idx(s)?;
    let dist = bfs(&ix, ix.pos[&x], None);
    Ok(ix
        .verts
        .iter()
        .zip(&dist)
        .filter_map(|(&v, d)| d.map(|d| (v, d)))
        .collect())
}

/// Length of a shortest cycle; None for forests. For each edge, the
/// shortest alternative route between its endpoints closes the tightest
/// cycle through that edge.
pub fn girth(s: &FinStructure) -> Result<Option<u32>> {
    let ix = idx(s)?;
    let mut best: Option<u32> = None;
    for a in 0..ix.verts.len() {
        for &b in &ix.adj[a] {
            if b < a {
                continue;
            }
            if let Some(alt) = bfs(&ix, a, Some((a, b)))[b] {
                let cycle = alt + 1;
                if best.map_or(true, |g| cycle < g) {
                    best = Some(cycle);
                }
            }
        }
    }
    Ok(best)
}

/// Largest pairwise distance; None when the fragment is disconnected.
pub fn diameter(s: &FinStructure) -> Result<Option<u32>> {
    let ix = idx(s)?;
    let mut best = 0;
    for v in 0..ix.verts.len() {
        for d in bfs(&ix, v, None) {
            match d {
                None => return Ok(None),
                Some(d) => best = best.max(d),
            }
        }
    }
    Ok(Some(best))
}

/// The unique shortest path from x to y, as (length, vertices x..=y).
/// None when unreachable or when two distinct shortest paths exist.
pub fn unique_geodesic(
    s: &FinStructure,
    x: VertexId,
    y: VertexId,
) -> Result<Option<(u32, Vec<VertexId>)>> {
    for v in [x, y] {
        if !s.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let ix = idx(s)?;
    let (sx, sy) = (ix.pos[&x], ix.pos[&y]);
    let mut dist = vec![None; ix.verts.len()];
    // Path counts saturate at 2: we only care about uniqueness.
    let mut count = vec![0u8; ix.verts.len()];
    dist[sx] = Some(0);
    count[sx] = 1;
    let mut queue = std::collections::VecDeque::from([sx]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &w in &ix.adj[u] {
            match dist[w] {
                None => {
                    dist[w] = Some(du + 1);
                    count[w] = count[u];
                    queue.push_back(w);
                }
                Some(dw) if dw == du + 1 => {
                    count[w] = (count[w] + count[u]).min(2);
                }
                _ => {}
            }
        }
    }
    let Some(len) = dist[sy] else {
        return Ok(None);
    };
    if count[sy] != 1 {
        return Ok(None);
    }
    let mut path = vec![sy];
    let mut cur = sy;
    while cur != sx {
        let dc = dist[cur].unwrap();
        let prev = ix.adj[cur]
            .iter()
            .copied()
            .find(|&w| dist[w] == Some(dc - 1) && count[w] == 1)
            .ok_or_else(|| {
                Error::InternalInvariant("unique path lost its predecessor chain".into())
            })?;
        path.push(prev);
        cur = prev;
    }
    path.reverse();
    Ok(Some((len, path.into_iter().map(|i| ix.verts[i]).collect())))
}

/// Whether a pair with the given part labels can end at distance exactly n
/// in the completed geometry. Bipartite parity forces d(x, y) to be odd
/// exactly when the parts differ.
pub(crate) fn parity_compatible(n: u32, px: u8, py: u8) -> bool {
    (px != py) == (n % 2 == 1)
}

fn require_ngon(s: &FinStructure) -> Result<u32> {
    s.ngon_n().ok_or_else(|| Error::ClassMismatch {
        expected: "ngon".into(),
        found: s.class.to_string(),
    })
}

/// f_k(x, y): the k-th vertex along the unique shortest path when the
/// visible distance l satisfies k <= l < n; otherwise x. Visible l >= n
/// (or no path at all) sets the caveat: a deeper fragment could answer
/// differently.
pub fn eval_fk(s: &FinStructure, k: u32, x: VertexId, y: VertexId) -> Result<FkValue> {
    let n = require_ngon(s)?;
    if k > n {
        return Err(Error::BadParameter(format!("k = {k} exceeds n = {n}")));
    }
    let fall = |caveat| FkValue {
        vertex: x,
        depth_caveat: caveat,
    };
    match graph_metric(s, x, y)? {
        None => Ok(fall(true)),
        Some(l) if l >= n => Ok(fall(true)),
        Some(l) if k > l => Ok(fall(false)),
        Some(l) => {
            let (_, path) = unique_geodesic(s, x, y)?.ok_or_else(|| {
                Error::InternalInvariant(format!(
                    "two shortest paths of length {l} < {n} contradict girth >= {}",
                    2 * n
                ))
            })?;
            Ok(FkValue {
                vertex: path[k as usize],
                depth_caveat: false,
            })
        }
    }
}

/// chi_n(H) = (n - 1)|V| - (n - 2)|E|, exact.
pub fn chi(n: u32, h: &FinStructure) -> Result<i64> {
    let edges = h.edges().ok_or_else(|| Error::ClassMismatch {
        expected: "graph or ngon".into(),
        found: h.class.to_string(),
    })?;
    let (n, v, e) = (n as i64, h.len() as i64, edges.len() as i64);
    Ok((n - 1) * v - (n - 2) * e)
}

/// chi_n(H / H ∩ X) = chi_n(H) - chi_n(H ∩ X).
pub fn rel_chi(n: u32, h: &FinStructure, xset: &BTreeSet<VertexId>) -> Result<i64> {
    let hx: BTreeSet<VertexId> = h.vertices.intersection(xset).copied().collect();
    Ok(chi(n, h)? - chi(n, &h.induced(&hx)?)?)
}

/// X is n-strong in Y iff every finite H ⊆ Y has nonnegative relative
/// characteristic over H ∩ X. Exact minimization; a minimizer can always be
/// taken to contain all of X (adjoining an X-vertex changes the relative
/// value by -(n-2) * (its edges into H \ X) <= 0), so the search ranges
/// over subsets of V_Y \ X only.
pub fn is_n_strong(
    n: u32,
    y: &FinStructure,
    xset: &BTreeSet<VertexId>,
    bound: usize,
) -> Result<StrongCertificate> {
    for &v in xset {
        if !y.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let ix = idx(y)?;
    let free: Vec<usize> = (0..ix.verts.len())
        .filter(|&i| !xset.contains(&ix.verts[i]))
        .collect();
    let d = free.len();
    if d > bound {
        return Err(Error::SearchBoundExceeded(format!(
            "n-strong minimization over {d} free vertices exceeds bound {bound}"
        )));
    }
    // Per free vertex: edges into X, and a bitmask of free neighbors.
    let slot: BTreeMap<usize, usize> = free.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut deg_x = vec![0i64; d];
    let mut nb_mask = vec![0u32; d];
    for (i, &v) in free.iter().enumerate() {
        for &w in &ix.adj[v] {
            match slot.get(&w) {
                Some(&j) => nb_mask[i] |= 1 << j,
                None => deg_x[i] += 1,
            }
        }
    }
    let ni = n as i64;
    // rel(mask) = rel(mask minus lowest bit v) + (n-1) - (n-2) * (deg into X
    // plus edges from v into the rest of the mask).
    let gain = |v: usize, rest: u32| -> i64 {
        (ni - 1) - (ni - 2) * (deg_x[v] + i64::from((nb_mask[v] & rest).count_ones()))
    };
    let size = 1usize << d;
    let mut rel = vec![0i64; size];
    const LO_BITS: usize = 14;
    let (value, mask) = if d <= LO_BITS {
        let mut best = (0i64, 0u32);
        for m in 1..size as u32 {
            let rest = m & (m - 1);
            let v = m.trailing_zeros() as usize;
            let r = rel[rest as usize] + gain(v, rest);
            rel[m as usize] = r;
            if r < best.0 {
                best = (r, m);
            }
        }
        best
    } else {
        // Seed the block starts (masks with empty low part) sequentially,
        // then fill each block independently.
        let lo_size = 1usize << LO_BITS;
        for hi in 1..(size >> LO_BITS) as u32 {
            let m = hi << LO_BITS;
            let rest = m & (m - 1);
            let v = m.trailing_zeros() as usize;
            rel[m as usize] = rel[rest as usize] + gain(v, rest);
        }
        let per_block: Vec<(i64, u32)> = rel
            .par_chunks_mut(lo_size)
            .enumerate()
            .map(|(hi, chunk)| {
                let base = (hi as u32) << LO_BITS;
                let mut best = (chunk[0], base);
                for lo in 1..lo_size as u32 {
                    let m = base | lo;
                    let rest = m & (m - 1);
                    let v = m.trailing_zeros() as usize;
                    let r = chunk[(rest & !base) as usize] + gain(v, rest);
                    chunk[lo as usize] = r;
                    if r < best.0 {
                        best = (r, m);
                    }
                }
                best
            })
            .collect();
        per_block
            .into_iter()
            .fold((0i64, 0u32), |acc, b| if b.0 < acc.0 { b } else { acc })
    };
    let mut witness: BTreeSet<VertexId> = xset.clone();
    for (i, &v) in free.iter().enumerate() {
        if mask & (1 << i) != 0 {
            witness.insert(ix.verts[v]);
        }
    }
    let check = rel_chi(n, &y.induced(&witness)?, xset)?;
    if check != value {
        return Err(Error::InternalInvariant(format!(
            "minimizer value {value} disagrees with direct recomputation {check}"
        )));
    }
    Ok(StrongCertificate {
        verdict: value >= 0,
        witness,
        value,
    })
}

/// Unreduced reference: minimize rel_chi over ALL subsets of V_Y. Only for
/// validating the reduced engine on small inputs.
pub fn is_n_strong_brute(
    n: u32,
    y: &FinStructure,
    xset: &BTreeSet<VertexId>,
    bound: usize,
) -> Result<StrongCertificate> {
    let verts: Vec<VertexId> = y.vertices.iter().copied().collect();
    if verts.len() > bound {
        return Err(Error::SearchBoundExceeded(format!(
            "brute-force over {} vertices exceeds bound {bound}",
            verts.len()
        )));
    }
    let mut best = (0i64, BTreeSet::new());
    for m in 0u32..(1 << verts.len()) {
        let h: BTreeSet<VertexId> = verts
            .iter()
            .enumerate()
            .filter(|(i, _)| m & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect();
        let r = rel_chi(n, &y.induced(&h)?, xset)?;
        if r < best.0 {
            best = (r, h);
        }
    }
    let (value, mut witness) = best;
    witness.extend(xset.iter().copied().filter(|v| y.contains(*v)));
    Ok(StrongCertificate {
        verdict: value >= 0,
        witness,
        value,
    })
}

/// All pairs at distance exactly n + 1.
fn frontier_pairs(s: &FinStructure) -> Result<Vec<(VertexId, VertexId)>> {
    let n = require_ngon(s)?;
    let ix = idx(s)?;
    let mut out = Vec::new();
    for a in 0..ix.verts.len() {
        let dist = bfs(&ix, a, None);
        for b in a + 1..ix.verts.len() {
            if dist[b] == Some(n + 1) {
                out.push((ix.verts[a], ix.verts[b]));
            }
        }
    }
    Ok(out)
}

pub fn completion_frontier(s: &FinStructure) -> Result<CompletionFrontier> {
    Ok(CompletionFrontier {
        pending: frontier_pairs(s)?,
        round: s.completion_depth().unwrap_or(0),
    })
}

/// One completion round: patch every frontier pair simultaneously with a
/// fresh path of n - 2 interior vertices. Returns the new fragment and the
/// vertices it created.
pub fn free_completion_step(s: &FinStructure) -> Result<(FinStructure, Vec<VertexId>)> {
    let n = require_ngon(s)?;
    let front = frontier_pairs(s)?;
    let mut out = s.clone();
    let mut fresh = Vec::new();
    let mut next = s.next_id().0;
    for (x, y) in front {
        let px = s.part_of(x).ok_or_else(|| {
            Error::InternalInvariant(format!("vertex {x} lacks a part label"))
        })?;
        let mut prev = x;
        for step in 1..n - 1 {
            let v = VertexId(next);
            next += 1;
            fresh.push(v);
            out.vertices.insert(v);
            if let crate::structure::ClassData::NGon { edges, part, .. } = &mut out.data {
                part.insert(v, (px + step as u8) % 2);
                edges.insert(crate::structure::Edge::new(prev, v));
            }
            prev = v;
        }
        if let crate::structure::ClassData::NGon { edges, .. } = &mut out.data {
            edges.insert(crate::structure::Edge::new(prev, y));
        }
    }
    out = out.with_depth(s.completion_depth().unwrap_or(0) + 1);
    if let Some(g) = girth(&out)? {
        if g < 2 * n {
            return Err(Error::InternalInvariant(format!(
                "completion step produced girth {g} < {}",
                2 * n
            )));
        }
    }
    Ok((out, fresh))
}

/// Iterate completion rounds until the frontier empties or `max_rounds` is
/// spent. `fixpoint` reports which of the two happened.
pub fn free_completion(s: &FinStructure, max_rounds: u32) -> Result<CompletionReport> {
    require_ngon(s)?;
    let mut cur = s.clone();
    let mut added = Vec::new();
    let mut rounds = 0;
    while rounds < max_rounds {
        if frontier_pairs(&cur)?.is_empty() {
            break;
        }
        let (next, fresh) = free_completion_step(&cur)?;
        added.push(fresh);
        cur = next;
        rounds += 1;
    }
    let fixpoint = frontier_pairs(&cur)?.is_empty();
    Ok(CompletionReport {
        result: cur,
        rounds,
        fixpoint,
        added,
    })
}

/// Replays the completion construction inside `delta` starting from `xset`:
/// true iff successive rounds of patches, each read off from `delta`
/// itself, exhaust `delta`. Every replayed patch must be a genuinely new
/// path: fresh interior vertices, disjoint between pairs of one round, and
/// of stage-degree exactly 2, so that each replayed stage is precisely the
/// abstract completion stage and nothing borrowed from elsewhere in delta.
pub fn is_free_completion_of(
    delta: &FinStructure,
    xset: &BTreeSet<VertexId>,
    max_rounds: u32,
) -> Result<bool> {
    let n = require_ngon(delta)?;
    for &v in xset {
        if !delta.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let mut f = xset.clone();
    let mut round = 0;
    loop {
        if f == delta.vertices {
            return Ok(true);
        }
        let stage = delta.induced(&f)?;
        let front = frontier_pairs(&stage)?;
        if front.is_empty() {
            // Proper subfragment with nothing left to patch: the rest of
            // delta is unreachable by this construction.
            return Ok(false);
        }
        if round == max_rounds {
            let (x, y) = front[0];
            return Err(Error::DepthInsufficient {
                x,
                y,
                partial: Box::new(stage),
            });
        }
        let mut this_round = BTreeSet::new();
        let mut paths = Vec::new();
        for (x, y) in front {
            // A frontier pair of the replayed stage must already own its
            // patch inside delta: distance exactly n - 1 there.
            match graph_metric(delta, x, y)? {
                Some(l) if l == n - 1 => {
                    let (_, path) = unique_geodesic(delta, x, y)?.ok_or_else(|| {
                        Error::InternalInvariant(
                            "two short paths between a patched pair contradict girth".into(),
                        )
                    })?;
                    for &v in &path[1..path.len() - 1] {
                        if f.contains(&v) || !this_round.insert(v) {
                            return Ok(false);
                        }
                    }
                    paths.push(path);
                }
                _ => return Ok(false),
            }
        }
        f.extend(this_round);
        // A free patch interior is a degree-2 vertex of its stage. An
        // interior with any further delta-edge into the new stage is
        // borrowed structure, not a patch, and disqualifies the replay.
        for path in &paths {
            for i in 1..path.len() - 1 {
                let expected: BTreeSet<VertexId> =
                    [path[i - 1], path[i + 1]].into_iter().collect();
                let actual: BTreeSet<VertexId> = delta
                    .neighbors(path[i])
                    .intersection(&f)
                    .copied()
                    .collect();
                if actual != expected {
                    return Ok(false);
                }
            }
        }
        round += 1;
    }
}

/// Closure of `seed` under interior vertices of unique short paths
/// (visible length < n) between members, plus the list of member pairs the
/// fragment cannot resolve: visible distance above n with the wrong parity
/// for n, meaning the true distance is shorter and its interior is missing.
pub fn generated_closure_with_blocked(
    s: &FinStructure,
    seed: &BTreeSet<VertexId>,
) -> Result<(BTreeSet<VertexId>, Vec<(VertexId, VertexId)>)> {
    let n = require_ngon(s)?;
    for &v in seed {
        if !s.contains(v) {
            return Err(Error::UnknownVertex(v));
        }
    }
    let mut clo = seed.clone();
    loop {
        let members: Vec<VertexId> = clo.iter().copied().collect();
        let mut grew = false;
        for (i, &a) in members.iter().enumerate() {
            let dist = bfs_from(s, a)?;
            for &b in &members[i + 1..] {
                match dist.get(&b) {
                    Some(&l) if l >= 2 && l < n => {
                        let (_, path) = unique_geodesic(s, a, b)?.ok_or_else(|| {
                            Error::InternalInvariant(
                                "two short paths inside a valid fragment".into(),
                            )
                        })?;
                        for &v in &path[1..path.len() - 1] {
                            grew |= clo.insert(v);
                        }
                    }
                    _ => {}
                }
            }
        }
        if !grew {
            break;
        }
    }
    let members: Vec<VertexId> = clo.iter().copied().collect();
    let mut blocked = Vec::new();
    for (i, &a) in members.iter().enumerate() {
        let dist = bfs_from(s, a)?;
        for &b in &members[i + 1..] {
            let far = match dist.get(&b) {
                None => true,
                Some(&l) => l > n,
            };
            if far {
                let (pa, pb) = (s.part_of(a).unwrap_or(0), s.part_of(b).unwrap_or(0));
                if !parity_compatible(n, pa, pb) {
                    blocked.push((a, b));
                }
            }
        }
    }
    Ok((clo, blocked))
}

/// Closure as a set, or `DepthInsufficient` naming the first unresolved
/// pair together with the partial closure.
pub fn generated_closure(
    s: &FinStructure,
    seed: &BTreeSet<VertexId>,
) -> Result<BTreeSet<VertexId>> {
    let (clo, blocked) = generated_closure_with_blocked(s, seed)?;
    match blocked.first() {
        None => Ok(clo),
        Some(&(x, y)) => Err(Error::DepthInsufficient {
            x,
            y,
            partial: Box::new(s.induced(&clo)?),
        }),
    }
}
