//! Stationary independence relations: one canonical relation per class,
//! extension of the base to larger ambient sets, support search, and a
//! seeded sampling harness that tests the six axioms inside a saturated
//! approximant.
//!
//! The harness distinguishes three outcomes per sampled instance: violation
//! (with a witness), pass, and "unwitnessed" when the finite ambient is too
//! shallow to decide (missing realizations, closure depth, search budget).
//! Existence-style axioms can only ever be witnessed or unwitnessed here.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample as index_sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::iso::{automorphisms, find_embeddings, Embedding, SearchOpts};
use crate::katetov::{self, SaturateParams};
use crate::ngon;
use crate::structure::{ClassTag, FinStructure, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SirKind {
    FreeGraph,
    CompleteGraph,
    PosetAmalgam,
    MinMetric,
    NGonStrong(u32),
}

impl SirKind {
    pub fn class_tag(&self) -> ClassTag {
        match self {
            SirKind::FreeGraph | SirKind::CompleteGraph => ClassTag::Graph,
            SirKind::PosetAmalgam => ClassTag::Poset,
            SirKind::MinMetric => ClassTag::RatMetric,
            SirKind::NGonStrong(n) => ClassTag::NGon(*n),
        }
    }

    pub fn all_standard() -> [SirKind; 5] {
        [
            SirKind::FreeGraph,
            SirKind::CompleteGraph,
            SirKind::PosetAmalgam,
            SirKind::MinMetric,
            SirKind::NGonStrong(3),
        ]
    }
}

impl std::fmt::Display for SirKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SirKind::FreeGraph => write!(f, "free-graph"),
            SirKind::CompleteGraph => write!(f, "complete-graph"),
            SirKind::PosetAmalgam => write!(f, "poset-amalgam"),
            SirKind::MinMetric => write!(f, "min-metric"),
            SirKind::NGonStrong(n) => write!(f, "ngon-strong-{n}"),
        }
    }
}

impl std::str::FromStr for SirKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SirKind> {
        // Bare class names resolve to the class's default independence
        // notion, so callers may pass either a kind or a class.
        match s {
            "free-graph" | "graph" => Ok(SirKind::FreeGraph),
            "complete-graph" => Ok(SirKind::CompleteGraph),
            "poset-amalgam" | "poset" => Ok(SirKind::PosetAmalgam),
            "min-metric" | "metric" => Ok(SirKind::MinMetric),
            "ngon" => Ok(SirKind::NGonStrong(3)),
            other => {
                if let Some(n) = other.strip_prefix("ngon-strong-") {
                    let n: u32 = n
                        .parse()
                        .map_err(|_| Error::BadParameter(format!("bad kind: {other}")))?;
                    if n < 3 {
                        return Err(Error::BadParameter(format!("gonality {n} < 3")));
                    }
                    return Ok(SirKind::NGonStrong(n));
                }
                Err(Error::BadParameter(format!("unknown kind: {other}")))
            }
        }
    }
}

fn check_sets(m: &FinStructure, sets: &[&BTreeSet<VertexId>]) -> Result<()> {
    for s in sets {
        for &v in *s {
            if !m.contains(v) {
                return Err(Error::UnknownVertex(v));
            }
        }
    }
    Ok(())
}

fn union(a: &BTreeSet<VertexId>, b: &BTreeSet<VertexId>) -> BTreeSet<VertexId> {
    a.union(b).copied().collect()
}

fn diff(a: &BTreeSet<VertexId>, b: &BTreeSet<VertexId>) -> Vec<VertexId> {
    a.difference(b).copied().collect()
}

/// The defining condition of each relation. `broken` switches to the
/// kind's mutation control: a deliberately wrong variant used to prove the
/// axiom harness can actually catch bad relations.
fn indep_impl(
    kind: SirKind,
    broken: bool,
    m: &FinStructure,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    c: &BTreeSet<VertexId>,
) -> Result<bool> {
    if kind.class_tag() != m.class {
        return Err(Error::ClassMismatch {
            expected: kind.class_tag().to_string(),
            found: m.class.to_string(),
        });
    }
    check_sets(m, &[a, b, c])?;
    let meets_base = a.intersection(b).all(|v| c.contains(v));
    match kind {
        SirKind::FreeGraph => {
            if !broken && !meets_base {
                return Ok(false);
            }
            for &x in &diff(a, c) {
                for &y in &diff(b, c) {
                    if m.adjacent(x, y) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        SirKind::CompleteGraph => {
            if !broken && !meets_base {
                return Ok(false);
            }
            for &x in &diff(a, c) {
                for &y in &diff(b, c) {
                    if x != y && !m.adjacent(x, y) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        SirKind::PosetAmalgam => {
            if !meets_base {
                return Ok(false);
            }
            let through = |x: VertexId, y: VertexId| c.iter().any(|&z| m.leq(x, z) && m.leq(z, y));
            for &x in &diff(a, c) {
                for &y in &diff(b, c) {
                    if m.leq(x, y) != through(x, y) {
                        return Ok(false);
                    }
                    // The mutation control forgets the downward direction.
                    if !broken && m.leq(y, x) != through(y, x) {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        SirKind::MinMetric => {
            if c.is_empty() {
                return Err(Error::EmptyBase);
            }
            let d = |x, y| {
                m.dist(x, y)
                    .ok_or_else(|| Error::Malformed(format!("distance ({x}, {y}) missing")))
            };
            for &x in &diff(a, c) {
                for &y in &diff(b, c) {
                    let mut best = None;
                    for &z in c.iter() {
                        let s = d(x, z)? + d(z, y)?;
                        if best.map_or(true, |b| s < b) {
                            best = Some(s);
                        }
                    }
                    let lhs = d(x, y)?;
                    let rhs = best.expect("c nonempty");
                    // The mutation control accepts any not-too-large value,
                    // which the triangle inequality makes vacuous.
                    let ok = if broken { lhs <= rhs } else { lhs == rhs };
                    if !ok {
                        return Ok(false);
                    }
                }
            }
            Ok(true)
        }
        SirKind::NGonStrong(n) => {
            let cc = m.generated(c)?;
            let ac = m.generated(&union(a, c))?;
            let bc = m.generated(&union(b, c))?;
            let abc = m.generated(&union(&union(a, b), c))?;
            let meet: BTreeSet<VertexId> = ac.intersection(&bc).copied().collect();
            if meet != cc {
                return Ok(false);
            }
            if !broken {
                // Freeness: no edges between the two sides off the base.
                for &x in &diff(&ac, &cc) {
                    for &y in &diff(&bc, &cc) {
                        if m.adjacent(x, y) {
                            return Ok(false);
                        }
                    }
                }
            }
            let joint = m.induced(&abc)?;
            let cert = ngon::is_n_strong(n, &joint, &union(&ac, &bc), ngon::DEFAULT_STRONG_BOUND)?;
            Ok(cert.verdict)
        }
    }
}

pub fn indep(
    kind: SirKind,
    m: &FinStructure,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    c: &BTreeSet<VertexId>,
) -> Result<bool> {
    indep_impl(kind, false, m, a, b, c)
}

/// The per-kind mutation control. Only for harness validation; never a
/// correct relation.
pub fn indep_mutant(
    kind: SirKind,
    m: &FinStructure,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    c: &BTreeSet<VertexId>,
) -> Result<bool> {
    indep_impl(kind, true, m, a, b, c)
}

/// Independence over a possibly-large base set X: some C ⊆ X works for
/// every C' between C and X. Exhaustive over subsets; X stays small here.
pub fn indep_over_set(
    kind: SirKind,
    m: &FinStructure,
    a: &BTreeSet<VertexId>,
    b: &BTreeSet<VertexId>,
    x: &BTreeSet<VertexId>,
) -> Result<bool> {
    check_sets(m, &[a, b, x])?;
    let verts: Vec<VertexId> = x.iter().copied().collect();
    let need_nonempty = matches!(kind, SirKind::MinMetric);
    if need_nonempty && verts.is_empty() {
        return Err(Error::EmptyBase);
    }
    let n = verts.len();
    let mut masks: Vec<u64> = (0..(1u64 << n)).collect();
    masks.sort_by_key(|m| m.count_ones());
    let to_set = |mask: u64| -> BTreeSet<VertexId> {
        verts
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect()
    };
    'cand: for &cm in &masks {
        if need_nonempty && cm == 0 {
            continue;
        }
        for sup in 0..(1u64 << n) {
            if sup & cm != cm {
                continue;
            }
            if !indep(kind, m, a, b, &to_set(sup))? {
                continue 'cand;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// Smallest C ⊆ X with A independent from all of X over C. Monotonicity
/// reduces "all D ⊆ X" to D = X itself.
pub fn find_support(
    kind: SirKind,
    m: &FinStructure,
    a: &BTreeSet<VertexId>,
    x: &BTreeSet<VertexId>,
) -> Result<Option<BTreeSet<VertexId>>> {
    check_sets(m, &[a, x])?;
    let verts: Vec<VertexId> = x.iter().copied().collect();
    let n = verts.len();
    let mut masks: Vec<u64> = (0..(1u64 << n)).collect();
    masks.sort_by_key(|m| m.count_ones());
    for &cm in &masks {
        if cm == 0 && matches!(kind, SirKind::MinMetric) {
            continue;
        }
        let c: BTreeSet<VertexId> = verts
            .iter()
            .enumerate()
            .filter(|(i, _)| cm & (1 << i) != 0)
            .map(|(_, &v)| v)
            .collect();
        if indep(kind, m, a, x, &c)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

pub const AXIOM_NAMES: [&str; 6] = ["SIR1", "SIR2", "SIR3", "SIR4", "SIR5", "SIR6"];

#[derive(Debug, Clone, Serialize)]
pub struct WitnessData {
    pub trial: u64,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub c: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<u32>>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomStat {
    pub axiom: &'static str,
    pub trials: u64,
    pub violations: u64,
    pub unwitnessed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessData>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub kind: String,
    pub broken: bool,
    pub ambient_vertices: usize,
    pub trials: u64,
    pub axioms: Vec<AxiomStat>,
}

impl AxiomReport {
    pub fn total_violations(&self) -> u64 {
        self.axioms.iter().map(|a| a.violations).sum()
    }
}

fn ids(s: &BTreeSet<VertexId>) -> Vec<u32> {
    s.iter().map(|v| v.0).collect()
}

/// Per-trial tallies, merged in trial order.
#[derive(Default, Clone)]
struct TrialOutcome {
    violation: [Option<WitnessData>; 6],
    unwitnessed: [bool; 6],
}

struct Ctx<'a> {
    kind: SirKind,
    broken: bool,
    m: &'a FinStructure,
    /// Relabeled copy and its vertex map, for the invariance axiom.
    shifted: FinStructure,
    shift: BTreeMap<VertexId, VertexId>,
    /// A few ambient automorphisms (identity included), for invariance.
    autos: Vec<BTreeMap<VertexId, VertexId>>,
    max_gen: usize,
}

type VSet = BTreeSet<VertexId>;

impl Ctx<'_> {
    fn dep(&self, m: &FinStructure, a: &VSet, b: &VSet, c: &VSet) -> Result<bool> {
        indep_impl(self.kind, self.broken, m, a, b, c)
    }

    /// Collapses depth/search/base shortfalls into None: the ambient was
    /// too shallow for this instance, which is data, not an error.
    fn soft(&self, r: Result<bool>) -> Result<Option<bool>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::DepthInsufficient { .. })
            | Err(Error::SearchBoundExceeded(_))
            | Err(Error::EmptyBase) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn soft_set(&self, r: Result<BTreeSet<VertexId>>) -> Result<Option<BTreeSet<VertexId>>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::DepthInsufficient { .. })
            | Err(Error::SearchBoundExceeded(_))
            | Err(Error::EmptyBase) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn map_set(map: &BTreeMap<VertexId, VertexId>, s: &VSet) -> VSet {
        s.iter().map(|v| map[v]).collect()
    }

    /// Realizations of the type of A over C: embeddings of the generated
    /// structure of A∪C into the ambient fixing the base pointwise.
    fn realizations(&self, a: &VSet, c: &VSet, max: usize) -> Result<Option<Vec<Embedding>>> {
        let cc = match self.soft_set(self.m.generated(c))? {
            Some(s) => s,
            None => return Ok(None),
        };
        let ac = match self.soft_set(self.m.generated(&union(a, c)))? {
            Some(s) => s,
            None => return Ok(None),
        };
        let pattern = self.m.induced(&ac)?;
        let fixing: BTreeMap<VertexId, VertexId> = cc.iter().map(|&v| (v, v)).collect();
        let opts = SearchOpts {
            bound: 12,
            max_results: Some(max),
            node_budget: Some(80_000),
        };
        match find_embeddings(&pattern, self.m, &fixing, &opts) {
            Ok(es) => Ok(Some(es)),
            Err(Error::SearchBoundExceeded(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Whether two realizations of the same type over C have the same type
    /// over the generated set of B∪C. None when undecidable here.
    fn same_type_over(
        &self,
        bc: &VSet,
        a_gens: &VSet,
        ei: &Embedding,
        ej: &Embedding,
    ) -> Result<Option<bool>> {
        let img = |e: &Embedding, v: VertexId| e.apply(v).expect("total embedding");
        // The base-fixing isomorphism must send each generator image to its
        // counterpart; anything already inside ⟨BC⟩ has to be fixed.
        let mut fixing: BTreeMap<VertexId, VertexId> = bc.iter().map(|&v| (v, v)).collect();
        for &v in ei.map.keys() {
            let (vi, vj) = (img(ei, v), img(ej, v));
            if bc.contains(&vi) || bc.contains(&vj) {
                if vi != vj {
                    return Ok(Some(false));
                }
                continue;
            }
            if let Some(&prev) = fixing.get(&vi) {
                if prev != vj {
                    return Ok(Some(false));
                }
            }
            fixing.insert(vi, vj);
        }
        let side = |e: &Embedding| -> VSet {
            let mut s: VSet = bc.clone();
            s.extend(a_gens.iter().map(|&v| img(e, v)));
            s
        };
        let si = match self.soft_set(self.m.generated(&side(ei)))? {
            Some(s) => s,
            None => return Ok(None),
        };
        let sj = match self.soft_set(self.m.generated(&side(ej)))? {
            Some(s) => s,
            None => return Ok(None),
        };
        if si.len() != sj.len() {
            return Ok(Some(false));
        }
        let pat = self.m.induced(&si)?;
        let tgt = self.m.induced(&sj)?;
        let fixing: BTreeMap<VertexId, VertexId> = fixing
            .into_iter()
            .filter(|(v, _)| si.contains(v))
            .collect();
        let opts = SearchOpts {
            bound: 16,
            max_results: Some(1),
            node_budget: Some(80_000),
        };
        match find_embeddings(&pat, &tgt, &fixing, &opts) {
            Ok(es) => Ok(Some(!es.is_empty())),
            Err(Error::SearchBoundExceeded(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

fn sample_set(rng: &mut ChaCha8Rng, verts: &[VertexId], max: usize, min: usize) -> VSet {
    let hi = max.min(verts.len());
    let lo = min.min(hi);
    if hi == 0 {
        return VSet::new();
    }
    let k = rng.gen_range(lo..=hi);
    index_sample(rng, verts.len(), k)
        .into_iter()
        .map(|i| verts[i])
        .collect()
}

/// Greedy single-vertex shrinking: drop vertices while the violation
/// predicate stays true. Errors inside the predicate end the shrink.
fn shrink(sets: &mut [VSet], still: &dyn Fn(&[VSet]) -> bool, budget: &mut u32) {
    loop {
        let mut improved = false;
        for i in 0..sets.len() {
            let vs: Vec<VertexId> = sets[i].iter().copied().collect();
            for v in vs {
                if *budget == 0 {
                    return;
                }
                *budget -= 1;
                sets[i].remove(&v);
                if still(sets) {
                    improved = true;
                } else {
                    sets[i].insert(v);
                }
            }
        }
        if !improved {
            return;
        }
    }
}

fn run_trial(ctx: &Ctx<'_>, t: u64, seed: u64) -> Result<TrialOutcome> {
    let mut out = TrialOutcome::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let verts: Vec<VertexId> = ctx.m.vertices.iter().copied().collect();
    let need_base = matches!(ctx.kind, SirKind::MinMetric) as usize;
    let a = sample_set(&mut rng, &verts, ctx.max_gen, 1);
    let b = sample_set(&mut rng, &verts, ctx.max_gen, 1);
    let c = sample_set(&mut rng, &verts, ctx.max_gen, need_base);
    let d = sample_set(&mut rng, &verts, ctx.max_gen, 1);
    let m = ctx.m;

    let base_val = ctx.soft(ctx.dep(m, &a, &b, &c))?;

    // SIR1: the relation is blind to vertex identity. Checked through a
    // relabeled copy and through sampled ambient automorphisms.
    'sir1: {
        let Some(base_val) = base_val else {
            out.unwitnessed[0] = true;
            break 'sir1;
        };
        let tr = |s: &VSet| Ctx::map_set(&ctx.shift, s);
        match ctx.soft(ctx.dep(&ctx.shifted, &tr(&a), &tr(&b), &tr(&c)))? {
            None => out.unwitnessed[0] = true,
            Some(v) if v != base_val => {
                out.violation[0] = Some(WitnessData {
                    trial: t,
                    a: ids(&a),
                    b: ids(&b),
                    c: ids(&c),
                    d: None,
                    note: "value changed under ambient relabeling".into(),
                });
            }
            _ => {}
        }
        for f in &ctx.autos {
            if out.violation[0].is_some() {
                break;
            }
            let fa = Ctx::map_set(f, &a);
            let fb = Ctx::map_set(f, &b);
            let fc = Ctx::map_set(f, &c);
            match ctx.soft(ctx.dep(m, &fa, &fb, &fc))? {
                None => out.unwitnessed[0] = true,
                Some(v) if v != base_val => {
                    out.violation[0] = Some(WitnessData {
                        trial: t,
                        a: ids(&a),
                        b: ids(&b),
                        c: ids(&c),
                        d: None,
                        note: "value changed under an ambient automorphism".into(),
                    });
                }
                _ => {}
            }
        }
    }

    // SIR2: symmetry.
    {
        let fwd = base_val;
        let bwd = ctx.soft(ctx.dep(m, &b, &a, &c))?;
        match (fwd, bwd) {
            (Some(x), Some(y)) if x != y => {
                let mut sets = [a.clone(), b.clone(), c.clone()];
                let pred = |s: &[VSet]| -> bool {
                    let f = ctx.soft(ctx.dep(m, &s[0], &s[1], &s[2])).unwrap_or(None);
                    let g = ctx.soft(ctx.dep(m, &s[1], &s[0], &s[2])).unwrap_or(None);
                    matches!((f, g), (Some(x), Some(y)) if x != y)
                };
                let mut budget = 200;
                shrink(&mut sets, &pred, &mut budget);
                out.violation[1] = Some(WitnessData {
                    trial: t,
                    a: ids(&sets[0]),
                    b: ids(&sets[1]),
                    c: ids(&sets[2]),
                    d: None,
                    note: format!("indep(A,B,C) = {x} but indep(B,A,C) = {y}"),
                });
            }
            (None, _) | (_, None) => out.unwitnessed[1] = true,
            _ => {}
        }
    }

    // SIR3: monotonicity on quadruples.
    'sir3: {
        let bd = union(&b, &d);
        let Some(premise) = ctx.soft(ctx.dep(m, &a, &bd, &c))? else {
            out.unwitnessed[2] = true;
            break 'sir3;
        };
        if !premise {
            break 'sir3;
        }
        let Some(bc) = ctx.soft_set(m.generated(&union(&b, &c)))? else {
            out.unwitnessed[2] = true;
            break 'sir3;
        };
        let c1 = ctx.soft(ctx.dep(m, &a, &b, &c))?;
        let c2 = ctx.soft(ctx.dep(m, &a, &d, &bc))?;
        match (c1, c2) {
            (Some(x), Some(y)) if !(x && y) => {
                let mut sets = [a.clone(), b.clone(), c.clone(), d.clone()];
                let pred = |s: &[VSet]| -> bool {
                    let run = || -> Result<bool> {
                        let bd = union(&s[1], &s[3]);
                        if !matches!(ctx.soft(ctx.dep(m, &s[0], &bd, &s[2]))?, Some(true)) {
                            return Ok(false);
                        }
                        let Some(bc) = ctx.soft_set(m.generated(&union(&s[1], &s[2])))? else {
                            return Ok(false);
                        };
                        let c1 = ctx.soft(ctx.dep(m, &s[0], &s[1], &s[2]))?;
                        let c2 = ctx.soft(ctx.dep(m, &s[0], &s[3], &bc))?;
                        Ok(matches!((c1, c2), (Some(x), Some(y)) if !(x && y)))
                    };
                    run().unwrap_or(false)
                };
                let mut budget = 200;
                shrink(&mut sets, &pred, &mut budget);
                out.violation[2] = Some(WitnessData {
                    trial: t,
                    a: ids(&sets[0]),
                    b: ids(&sets[1]),
                    c: ids(&sets[2]),
                    d: Some(ids(&sets[3])),
                    note: format!(
                        "A indep of B∪D over C, but indep(A,B,C) = {x}, indep(A,D,⟨BC⟩) = {y}"
                    ),
                });
            }
            (None, _) | (_, None) => out.unwitnessed[2] = true,
            _ => {}
        }
    }

    // SIR4: existence of an independent realization of tp(A/C).
    'sir4: {
        let Some(reals) = ctx.realizations(&a, &c, 64)? else {
            out.unwitnessed[3] = true;
            break 'sir4;
        };
        let mut witnessed = false;
        let mut undecided = false;
        for e in &reals {
            let a2: VSet = a.iter().map(|&v| e.apply(v).expect("total")).collect();
            match ctx.soft(ctx.dep(m, &a2, &b, &c))? {
                Some(true) => {
                    witnessed = true;
                    break;
                }
                Some(false) => {}
                None => undecided = true,
            }
        }
        if !witnessed {
            // A finite fragment cannot refute existence; record the miss.
            let _ = undecided;
            out.unwitnessed[3] = true;
        }
    }

    // SIR5: stationarity. Two C-equivalent realizations independent from B
    // over C must be equivalent over ⟨BC⟩.
    'sir5: {
        let Some(bc) = ctx.soft_set(m.generated(&union(&b, &c)))? else {
            out.unwitnessed[4] = true;
            break 'sir5;
        };
        let Some(reals) = ctx.realizations(&a, &c, 8)? else {
            out.unwitnessed[4] = true;
            break 'sir5;
        };
        let mut indep_reals = Vec::new();
        let mut undecided = false;
        for e in reals {
            let a2: VSet = a.iter().map(|&v| e.apply(v).expect("total")).collect();
            match ctx.soft(ctx.dep(m, &a2, &b, &c))? {
                Some(true) => indep_reals.push(e),
                Some(false) => {}
                None => undecided = true,
            }
        }
        if indep_reals.len() < 2 {
            if indep_reals.len() + usize::from(undecided) < 2 {
                out.unwitnessed[4] = true;
            }
            break 'sir5;
        }
        'pairs: for i in 0..indep_reals.len() {
            for j in i + 1..indep_reals.len() {
                match ctx.same_type_over(&bc, &a, &indep_reals[i], &indep_reals[j])? {
                    Some(true) => {}
                    Some(false) => {
                        let ai: VSet = a
                            .iter()
                            .map(|&v| indep_reals[i].apply(v).expect("total"))
                            .collect();
                        let aj: VSet = a
                            .iter()
                            .map(|&v| indep_reals[j].apply(v).expect("total"))
                            .collect();
                        out.violation[4] = Some(WitnessData {
                            trial: t,
                            a: ids(&ai),
                            b: ids(&b),
                            c: ids(&c),
                            d: Some(ids(&aj)),
                            note:
                                "two independent realizations of one type over C differ over ⟨BC⟩"
                                    .into(),
                        });
                        break 'pairs;
                    }
                    None => out.unwitnessed[4] = true,
                }
            }
        }
    }

    // SIR6: transitivity on quadruples.
    'sir6: {
        let Some(p1) = base_val else {
            out.unwitnessed[5] = true;
            break 'sir6;
        };
        if !p1 {
            break 'sir6;
        }
        let Some(bc) = ctx.soft_set(m.generated(&union(&b, &c)))? else {
            out.unwitnessed[5] = true;
            break 'sir6;
        };
        let Some(p2) = ctx.soft(ctx.dep(m, &a, &d, &bc))? else {
            out.unwitnessed[5] = true;
            break 'sir6;
        };
        if !p2 {
            break 'sir6;
        }
        let bd = union(&b, &d);
        match ctx.soft(ctx.dep(m, &a, &bd, &c))? {
            Some(true) => {}
            Some(false) => {
                let mut sets = [a.clone(), b.clone(), c.clone(), d.clone()];
                let pred = |s: &[VSet]| -> bool {
                    let run = || -> Result<bool> {
                        if !matches!(ctx.soft(ctx.dep(m, &s[0], &s[1], &s[2]))?, Some(true)) {
                            return Ok(false);
                        }
                        let Some(bc) = ctx.soft_set(m.generated(&union(&s[1], &s[2])))? else {
                            return Ok(false);
                        };
                        if !matches!(ctx.soft(ctx.dep(m, &s[0], &s[3], &bc))?, Some(true)) {
                            return Ok(false);
                        }
                        let bd = union(&s[1], &s[3]);
                        Ok(matches!(
                            ctx.soft(ctx.dep(m, &s[0], &bd, &s[2]))?,
                            Some(false)
                        ))
                    };
                    run().unwrap_or(false)
                };
                let mut budget = 200;
                shrink(&mut sets, &pred, &mut budget);
                out.violation[5] = Some(WitnessData {
                    trial: t,
                    a: ids(&sets[0]),
                    b: ids(&sets[1]),
                    c: ids(&sets[2]),
                    d: Some(ids(&sets[3])),
                    note: "A indep of B over C and of D over ⟨BC⟩, but not of B∪D over C".into(),
                });
            }
            None => out.unwitnessed[5] = true,
        }
    }

    Ok(out)
}

/// Runs `trials` seeded instances of all six axioms against the given
/// ambient. Deterministic for a fixed seed; trials fan out in parallel and
/// merge in trial order.
pub fn check_axioms(
    kind: SirKind,
    ambient: &FinStructure,
    trials: u64,
    seed: u64,
    broken: bool,
) -> Result<AxiomReport> {
    if kind.class_tag() != ambient.class {
        return Err(Error::ClassMismatch {
            expected: kind.class_tag().to_string(),
            found: ambient.class.to_string(),
        });
    }
    let offset = ambient.next_id().0 + 101;
    let shift: BTreeMap<VertexId, VertexId> = ambient
        .vertices
        .iter()
        .map(|&v| (v, VertexId(v.0 + offset)))
        .collect();
    let shifted = ambient.relabel(&shift)?;
    let auto_opts = SearchOpts {
        bound: ambient.len(),
        max_results: Some(4),
        node_budget: Some(150_000),
    };
    let autos: Vec<BTreeMap<VertexId, VertexId>> = match automorphisms(ambient, &auto_opts) {
        Ok(es) => es.into_iter().map(|e| e.map).collect(),
        Err(Error::SearchBoundExceeded(_)) => {
            vec![ambient.vertices.iter().map(|&v| (v, v)).collect()]
        }
        Err(e) => return Err(e),
    };
    let ctx = Ctx {
        kind,
        broken,
        m: ambient,
        shifted,
        shift,
        autos,
        max_gen: match kind {
            SirKind::NGonStrong(_) => 2,
            _ => 4,
        },
    };
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&ctx, t, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut axioms: Vec<AxiomStat> = AXIOM_NAMES
        .iter()
        .map(|&axiom| AxiomStat {
            axiom,
            trials,
            violations: 0,
            unwitnessed: 0,
            witness: None,
        })
        .collect();
    for out in &outcomes {
        for i in 0..6 {
            if let Some(w) = &out.violation[i] {
                axioms[i].violations += 1;
                if axioms[i].witness.is_none() {
                    axioms[i].witness = Some(w.clone());
                }
            }
            if out.unwitnessed[i] {
                axioms[i].unwitnessed += 1;
            }
        }
    }
    Ok(AxiomReport {
        kind: kind.to_string(),
        broken,
        ambient_vertices: ambient.len(),
        trials,
        axioms,
    })
}

/// The standard test ambient per kind: a depth-`rounds` saturated
/// approximant grown from the class's natural seed.
/// Smallest sensible start for saturation in each class: nothing for graphs
/// and posets, one point for metrics, one full 2n-cycle for n-gons (the
/// enumerator needs a generated-closed nonempty fragment to grow from).
pub fn seed_structure(kind: SirKind) -> FinStructure {
    match kind.class_tag() {
        ClassTag::Graph => FinStructure::empty(ClassTag::Graph),
        ClassTag::Poset => FinStructure::empty(ClassTag::Poset),
        ClassTag::RatMetric => FinStructure::metric([VertexId(0)], []),
        ClassTag::NGon(n) => FinStructure::ngon(
            n,
            (0..2 * n).map(VertexId),
            (0..2 * n).map(|i| (VertexId(i), (i % 2) as u8)),
            (0..2 * n).map(|i| (VertexId(i), VertexId((i + 1) % (2 * n)))),
            0,
        ),
    }
}

pub fn default_ambient(kind: SirKind, rounds: u32, seed: u64) -> Result<FinStructure> {
    let start = seed_structure(kind);
    let params = SaturateParams {
        rounds,
        seed,
        menu: Some(katetov::default_menu()),
        ..SaturateParams::default()
    };
    let chain = katetov::saturate(kind, &start, &params)?;
    Ok(chain.levels.last().expect("at least the start level").clone())
}
