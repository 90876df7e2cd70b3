//! Canonical amalgamation: gluing finitely many extensions of a common
//! base into one structure, with the cross relations dictated by the
//! class's independence notion. The n-ary version folds left over the
//! factor list; results for different orders agree up to base-fixing
//! isomorphism, which is what the tests pin down.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;

use crate::error::{Error, Result};
use crate::iso::{canonical_key, find_embeddings, CanonicalKey, Embedding, SearchOpts};
use crate::ngon;
use crate::sir::SirKind;
use crate::structure::{ClassData, ClassTag, Edge, FinStructure, VertexId};

/// An extension of a fixed base, tagged with a canonical key computed
/// relative to that base. Two extensions get equal keys exactly when some
/// base-fixing isomorphism matches them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionType {
    pub base: FinStructure,
    pub ext: FinStructure,
    pub key: CanonicalKey,
}

impl ExtensionType {
    pub fn new(base: FinStructure, ext: FinStructure) -> Result<ExtensionType> {
        if base.class != ext.class {
            return Err(Error::ClassMismatch {
                expected: base.class.to_string(),
                found: ext.class.to_string(),
            });
        }
        let restricted = ext.induced(&base.vertices)?;
        if restricted.clone().with_depth(0) != base.clone().with_depth(0) {
            return Err(Error::BaseMismatch(
                "extension does not restrict to its base".into(),
            ));
        }
        if matches!(ext.class, ClassTag::NGon(_)) {
            // The base must be closed inside the extension, otherwise the
            // amalgam could force relations between factors behind the
            // base's back. Truncation debt (blocked pairs) is tolerated;
            // it belongs to the ambient fragment, not to this type.
            let (clo, _blocked) = ngon::generated_closure_with_blocked(&ext, &base.vertices)?;
            if clo != base.vertices {
                return Err(Error::Malformed(format!(
                    "base is not closed in the extension: closure adds {:?}",
                    clo.difference(&base.vertices).collect::<Vec<_>>()
                )));
            }
        }
        // Base rows are pinned in the key, so the minimization only
        // permutes the new part and the usual pattern bound is irrelevant.
        let opts = SearchOpts::with_bound(ext.len());
        let key = canonical_key(&ext, &base.vertices, &opts)?;
        Ok(ExtensionType { base, ext, key })
    }

    pub fn trivial(base: &FinStructure) -> Result<ExtensionType> {
        ExtensionType::new(base.clone(), base.clone())
    }

    /// Vertices the extension adds over the base, ascending.
    pub fn news(&self) -> Vec<VertexId> {
        self.ext
            .vertices
            .difference(&self.base.vertices)
            .copied()
            .collect()
    }
}

/// One factor's placement inside an amalgam: the original extension and
/// the vertex map into the result.
#[derive(Debug, Clone)]
pub struct FactorMap {
    pub ext: FinStructure,
    pub map: BTreeMap<VertexId, VertexId>,
}

#[derive(Debug, Clone)]
pub struct Amalgam {
    pub result: FinStructure,
    pub base: FinStructure,
    /// Base vertices into the result. Identity in the canonical builds.
    pub base_map: BTreeMap<VertexId, VertexId>,
    pub factors: Vec<FactorMap>,
}

impl Amalgam {
    pub fn base_embedding(&self) -> Embedding {
        Embedding {
            dom: self.base.clone(),
            cod: self.result.clone(),
            map: self.base_map.clone(),
        }
    }

    pub fn factor_embeddings(&self) -> Vec<Embedding> {
        self.factors
            .iter()
            .map(|f| Embedding {
                dom: f.ext.clone(),
                cod: self.result.clone(),
                map: f.map.clone(),
            })
            .collect()
    }
}

fn identity_map(s: &BTreeSet<VertexId>) -> BTreeMap<VertexId, VertexId> {
    s.iter().map(|&v| (v, v)).collect()
}

/// Full validation is quadratic-to-cubic; folds that build thousands of
/// vertices only get it while small. The construction itself is checked
/// piecewise either way.
const VALIDATE_LIMIT: usize = 128;

fn assert_valid(s: &FinStructure) -> Result<()> {
    if s.len() <= VALIDATE_LIMIT {
        if let Err(v) = s.validate() {
            return Err(Error::InternalInvariant(format!(
                "amalgam violates class axioms: {v}"
            )));
        }
    }
    Ok(())
}

/// Attaches one extension to an accumulated structure along a base copy
/// sitting inside it. Returns the grown structure and the factor's vertex
/// map. The accumulator keeps its ids; the factor's new vertices get fresh
/// ones.
pub(crate) fn amalgamate_onto(
    kind: SirKind,
    acc: FinStructure,
    base_ids: &BTreeSet<VertexId>,
    b: &ExtensionType,
    opts: &SearchOpts,
) -> Result<(FinStructure, BTreeMap<VertexId, VertexId>)> {
    if kind.class_tag() != acc.class {
        return Err(Error::ClassMismatch {
            expected: kind.class_tag().to_string(),
            found: acc.class.to_string(),
        });
    }
    if b.base.class != acc.class {
        return Err(Error::ClassMismatch {
            expected: acc.class.to_string(),
            found: b.base.class.to_string(),
        });
    }
    let site = acc.induced(base_ids)?;
    // Identity placement is the common case in folds; otherwise search for
    // a base isomorphism onto the site.
    let phi: BTreeMap<VertexId, VertexId> = if b.base.vertices == *base_ids
        && site.clone().with_depth(0) == b.base.clone().with_depth(0)
    {
        identity_map(base_ids)
    } else {
        if site.len() != b.base.len() {
            return Err(Error::BaseMismatch(format!(
                "attachment site has {} vertices, base has {}",
                site.len(),
                b.base.len()
            )));
        }
        let mut o = opts.clone();
        o.max_results = Some(1);
        o.bound = o.bound.max(b.base.len());
        let found = find_embeddings(&b.base, &site, &BTreeMap::new(), &o)?;
        match found.into_iter().next() {
            Some(e) => e.map,
            None => {
                return Err(Error::BaseMismatch(
                    "extension base does not match the attachment site".into(),
                ))
            }
        }
    };
    merge_extension(kind, acc, base_ids, &phi, b)
}

/// The data merge behind `amalgamate_onto`, with the base placement
/// already resolved. Folds over one literal base call this directly.
fn merge_extension(
    kind: SirKind,
    mut acc: FinStructure,
    base_ids: &BTreeSet<VertexId>,
    phi: &BTreeMap<VertexId, VertexId>,
    b: &ExtensionType,
) -> Result<(FinStructure, BTreeMap<VertexId, VertexId>)> {
    let olds: Vec<VertexId> = acc
        .vertices
        .iter()
        .copied()
        .filter(|v| !base_ids.contains(v))
        .collect();
    let mut map = phi.clone();
    let mut next = acc.next_id().0;
    let news = b.news();
    for &v in &news {
        map.insert(v, VertexId(next));
        next += 1;
    }
    for &v in &news {
        acc.vertices.insert(map[&v]);
    }

    let acc_class = acc.class;
    let class_err = move || Error::ClassMismatch {
        expected: acc_class.to_string(),
        found: b.ext.class.to_string(),
    };
    match acc.class {
        ClassTag::Graph => {
            let bext = match &b.ext.data {
                ClassData::Graph { edges } => edges.clone(),
                _ => return Err(class_err()),
            };
            let ClassData::Graph { edges } = &mut acc.data else {
                return Err(class_err());
            };
            for e in &bext {
                if !b.base.contains(e.0) || !b.base.contains(e.1) {
                    edges.insert(Edge::new(map[&e.0], map[&e.1]));
                }
            }
            if matches!(kind, SirKind::CompleteGraph) {
                for &v in &news {
                    for &o in &olds {
                        edges.insert(Edge::new(map[&v], o));
                    }
                }
            }
        }
        ClassTag::NGon(_) => {
            let (bext, bpart) = match &b.ext.data {
                ClassData::NGon { edges, part, .. } => (edges.clone(), part.clone()),
                _ => return Err(class_err()),
            };
            let ClassData::NGon { edges, part, .. } = &mut acc.data else {
                return Err(class_err());
            };
            for &v in &news {
                part.insert(map[&v], bpart[&v]);
            }
            for e in &bext {
                if !b.base.contains(e.0) || !b.base.contains(e.1) {
                    edges.insert(Edge::new(map[&e.0], map[&e.1]));
                }
            }
        }
        ClassTag::Poset => {
            let bord = match &b.ext.data {
                ClassData::Poset { order } => order.clone(),
                _ => return Err(class_err()),
            };
            let ClassData::Poset { order } = &acc.data else {
                return Err(class_err());
            };
            let leq_acc = |x: VertexId, y: VertexId| x == y || order.contains(&(x, y));
            // phi runs base-of-b to site; invert for lookups on b's side.
            let inv: BTreeMap<VertexId, VertexId> =
                phi.iter().map(|(&k, &img)| (img, k)).collect();
            let mut pairs: Vec<(VertexId, VertexId)> = order.iter().copied().collect();
            for &(x, y) in &bord {
                pairs.push((map[&x], map[&y]));
            }
            // Cross comparabilities exist only when forced through the base.
            for &v in &news {
                for &o in &olds {
                    if base_ids
                        .iter()
                        .any(|&z| b.ext.leq(v, inv[&z]) && leq_acc(z, o))
                    {
                        pairs.push((map[&v], o));
                    }
                    if base_ids
                        .iter()
                        .any(|&z| leq_acc(o, z) && b.ext.leq(inv[&z], v))
                    {
                        pairs.push((o, map[&v]));
                    }
                }
            }
            let verts: Vec<VertexId> = acc.vertices.iter().copied().collect();
            let rebuilt = FinStructure::poset(verts, pairs);
            acc.data = rebuilt.data;
        }
        ClassTag::RatMetric => {
            let bd = match &b.ext.data {
                ClassData::Metric { dist } => dist.clone(),
                _ => return Err(class_err()),
            };
            let bdist = |x: VertexId, y: VertexId| -> Result<Rational64> {
                if x == y {
                    return Ok(Rational64::from_integer(0));
                }
                bd.get(&Edge::new(x, y)).copied().ok_or_else(|| {
                    Error::Malformed(format!("distance ({x}, {y}) missing in extension"))
                })
            };
            let mut add: Vec<(Edge, Rational64)> = Vec::new();
            {
                let ClassData::Metric { dist } = &acc.data else {
                    return Err(class_err());
                };
                let adist = |x: VertexId, y: VertexId| -> Result<Rational64> {
                    if x == y {
                        return Ok(Rational64::from_integer(0));
                    }
                    dist.get(&Edge::new(x, y)).copied().ok_or_else(|| {
                        Error::Malformed(format!("distance ({x}, {y}) missing in accumulator"))
                    })
                };
                for (i, &v) in news.iter().enumerate() {
                    for &w in news.iter().take(i) {
                        add.push((Edge::new(map[&v], map[&w]), bdist(v, w)?));
                    }
                    for (&zb, &z) in phi.iter() {
                        add.push((Edge::new(map[&v], z), bdist(v, zb)?));
                    }
                    for &o in &olds {
                        // Shortest route through the shared base.
                        let mut best: Option<Rational64> = None;
                        for (&zb, &z) in phi.iter() {
                            let s = bdist(v, zb)? + adist(z, o)?;
                            if best.map_or(true, |b| s < b) {
                                best = Some(s);
                            }
                        }
                        let d = best.ok_or(Error::EmptyBase)?;
                        add.push((Edge::new(map[&v], o), d));
                    }
                }
            }
            let ClassData::Metric { dist } = &mut acc.data else {
                return Err(class_err());
            };
            for (e, d) in add {
                dist.insert(e, d);
            }
        }
    }

    assert_valid(&acc)?;
    Ok((acc, map))
}

/// The amalgam of two extensions over one shared base (same base ids).
pub fn canonical_amalgam(kind: SirKind, a: &ExtensionType, b: &ExtensionType) -> Result<Amalgam> {
    si_amalgam_family(kind, &a.base, &[a.clone(), b.clone()])
}

/// Left fold of the family over its common base. Factor maps keep each
/// entry's original extension, so gluing can refer back to it.
pub fn si_amalgam_family(
    kind: SirKind,
    base: &FinStructure,
    exts: &[ExtensionType],
) -> Result<Amalgam> {
    if kind.class_tag() != base.class {
        return Err(Error::ClassMismatch {
            expected: kind.class_tag().to_string(),
            found: base.class.to_string(),
        });
    }
    let mut acc = base.clone();
    let mut factors = Vec::with_capacity(exts.len());
    // The fold never edits relations inside the base, so the literal base
    // stays a faithful attachment site throughout; skip re-deriving it.
    let phi = identity_map(&base.vertices);
    for e in exts {
        if e.base.clone().with_depth(0) != base.clone().with_depth(0) {
            return Err(Error::BaseMismatch(
                "family members must share the base".into(),
            ));
        }
        let (next, map) = merge_extension(kind, acc, &base.vertices, &phi, e)?;
        acc = next;
        factors.push(FactorMap {
            ext: e.ext.clone(),
            map,
        });
    }
    Ok(Amalgam {
        result: acc,
        base: base.clone(),
        base_map: identity_map(&base.vertices),
        factors,
    })
}

/// Pushes an extension of C out along C ⊆ X: the unique supported
/// extension of X with the same new part, independent from X over C.
pub fn extend_type(kind: SirKind, a: &ExtensionType, x: &FinStructure) -> Result<ExtensionType> {
    let restricted = x.induced(&a.base.vertices)?;
    if restricted.clone().with_depth(0) != a.base.clone().with_depth(0) {
        return Err(Error::BaseMismatch(
            "the larger base does not restrict to the extension's base".into(),
        ));
    }
    let opts = SearchOpts::first_only();
    let (ext, _map) = amalgamate_onto(kind, x.clone(), &a.base.vertices, a, &opts)?;
    ExtensionType::new(x.clone(), ext)
}

/// Glues factor isomorphisms along a factor permutation into one
/// automorphism of the amalgam. Each `fs[i]` must be an isomorphism from
/// factor i's extension onto factor sigma(i)'s, fixing the base pointwise.
pub fn glue_automorphisms(
    kind: SirKind,
    am: &Amalgam,
    sigma: &[usize],
    fs: &[BTreeMap<VertexId, VertexId>],
) -> Result<Embedding> {
    let id = identity_map(&am.base.vertices);
    glue_over(kind, am, &id, sigma, fs)
}

/// The general form: the factor maps restrict to a common automorphism
/// `g_base` of the base instead of the identity. Lifting needs this.
pub fn glue_over(
    kind: SirKind,
    am: &Amalgam,
    g_base: &BTreeMap<VertexId, VertexId>,
    sigma: &[usize],
    fs: &[BTreeMap<VertexId, VertexId>],
) -> Result<Embedding> {
    let _ = kind;
    let k = am.factors.len();
    if sigma.len() != k || fs.len() != k {
        return Err(Error::BadParameter(format!(
            "need {k} factor maps, got {} and {}",
            sigma.len(),
            fs.len()
        )));
    }
    let mut seen = vec![false; k];
    for &s in sigma {
        if s >= k || seen[s] {
            return Err(Error::BadParameter("sigma is not a permutation".into()));
        }
        seen[s] = true;
    }
    for &r in &am.base.vertices {
        match g_base.get(&r) {
            Some(img) if am.base.vertices.contains(img) => {}
            _ => {
                return Err(Error::BadParameter(format!(
                    "base map does not act on base vertex {r}"
                )))
            }
        }
    }
    let mut glued: BTreeMap<VertexId, VertexId> = am
        .base
        .vertices
        .iter()
        .map(|&r| (am.base_map[&r], am.base_map[&g_base[&r]]))
        .collect();
    for (i, f) in fs.iter().enumerate() {
        let tgt = &am.factors[sigma[i]];
        let e = Embedding {
            dom: am.factors[i].ext.clone(),
            cod: tgt.ext.clone(),
            map: f.clone(),
        };
        e.verify()?;
        if e.map.len() != tgt.ext.len() {
            return Err(Error::BadParameter(format!(
                "factor map {i} is not onto factor {}",
                sigma[i]
            )));
        }
        for &r in &am.base.vertices {
            if f.get(&r) != Some(&g_base[&r]) {
                return Err(Error::BaseMismatch(format!(
                    "factor map {i} disagrees with the base map at {r}"
                )));
            }
        }
        for (&v, &fv) in f {
            glued.insert(am.factors[i].map[&v], tgt.map[&fv]);
        }
    }
    let auto = Embedding {
        dom: am.result.clone(),
        cod: am.result.clone(),
        map: glued,
    };
    auto.verify().map_err(|e| {
        Error::InternalInvariant(format!("glued map is not an automorphism: {e}"))
    })?;
    if auto.map.len() != am.result.len() {
        return Err(Error::InternalInvariant(
            "glued map does not cover the amalgam".into(),
        ));
    }
    Ok(auto)
}
