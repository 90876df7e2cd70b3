//! fraisse-lab: experiments on finite approximants of homogeneous
//! structures.
//!
//! Machine-readable reports go to stdout as JSON lines; human summaries go
//! to stderr. Exit code 0 means success, 1 means a violation or negative
//! verdict was found, 2 means a usage or resource problem. Output is
//! byte-identical across runs of the same invocation; `--seed` (or the
//! FRAISSE_LAB_SEED variable) pins every randomized command.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use fraisse_core::json::{self, parse_rational};
use fraisse_core::katetov::{
    self, back_and_forth_iso, build_tower, check_richness, finite_determination_witness,
    lift_automorphism, one_point_probes, ProbeOutcome, SaturateParams, TowerParams,
};
use fraisse_core::ngon;
use fraisse_core::sir::{check_axioms, default_ambient, seed_structure, SirKind};
use fraisse_core::{dot, BnfOutcome, ExtensionType, FinStructure, SearchOpts, VertexId};
use num_rational::Rational64;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fraisse-lab", version, about = "Finite approximants of homogeneous structures")]
struct Cli {
    /// Seed for randomized commands. Default: FRAISSE_LAB_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a structure file against its class invariants.
    Validate { file: PathBuf },
    /// Amalgamate two extensions of a common base, canonically.
    Amalgamate {
        #[arg(long)]
        kind: SirKind,
        base: PathBuf,
        ext_a: PathBuf,
        ext_b: PathBuf,
    },
    /// Build an extension tower and report how rich each level is.
    Katetov {
        #[arg(long)]
        kind: SirKind,
        /// New vertices per extension type.
        #[arg(short, default_value_t = 1)]
        m: usize,
        /// Tower height (number of extension steps).
        #[arg(short, default_value_t = 1)]
        k: u32,
        /// Distance menu for metric enumeration, e.g. "1,3/2,2".
        #[arg(long)]
        menu: Option<String>,
        #[arg(long, default_value_t = 4096)]
        level_cap: usize,
        file: PathBuf,
    },
    /// Lift a base automorphism through a freshly built tower.
    Lift {
        #[arg(long)]
        kind: SirKind,
        #[arg(short, default_value_t = 1)]
        m: usize,
        #[arg(short, default_value_t = 1)]
        k: u32,
        #[arg(long)]
        menu: Option<String>,
        /// Base fragment; the tower is rebuilt deterministically from it.
        tower: PathBuf,
        /// JSON object mapping base vertex ids, e.g. {"0":1,"1":0}.
        perm_spec: PathBuf,
        /// Vertices of level 1 to compute a determination witness for
        /// (comma-separated ids). Default: all of level 1.
        #[arg(long)]
        witness_for: Option<String>,
    },
    /// Run the independence-axiom suite inside a saturated approximant.
    SirCheck {
        #[arg(long)]
        kind: SirKind,
        #[arg(long, default_value_t = 500)]
        trials: u64,
        /// Saturation rounds for the ambient approximant.
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Use the deliberately broken variant of the relation.
        #[arg(long)]
        broken: bool,
    },
    /// Polygon-fragment commands.
    Ngon {
        #[command(subcommand)]
        cmd: NgonCmd,
    },
    /// Grow a saturated approximant by realizing extension types.
    Saturate {
        #[arg(long = "class")]
        class: SirKind,
        #[arg(short, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        #[arg(long)]
        menu: Option<String>,
        /// Stop growing past this many vertices.
        #[arg(long, default_value_t = 48)]
        cap: usize,
        /// Start fragment. Default: the smallest start for the class.
        file: Option<PathBuf>,
    },
    /// Bounded back-and-forth equivalence between two structures.
    BnfIso {
        #[arg(long)]
        depth: u32,
        #[arg(long, default_value_t = 5_000_000)]
        budget: u64,
        a: PathBuf,
        b: PathBuf,
    },
    /// Worked scenarios.
    Demo {
        #[command(subcommand)]
        cmd: DemoCmd,
    },
}

#[derive(Subcommand)]
enum NgonCmd {
    /// Freely complete a fragment for up to DEPTH rounds.
    Complete {
        #[arg(short)]
        n: u32,
        #[arg(long)]
        depth: u32,
        /// Write a Graphviz rendering here, new vertices colored by round.
        #[arg(long)]
        dot: Option<PathBuf>,
        file: PathBuf,
    },
    /// Decide whether X is n-strong in Y.
    Strong {
        #[arg(short)]
        n: u32,
        /// Refuse the minimization past this many free vertices.
        #[arg(long, default_value_t = 22)]
        bound: usize,
        x_file: PathBuf,
        y_file: PathBuf,
    },
    /// Evaluate the k-th geodesic step function at a pair.
    Fk {
        #[arg(short)]
        n: u32,
        #[arg(short)]
        k: u32,
        file: PathBuf,
        x: u32,
        y: u32,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Lift an order-2 symmetry of a 2n-cycle through one extension step.
    Cor57 {
        #[arg(short, default_value_t = 3)]
        n: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("FRAISSE_LAB_SEED") {
        Ok(text) => text
            .parse()
            .with_context(|| format!("FRAISSE_LAB_SEED={text:?} is not an integer")),
        Err(_) => Ok(0),
    }
}

fn load(path: &Path) -> Result<FinStructure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    json::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_menu(text: Option<&str>, kind: SirKind) -> Result<Option<Vec<Rational64>>> {
    match text {
        Some(t) => {
            let mut menu = Vec::new();
            for part in t.split(',') {
                menu.push(parse_rational(part).with_context(|| format!("menu entry {part:?}"))?);
            }
            Ok(Some(menu))
        }
        None if kind == SirKind::MinMetric => Ok(Some(katetov::default_menu())),
        None => Ok(None),
    }
}

fn emit(v: Value) {
    println!("{v}");
}

fn ids(set: &BTreeSet<VertexId>) -> Value {
    Value::from(set.iter().map(|v| v.0).collect::<Vec<_>>())
}

fn map_value(map: &BTreeMap<VertexId, VertexId>) -> Value {
    Value::Object(
        map.iter()
            .map(|(k, v)| (k.0.to_string(), Value::from(v.0)))
            .collect(),
    )
}

fn structure_value(s: &FinStructure) -> Value {
    serde_json::to_value(json::to_raw(s)).expect("structure serialization cannot fail")
}

fn run(cli: Cli) -> Result<u8> {
    let seed = resolve_seed(cli.seed)?;
    match cli.cmd {
        Cmd::Validate { file } => cmd_validate(&file),
        Cmd::Amalgamate {
            kind,
            base,
            ext_a,
            ext_b,
        } => cmd_amalgamate(kind, &base, &ext_a, &ext_b),
        Cmd::Katetov {
            kind,
            m,
            k,
            menu,
            level_cap,
            file,
        } => cmd_katetov(kind, m, k, menu.as_deref(), level_cap, &file),
        Cmd::Lift {
            kind,
            m,
            k,
            menu,
            tower,
            perm_spec,
            witness_for,
        } => cmd_lift(kind, m, k, menu.as_deref(), &tower, &perm_spec, witness_for.as_deref()),
        Cmd::SirCheck {
            kind,
            trials,
            rounds,
            broken,
        } => cmd_sir_check(kind, trials, rounds, broken, seed),
        Cmd::Ngon { cmd } => match cmd {
            NgonCmd::Complete { n, depth, dot, file } => cmd_complete(n, depth, dot.as_deref(), &file),
            NgonCmd::Strong {
                n,
                bound,
                x_file,
                y_file,
            } => cmd_strong(n, bound, &x_file, &y_file),
            NgonCmd::Fk { n, k, file, x, y } => cmd_fk(n, k, &file, x, y),
        },
        Cmd::Saturate {
            class,
            m,
            rounds,
            menu,
            cap,
            file,
        } => cmd_saturate(class, m, rounds, menu.as_deref(), cap, file.as_deref(), seed),
        Cmd::BnfIso { depth, budget, a, b } => cmd_bnf_iso(depth, budget, &a, &b),
        Cmd::Demo { cmd } => match cmd {
            DemoCmd::Cor57 { n } => cmd_cor57(n),
        },
    }
}

fn cmd_validate(file: &Path) -> Result<u8> {
    let text =
        std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let raw: json::RawStructure =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
    let s = json::build_raw(&raw)?;
    match s.validate() {
        Ok(()) => {
            emit(json!({"cmd": "validate", "ok": true, "class": raw.class, "vertices": s.len()}));
            eprintln!("{}: ok ({} vertices)", file.display(), s.len());
            Ok(0)
        }
        Err(v) => {
            emit(json!({"cmd": "validate", "ok": false, "violation": v.to_string()}));
            eprintln!("{}: INVALID: {v}", file.display());
            Ok(1)
        }
    }
}

fn cmd_amalgamate(kind: SirKind, base: &Path, ext_a: &Path, ext_b: &Path) -> Result<u8> {
    let base = load(base)?;
    let a = ExtensionType::new(base.clone(), load(ext_a)?)?;
    let b = ExtensionType::new(base.clone(), load(ext_b)?)?;
    let am = fraisse_core::amalgam::canonical_amalgam(kind, &a, &b)?;
    emit(json!({
        "cmd": "amalgamate",
        "kind": kind.to_string(),
        "result": structure_value(&am.result),
        "base_map": map_value(&am.base_map),
        "factor_maps": am.factors.iter().map(|f| map_value(&f.map)).collect::<Vec<_>>(),
    }));
    eprintln!(
        "amalgam over {} base vertices: {} vertices total",
        base.len(),
        am.result.len()
    );
    Ok(0)
}

fn cmd_katetov(
    kind: SirKind,
    m: usize,
    k: u32,
    menu: Option<&str>,
    level_cap: usize,
    file: &Path,
) -> Result<u8> {
    let x = load(file)?;
    let menu = parse_menu(menu, kind)?;
    let params = TowerParams {
        m,
        rounds: k,
        level_cap,
        menu: menu.clone(),
        ..TowerParams::default()
    };
    let tower = build_tower(kind, &x, &params)?;
    for (j, level) in tower.levels.iter().enumerate() {
        emit(json!({"cmd": "katetov", "level": j, "vertices": level.len()}));
    }
    let mut unsolved_total = 0usize;
    for j in 0..tower.levels.len().saturating_sub(1) {
        let probes = one_point_probes(kind, &tower, j, menu.as_deref())?;
        let opts = SearchOpts::with_bound(tower.levels[j + 1].len());
        let report = check_richness(&tower, &probes, &opts)?;
        let count = |want: ProbeOutcome| report.outcomes.iter().filter(|&o| *o == want).count();
        let (solved, unsolved) = (count(ProbeOutcome::Solved), count(ProbeOutcome::Unsolved));
        unsolved_total += unsolved;
        emit(json!({
            "cmd": "katetov-richness",
            "level": j,
            "probes": probes.len(),
            "solved": solved,
            "unsolved": unsolved,
            "out_of_bound": count(ProbeOutcome::OutOfBound),
        }));
    }
    emit(json!({
        "cmd": "katetov-top",
        "complete": tower.complete,
        "result": structure_value(tower.levels.last().expect("levels nonempty")),
    }));
    eprintln!(
        "tower of height {} over {} vertices: top level {} vertices, {} unsolved probes",
        k,
        x.len(),
        tower.levels.last().expect("levels nonempty").len(),
        unsolved_total
    );
    Ok(if unsolved_total > 0 { 1 } else { 0 })
}

fn parse_perm(path: &Path) -> Result<BTreeMap<VertexId, VertexId>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: BTreeMap<String, u32> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (k, v) in raw {
        let k: u32 = k
            .parse()
            .with_context(|| format!("permutation key {k:?} is not a vertex id"))?;
        map.insert(VertexId(k), VertexId(v));
    }
    Ok(map)
}

fn cmd_lift(
    kind: SirKind,
    m: usize,
    k: u32,
    menu: Option<&str>,
    tower_file: &Path,
    perm_spec: &Path,
    witness_for: Option<&str>,
) -> Result<u8> {
    let x = load(tower_file)?;
    let f = parse_perm(perm_spec)?;
    let params = TowerParams {
        m,
        rounds: k,
        menu: parse_menu(menu, kind)?,
        ..TowerParams::default()
    };
    let tower = build_tower(kind, &x, &params)?;
    let lift = lift_automorphism(kind, &tower, &f)?;
    for (j, emb) in lift.levels.iter().enumerate() {
        emit(json!({"cmd": "lift", "level": j, "map": map_value(&emb.map)}));
    }
    let a: BTreeSet<VertexId> = match witness_for {
        Some(text) => {
            let mut set = BTreeSet::new();
            for part in text.split(',') {
                let id: u32 = part
                    .trim()
                    .parse()
                    .with_context(|| format!("witness vertex {part:?}"))?;
                set.insert(VertexId(id));
            }
            set
        }
        None => tower.levels[1].vertices.clone(),
    };
    let witness = finite_determination_witness(kind, &tower, &lift, &a)?;
    emit(json!({"cmd": "lift-witness", "for": ids(&a), "witness": ids(&witness)}));
    eprintln!(
        "lifted through {} levels; witness of {} base vertices determines the chosen set",
        lift.levels.len() - 1,
        witness.len()
    );
    Ok(0)
}

fn cmd_sir_check(kind: SirKind, trials: u64, rounds: u32, broken: bool, seed: u64) -> Result<u8> {
    let ambient = default_ambient(kind, rounds, seed)?;
    let report = check_axioms(kind, &ambient, trials, seed, broken)?;
    emit(json!({
        "cmd": "sir-check",
        "kind": kind.to_string(),
        "broken": broken,
        "ambient_vertices": ambient.len(),
        "trials": trials,
        "seed": seed,
    }));
    for stat in &report.axioms {
        emit(serde_json::to_value(stat)?);
    }
    let total = report.total_violations();
    eprintln!(
        "{kind}: {total} violations over {trials} trials in a {}-vertex approximant",
        ambient.len()
    );
    Ok(if total > 0 { 1 } else { 0 })
}

fn cmd_complete(n: u32, depth: u32, dot_path: Option<&Path>, file: &Path) -> Result<u8> {
    let s = load(file)?;
    if s.ngon_n() != Some(n) {
        bail!(
            "file is {} but -n {n} was requested",
            s.ngon_n()
                .map(|m| format!("an ngon with n = {m}"))
                .unwrap_or_else(|| format!("class {}", s.class))
        );
    }
    let report = ngon::free_completion(&s, depth)?;
    let girth = ngon::girth(&report.result)?;
    let diameter = ngon::diameter(&report.result)?;
    emit(json!({
        "cmd": "ngon-complete",
        "n": n,
        "rounds": report.rounds,
        "fixpoint": report.fixpoint,
        "vertices": report.result.len(),
        "added": report.added.iter().map(|r| r.len()).collect::<Vec<_>>(),
        "girth": girth,
        "diameter": diameter,
    }));
    emit(json!({"cmd": "ngon-complete-result", "result": structure_value(&report.result)}));
    if let Some(path) = dot_path {
        let text = dot::to_dot_rounds(&report.result, &report.added)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "completed {} rounds to {} vertices (fixpoint: {}, girth {:?}, diameter {:?})",
        report.rounds,
        report.result.len(),
        report.fixpoint,
        girth,
        diameter
    );
    Ok(0)
}

fn cmd_strong(n: u32, bound: usize, x_file: &Path, y_file: &Path) -> Result<u8> {
    let x = load(x_file)?;
    let y = load(y_file)?;
    if let Some(stray) = x.vertices.difference(&y.vertices).next() {
        bail!("X vertex {stray} does not occur in Y");
    }
    let cert = ngon::is_n_strong(n, &y, &x.vertices, bound)?;
    emit(json!({
        "cmd": "ngon-strong",
        "n": n,
        "verdict": cert.verdict,
        "value": cert.value,
        "witness": ids(&cert.witness),
    }));
    eprintln!(
        "X is{} {n}-strong in Y (minimal relative characteristic {})",
        if cert.verdict { "" } else { " NOT" },
        cert.value
    );
    Ok(if cert.verdict { 0 } else { 1 })
}

fn cmd_fk(n: u32, k: u32, file: &Path, x: u32, y: u32) -> Result<u8> {
    let s = load(file)?;
    if s.ngon_n() != Some(n) {
        bail!("file does not hold an ngon with n = {n}");
    }
    let value = ngon::eval_fk(&s, k, VertexId(x), VertexId(y))?;
    emit(json!({
        "cmd": "ngon-fk",
        "n": n,
        "k": k,
        "x": x,
        "y": y,
        "vertex": value.vertex.0,
        "depth_caveat": value.depth_caveat,
    }));
    eprintln!(
        "f_{k}({x}, {y}) = {}{}",
        value.vertex,
        if value.depth_caveat {
            " (distance not resolved at this depth; fell back to x)"
        } else {
            ""
        }
    );
    Ok(0)
}

fn cmd_saturate(
    kind: SirKind,
    m: usize,
    rounds: u32,
    menu: Option<&str>,
    cap: usize,
    file: Option<&Path>,
    seed: u64,
) -> Result<u8> {
    let start = match file {
        Some(path) => load(path)?,
        None => seed_structure(kind),
    };
    let menu = parse_menu(menu, kind)?.or_else(|| Some(katetov::default_menu()));
    let params = SaturateParams {
        m,
        rounds,
        cap,
        seed,
        menu,
        ..SaturateParams::default()
    };
    let chain = katetov::saturate(kind, &start, &params)?;
    for (i, level) in chain.levels.iter().enumerate() {
        emit(json!({"cmd": "saturate", "round": i, "vertices": level.len()}));
    }
    let last = chain.levels.last().expect("levels nonempty");
    emit(json!({"cmd": "saturate-result", "complete": chain.complete, "result": structure_value(last)}));
    eprintln!(
        "saturated {} rounds: {} vertices{}",
        chain.levels.len() - 1,
        last.len(),
        if chain.complete { "" } else { " (cap hit)" }
    );
    Ok(0)
}

fn cmd_bnf_iso(depth: u32, budget: u64, a: &Path, b: &Path) -> Result<u8> {
    let a = load(a)?;
    let b = load(b)?;
    match back_and_forth_iso(&a, &b, depth, budget)? {
        BnfOutcome::EquivalentToDepth(d) => {
            emit(json!({"cmd": "bnf-iso", "equivalent": true, "depth": d}));
            eprintln!("equivalent to depth {d}");
            Ok(0)
        }
        BnfOutcome::Distinguished {
            left,
            position,
            vertex,
        } => {
            emit(json!({
                "cmd": "bnf-iso",
                "equivalent": false,
                "depth": depth,
                "spoiler_side": if left { "first" } else { "second" },
                "position": position.iter().map(|&(x, y)| vec![x.0, y.0]).collect::<Vec<_>>(),
                "vertex": vertex.0,
            }));
            eprintln!("distinguished: no response to {vertex} on the {} structure", if left { "first" } else { "second" });
            Ok(1)
        }
    }
}

/// One full turn of the flag scenario: an involution of a 2n-cycle lifts
/// through a single extension step and still squares to the identity.
fn cmd_cor57(n: u32) -> Result<u8> {
    if n < 3 {
        bail!("n must be at least 3");
    }
    let cycle = seed_structure(SirKind::NGonStrong(n));
    // Reflection across the axis through v0 and vn.
    let f: BTreeMap<VertexId, VertexId> = (0..2 * n)
        .map(|i| (VertexId(i), VertexId((2 * n - i) % (2 * n))))
        .collect();
    let tower = build_tower(
        SirKind::NGonStrong(n),
        &cycle,
        &TowerParams {
            m: 1,
            rounds: 1,
            ..TowerParams::default()
        },
    )?;
    let lift = lift_automorphism(SirKind::NGonStrong(n), &tower, &f)?;
    let top = lift.top();
    let lifted = tower.levels.last().expect("levels nonempty");

    let restricts = f
        .iter()
        .all(|(&v, &fv)| top.apply(v) == Some(fv));
    let involution = lifted.vertices.iter().all(|&v| {
        top.apply(v).and_then(|w| top.apply(w)) == Some(v)
    });
    let moved = lifted.vertices.iter().filter(|&&v| top.apply(v) != Some(v)).count();
    emit(json!({
        "cmd": "demo-cor57",
        "n": n,
        "fragment_vertices": cycle.len(),
        "lifted_vertices": lifted.len(),
        "restricts_correctly": restricts,
        "order_two": involution,
        "moved_vertices": moved,
    }));
    eprintln!(
        "reflection of the {}-cycle lifted to {} vertices (restricts: {restricts}, order 2: {involution})",
        2 * n,
        lifted.len()
    );
    Ok(if restricts && involution { 0 } else { 1 })
}
