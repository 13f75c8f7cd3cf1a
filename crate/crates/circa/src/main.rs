//! Command-line interface: intersection matrices, model normalization,
//! conformal chord models, modular decomposition, slot orders, module-node
//! trees, isomorphism testing, brute-force oracles, and a reduced-scale
//! self-test.

use std::io::Read;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use circa::conformal_core::{overlap_graph_of, slot_order, SlotOrder};
use circa::graph_core::{Graph, MultiGraph, VertexSet};
use circa::intersection::build_matrix;
use circa::isomorphism::{isomorphic_graphs, verify_witness};
use circa::modular::{md_tree, ModuleKind};
use circa::oracle::{
    brute_iso, enumerate_conformal, intersection_graph, random_circular_arc,
    InstanceSeed,
};
use circa::tnm::{analyze, canonical_conformal_model};
use circa::word_model::{ArcModel, CircularWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Dot,
    JsonLines,
}

#[derive(Parser)]
#[command(
    name = "circa",
    about = "Canonical decomposition and isomorphism testing for circular-arc graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format; `dot` applies to the tree commands only.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Print the five-symbol intersection matrix of a graph.
    Matrix { file: String },
    /// Normalize an arc model against its own intersection graph.
    Normalize { file: String },
    /// Print a conformal chord model of the overlap structure of a graph.
    Chord { file: String },
    /// Print the modular decomposition tree of the overlap graph.
    Mdtree { file: String },
    /// Print the consistent decomposition and slot orders.
    Slots { file: String },
    /// Print the module-node tree of a disconnected overlap graph.
    Tnm { file: String },
    /// Decide isomorphism of two circular-arc graphs.
    ///
    /// Exit code 0 = isomorphic, 1 = not isomorphic, 2 = error.
    Iso(IsoArgs),
    /// Brute-force oracles for testing.
    Oracle {
        #[command(subcommand)]
        op: OracleOp,
    },
    /// Run the reduced-scale self-test suite.
    Selftest {
        #[arg(long, default_value_t = 7)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct IsoArgs {
    g1: String,
    g2: String,
    /// Print the vertex bijection on a yes verdict.
    #[arg(long)]
    witness: bool,
    /// Iterate every arbitrary anchor choice and assert verdict invariance.
    #[arg(long)]
    paranoid: bool,
    /// Cross-check the verdict against the exhaustive oracle (small inputs).
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Subcommand)]
enum OracleOp {
    /// Enumerate all conformal models of the overlap structure of a graph.
    Enum { file: String },
    /// Brute-force isomorphism of two graphs.  Exit 0 = yes, 1 = no.
    Iso { g1: String, g2: String },
    /// Generate a seeded random circular-arc graph.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Re-draw until the graph has no twins and no universal vertices.
        #[arg(long)]
        reduced: bool,
        /// Print the generating arc model instead of the graph.
        #[arg(long)]
        arcs: bool,
    },
}

fn read_input(path: &str) -> Result<String, String> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| format!("reading stdin: {e}"))?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("reading {path}: {e}"))
    }
}

fn load_graph(path: &str) -> Result<Graph, String> {
    Graph::parse(&read_input(path)?).map_err(|e| format!("{path}: {e}"))
}

fn kind_name(k: ModuleKind) -> &'static str {
    match k {
        ModuleKind::Leaf => "leaf",
        ModuleKind::Serial => "serial",
        ModuleKind::Parallel => "parallel",
        ModuleKind::Prime => "prime",
    }
}

fn word_str(w: &CircularWord) -> String {
    w.display(None)
}

fn slot_order_json(so: &SlotOrder) -> serde_json::Value {
    json!({
        "classes": so.decomposition.classes.iter()
            .map(|c| c.iter().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "skeleton": so.skeleton,
        "pi0": so.pi0,
        "pi1": so.pi1,
        "phi0": word_str(&so.phi0),
        "phi1": word_str(&so.phi1),
    })
}

fn print_slot_order(name: &str, so: &SlotOrder, format: Format) {
    match format {
        Format::JsonLines => {
            let mut rec = slot_order_json(so);
            rec["module"] = json!(name);
            println!("{rec}");
        }
        _ => {
            println!("module {name}:");
            for (i, c) in so.decomposition.classes.iter().enumerate() {
                let vs: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                println!("  class {i}: {{{}}}", vs.join(","));
            }
            let fmt_pi = |pi: &[(usize, u8)]| {
                pi.iter()
                    .map(|(c, s)| format!("{c}^{s}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            println!("  pi0: {}", fmt_pi(&so.pi0));
            println!("  pi1: {}", fmt_pi(&so.pi1));
            println!("  phi0: {}", word_str(&so.phi0));
            println!("  phi1: {}", word_str(&so.phi1));
        }
    }
}

fn run() -> Result<ExitCode, String> {
    let cli = Cli::parse();
    let format = cli.format;
    match cli.command {
        Command::Matrix { file } => {
            let g = load_graph(&file)?;
            let (m, _, _) = build_matrix(&g).map_err(|e| e.to_string())?;
            let n = m.n();
            if format == Format::JsonLines {
                for v in 0..n {
                    let row: Vec<String> = (0..n)
                        .map(|u| {
                            if u == v {
                                ".".into()
                            } else {
                                m.get(v, u).to_string()
                            }
                        })
                        .collect();
                    println!("{}", json!({"v": v, "row": row}));
                }
            } else {
                print!("    ");
                for u in 0..n {
                    print!("{:>4}", g.label(u));
                }
                println!();
                for v in 0..n {
                    print!("{:>4}", g.label(v));
                    for u in 0..n {
                        if u == v {
                            print!("{:>4}", ".");
                        } else {
                            print!("{:>4}", m.get(v, u).to_string());
                        }
                    }
                    println!();
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Normalize { file } => {
            let text = read_input(&file)?;
            let (model, names) =
                ArcModel::parse(&text, None).map_err(|e| e.to_string())?;
            let g = intersection_graph(&model);
            let (m, _, _) = build_matrix(&g).map_err(|e| e.to_string())?;
            let normalized = model.normalize(&m).map_err(|e| e.to_string())?;
            if format == Format::JsonLines {
                let arcs: Vec<_> =
                    (0..normalized.n()).map(|v| normalized.arc(v)).collect();
                println!(
                    "{}",
                    json!({"circle": normalized.circle(), "names": names, "arcs": arcs})
                );
            } else {
                print!("{}", normalized.to_text(Some(&names)));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Chord { file } => {
            let g = load_graph(&file)?;
            let (_, sides, _) = build_matrix(&g).map_err(|e| e.to_string())?;
            let model =
                canonical_conformal_model(&sides).map_err(|e| e.to_string())?;
            if format == Format::JsonLines {
                println!("{}", json!({"word": word_str(model.word())}));
            } else {
                println!("{}", word_str(model.word()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mdtree { file } => {
            let g = load_graph(&file)?;
            let (_, _, ov) = build_matrix(&g).map_err(|e| e.to_string())?;
            let domain: VertexSet = (0..g.n()).collect();
            let tree = md_tree(&ov.graph, &domain).map_err(|e| e.to_string())?;
            match format {
                Format::Dot => print!("{}", tree.render_dot(&g)),
                Format::Text => print!("{}", tree.render_text(&g)),
                Format::JsonLines => {
                    for (i, node) in tree.nodes.iter().enumerate() {
                        println!(
                            "{}",
                            json!({
                                "id": i,
                                "kind": kind_name(node.kind),
                                "vertices": node.vertices.iter().collect::<Vec<_>>(),
                                "children": node.children,
                                "root": i == tree.root,
                            })
                        );
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Slots { file } => {
            let g = load_graph(&file)?;
            let (_, sides, ov) = build_matrix(&g).map_err(|e| e.to_string())?;
            if ov.graph.components().len() >= 2 {
                let a = analyze(&sides).map_err(|e| e.to_string())?;
                for (mi, ctx) in a.contexts.iter().enumerate() {
                    print_slot_order(&format!("{mi}"), &ctx.so, format);
                }
            } else {
                let domain: VertexSet = (0..g.n()).collect();
                let so = slot_order(&sides, &domain).map_err(|e| e.to_string())?;
                print_slot_order("0", &so, format);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tnm { file } => {
            let g = load_graph(&file)?;
            let (_, sides, _) = build_matrix(&g).map_err(|e| e.to_string())?;
            let a = analyze(&sides).map_err(|e| e.to_string())?;
            match format {
                Format::Dot => print!("{}", a.tree.render_dot()),
                Format::Text => {
                    for (mi, m) in a.tree.modules.iter().enumerate() {
                        let vs: Vec<String> =
                            m.iter().map(|v| v.to_string()).collect();
                        println!(
                            "module {mi} ({}): {{{}}}",
                            kind_name(a.contexts[mi].kind),
                            vs.join(",")
                        );
                    }
                    for (nj, ms) in a.tree.nodes.iter().enumerate() {
                        let ids: Vec<String> =
                            ms.iter().map(|m| m.to_string()).collect();
                        println!("node {nj}: modules {{{}}}", ids.join(","));
                    }
                }
                Format::JsonLines => {
                    for (mi, m) in a.tree.modules.iter().enumerate() {
                        println!(
                            "{}",
                            json!({
                                "module": mi,
                                "kind": kind_name(a.contexts[mi].kind),
                                "vertices": m.iter().collect::<Vec<_>>(),
                            })
                        );
                    }
                    for (nj, ms) in a.tree.nodes.iter().enumerate() {
                        println!("{}", json!({"node": nj, "modules": ms}));
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Iso(args) => {
            let g = load_graph(&args.g1)?;
            let h = load_graph(&args.g2)?;
            let r = isomorphic_graphs(&g, &h, args.paranoid)
                .map_err(|e| e.to_string())?;
            if args.oracle_check {
                let reduce = |g: &Graph| -> Result<MultiGraph, String> {
                    let (s, _) = g.strip_universal_cascade();
                    let (m, _) = s.twin_quotient().map_err(|e| e.to_string())?;
                    Ok(m)
                };
                let slow = brute_iso(&reduce(&g)?, &reduce(&h)?);
                if slow.is_some() != r.isomorphic {
                    return Err("oracle disagrees with the verdict".into());
                }
            }
            if format == Format::JsonLines {
                println!(
                    "{}",
                    json!({
                        "isomorphic": r.isomorphic,
                        "witness": if args.witness { json!(r.witness) } else { json!(null) },
                    })
                );
            } else {
                println!("{}", if r.isomorphic { "isomorphic" } else { "not isomorphic" });
                if args.witness {
                    if let Some(w) = &r.witness {
                        for (u, v) in w.iter().enumerate() {
                            println!("{} -> {}", g.label(u), h.label(*v));
                        }
                    }
                }
            }
            Ok(if r.isomorphic { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Oracle { op } => run_oracle(op, format),
        Command::Selftest { max_n, seed } => selftest(max_n, seed),
    }
}

fn run_oracle(op: OracleOp, format: Format) -> Result<ExitCode, String> {
    match op {
        OracleOp::Enum { file } => {
            let g = load_graph(&file)?;
            let (_, sides, _) = build_matrix(&g).map_err(|e| e.to_string())?;
            let domain: VertexSet = (0..g.n()).collect();
            let models =
                enumerate_conformal(&sides, &domain).map_err(|e| e.to_string())?;
            for w in &models {
                if format == Format::JsonLines {
                    println!("{}", json!({"word": word_str(w)}));
                } else {
                    println!("{}", word_str(w));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        OracleOp::Iso { g1, g2 } => {
            let reduce = |path: &str| -> Result<MultiGraph, String> {
                let g = load_graph(path)?;
                let (s, _) = g.strip_universal_cascade();
                let (m, _) = s.twin_quotient().map_err(|e| e.to_string())?;
                Ok(m)
            };
            let found = brute_iso(&reduce(&g1)?, &reduce(&g2)?);
            if format == Format::JsonLines {
                println!("{}", json!({"isomorphic": found.is_some()}));
            } else {
                println!(
                    "{}",
                    if found.is_some() { "isomorphic" } else { "not isomorphic" }
                );
            }
            Ok(if found.is_some() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        OracleOp::Gen { seed, n, reduced, arcs } => {
            let params = if reduced {
                InstanceSeed::reduced(seed, n)
            } else {
                InstanceSeed::new(seed, n)
            };
            let (g, model) = random_circular_arc(params);
            if arcs {
                if format == Format::JsonLines {
                    let list: Vec<_> = (0..model.n()).map(|v| model.arc(v)).collect();
                    println!("{}", json!({"circle": model.circle(), "arcs": list}));
                } else {
                    print!("{}", model.to_text(None));
                }
            } else if format == Format::JsonLines {
                println!(
                    "{}",
                    json!({"n": g.n(), "edges": g.edges()})
                );
            } else {
                print!("{}", g.to_text());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn selftest(max_n: usize, seed0: u64) -> Result<ExitCode, String> {
    let mut failures = 0usize;
    let mut report = |name: &str, ok: bool| {
        println!("{} {}", if ok { "ok" } else { "FAIL" }, name);
        if !ok {
            failures += 1;
        }
    };

    // normalization produces a model matching its matrix geometrically
    let mut norm_ok = true;
    for seed in seed0..seed0 + 50 {
        let n = 2 + (seed as usize % max_n.max(3).min(10));
        let (g, model) = random_circular_arc(InstanceSeed::reduced(seed, n));
        let Ok((m, sides, _)) = build_matrix(&g) else {
            norm_ok = false;
            break;
        };
        let Ok(nm) = model.normalize(&m) else {
            norm_ok = false;
            break;
        };
        if !nm.is_normalized(&m) || nm.straighten(&sides).is_err() {
            norm_ok = false;
            break;
        }
    }
    report("normalize: five-clause soundness on random models", norm_ok);

    // straighten and bend are mutually inverse
    let mut bij_ok = true;
    for seed in seed0..seed0 + 50 {
        let n = 2 + (seed as usize % max_n.max(3).min(10));
        let (g, model) = random_circular_arc(InstanceSeed::reduced(seed, n));
        let Ok((m, sides, _)) = build_matrix(&g) else { continue };
        let Ok(nm) = model.normalize(&m) else {
            bij_ok = false;
            break;
        };
        let Ok(cm) = nm.straighten(&sides) else {
            bij_ok = false;
            break;
        };
        match cm.bend() {
            Ok(back) => {
                if back.sequence() != nm.sequence() {
                    bij_ok = false;
                    break;
                }
            }
            Err(_) => {
                bij_ok = false;
                break;
            }
        }
    }
    report("chord: straighten/bend round-trip", bij_ok);

    // the canonical model is one of the exhaustively enumerated models
    let mut canon_ok = true;
    for seed in seed0..seed0 + 30 {
        let n = 3 + (seed as usize % max_n.clamp(3, 7));
        let (g, _) = random_circular_arc(InstanceSeed::reduced(seed, n));
        if g.n() < 2 {
            continue;
        }
        let Ok((_, sides, _)) = build_matrix(&g) else { continue };
        let domain: VertexSet = (0..g.n()).collect();
        let Ok(oracle) = enumerate_conformal(&sides, &domain) else { continue };
        match canonical_conformal_model(&sides) {
            Ok(model) => {
                if !oracle.contains(&model.word().canonical()) {
                    canon_ok = false;
                    break;
                }
            }
            Err(_) => {
                canon_ok = false;
                break;
            }
        }
    }
    report("chord: canonical model is in the oracle set", canon_ok);

    // the decision procedure agrees with the brute-force oracle
    let mut iso_ok = true;
    for seed in seed0..seed0 + 30 {
        let n = 3 + (seed as usize % max_n.clamp(3, 7));
        let (g, _) = random_circular_arc(InstanceSeed::reduced(seed, n));
        let (h, _) = random_circular_arc(InstanceSeed::reduced(seed + 7000, n));
        if g.n() < 2 || h.n() < 2 {
            continue;
        }
        let gm = MultiGraph::plain(g);
        let hm = MultiGraph::plain(h);
        let Ok(fast) = circa::isomorphism::isomorphic(&gm, &hm) else {
            iso_ok = false;
            break;
        };
        if fast.isomorphic != brute_iso(&gm, &hm).is_some() {
            iso_ok = false;
            break;
        }
        if let Some(w) = &fast.witness {
            if !verify_witness(&gm, &hm, w) {
                iso_ok = false;
                break;
            }
        }
    }
    report("iso: agreement with the exhaustive oracle", iso_ok);

    // permuted copies are always isomorphic
    let mut perm_ok = true;
    for seed in seed0..seed0 + 20 {
        let n = 3 + (seed as usize % max_n.clamp(3, 9));
        let (g, _) = random_circular_arc(InstanceSeed::new(seed, n));
        let perm: Vec<usize> = {
            // a deterministic rotation-style permutation is enough here
            let k = g.n();
            (0..k).map(|v| (v + 1 + seed as usize) % k).collect()
        };
        let mut h = Graph::new(g.n());
        for (u, v) in g.edges() {
            h.add_edge(perm[u], perm[v]).unwrap();
        }
        match isomorphic_graphs(&g, &h, false) {
            Ok(r) => {
                if !r.isomorphic {
                    perm_ok = false;
                    break;
                }
            }
            Err(_) => {
                perm_ok = false;
                break;
            }
        }
    }
    report("iso: permuted copies accepted", perm_ok);

    // sanity of the overlap decomposition on disconnected instances
    let mut tnm_ok = true;
    let mut seen_disconnected = false;
    for seed in seed0..seed0 + 40 {
        let n = 4 + (seed as usize % max_n.clamp(4, 9));
        let (g, _) = random_circular_arc(InstanceSeed::reduced(seed, n));
        let Ok((_, sides, ov)) = build_matrix(&g) else { continue };
        if ov.graph.components().len() < 2 {
            continue;
        }
        seen_disconnected = true;
        if analyze(&sides).is_err() {
            tnm_ok = false;
            break;
        }
    }
    report("tnm: analysis succeeds on disconnected instances", tnm_ok && seen_disconnected);

    let _ = overlap_graph_of;
    if failures == 0 {
        println!("selftest passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("selftest failed: {failures} checks");
        Ok(ExitCode::from(1))
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
