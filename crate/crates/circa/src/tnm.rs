//! Structure of conformal models when the overlap graph is disconnected: the
//! bipartite tree of overlap components (modules) and their maximal
//! non-separated groups (nodes), per-module slot orders, the fixed
//! interleaving patterns of nodes inside and between slots, extended
//! admissible models, and the bottom-up composition of full conformal models
//! from per-module words and per-node circular arrangements.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::conformal_core::{
    canonical_prime_model, conformal_models_by_insertion,
    is_admissible_for_slot_order, is_rotation, metaedge, oriented_blocks,
    overlap_graph_of, reflect_slots, slot_order, ConformalError,
    ConsistentDecomposition, Metaedge, SlotOrder,
};
use crate::graph_core::{Vertex, VertexSet};
use crate::intersection::SideSets;
use crate::modular::{md_tree, ModularError, ModuleKind};
use crate::word_model::{CircularWord, ConformalModel, Letter, WordError};

/// How many models of the skeleton-plus-neighbor-representatives structure
/// the search may enumerate before concluding; the restrictions to the
/// skeleton must take at most two values regardless.
const SKELETON_SEARCH_LIMIT: usize = 64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TnmError {
    #[error("the overlap graph is connected; the module-node tree exists only for disconnected overlap graphs")]
    ConnectedOverlap,
    #[error("the given tree vertices are not adjacent")]
    NotAdjacent,
    #[error("vertex {0} lies inside one of the modules it should separate")]
    InsideModule(Vertex),
    #[error("node placement is inconsistent: {0}")]
    NodePlacement(String),
    #[error("the module-node structure is not a tree")]
    NotATree,
    #[error("skeleton restrictions take {0} values, expected at most two mutual reflections")]
    SkeletonModels(usize),
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// The bipartite tree over the components of a disconnected overlap graph.
/// Module vertices are the components; node vertices are the maximal sets of
/// pairwise non-separated components.  A module belongs to a node exactly
/// when the node contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TNMTree {
    /// Overlap components, ascending by least member.
    pub modules: Vec<VertexSet>,
    /// Each node as a sorted list of module indices; nodes sorted
    /// lexicographically.
    pub nodes: Vec<Vec<usize>>,
}

/// A vertex of the bipartite module-node tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeVertex {
    Module(usize),
    Node(usize),
}

impl TNMTree {
    /// The module containing the graph vertex v.
    pub fn module_of(&self, v: Vertex) -> Option<usize> {
        self.modules.iter().position(|m| m.contains(&v))
    }

    /// Indices of the nodes containing module `mi`, ascending.
    pub fn nodes_of(&self, mi: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, ms)| ms.contains(&mi))
            .map(|(j, _)| j)
            .collect()
    }

    /// A stable name for a node: the least members of its modules.
    pub fn node_id(&self, nj: usize) -> Vec<Vertex> {
        self.nodes[nj]
            .iter()
            .map(|&mi| *self.modules[mi].iter().next().unwrap())
            .collect()
    }

    pub fn neighbors(&self, tv: TreeVertex) -> Vec<TreeVertex> {
        match tv {
            TreeVertex::Module(mi) => {
                self.nodes_of(mi).into_iter().map(TreeVertex::Node).collect()
            }
            TreeVertex::Node(nj) => {
                self.nodes[nj].iter().map(|&mi| TreeVertex::Module(mi)).collect()
            }
        }
    }

    /// DOT rendering: modules as boxes listing their vertices, nodes as
    /// ellipses named by their member modules.
    pub fn render_dot(&self) -> String {
        let mut out = String::from("graph tnm {\n");
        for (mi, m) in self.modules.iter().enumerate() {
            let vs: Vec<String> = m.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "  m{mi} [shape=box, label=\"M{mi} {{{}}}\"];\n",
                vs.join(",")
            ));
        }
        for (nj, ms) in self.nodes.iter().enumerate() {
            let ids: Vec<String> =
                self.node_id(nj).iter().map(|v| v.to_string()).collect();
            out.push_str(&format!(
                "  n{nj} [shape=ellipse, label=\"N({})\"];\n",
                ids.join(",")
            ));
            for &mi in ms {
                out.push_str(&format!("  m{mi} -- n{nj};\n"));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// True iff the two modules lie in opposite side sets of the chord of v.
pub fn separates(
    sides: &SideSets,
    v: Vertex,
    m1: &VertexSet,
    m2: &VertexSet,
) -> Result<bool, TnmError> {
    if m1.contains(&v) || m2.contains(&v) {
        return Err(TnmError::InsideModule(v));
    }
    let all_left = |m: &VertexSet| m.iter().all(|&u| sides.in_left(v, u));
    let all_right = |m: &VertexSet| m.iter().all(|&u| sides.in_right(v, u));
    Ok((all_left(m1) && all_right(m2)) || (all_right(m1) && all_left(m2)))
}

/// A vertex outside both modules whose chord separates them, if any.
pub fn separating_vertex(
    sides: &SideSets,
    m1: &VertexSet,
    m2: &VertexSet,
) -> Option<Vertex> {
    (0..sides.n()).find(|&v| {
        !m1.contains(&v)
            && !m2.contains(&v)
            && separates(sides, v, m1, m2).unwrap()
    })
}

fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn extend(
        adj: &[Vec<bool>],
        r: &mut Vec<usize>,
        p: Vec<usize>,
        x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() && x.is_empty() {
            out.push(r.clone());
            return;
        }
        let mut p = p;
        let mut x = x;
        while let Some(&v) = p.first() {
            let np: Vec<usize> =
                p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx: Vec<usize> =
                x.iter().copied().filter(|&u| adj[v][u]).collect();
            r.push(v);
            extend(adj, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    extend(adj, &mut Vec::new(), (0..adj.len()).collect(), Vec::new(), &mut out);
    out
}

/// Builds the module-node tree of a disconnected overlap structure: modules
/// are the overlap components, nodes the maximal sets of pairwise
/// non-separated modules, and the bipartite membership graph must be a tree
/// whose every node holds at least two modules.
pub fn build_tnm(sides: &SideSets) -> Result<TNMTree, TnmError> {
    let ov = overlap_graph_of(sides);
    let mut modules = ov.components();
    if modules.len() < 2 {
        return Err(TnmError::ConnectedOverlap);
    }
    modules.sort_by_key(|c| *c.iter().next().unwrap());
    let k = modules.len();
    let mut nonsep = vec![vec![false; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let ns = separating_vertex(sides, &modules[i], &modules[j]).is_none();
            nonsep[i][j] = ns;
            nonsep[j][i] = ns;
        }
    }
    let mut nodes = maximal_cliques(&nonsep);
    for c in &mut nodes {
        c.sort_unstable();
    }
    nodes.sort();
    if nodes.iter().any(|c| c.len() < 2) {
        return Err(TnmError::NotATree);
    }
    let t = TNMTree { modules, nodes };
    // tree check: connected with exactly |V| - 1 edges
    let verts = t.modules.len() + t.nodes.len();
    let edges: usize = t.nodes.iter().map(|c| c.len()).sum();
    if edges != verts - 1 {
        return Err(TnmError::NotATree);
    }
    let mut seen: BTreeSet<TreeVertex> = BTreeSet::new();
    let mut queue = VecDeque::from([TreeVertex::Module(0)]);
    seen.insert(TreeVertex::Module(0));
    while let Some(tv) = queue.pop_front() {
        for nb in t.neighbors(tv) {
            if seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    if seen.len() != verts {
        return Err(TnmError::NotATree);
    }
    Ok(t)
}

/// The set of graph vertices contained in the modules of the component of
/// `keep` in the tree with `delete` removed.  `keep` must be adjacent to
/// `delete`.
pub fn subtree_vertices(
    t: &TNMTree,
    delete: TreeVertex,
    keep: TreeVertex,
) -> Result<VertexSet, TnmError> {
    if !t.neighbors(delete).contains(&keep) {
        return Err(TnmError::NotAdjacent);
    }
    let mut seen: BTreeSet<TreeVertex> = BTreeSet::from([delete, keep]);
    let mut queue = VecDeque::from([keep]);
    let mut out = VertexSet::new();
    if let TreeVertex::Module(mi) = keep {
        out.extend(t.modules[mi].iter().copied());
    }
    while let Some(tv) = queue.pop_front() {
        for nb in t.neighbors(tv) {
            if seen.insert(nb) {
                if let TreeVertex::Module(mi) = nb {
                    out.extend(t.modules[mi].iter().copied());
                }
                queue.push_back(nb);
            }
        }
    }
    Ok(out)
}

/// A letter of a contracted word around one module: either a chord endpoint
/// of the module itself or a whole neighboring subtree contracted to its
/// node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtLetter {
    Chord(Letter),
    Node(usize),
}

/// The reflection of a contracted word: reverse the sequence and swap each
/// chord endpoint's tag; node letters are points and keep their identity.
pub fn reflect_extended(ext: &[ExtLetter]) -> Vec<ExtLetter> {
    ext.iter()
        .rev()
        .map(|t| match t {
            ExtLetter::Chord(l) => ExtLetter::Chord(l.flipped()),
            ExtLetter::Node(j) => ExtLetter::Node(*j),
        })
        .collect()
}

/// The fixed interleaving of one slot with nodes: an ordered partition of the
/// slot's letters with one node between consecutive parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotPattern {
    /// Parts in slot order; letters within a part sorted (the part is a set).
    pub parts: Vec<Vec<Letter>>,
    /// nodes[i] sits between parts[i] and parts[i+1].
    pub nodes: Vec<usize>,
}

/// Patterns of all slots of one module for one slot-order type, plus the
/// nodes in the gaps between consecutive slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    /// One pattern per position of the slot order (pi0 or pi1).
    pub slots: Vec<SlotPattern>,
    /// gaps[i] = the node between slot position i and i+1 (circular).
    pub gaps: Vec<Option<usize>>,
}

/// Everything the rest of the pipeline needs to know about one module of the
/// tree: its kind, slot order, which side each neighboring subtree keeps
/// relative to every chord of the module, and the two pattern sets.
#[derive(Debug, Clone)]
pub struct ModuleContext {
    /// Index of the module in the tree.
    pub module: usize,
    pub kind: ModuleKind,
    pub so: SlotOrder,
    /// Neighbor nodes in the tree, ascending.
    pub nodes: Vec<usize>,
    /// node_left[j] = the chords v of the module with the j-th neighbor
    /// subtree entirely on their left side.
    pub node_left: Vec<VertexSet>,
    /// Patterns for slot-order types 0 and 1.
    pub patterns: [PatternSet; 2],
}

/// The full analysis of a disconnected overlap structure.
#[derive(Debug, Clone)]
pub struct TnmAnalysis {
    pub tree: TNMTree,
    /// One context per module, same indexing as the tree.
    pub contexts: Vec<ModuleContext>,
}

/// True iff the gap `g` (between word positions g-1 and g mod len, with
/// g in 1..=len) lies inside the clockwise interval from position p0 to p1.
fn gap_inside(g: usize, p0: usize, p1: usize, len: usize) -> bool {
    ((g - 1 + len - p0) % len) < ((p1 + len - p0) % len)
}

/// The degenerate slot order of a single-chord module.
fn leaf_slot_order(sides: &SideSets, v: Vertex) -> Result<SlotOrder, TnmError> {
    let m: VertexSet = [v].into_iter().collect();
    let me = oriented_blocks(sides, &m, v)?;
    let phi0 = CircularWord::new(vec![Letter::tail(v), Letter::head(v)])?;
    let phi1 = phi0.reflect().canonical();
    let pi = vec![(0usize, 0u8), (0, 1)];
    Ok(SlotOrder {
        decomposition: ConsistentDecomposition {
            children: vec![m.clone()],
            classes: vec![m],
            class_child: vec![0],
        },
        skeleton: vec![v],
        metaedges: vec![me],
        pi0: pi.clone(),
        pi1: pi,
        phi0,
        phi1,
    })
}

/// The consistent decomposition and slot order of a serial overlap
/// component: children whose metaedge has a neighboring subtree strictly
/// inside it stay their own class; the remaining vertices are grouped by the
/// unordered pair of outside vertex sets on their two sides; the two skeleton
/// words are recovered by searching models of the skeleton together with one
/// representative chord per neighboring subtree.
pub fn serial_child_decomposition(
    sides: &SideSets,
    m: &VertexSet,
    node_reps: &[Vertex],
    node_left: &[VertexSet],
) -> Result<SlotOrder, TnmError> {
    let ov = overlap_graph_of(sides);
    let md = md_tree(&ov, m)?;
    let root = md.node(md.root);
    if root.kind != ModuleKind::Serial {
        return Err(TnmError::Malformed(
            "serial decomposition of a non-serial module".into(),
        ));
    }
    let mut child_nodes = root.children.clone();
    child_nodes.sort_by_key(|&c| *md.node(c).vertices.iter().next().unwrap());
    let children: Vec<VertexSet> =
        child_nodes.iter().map(|&c| md.node(c).vertices.clone()).collect();

    let mut classes: Vec<VertexSet> = Vec::new();
    let mut grouped: BTreeMap<Vec<bool>, VertexSet> = BTreeMap::new();
    let mut free_children: Vec<usize> = Vec::new();
    for (ci, child) in children.iter().enumerate() {
        let r = *child.iter().next().unwrap();
        let me = metaedge(sides, child, r)?;
        // a subtree is inside the child's metaedge iff the child's chords,
        // all read in block direction, disagree about its side
        let inside = (0..node_reps.len()).any(|j| {
            let mut any_l = false;
            let mut any_r = false;
            for &v in child {
                let oriented_left =
                    node_left[j].contains(&v) == me.forward(v);
                if oriented_left {
                    any_l = true;
                } else {
                    any_r = true;
                }
            }
            any_l && any_r
        });
        if inside {
            classes.push(child.clone());
        } else {
            free_children.push(ci);
            for &v in child {
                let mut sig: Vec<bool> = (0..node_reps.len())
                    .map(|j| node_left[j].contains(&v))
                    .collect();
                // the pair of side sets is unordered: normalize by the first
                if !sig.is_empty() && !sig[0] {
                    for b in &mut sig {
                        *b = !*b;
                    }
                }
                grouped.entry(sig).or_default().insert(v);
            }
        }
    }
    for cls in grouped.into_values() {
        classes.push(cls);
    }
    for &ci in &free_children {
        let hits = classes
            .iter()
            .filter(|cls| children[ci].iter().any(|v| cls.contains(v)))
            .count();
        if hits != 1 {
            return Err(TnmError::NodePlacement(
                "a child of a serial module was separated across classes".into(),
            ));
        }
    }
    classes.sort_by_key(|c| *c.iter().next().unwrap());
    let class_child: Vec<usize> = classes
        .iter()
        .map(|cls| {
            let least = *cls.iter().next().unwrap();
            children.iter().position(|c| c.contains(&least)).unwrap()
        })
        .collect();
    let skeleton: Vec<Vertex> =
        classes.iter().map(|c| *c.iter().next().unwrap()).collect();

    let metaedges: Vec<Metaedge> = classes
        .iter()
        .zip(&skeleton)
        .map(|(cls, &s)| {
            if classes.len() == 1 {
                oriented_blocks(sides, cls, s)
            } else {
                metaedge(sides, cls, s)
            }
        })
        .collect::<Result<_, _>>()?;

    let (phi0, phi1) = if skeleton.len() == 1 {
        let s = skeleton[0];
        let w = CircularWord::new(vec![Letter::tail(s), Letter::head(s)])?;
        let r = w.reflect().canonical();
        (w, r)
    } else {
        let mut domain: VertexSet = skeleton.iter().copied().collect();
        domain.extend(node_reps.iter().copied());
        let models =
            conformal_models_by_insertion(sides, &domain, SKELETON_SEARCH_LIMIT)?;
        if models.is_empty() {
            return Err(TnmError::Conformal(ConformalError::NoConformal));
        }
        let keep: BTreeSet<Letter> = skeleton
            .iter()
            .flat_map(|&s| [Letter::tail(s), Letter::head(s)])
            .collect();
        let mut restrictions: BTreeSet<CircularWord> = BTreeSet::new();
        for w in &models {
            restrictions.insert(w.restrict_circular(&keep)?.canonical());
        }
        let r0 = restrictions.iter().next().unwrap().clone();
        let refl = r0.reflect().canonical();
        if restrictions.iter().any(|r| *r != r0 && *r != refl) {
            return Err(TnmError::SkeletonModels(restrictions.len()));
        }
        let first = if r0.letters() <= refl.letters() { r0 } else { refl };
        let second = first.reflect().canonical();
        (first, second)
    };
    let class_of_skeleton: BTreeMap<Vertex, usize> =
        skeleton.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let slots_of = |w: &CircularWord| -> Vec<(usize, u8)> {
        w.letters()
            .iter()
            .map(|l| (class_of_skeleton[&l.v], l.tag))
            .collect()
    };
    let pi0 = slots_of(&phi0);
    let pi1 = slots_of(&phi1);
    debug_assert!(is_rotation(&pi1, &reflect_slots(&pi0)));
    Ok(SlotOrder {
        decomposition: ConsistentDecomposition { children, classes, class_child },
        skeleton,
        metaedges,
        pi0,
        pi1,
        phi0,
        phi1,
    })
}

/// Inserts every neighbor node into the unique gap of the chord word where
/// the node's subtree lies on its recorded side of every chord.
pub fn place_nodes(
    w: &CircularWord,
    nodes: &[usize],
    node_left: &[VertexSet],
    module: &VertexSet,
) -> Result<Vec<ExtLetter>, TnmError> {
    let len = w.len();
    let mut pos: BTreeMap<Letter, usize> = BTreeMap::new();
    for (i, &l) in w.letters().iter().enumerate() {
        pos.insert(l, i);
    }
    let mut at_gap: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, &nj) in nodes.iter().enumerate() {
        let mut found = None;
        for g in 1..=len {
            let ok = module.iter().all(|&v| {
                let p0 = pos[&Letter::tail(v)];
                let p1 = pos[&Letter::head(v)];
                gap_inside(g, p0, p1, len) == node_left[j].contains(&v)
            });
            if ok {
                if found.is_some() {
                    return Err(TnmError::NodePlacement(format!(
                        "node {nj} fits more than one gap"
                    )));
                }
                found = Some(g);
            }
        }
        let g = found.ok_or_else(|| {
            TnmError::NodePlacement(format!("node {nj} fits no gap"))
        })?;
        if at_gap.insert(g, nj).is_some() {
            return Err(TnmError::NodePlacement(format!(
                "two nodes share the gap at position {g}"
            )));
        }
    }
    let mut out = Vec::with_capacity(len + nodes.len());
    for (i, &l) in w.letters().iter().enumerate() {
        out.push(ExtLetter::Chord(l));
        if let Some(&nj) = at_gap.get(&(i + 1)) {
            out.push(ExtLetter::Node(nj));
        }
    }
    Ok(out)
}

/// Reads the per-slot patterns and gap nodes off a contracted word whose
/// chord part follows the slot order of type `m`.
pub fn read_patterns(
    ext: &[ExtLetter],
    so: &SlotOrder,
    m: u8,
) -> Result<PatternSet, TnmError> {
    let pi = if m == 0 { &so.pi0 } else { &so.pi1 };
    let bad =
        |msg: &str| TnmError::NodePlacement(format!("pattern read: {msg}"));
    let slot_of = |l: Letter| -> Result<(usize, u8), TnmError> {
        so.slot_of(l).ok_or_else(|| bad("letter outside the module"))
    };
    // find the chord letter that starts the run of pi[0]
    let total = ext.len();
    let mut start = None;
    for i in 0..total {
        let ExtLetter::Chord(l) = ext[i] else { continue };
        if slot_of(l)? != pi[0] {
            continue;
        }
        // previous chord letter, circularly
        let mut k = (i + total - 1) % total;
        let prev = loop {
            if let ExtLetter::Chord(p) = ext[k] {
                break p;
            }
            k = (k + total - 1) % total;
        };
        if slot_of(prev)? != pi[0] {
            start = Some(i);
            break;
        }
    }
    let start = start.ok_or_else(|| bad("slot of the first position not found"))?;

    let mut slots: Vec<SlotPattern> = Vec::new();
    let mut gaps: Vec<Option<usize>> = vec![None; pi.len()];
    let mut parts: Vec<Vec<Letter>> = vec![Vec::new()];
    let mut part_nodes: Vec<usize> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut pos_in_pi = 0usize;
    for k in 0..total {
        match ext[(start + k) % total] {
            ExtLetter::Node(j) => pending.push(j),
            ExtLetter::Chord(l) => {
                let s = slot_of(l)?;
                if s == pi[pos_in_pi] {
                    // same slot continues
                    match pending.len() {
                        0 => {}
                        1 => {
                            if parts.last().unwrap().is_empty() {
                                return Err(bad("empty slot part"));
                            }
                            part_nodes.push(pending[0]);
                            parts.push(Vec::new());
                            pending.clear();
                        }
                        _ => return Err(bad("two nodes inside one slot gap")),
                    }
                    parts.last_mut().unwrap().push(l);
                    continue;
                }
                // run boundary: close the current slot
                if parts.last().unwrap().is_empty() {
                    return Err(bad("empty slot part at a boundary"));
                }
                for p in &mut parts {
                    p.sort_unstable();
                }
                slots.push(SlotPattern {
                    parts: std::mem::take(&mut parts),
                    nodes: std::mem::take(&mut part_nodes),
                });
                match pending.len() {
                    0 => {}
                    1 => gaps[pos_in_pi] = Some(pending[0]),
                    _ => return Err(bad("two nodes between consecutive slots")),
                }
                pending.clear();
                pos_in_pi += 1;
                if pos_in_pi >= pi.len() || s != pi[pos_in_pi] {
                    return Err(bad("slot runs do not follow the slot order"));
                }
                parts = vec![vec![l]];
            }
        }
    }
    if parts.last().unwrap().is_empty() {
        return Err(bad("empty final slot part"));
    }
    for p in &mut parts {
        p.sort_unstable();
    }
    slots.push(SlotPattern { parts, nodes: part_nodes });
    match pending.len() {
        0 => {}
        1 => gaps[pos_in_pi] = Some(pending[0]),
        _ => return Err(bad("two nodes between the last and first slots")),
    }
    if slots.len() != pi.len() {
        return Err(bad("wrong number of slot runs"));
    }
    Ok(PatternSet { slots, gaps })
}

/// The canonical contracted word of type 0: the canonical chord model of the
/// slot order with every neighbor node placed into its forced gap.
pub fn canonical_extended(
    sides: &SideSets,
    so: &SlotOrder,
    nodes: &[usize],
    node_left: &[VertexSet],
    module: &VertexSet,
) -> Result<Vec<ExtLetter>, TnmError> {
    let w = canonical_prime_model(so, sides)?;
    place_nodes(&w, nodes, node_left, module)
}

/// The two pattern sets of a module: read off the canonical contracted word
/// of type 0 and off its reflection (a contracted word of type 1).  The
/// placement of each node in a fixed chord word is forced, so the patterns
/// are the same for every model of the same type.
pub fn patterns(
    sides: &SideSets,
    so: &SlotOrder,
    nodes: &[usize],
    node_left: &[VertexSet],
    module: &VertexSet,
) -> Result<[PatternSet; 2], TnmError> {
    let ext0 = canonical_extended(sides, so, nodes, node_left, module)?;
    let p0 = read_patterns(&ext0, so, 0)?;
    let ext1 = reflect_extended(&ext0);
    let p1 = read_patterns(&ext1, so, 1)?;
    Ok([p0, p1])
}

/// Builds the tree and the per-module contexts of a disconnected overlap
/// structure.
pub fn analyze(sides: &SideSets) -> Result<TnmAnalysis, TnmError> {
    let tree = build_tnm(sides)?;
    let ov = overlap_graph_of(sides);
    let mut contexts = Vec::new();
    for mi in 0..tree.modules.len() {
        let m = tree.modules[mi].clone();
        let nodes = tree.nodes_of(mi);
        let mut node_left = Vec::new();
        let mut node_reps = Vec::new();
        for &nj in &nodes {
            let w_set = subtree_vertices(
                &tree,
                TreeVertex::Module(mi),
                TreeVertex::Node(nj),
            )?;
            node_reps.push(*w_set.iter().next().unwrap());
            let mut left = VertexSet::new();
            for &v in &m {
                let on_left = w_set.iter().all(|&u| sides.in_left(v, u));
                let on_right = w_set.iter().all(|&u| sides.in_right(v, u));
                if on_left == on_right {
                    return Err(TnmError::NodePlacement(format!(
                        "a neighbor subtree straddles chord {v}"
                    )));
                }
                if on_left {
                    left.insert(v);
                }
            }
            node_left.push(left);
        }
        let md = md_tree(&ov, &m)?;
        let kind = md.node(md.root).kind;
        let so = match kind {
            ModuleKind::Leaf => {
                leaf_slot_order(sides, *m.iter().next().unwrap())?
            }
            ModuleKind::Prime => slot_order(sides, &m)?,
            ModuleKind::Serial => {
                serial_child_decomposition(sides, &m, &node_reps, &node_left)?
            }
            ModuleKind::Parallel => {
                return Err(TnmError::Malformed(
                    "an overlap component cannot be a parallel module".into(),
                ))
            }
        };
        let pats = patterns(sides, &so, &nodes, &node_left, &m)?;
        contexts.push(ModuleContext {
            module: mi,
            kind,
            so,
            nodes,
            node_left,
            patterns: pats,
        });
    }
    Ok(TnmAnalysis { tree, contexts })
}

/// Checks a contracted word around one module: the chord part must be
/// admissible for the module's slot order in some type m, every neighbor
/// node must appear exactly once, and each node must sit in a gap placing
/// its whole subtree on the recorded side of every chord of the module.
/// Returns the type on success.
pub fn is_extended_admissible(
    ext: &[ExtLetter],
    ctx: &ModuleContext,
    sides: &SideSets,
) -> Option<u8> {
    let mut chords: Vec<Letter> = Vec::new();
    let mut node_gap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut deferred: Vec<usize> = Vec::new();
    for t in ext {
        match *t {
            ExtLetter::Chord(l) => chords.push(l),
            ExtLetter::Node(j) => {
                if chords.is_empty() {
                    // before any chord: circularly after the last chord
                    deferred.push(j);
                } else if node_gap.insert(j, chords.len()).is_some() {
                    return None;
                }
            }
        }
    }
    let len = chords.len();
    if len == 0 {
        return None;
    }
    for j in deferred {
        if node_gap.insert(j, len).is_some() {
            return None;
        }
    }
    let seen: BTreeSet<usize> = node_gap.keys().copied().collect();
    let expected: BTreeSet<usize> = ctx.nodes.iter().copied().collect();
    if seen != expected {
        return None;
    }
    let w = CircularWord::new(chords).ok()?;
    let mut pos: BTreeMap<Letter, usize> = BTreeMap::new();
    for (i, &l) in w.letters().iter().enumerate() {
        pos.insert(l, i);
    }
    let module = &ctx.so.decomposition.classes.iter().flatten().copied().collect::<VertexSet>();
    for (idx, &nj) in ctx.nodes.iter().enumerate() {
        let g = node_gap[&nj];
        let ok = module.iter().all(|&v| {
            let p0 = pos[&Letter::tail(v)];
            let p1 = pos[&Letter::head(v)];
            gap_inside(g, p0, p1, len) == ctx.node_left[idx].contains(&v)
        });
        if !ok {
            return None;
        }
    }
    (0..2u8).find(|&m| is_admissible_for_slot_order(&w, &ctx.so, m, sides))
}

/// The contracted word of a full conformal model around one module: keep the
/// module's letters and collapse every neighboring subtree to its node.
/// Fails when a subtree is not contiguous in the word.
pub fn restrict_extended(
    w: &CircularWord,
    t: &TNMTree,
    mi: usize,
) -> Result<Vec<ExtLetter>, TnmError> {
    // map every other module to the neighbor node of mi on the path toward it
    let mut toward: BTreeMap<usize, usize> = BTreeMap::new();
    for nj in t.nodes_of(mi) {
        let mut seen: BTreeSet<TreeVertex> =
            BTreeSet::from([TreeVertex::Module(mi), TreeVertex::Node(nj)]);
        let mut queue = VecDeque::from([TreeVertex::Node(nj)]);
        while let Some(tv) = queue.pop_front() {
            for nb in t.neighbors(tv) {
                if seen.insert(nb) {
                    if let TreeVertex::Module(other) = nb {
                        toward.insert(other, nj);
                    }
                    queue.push_back(nb);
                }
            }
        }
    }
    let mut out: Vec<ExtLetter> = Vec::new();
    for &l in w.letters() {
        let home = t
            .module_of(l.v)
            .ok_or_else(|| TnmError::Malformed(format!("vertex {} outside the tree", l.v)))?;
        if home == mi {
            out.push(ExtLetter::Chord(l));
        } else {
            let tok = ExtLetter::Node(toward[&home]);
            if out.last() != Some(&tok) {
                out.push(tok);
            }
        }
    }
    // circular wrap: merge a trailing node with an equal leading one
    if out.len() > 1 && out.first() == out.last() {
        if let Some(ExtLetter::Node(_)) = out.last() {
            out.pop();
        }
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in &out {
        if let ExtLetter::Node(j) = tok {
            *counts.entry(*j).or_default() += 1;
        }
    }
    if counts.values().any(|&c| c != 1) {
        return Err(TnmError::NodePlacement(
            "a neighboring subtree is not contiguous".into(),
        ));
    }
    Ok(out)
}

/// Composes a full conformal model from one contracted word per module and
/// one circular arrangement of adjacent modules per node, rooted at
/// `root`.  Inputs are validated locally first.
pub fn compose_full(
    a: &TnmAnalysis,
    sides: &SideSets,
    module_words: &[Vec<ExtLetter>],
    node_orders: &[Vec<usize>],
    root: usize,
) -> Result<ConformalModel, TnmError> {
    let t = &a.tree;
    if module_words.len() != t.modules.len() || node_orders.len() != t.nodes.len()
    {
        return Err(TnmError::Malformed("wrong number of component inputs".into()));
    }
    for (mi, ext) in module_words.iter().enumerate() {
        if is_extended_admissible(ext, &a.contexts[mi], sides).is_none() {
            return Err(TnmError::Malformed(format!(
                "the word for module {mi} is not extended admissible"
            )));
        }
    }
    for (nj, order) in node_orders.iter().enumerate() {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != t.nodes[nj] {
            return Err(TnmError::Malformed(format!(
                "the arrangement at node {nj} is not a permutation of its modules"
            )));
        }
    }

    fn build_module(
        t: &TNMTree,
        module_words: &[Vec<ExtLetter>],
        node_orders: &[Vec<usize>],
        mi: usize,
        parent: Option<usize>,
        out: &mut Vec<Letter>,
    ) -> Result<(), TnmError> {
        let ext = &module_words[mi];
        let start = match parent {
            None => 0,
            Some(p) => {
                let at = ext
                    .iter()
                    .position(|&tok| tok == ExtLetter::Node(p))
                    .ok_or_else(|| {
                        TnmError::Malformed(format!(
                            "module {mi} does not mention its parent node"
                        ))
                    })?;
                (at + 1) % ext.len()
            }
        };
        let span = if parent.is_some() { ext.len() - 1 } else { ext.len() };
        for k in 0..span {
            match ext[(start + k) % ext.len()] {
                ExtLetter::Chord(l) => out.push(l),
                ExtLetter::Node(nj) => {
                    build_node(t, module_words, node_orders, nj, mi, out)?
                }
            }
        }
        Ok(())
    }

    fn build_node(
        t: &TNMTree,
        module_words: &[Vec<ExtLetter>],
        node_orders: &[Vec<usize>],
        nj: usize,
        parent_module: usize,
        out: &mut Vec<Letter>,
    ) -> Result<(), TnmError> {
        let order = &node_orders[nj];
        let at = order
            .iter()
            .position(|&m| m == parent_module)
            .ok_or(TnmError::NotAdjacent)?;
        for k in 1..order.len() {
            let child = order[(at + k) % order.len()];
            build_module(t, module_words, node_orders, child, Some(nj), out)?;
        }
        Ok(())
    }

    let mut letters = Vec::new();
    build_module(t, module_words, node_orders, root, None, &mut letters)?;
    let word = CircularWord::new(letters)?;
    Ok(ConformalModel::new(word, sides)?)
}

/// One canonical conformal model of the whole overlap structure: the
/// connected cases are handled by the corresponding canonical constructions,
/// the disconnected case by composing the canonical contracted words over
/// the module-node tree.
pub fn canonical_conformal_model(
    sides: &SideSets,
) -> Result<ConformalModel, TnmError> {
    let n = sides.n();
    if n == 0 {
        return Err(TnmError::Malformed("empty structure".into()));
    }
    let domain: VertexSet = (0..n).collect();
    let ov = overlap_graph_of(sides);
    if ov.components().len() >= 2 {
        let a = analyze(sides)?;
        let words: Vec<Vec<ExtLetter>> = a
            .contexts
            .iter()
            .enumerate()
            .map(|(mi, c)| {
                canonical_extended(
                    sides,
                    &c.so,
                    &c.nodes,
                    &c.node_left,
                    &a.tree.modules[mi],
                )
            })
            .collect::<Result<_, _>>()?;
        let orders: Vec<Vec<usize>> = a.tree.nodes.clone();
        return compose_full(&a, sides, &words, &orders, 0);
    }
    let md = md_tree(&ov, &domain)?;
    let word = match md.node(md.root).kind {
        ModuleKind::Leaf => {
            CircularWord::new(vec![Letter::tail(0), Letter::head(0)])?
        }
        ModuleKind::Serial => {
            let metaedges: Vec<Metaedge> = md
                .node(md.root)
                .children
                .iter()
                .map(|&c| {
                    let m = &md.node(c).vertices;
                    metaedge(sides, m, *m.iter().next().unwrap())
                })
                .collect::<Result<_, _>>()?;
            crate::conformal_core::canonical_serial_model(&metaedges, sides)?
        }
        ModuleKind::Prime => {
            let so = slot_order(sides, &domain)?;
            canonical_prime_model(&so, sides)?
        }
        ModuleKind::Parallel => unreachable!("disconnected case handled above"),
    };
    Ok(ConformalModel::new(word, sides)?)
}
