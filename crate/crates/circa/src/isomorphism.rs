//! Polynomial-time isomorphism of circular-arc graphs with multiplicities:
//! local isomorphisms of oriented modules over their modular decomposition,
//! pinned comparisons of circular slot orders with node patterns, and the
//! three top-level cases (serial, prime, and disconnected overlap graph via
//! the module-node tree).

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conformal_core::{metaedge, slot_order, SlotOrder};
use crate::graph_core::{Graph, MultiGraph, Vertex, VertexSet};
use crate::intersection::{build_matrix, SideSets};
use crate::modular::{
    md_tree, prime_orientations, quotient_graph, MDTree, ModuleKind,
    TransitiveOrientation,
};
use crate::tnm::{analyze, PatternSet, TnmAnalysis, TreeVertex};
use crate::word_model::Letter;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsoError {
    #[error("input is not reduced: {0}")]
    Malformed(String),
    #[error("model construction failed; input is not a circular-arc graph: {0}")]
    NotCircularArc(String),
}

/// The verdict, with a vertex bijection (indexed by the first graph's base
/// vertices) when the graphs are isomorphic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsoResult {
    pub isomorphic: bool,
    pub witness: Option<Vec<Vertex>>,
}

impl IsoResult {
    fn no() -> Self {
        IsoResult { isomorphic: false, witness: None }
    }
    fn yes(witness: Vec<Vertex>) -> Self {
        IsoResult { isomorphic: true, witness: Some(witness) }
    }
}

/// A vertex bijection between two strong modules.
pub type LocalIsoWitness = BTreeMap<Vertex, Vertex>;

/// pos(u) = (i, j): indices of the parts holding u's endpoints in the
/// ordered partitions of the two slot copies; (0, 0) when patterns are
/// trivial.
pub type Position = (usize, usize);

// ---------------------------------------------------------------------------
// Bipartite matching

/// A maximum matching in a bipartite graph, computed by augmenting paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    /// left_to_right[i] = the right vertex matched to left vertex i.
    pub left_to_right: Vec<Option<usize>>,
    pub size: usize,
    /// True iff every vertex on both sides is matched.
    pub perfect: bool,
}

pub fn bipartite_matching(
    n_left: usize,
    n_right: usize,
    edges: &[(usize, usize)],
) -> Matching {
    let mut adj = vec![Vec::new(); n_left];
    for &(l, r) in edges {
        adj[l].push(r);
    }
    let mut right_of = vec![None; n_left];
    let mut left_of: Vec<Option<usize>> = vec![None; n_right];
    fn augment(
        l: usize,
        adj: &[Vec<usize>],
        left_of: &mut [Option<usize>],
        right_of: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            let free = match left_of[r] {
                None => true,
                Some(l2) => augment(l2, adj, left_of, right_of, seen),
            };
            if free {
                left_of[r] = Some(l);
                right_of[l] = Some(r);
                return true;
            }
        }
        false
    }
    let mut size = 0;
    for l in 0..n_left {
        let mut seen = vec![false; n_right];
        if augment(l, &adj, &mut left_of, &mut right_of, &mut seen) {
            size += 1;
        }
    }
    Matching {
        perfect: size == n_left && size == n_right,
        left_to_right: right_of,
        size,
    }
}

// ---------------------------------------------------------------------------
// Oriented views of modules

/// One oriented side of a consistent module: which endpoint of each chord is
/// on the "first" side, the fixed order of its non-crossing pairs, and the
/// position of every chord in the ordered partitions of the two slot copies.
#[derive(Debug, Clone)]
pub struct ExtendedMetaedge {
    pub module: VertexSet,
    /// forward[v] = v is oriented from the first copy to the second.
    pub forward: BTreeMap<Vertex, bool>,
    pub pos: BTreeMap<Vertex, Position>,
    /// The order of the non-crossing pairs, read on the first copy.
    pub lt: TransitiveOrientation,
}

/// Per-graph context a local isomorphism needs besides the views.
#[derive(Debug, Clone, Copy)]
pub struct ModuleEnv<'a> {
    /// The overlap graph (the crossing relation).
    pub sim: &'a Graph,
    /// Multiplicities, indexed by base vertex.
    pub mult: &'a [usize],
}

/// x strictly before y in one of the two ordered partitions.
fn before(a: &ExtendedMetaedge, x: Vertex, y: Vertex) -> bool {
    let px = a.pos[&x];
    let py = a.pos[&y];
    px.0 < py.0 || px.1 < py.1
}

/// Some member of one child set is before some member of the other.
fn child_before(a: &ExtendedMetaedge, ci: &VertexSet, cj: &VertexSet) -> bool {
    ci.iter().any(|&x| cj.iter().any(|&y| before(a, x, y)))
}

/// Whether a transitive orientation of the quotient of a prime strong module
/// respects every pattern-imposed precedence between its children.
fn orientation_admissible(
    a: &ExtendedMetaedge,
    children: &[VertexSet],
    q: &Graph,
    prec: &TransitiveOrientation,
) -> bool {
    for i in 0..children.len() {
        for j in 0..children.len() {
            if i != j
                && q.has_edge(i, j)
                && child_before(a, &children[i], &children[j])
                && prec.holds(j, i)
            {
                return false;
            }
        }
    }
    true
}

/// The chain-height of every child of a serial strong module in the weak
/// order induced by the pattern positions; asserts well-formedness.
fn weak_order_heights(a: &ExtendedMetaedge, children: &[VertexSet]) -> Vec<usize> {
    let k = children.len();
    let mut below = vec![vec![false; k]; k];
    for i in 0..k {
        for j in 0..k {
            if i != j && child_before(a, &children[i], &children[j]) {
                below[i][j] = true;
            }
        }
    }
    // well-formedness: a strict partial order whose incomparability classes
    // form antichain levels (no third element incomparable to a related pair)
    let incomp = |x: usize, y: usize, below: &Vec<Vec<bool>>| {
        x != y && !below[x][y] && !below[y][x]
    };
    for i in 0..k {
        for j in 0..k {
            assert!(
                !(below[i][j] && below[j][i]),
                "pattern precedence on serial children is not antisymmetric"
            );
            for l in 0..k {
                if below[i][j] && below[j][l] {
                    assert!(
                        below[i][l],
                        "pattern precedence on serial children is not transitive"
                    );
                }
                if below[j][l] && i != j && i != l {
                    assert!(
                        !(incomp(i, j, &below) && incomp(i, l, &below)),
                        "pattern precedence on serial children is not a weak order"
                    );
                }
            }
        }
    }
    let mut height = vec![0usize; k];
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (0..k).filter(|&j| below[j][i]).count());
    for &i in &order {
        height[i] = (0..k)
            .filter(|&j| below[j][i])
            .map(|j| height[j] + 1)
            .max()
            .unwrap_or(0);
    }
    height
}

/// Tests whether two oriented module views are locally isomorphic: the
/// bottom-up comparison of their modular decomposition trees with the four
/// structural cases, returning a vertex bijection on success.
pub fn locally_isomorphic(
    a: &ExtendedMetaedge,
    ea: &ModuleEnv,
    b: &ExtendedMetaedge,
    eb: &ModuleEnv,
) -> Option<LocalIsoWitness> {
    if a.module.len() != b.module.len() {
        return None;
    }
    let ta = md_tree(ea.sim, &a.module).ok()?;
    let tb = md_tree(eb.sim, &b.module).ok()?;
    let mut memo: BTreeMap<(usize, usize), Option<LocalIsoWitness>> =
        BTreeMap::new();
    rec(a, ea, &ta, ta.root, b, eb, &tb, tb.root, &mut memo)
}

#[allow(clippy::too_many_arguments)]
fn rec(
    a: &ExtendedMetaedge,
    ea: &ModuleEnv,
    ta: &MDTree,
    na: usize,
    b: &ExtendedMetaedge,
    eb: &ModuleEnv,
    tb: &MDTree,
    nb: usize,
    memo: &mut BTreeMap<(usize, usize), Option<LocalIsoWitness>>,
) -> Option<LocalIsoWitness> {
    if let Some(cached) = memo.get(&(na, nb)) {
        return cached.clone();
    }
    let result = rec_uncached(a, ea, ta, na, b, eb, tb, nb, memo);
    memo.insert((na, nb), result.clone());
    result
}

#[allow(clippy::too_many_arguments)]
fn rec_uncached(
    a: &ExtendedMetaedge,
    ea: &ModuleEnv,
    ta: &MDTree,
    na: usize,
    b: &ExtendedMetaedge,
    eb: &ModuleEnv,
    tb: &MDTree,
    nb: usize,
    memo: &mut BTreeMap<(usize, usize), Option<LocalIsoWitness>>,
) -> Option<LocalIsoWitness> {
    let an = ta.node(na);
    let bn = tb.node(nb);
    if an.kind != bn.kind || an.children.len() != bn.children.len() {
        return None;
    }
    if an.kind == ModuleKind::Leaf {
        let u = *an.vertices.iter().next().unwrap();
        let v = *bn.vertices.iter().next().unwrap();
        if ea.mult[u] == eb.mult[v]
            && a.forward[&u] == b.forward[&v]
            && a.pos[&u] == b.pos[&v]
        {
            return Some(BTreeMap::from([(u, v)]));
        }
        return None;
    }
    let ch_a: Vec<VertexSet> =
        an.children.iter().map(|&c| ta.node(c).vertices.clone()).collect();
    let ch_b: Vec<VertexSet> =
        bn.children.iter().map(|&c| tb.node(c).vertices.clone()).collect();
    let k = ch_a.len();
    match an.kind {
        ModuleKind::Parallel => {
            // all children pairwise non-crossing: the fixed order sorts them
            let mut ia: Vec<usize> = (0..k).collect();
            let mut ib: Vec<usize> = (0..k).collect();
            let rep = |c: &VertexSet| *c.iter().next().unwrap();
            let by_lt = |lt: &TransitiveOrientation,
                         ch: &[VertexSet],
                         x: usize,
                         y: usize| {
                if lt.holds(rep(&ch[x]), rep(&ch[y])) {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            };
            ia.sort_by(|&x, &y| by_lt(&a.lt, &ch_a, x, y));
            ib.sort_by(|&x, &y| by_lt(&b.lt, &ch_b, x, y));
            let mut out = LocalIsoWitness::new();
            for (&x, &y) in ia.iter().zip(&ib) {
                let w = rec(
                    a,
                    ea,
                    ta,
                    an.children[x],
                    b,
                    eb,
                    tb,
                    bn.children[y],
                    memo,
                )?;
                out.extend(w);
            }
            Some(out)
        }
        ModuleKind::Prime => {
            let qa = quotient_graph(ea.sim, &ch_a);
            let qb = quotient_graph(eb.sim, &ch_b);
            let qdom: VertexSet = (0..k).collect();
            let (oa0, oa1) = prime_orientations(&qa, &qdom).ok()?;
            let (ob0, ob1) = prime_orientations(&qb, &qdom).ok()?;
            let prec_a = [oa0, oa1]
                .into_iter()
                .find(|o| orientation_admissible(a, &ch_a, &qa, o))?;
            let order_a = model_order(&ch_a, &qa, a, &prec_a);
            for prec_b in [ob0, ob1] {
                if !orientation_admissible(b, &ch_b, &qb, &prec_b) {
                    continue;
                }
                let order_b = model_order(&ch_b, &qb, b, &prec_b);
                let mut out = LocalIsoWitness::new();
                let mut ok = true;
                for (&x, &y) in order_a.iter().zip(&order_b) {
                    match rec(
                        a,
                        ea,
                        ta,
                        an.children[x],
                        b,
                        eb,
                        tb,
                        bn.children[y],
                        memo,
                    ) {
                        Some(w) => out.extend(w),
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Some(out);
                }
            }
            None
        }
        ModuleKind::Serial => {
            let ha = weak_order_heights(a, &ch_a);
            let hb = weak_order_heights(b, &ch_b);
            let mut edges = Vec::new();
            let mut wit: BTreeMap<(usize, usize), LocalIsoWitness> =
                BTreeMap::new();
            for i in 0..k {
                for j in 0..k {
                    if ha[i] != hb[j] {
                        continue;
                    }
                    if let Some(w) = rec(
                        a,
                        ea,
                        ta,
                        an.children[i],
                        b,
                        eb,
                        tb,
                        bn.children[j],
                        memo,
                    ) {
                        edges.push((i, j));
                        wit.insert((i, j), w);
                    }
                }
            }
            let m = bipartite_matching(k, k, &edges);
            if !m.perfect {
                return None;
            }
            let mut out = LocalIsoWitness::new();
            for (i, r) in m.left_to_right.iter().enumerate() {
                out.extend(wit[&(i, r.unwrap())].clone());
            }
            Some(out)
        }
        ModuleKind::Leaf => unreachable!(),
    }
}

/// The left-to-right order of the children of a prime strong module in the
/// permutation model fixed by the non-crossing order and a crossing
/// orientation.
fn model_order(
    children: &[VertexSet],
    q: &Graph,
    view: &ExtendedMetaedge,
    prec: &TransitiveOrientation,
) -> Vec<usize> {
    let rep = |i: usize| *children[i].iter().next().unwrap();
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by(|&i, &j| {
        let fwd = if q.has_edge(i, j) {
            prec.holds(i, j)
        } else {
            view.lt.holds(rep(i), rep(j))
        };
        if fwd { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater }
    });
    order
}

// ---------------------------------------------------------------------------
// Pinned comparisons of slot orders

/// Everything the pinned comparison needs about one module of one graph.
#[derive(Debug, Clone, Copy)]
pub struct SlotSide<'a> {
    pub sim: &'a Graph,
    pub mult: &'a [usize],
    pub so: &'a SlotOrder,
    /// Patterns aligned with the chosen slot-order type.
    pub pattern: &'a PatternSet,
    /// The slot-order type (0 or 1) the comparison reads.
    pub m: u8,
}

/// A witness of a pinned slot-order isomorphism: the vertex bijection of the
/// module and the induced bijection of the neighboring nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinnedWitness {
    pub vertex_map: LocalIsoWitness,
    pub node_map: BTreeMap<usize, usize>,
}

fn pi_of(so: &SlotOrder, m: u8) -> &[(usize, u8)] {
    if m == 0 { &so.pi0 } else { &so.pi1 }
}

/// The trivial patterns of a slot order without neighboring nodes: one part
/// per slot holding all its letters, no gap nodes.
pub fn trivial_patterns(so: &SlotOrder, m: u8) -> PatternSet {
    let slots = pi_of(so, m)
        .iter()
        .map(|&(c, s)| {
            let me = &so.metaedges[c];
            let mut part: Vec<Letter> = so.decomposition.classes[c]
                .iter()
                .map(|&v| {
                    let first = if me.forward(v) {
                        Letter::tail(v)
                    } else {
                        Letter::head(v)
                    };
                    if s == 0 { first } else { first.flipped() }
                })
                .collect();
            part.sort_unstable();
            crate::tnm::SlotPattern { parts: vec![part], nodes: vec![] }
        })
        .collect();
    PatternSet { slots, gaps: vec![None; pi_of(so, m).len()] }
}

/// Part index of vertex v in the pattern of one slot (the slot holds exactly
/// one endpoint of v).
fn part_index(pat: &crate::tnm::SlotPattern, v: Vertex) -> usize {
    pat.parts
        .iter()
        .position(|p| {
            p.contains(&Letter::tail(v)) || p.contains(&Letter::head(v))
        })
        .expect("vertex occurs in its slot pattern")
}

/// The oriented view of the class occupying slot position `i` of the type-m
/// slot order, with positions read from the pattern set.
fn slot_view(side: &SlotSide, i: usize) -> ExtendedMetaedge {
    let pi = pi_of(side.so, side.m);
    let (c, s) = pi[i];
    let other = pi
        .iter()
        .position(|&(c2, s2)| c2 == c && s2 == 1 - s)
        .expect("both copies of a class occur in the slot order");
    let me = &side.so.metaedges[c];
    let module = side.so.decomposition.classes[c].clone();
    let forward: BTreeMap<Vertex, bool> = module
        .iter()
        .map(|&v| (v, if s == 0 { me.forward(v) } else { !me.forward(v) }))
        .collect();
    let pos: BTreeMap<Vertex, Position> = module
        .iter()
        .map(|&v| {
            (
                v,
                (
                    part_index(&side.pattern.slots[i], v),
                    part_index(&side.pattern.slots[other], v),
                ),
            )
        })
        .collect();
    let lt = if s == 0 { me.lt.clone() } else { me.lt.reverse() };
    ExtendedMetaedge { module, forward, pos, lt }
}

/// Tests whether the type-m slot orders of two modules, pinned at the given
/// slot positions, are isomorphic: slot-by-slot local isomorphisms starting
/// at the pins, with the node interleavings and gap nodes corresponding
/// positionally.
pub fn pinned_slot_iso(
    a: &SlotSide,
    pin_a: usize,
    b: &SlotSide,
    pin_b: usize,
) -> Option<PinnedWitness> {
    let pi_a = pi_of(a.so, a.m);
    let pi_b = pi_of(b.so, b.m);
    let len = pi_a.len();
    if pi_b.len() != len {
        return None;
    }
    // class pairing: both occurrences of a class must meet the same class of
    // the other side, with complementary copies
    let mut assoc: BTreeMap<usize, (usize, [Option<usize>; 2])> = BTreeMap::new();
    for off in 0..len {
        let ia = (pin_a + off) % len;
        let ib = (pin_b + off) % len;
        let (ca, sa) = pi_a[ia];
        let (cb, sb) = pi_b[ib];
        let entry = assoc.entry(ca).or_insert((cb, [None, None]));
        if entry.0 != cb || entry.1[sa as usize].is_some() {
            return None;
        }
        if let Some(prev_sb) = entry.1[1 - sa as usize] {
            if prev_sb == sb as usize {
                return None;
            }
        }
        entry.1[sa as usize] = Some(sb as usize);
        // pattern shape must align positionally
        let pa = &a.pattern.slots[ia];
        let pb = &b.pattern.slots[ib];
        if pa.parts.len() != pb.parts.len() || pa.nodes.len() != pb.nodes.len() {
            return None;
        }
        if a.pattern.gaps[ia].is_some() != b.pattern.gaps[ib].is_some() {
            return None;
        }
    }
    // vertex bijection: one local isomorphism per class, read off the first
    // occurrence (the second occurrence sees the dual views, for which the
    // same bijection works)
    let ea = ModuleEnv { sim: a.sim, mult: a.mult };
    let eb = ModuleEnv { sim: b.sim, mult: b.mult };
    let mut vertex_map = LocalIsoWitness::new();
    let mut done: Vec<bool> = vec![false; a.so.decomposition.classes.len()];
    for off in 0..len {
        let ia = (pin_a + off) % len;
        let ib = (pin_b + off) % len;
        let ca = pi_a[ia].0;
        if done[ca] {
            continue;
        }
        done[ca] = true;
        let va = slot_view(a, ia);
        let vb = slot_view(b, ib);
        let w = locally_isomorphic(&va, &ea, &vb, &eb)?;
        vertex_map.extend(w);
    }
    // node bijection, read positionally from the patterns
    let mut node_map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut taken: BTreeMap<usize, usize> = BTreeMap::new();
    let mut link = |x: usize, y: usize| -> bool {
        if let Some(&prev) = node_map.get(&x) {
            return prev == y;
        }
        if taken.insert(y, x).is_some() {
            return false;
        }
        node_map.insert(x, y);
        true
    };
    for off in 0..len {
        let ia = (pin_a + off) % len;
        let ib = (pin_b + off) % len;
        for (&x, &y) in
            a.pattern.slots[ia].nodes.iter().zip(&b.pattern.slots[ib].nodes)
        {
            if !link(x, y) {
                return None;
            }
        }
        if let (Some(x), Some(y)) = (a.pattern.gaps[ia], b.pattern.gaps[ib]) {
            if !link(x, y) {
                return None;
            }
        }
    }
    Some(PinnedWitness { vertex_map, node_map })
}

// ---------------------------------------------------------------------------
// Top-level decision procedure

/// Tests whether two reduced circular-arc graphs with multiplicities are
/// isomorphic.  Both inputs must be twin-free and universal-free.
pub fn isomorphic(g: &MultiGraph, h: &MultiGraph) -> Result<IsoResult, IsoError> {
    isomorphic_opts(g, h, false)
}

/// Like [`isomorphic`]; with `paranoid` every arbitrary anchor choice (the
/// pinned slot in the prime case, the root module in the disconnected case)
/// is iterated and the verdict is asserted invariant.
pub fn isomorphic_opts(
    g: &MultiGraph,
    h: &MultiGraph,
    paranoid: bool,
) -> Result<IsoResult, IsoError> {
    let n = g.base.n();
    if n != h.base.n() {
        return Ok(IsoResult::no());
    }
    if g.multiplicity.len() != n || h.multiplicity.len() != n {
        return Err(IsoError::Malformed(
            "multiplicity vector length differs from the vertex count".into(),
        ));
    }
    let mut mg = g.multiplicity.clone();
    let mut mh = h.multiplicity.clone();
    mg.sort_unstable();
    mh.sort_unstable();
    if mg != mh || g.base.edge_count() != h.base.edge_count() {
        return Ok(IsoResult::no());
    }
    if n == 0 {
        return Ok(IsoResult::yes(vec![]));
    }
    if n == 1 {
        return Ok(IsoResult::yes(vec![0]));
    }
    let (_, sides_g, ov_g) =
        build_matrix(&g.base).map_err(|e| IsoError::Malformed(e.to_string()))?;
    let (_, sides_h, ov_h) =
        build_matrix(&h.base).map_err(|e| IsoError::Malformed(e.to_string()))?;
    let domain: VertexSet = (0..n).collect();
    let md_g = md_tree(&ov_g.graph, &domain)
        .map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    let md_h = md_tree(&ov_h.graph, &domain)
        .map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    let kind_g = md_g.node(md_g.root).kind;
    let kind_h = md_h.node(md_h.root).kind;
    if kind_g != kind_h {
        return Ok(IsoResult::no());
    }
    let result = match kind_g {
        ModuleKind::Serial => serial_case(g, &sides_g, &ov_g.graph, &md_g, h, &sides_h, &ov_h.graph, &md_h)?,
        ModuleKind::Prime => {
            prime_case(g, &sides_g, &ov_g.graph, h, &sides_h, &ov_h.graph, paranoid)?
        }
        ModuleKind::Parallel => {
            parallel_case(g, &sides_g, &ov_g.graph, h, &sides_h, &ov_h.graph, paranoid)?
        }
        ModuleKind::Leaf => unreachable!("single vertex handled above"),
    };
    if let Some(w) = &result.witness {
        assert!(
            verify_witness(g, h, w),
            "internal error: produced witness fails the side-set conditions"
        );
    }
    Ok(result)
}

/// Checks a claimed isomorphism directly against the definition: bijection,
/// multiplicity preservation, and agreement of the left and right side sets
/// under the map.
pub fn verify_witness(g: &MultiGraph, h: &MultiGraph, w: &[Vertex]) -> bool {
    let n = g.base.n();
    if h.base.n() != n || w.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &v in w {
        if v >= n || seen[v] {
            return false;
        }
        seen[v] = true;
    }
    if (0..n).any(|v| g.multiplicity[v] != h.multiplicity[w[v]]) {
        return false;
    }
    let sg = match build_matrix(&g.base) {
        Ok((_, s, _)) => s,
        Err(_) => return false,
    };
    let sh = match build_matrix(&h.base) {
        Ok((_, s, _)) => s,
        Err(_) => return false,
    };
    for v in 0..n {
        for u in 0..n {
            if u == v {
                continue;
            }
            if sg.in_left(v, u) != sh.in_left(w[v], w[u])
                || sg.in_right(v, u) != sh.in_right(w[v], w[u])
            {
                return false;
            }
        }
    }
    true
}

fn map_to_vec(n: usize, map: &LocalIsoWitness) -> Vec<Vertex> {
    let mut out = vec![usize::MAX; n];
    for (&u, &v) in map {
        out[u] = v;
    }
    debug_assert!(out.iter().all(|&v| v != usize::MAX));
    out
}

#[allow(clippy::too_many_arguments)]
fn serial_case(
    g: &MultiGraph,
    sides_g: &SideSets,
    sim_g: &Graph,
    md_g: &MDTree,
    h: &MultiGraph,
    sides_h: &SideSets,
    sim_h: &Graph,
    md_h: &MDTree,
) -> Result<IsoResult, IsoError> {
    let ch_g: Vec<VertexSet> = md_g
        .node(md_g.root)
        .children
        .iter()
        .map(|&c| md_g.node(c).vertices.clone())
        .collect();
    let ch_h: Vec<VertexSet> = md_h
        .node(md_h.root)
        .children
        .iter()
        .map(|&c| md_h.node(c).vertices.clone())
        .collect();
    if ch_g.len() != ch_h.len() {
        return Ok(IsoResult::no());
    }
    let k = ch_g.len();
    let view_pair = |sides: &SideSets,
                     m: &VertexSet|
     -> Result<(ExtendedMetaedge, ExtendedMetaedge), IsoError> {
        let r = *m.iter().next().unwrap();
        let me = metaedge(sides, m, r)
            .map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
        let forward: BTreeMap<Vertex, bool> =
            m.iter().map(|&v| (v, me.forward(v))).collect();
        let pos: BTreeMap<Vertex, Position> =
            m.iter().map(|&v| (v, (0, 0))).collect();
        let v0 = ExtendedMetaedge {
            module: m.clone(),
            forward: forward.clone(),
            pos: pos.clone(),
            lt: me.lt.clone(),
        };
        let v1 = ExtendedMetaedge {
            module: m.clone(),
            forward: forward.iter().map(|(&v, &f)| (v, !f)).collect(),
            pos,
            lt: me.lt.reverse(),
        };
        Ok((v0, v1))
    };
    let eg = ModuleEnv { sim: sim_g, mult: &g.multiplicity };
    let eh = ModuleEnv { sim: sim_h, mult: &h.multiplicity };
    let views_g: Vec<_> = ch_g
        .iter()
        .map(|m| view_pair(sides_g, m))
        .collect::<Result<_, _>>()?;
    let views_h: Vec<_> = ch_h
        .iter()
        .map(|m| view_pair(sides_h, m))
        .collect::<Result<_, _>>()?;
    let mut edges = Vec::new();
    let mut wit: BTreeMap<(usize, usize), LocalIsoWitness> = BTreeMap::new();
    for i in 0..k {
        for j in 0..k {
            let (a0, _) = &views_g[i];
            let (b0, b1) = &views_h[j];
            let w = locally_isomorphic(a0, &eg, b0, &eh)
                .or_else(|| locally_isomorphic(a0, &eg, b1, &eh));
            if let Some(w) = w {
                edges.push((i, j));
                wit.insert((i, j), w);
            }
        }
    }
    let m = bipartite_matching(k, k, &edges);
    if !m.perfect {
        return Ok(IsoResult::no());
    }
    let mut out = LocalIsoWitness::new();
    for (i, r) in m.left_to_right.iter().enumerate() {
        out.extend(wit[&(i, r.unwrap())].clone());
    }
    Ok(IsoResult::yes(map_to_vec(g.base.n(), &out)))
}

fn prime_case(
    g: &MultiGraph,
    sides_g: &SideSets,
    sim_g: &Graph,
    h: &MultiGraph,
    sides_h: &SideSets,
    sim_h: &Graph,
    paranoid: bool,
) -> Result<IsoResult, IsoError> {
    let domain_g: VertexSet = (0..g.base.n()).collect();
    let domain_h: VertexSet = (0..h.base.n()).collect();
    let so_g = slot_order(sides_g, &domain_g)
        .map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    let so_h = slot_order(sides_h, &domain_h)
        .map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    let pats_g = [trivial_patterns(&so_g, 0), trivial_patterns(&so_g, 1)];
    let pats_h = [trivial_patterns(&so_h, 0), trivial_patterns(&so_h, 1)];
    let len = so_h.pi0.len();
    let attempt = |pin_a: usize| -> Option<LocalIsoWitness> {
        for mg in 0..2u8 {
            let a = SlotSide {
                sim: sim_g,
                mult: &g.multiplicity,
                so: &so_g,
                pattern: &pats_g[mg as usize],
                m: mg,
            };
            for mh in 0..2u8 {
                let b = SlotSide {
                    sim: sim_h,
                    mult: &h.multiplicity,
                    so: &so_h,
                    pattern: &pats_h[mh as usize],
                    m: mh,
                };
                for pin_b in 0..len {
                    if let Some(w) = pinned_slot_iso(&a, pin_a, &b, pin_b) {
                        return Some(w.vertex_map);
                    }
                }
            }
        }
        None
    };
    let first = attempt(0);
    if paranoid {
        for pin_a in 1..so_g.pi0.len() {
            assert_eq!(
                attempt(pin_a).is_some(),
                first.is_some(),
                "prime verdict changed under the pinned-slot choice"
            );
        }
    }
    Ok(match first {
        Some(map) => IsoResult::yes(map_to_vec(g.base.n(), &map)),
        None => IsoResult::no(),
    })
}

// --- disconnected overlap graphs: comparison over the module-node trees ----

struct TnmSide<'a> {
    sim: &'a Graph,
    mult: &'a [usize],
    analysis: &'a TnmAnalysis,
}

enum NodeLoc {
    Inside(usize),
    Gap(usize),
}

/// Where a neighbor node sits in a type-m pattern set: inside the slot at a
/// position, or in the gap following a position.
fn node_loc(p: &PatternSet, node: usize) -> Option<NodeLoc> {
    for (i, s) in p.slots.iter().enumerate() {
        if s.nodes.contains(&node) {
            return Some(NodeLoc::Inside(i));
        }
    }
    for (i, gap) in p.gaps.iter().enumerate() {
        if *gap == Some(node) {
            return Some(NodeLoc::Gap(i));
        }
    }
    None
}

struct TnmCmp<'a> {
    a: &'a TnmSide<'a>,
    b: &'a TnmSide<'a>,
    memo: BTreeMap<(TreeVertex, TreeVertex), Option<LocalIsoWitness>>,
}

impl<'a> TnmCmp<'a> {
    fn iso_module(
        &mut self,
        mi: usize,
        pa: Option<usize>,
        mj: usize,
        pb: Option<usize>,
    ) -> Option<LocalIsoWitness> {
        let key = (TreeVertex::Module(mi), TreeVertex::Module(mj));
        if let Some(cached) = self.memo.get(&key) {
            return cached.clone();
        }
        let result = self.iso_module_uncached(mi, pa, mj, pb);
        self.memo.insert(key, result.clone());
        result
    }

    fn iso_module_uncached(
        &mut self,
        mi: usize,
        pa: Option<usize>,
        mj: usize,
        pb: Option<usize>,
    ) -> Option<LocalIsoWitness> {
        let ctx_a = &self.a.analysis.contexts[mi];
        let ctx_b = &self.b.analysis.contexts[mj];
        if ctx_a.nodes.len() != ctx_b.nodes.len() {
            return None;
        }
        let len = ctx_a.so.pi0.len();
        if ctx_b.so.pi0.len() != len {
            return None;
        }
        // the comparison fixes type 0 on the first side and iterates both
        // types of the second; the pins are forced by the parent nodes when
        // they exist, otherwise all pins of the second side are tried
        let candidates: Vec<(u8, usize, usize)> = match (pa, pb) {
            (Some(p), Some(q)) => {
                let loc_a = node_loc(&ctx_a.patterns[0], p)?;
                let mut cs = Vec::new();
                for mb in 0..2u8 {
                    if let Some(loc_b) = node_loc(&ctx_b.patterns[mb as usize], q)
                    {
                        match (&loc_a, &loc_b) {
                            (NodeLoc::Inside(i), NodeLoc::Inside(j))
                            | (NodeLoc::Gap(i), NodeLoc::Gap(j)) => {
                                cs.push((mb, *i, *j));
                            }
                            _ => {}
                        }
                    }
                }
                cs
            }
            (None, None) => (0..2u8)
                .flat_map(|mb| (0..len).map(move |j| (mb, 0, j)))
                .collect(),
            _ => return None,
        };
        for (mb, pin_a, pin_b) in candidates {
            let sa = SlotSide {
                sim: self.a.sim,
                mult: self.a.mult,
                so: &ctx_a.so,
                pattern: &ctx_a.patterns[0],
                m: 0,
            };
            let sb = SlotSide {
                sim: self.b.sim,
                mult: self.b.mult,
                so: &ctx_b.so,
                pattern: &ctx_b.patterns[mb as usize],
                m: mb,
            };
            let Some(w) = pinned_slot_iso(&sa, pin_a, &sb, pin_b) else {
                continue;
            };
            if let (Some(p), Some(q)) = (pa, pb) {
                if w.node_map.get(&p) != Some(&q) {
                    continue;
                }
            }
            let mut out = w.vertex_map.clone();
            let mut ok = true;
            for &nj in &ctx_a.nodes {
                if Some(nj) == pa {
                    continue;
                }
                let nk = w.node_map[&nj];
                if Some(nk) == pb {
                    ok = false;
                    break;
                }
                match self.iso_node(nj, mi, nk, mj) {
                    Some(sub) => out.extend(sub),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Some(out);
            }
        }
        None
    }

    fn iso_node(
        &mut self,
        nj: usize,
        pa_module: usize,
        nk: usize,
        pb_module: usize,
    ) -> Option<LocalIsoWitness> {
        let key = (TreeVertex::Node(nj), TreeVertex::Node(nk));
        if let Some(cached) = self.memo.get(&key) {
            return cached.clone();
        }
        let ch_a: Vec<usize> = self.a.analysis.tree.nodes[nj]
            .iter()
            .copied()
            .filter(|&m| m != pa_module)
            .collect();
        let ch_b: Vec<usize> = self.b.analysis.tree.nodes[nk]
            .iter()
            .copied()
            .filter(|&m| m != pb_module)
            .collect();
        let result = if ch_a.len() != ch_b.len() {
            None
        } else {
            let k = ch_a.len();
            let mut edges = Vec::new();
            let mut wit: BTreeMap<(usize, usize), LocalIsoWitness> =
                BTreeMap::new();
            for (x, &ma) in ch_a.iter().enumerate() {
                for (y, &mb) in ch_b.iter().enumerate() {
                    if let Some(w) = self.iso_module(ma, Some(nj), mb, Some(nk))
                    {
                        edges.push((x, y));
                        wit.insert((x, y), w);
                    }
                }
            }
            let m = bipartite_matching(k, k, &edges);
            if m.perfect {
                let mut out = LocalIsoWitness::new();
                for (x, r) in m.left_to_right.iter().enumerate() {
                    out.extend(wit[&(x, r.unwrap())].clone());
                }
                Some(out)
            } else {
                None
            }
        };
        self.memo.insert(key, result.clone());
        result
    }
}

fn parallel_case(
    g: &MultiGraph,
    sides_g: &SideSets,
    sim_g: &Graph,
    h: &MultiGraph,
    sides_h: &SideSets,
    sim_h: &Graph,
    paranoid: bool,
) -> Result<IsoResult, IsoError> {
    let an = analyze(sides_g).map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    let bn = analyze(sides_h).map_err(|e| IsoError::NotCircularArc(e.to_string()))?;
    if an.tree.modules.len() != bn.tree.modules.len()
        || an.tree.nodes.len() != bn.tree.nodes.len()
    {
        return Ok(IsoResult::no());
    }
    let sa = TnmSide { sim: sim_g, mult: &g.multiplicity, analysis: &an };
    let sb = TnmSide { sim: sim_h, mult: &h.multiplicity, analysis: &bn };
    let leaves = |t: &crate::tnm::TNMTree| -> Vec<usize> {
        (0..t.modules.len()).filter(|&m| t.nodes_of(m).len() == 1).collect()
    };
    let leaves_a = leaves(&an.tree);
    let leaves_b = leaves(&bn.tree);
    let run = |root: usize| -> Option<LocalIsoWitness> {
        for &root_b in &leaves_b {
            let mut cmp = TnmCmp { a: &sa, b: &sb, memo: BTreeMap::new() };
            if let Some(w) = cmp.iso_module(root, None, root_b, None) {
                return Some(w);
            }
        }
        None
    };
    let first = run(leaves_a[0]);
    if paranoid {
        for &r in &leaves_a[1..] {
            assert_eq!(
                run(r).is_some(),
                first.is_some(),
                "tree verdict changed under the root choice"
            );
        }
    }
    Ok(match first {
        Some(map) => IsoResult::yes(map_to_vec(g.base.n(), &map)),
        None => IsoResult::no(),
    })
}

// ---------------------------------------------------------------------------
// Whole-graph entry point

/// Isomorphism of arbitrary circular-arc graphs: strips universal vertices,
/// contracts twin classes to multiplicities, decides on the reduced pair,
/// and lifts the witness back to the original vertex sets.
pub fn isomorphic_graphs(
    g: &Graph,
    h: &Graph,
    paranoid: bool,
) -> Result<IsoResult, IsoError> {
    if g.n() != h.n() {
        return Ok(IsoResult::no());
    }
    let uni_g = g.universal_vertices();
    let uni_h = h.universal_vertices();
    if uni_g.len() != uni_h.len() {
        return Ok(IsoResult::no());
    }
    let keep_g: VertexSet =
        (0..g.n()).filter(|v| !uni_g.contains(v)).collect();
    let keep_h: VertexSet =
        (0..h.n()).filter(|v| !uni_h.contains(v)).collect();
    let (gs, old_g) = g.induced(&keep_g);
    let (hs, old_h) = h.induced(&keep_h);
    let (gm, part_g) = gs
        .twin_quotient()
        .map_err(|e| IsoError::Malformed(e.to_string()))?;
    let (hm, part_h) = hs
        .twin_quotient()
        .map_err(|e| IsoError::Malformed(e.to_string()))?;
    let r = isomorphic_opts(&gm, &hm, paranoid)?;
    let Some(base_w) = r.witness else {
        return Ok(IsoResult::no());
    };
    // reps in ascending order index the base graphs
    let reps_g: Vec<Vertex> = {
        let mut v: Vec<Vertex> = part_g.classes.iter().map(|c| c[0]).collect();
        v.sort_unstable();
        v
    };
    let reps_h: Vec<Vertex> = {
        let mut v: Vec<Vertex> = part_h.classes.iter().map(|c| c[0]).collect();
        v.sort_unstable();
        v
    };
    let class_of = |part: &crate::graph_core::TwinPartition,
                    rep: Vertex|
     -> Vec<Vertex> {
        part.classes.iter().find(|c| c[0] == rep).unwrap().clone()
    };
    let mut out = vec![usize::MAX; g.n()];
    for (i, &j) in base_w.iter().enumerate() {
        let cls_g = class_of(&part_g, reps_g[i]);
        let cls_h = class_of(&part_h, reps_h[j]);
        debug_assert_eq!(cls_g.len(), cls_h.len());
        for (&x, &y) in cls_g.iter().zip(&cls_h) {
            out[old_g[x]] = old_h[y];
        }
    }
    for (&x, &y) in uni_g.iter().zip(&uni_h) {
        out[x] = y;
    }
    debug_assert!(out.iter().all(|&v| v != usize::MAX));
    Ok(IsoResult::yes(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_iso, random_circular_arc, InstanceSeed};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reduced_instance(seed: u64, n: usize) -> MultiGraph {
        let (g, _) = random_circular_arc(InstanceSeed::reduced(seed, n));
        MultiGraph::plain(g)
    }

    fn permuted(g: &MultiGraph, seed: u64) -> (MultiGraph, Vec<Vertex>) {
        let n = g.base.n();
        let mut perm: Vec<Vertex> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut out = Graph::new(n);
        for (u, v) in g.base.edges() {
            out.add_edge(perm[u], perm[v]).unwrap();
        }
        let mut mult = vec![0usize; n];
        for v in 0..n {
            mult[perm[v]] = g.multiplicity[v];
        }
        (MultiGraph { base: out, multiplicity: mult }, perm)
    }

    #[test]
    fn matching_complete_and_starved_cases() {
        let k = 5;
        let mut edges = Vec::new();
        for i in 0..k {
            for j in 0..k {
                edges.push((i, j));
            }
        }
        assert!(bipartite_matching(k, k, &edges).perfect);
        // an isolated left vertex kills perfection
        let edges: Vec<(usize, usize)> =
            edges.into_iter().filter(|&(l, _)| l != 2).collect();
        let m = bipartite_matching(k, k, &edges);
        assert!(!m.perfect);
        assert_eq!(m.size, 4);
    }

    #[test]
    fn matching_size_agrees_with_brute_force() {
        fn brute_max(
            nl: usize,
            adj: &[Vec<usize>],
            used: &mut Vec<bool>,
            l: usize,
        ) -> usize {
            if l == nl {
                return 0;
            }
            let mut best = brute_max(nl, adj, used, l + 1);
            for &r in &adj[l] {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + brute_max(nl, adj, used, l + 1));
                    used[r] = false;
                }
            }
            best
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let nl = 6;
            let nr = 6;
            let mut edges = Vec::new();
            let mut adj = vec![Vec::new(); nl];
            for l in 0..nl {
                for r in 0..nr {
                    if *[true, false, false].choose(&mut rng).unwrap() {
                        edges.push((l, r));
                        adj[l].push(r);
                    }
                }
            }
            let fast = bipartite_matching(nl, nr, &edges).size;
            let slow = brute_max(nl, &adj, &mut vec![false; nr], 0);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn permuted_copies_are_isomorphic_with_verified_witness() {
        let mut tested = 0usize;
        for seed in 0..30u64 {
            let g = reduced_instance(seed, 7);
            if g.base.n() < 2 {
                continue;
            }
            let (h, _) = permuted(&g, seed ^ 0xabcd);
            let r = isomorphic(&g, &h).unwrap();
            assert!(r.isomorphic, "seed {seed}");
            assert!(verify_witness(&g, &h, &r.witness.unwrap()));
            tested += 1;
        }
        assert!(tested >= 20);
    }

    #[test]
    fn verdicts_agree_with_the_exhaustive_oracle() {
        let mut agreements = 0usize;
        for seed in 0..40u64 {
            let g = reduced_instance(seed, 6);
            let h = reduced_instance(seed + 1000, 6);
            if g.base.n() < 2 || h.base.n() < 2 {
                continue;
            }
            let fast = isomorphic(&g, &h).unwrap();
            let slow = brute_iso(&g, &h);
            assert_eq!(fast.isomorphic, slow.is_some(), "seed {seed}");
            agreements += 1;
        }
        assert!(agreements >= 25);
    }

    #[test]
    fn multiplicity_change_breaks_isomorphism() {
        for seed in 0..10u64 {
            let g = reduced_instance(seed, 6);
            if g.base.n() < 2 {
                continue;
            }
            let mut h = g.clone();
            h.multiplicity[0] += 1;
            assert!(!isomorphic(&g, &h).unwrap().isomorphic);
        }
    }

    #[test]
    fn paranoid_mode_matches_the_default_verdict() {
        for seed in 0..20u64 {
            let g = reduced_instance(seed, 7);
            if g.base.n() < 2 {
                continue;
            }
            let (h, _) = permuted(&g, seed);
            let fast = isomorphic(&g, &h).unwrap().isomorphic;
            let careful = isomorphic_opts(&g, &h, true).unwrap().isomorphic;
            assert_eq!(fast, careful);
            let other = reduced_instance(seed + 500, 7);
            if other.base.n() < 2 {
                continue;
            }
            let fast = isomorphic(&g, &other).unwrap().isomorphic;
            let careful = isomorphic_opts(&g, &other, true).unwrap().isomorphic;
            assert_eq!(fast, careful);
        }
    }

    #[test]
    fn raw_graphs_with_twins_and_universal_vertices_lift_correctly() {
        let mut tested = 0usize;
        for seed in 0..20u64 {
            let (g0, _) = random_circular_arc(InstanceSeed::new(seed, 7));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<Vertex> = (0..g0.n()).collect();
            perm.shuffle(&mut rng);
            let mut h0 = Graph::new(g0.n());
            for (u, v) in g0.edges() {
                h0.add_edge(perm[u], perm[v]).unwrap();
            }
            let r = isomorphic_graphs(&g0, &h0, false).unwrap();
            assert!(r.isomorphic, "seed {seed}");
            let w = r.witness.unwrap();
            // direct edge-preservation check on the raw graphs
            for u in 0..g0.n() {
                for v in u + 1..g0.n() {
                    assert_eq!(g0.has_edge(u, v), h0.has_edge(w[u], w[v]));
                }
            }
            tested += 1;
        }
        assert!(tested >= 15);
    }
}
