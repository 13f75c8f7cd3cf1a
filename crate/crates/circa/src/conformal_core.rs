//! Invariants of proper modules in the overlap graph and the structure of
//! conformal models built from them: metaedges, admissible models, the shape
//! of conformal models of serial modules, the two conformal models of prime
//! overlap graphs, probes, consistent decompositions, skeletons and slots.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::graph_core::{Graph, Vertex, VertexSet};
use crate::intersection::SideSets;
use crate::modular::{
    canonical_transitive_orientation, md_tree, perm_model_from_orients,
    orients_from_perm_model, ModularError, ModuleKind, PermutationModel,
    TransitiveOrientation,
};
use crate::word_model::{
    is_conformal, CircularWord, ConformalModel, Letter, WordError,
};

/// Nodes expanded by the exhaustive chord-placement search used to find the
/// conformal models of prime cores and skeletons.  Everything else in the
/// pipeline is invariant-driven; this counter makes the only search component
/// observable.
pub static PRIME_SEARCH_NODES: AtomicU64 = AtomicU64::new(0);

pub fn prime_search_nodes() -> u64 {
    PRIME_SEARCH_NODES.load(Ordering::Relaxed)
}

/// Largest domain the chord-placement search accepts.  Prime cores and
/// skeletons beyond this size are rejected instead of searched.
pub const PRIME_CORE_BOUND: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConformalError {
    #[error("module has no outside overlapping vertex, so it is not proper")]
    NotProper,
    #[error("no vertex outside the module avoids all of it; cannot orient a split parallel part")]
    NoOrientationSeed,
    #[error("side data is inconsistent: the two chords of a parallel pair disagree on their relative order")]
    InconsistentSides,
    #[error("derived parallel orientation is not transitive")]
    NotTransitive,
    #[error("no conformal model exists for the given side data")]
    NoConformal,
    #[error("expected exactly two conformal models, found {0}")]
    ModelCountViolation(usize),
    #[error("domain of size {0} exceeds the search bound {1}")]
    BoundExceeded(usize, usize),
    #[error("domain does not induce a prime overlap graph")]
    NotPrime,
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error(transparent)]
    Modular(#[from] ModularError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// The model-independent data of a proper module M: which copy of each
/// chord's endpoints lies in which of the two blocks M forms in every
/// conformal model, plus the fixed relative order of its parallel pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metaedge {
    pub module: VertexSet,
    pub representant: Vertex,
    /// The block containing the representant's tail letter.
    pub m0: BTreeSet<Letter>,
    /// The opposite block.
    pub m1: BTreeSet<Letter>,
    /// Orientation of the parallel pairs of the module: u before v in the
    /// block order of every conformal model.
    pub lt: TransitiveOrientation,
}

impl Metaedge {
    /// The letter of v that lies in the block `m0`.
    pub fn letter_in_m0(&self, v: Vertex) -> Letter {
        if self.m0.contains(&Letter::tail(v)) { Letter::tail(v) } else { Letter::head(v) }
    }

    /// True iff v's tail letter lies in `m0` (same orientation as the
    /// representant).
    pub fn forward(&self, v: Vertex) -> bool {
        self.m0.contains(&Letter::tail(v))
    }
}

/// The overlap relation as a graph, read off side data: an edge wherever two
/// chords must cross.
pub fn overlap_graph_of(sides: &SideSets) -> Graph {
    let n = sides.n();
    let mut g = Graph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if sides.overlaps(u, v) {
                g.add_edge(u, v).unwrap();
            }
        }
    }
    g
}

/// Side data read off a chord diagram: for every non-crossing ordered pair
/// (v, u), u is recorded on the side of v it geometrically occupies.
pub fn sides_of_chord_model(w: &CircularWord) -> SideSets {
    let n = w.vertices().iter().max().map_or(0, |&v| v + 1);
    let verts = w.vertices();
    let mut sides = SideSets { left: vec![VertexSet::new(); n], right: vec![VertexSet::new(); n] };
    for &v in &verts {
        for &u in &verts {
            if u == v || w.chords_cross(u, v) {
                continue;
            }
            if w.chord_on_left(v, u) {
                sides.left[v].insert(u);
            } else {
                sides.right[v].insert(u);
            }
        }
    }
    sides
}

/// Computes the metaedge of the proper module `module` with representant `r`.
///
/// Orientations spread by breadth-first search over the parallel pairs of the
/// module: knowing which block holds u's tail, the sides the two chords
/// prescribe for each other force both the relative block order of u, v and
/// which block holds v's tail.  Parts of the module not reachable this way
/// (the module's parallel relation may be disconnected) are seeded by a
/// vertex z outside the module avoiding all of it: v is oriented like r
/// exactly when z lies on the same side of both.  The relative order is then
/// recomputed pairwise from both endpoints' perspectives and cross-checked.
pub fn metaedge(
    sides: &SideSets,
    module: &VertexSet,
    r: Vertex,
) -> Result<Metaedge, ConformalError> {
    let all: Vec<Vertex> = (0..sides.n()).collect();
    let proper = all.iter().any(|&x| {
        !module.contains(&x) && module.iter().all(|&v| sides.overlaps(x, v))
    });
    if !proper {
        return Err(ConformalError::NotProper);
    }
    oriented_blocks(sides, module, r)
}

/// The orientation core of [`metaedge`] without the properness check: also
/// valid for whole serial overlap components and single-chord components,
/// whose block split is pinned by outside chords avoiding the module rather
/// than by an overlapping witness.
pub fn oriented_blocks(
    sides: &SideSets,
    module: &VertexSet,
    r: Vertex,
) -> Result<Metaedge, ConformalError> {
    if !module.contains(&r) {
        return Err(ConformalError::Malformed(format!(
            "representant {r} not in module"
        )));
    }
    let all: Vec<Vertex> = (0..sides.n()).collect();

    // s(v) = 0 iff v's tail letter lies in the block of r's tail.
    let mut s: BTreeMap<Vertex, bool> = BTreeMap::new();
    s.insert(r, true);
    let mut queue = VecDeque::from([r]);
    while let Some(u) = queue.pop_front() {
        let su = s[&u];
        for &v in module {
            if v == u || s.contains_key(&v) || sides.overlaps(u, v) {
                continue;
            }
            // v after u in the block order iff v sits on the side of u that
            // block-forward chords open toward.
            let v_after_u = sides.in_left(u, v) == su;
            let sv = sides.in_left(v, u) == !v_after_u;
            s.insert(v, sv);
            queue.push_back(v);
        }
    }
    if s.len() < module.len() {
        // Seed the unreached parallel components from a vertex z outside the
        // module that avoids all of it: same side as the representant means
        // same orientation.
        let z = all
            .iter()
            .copied()
            .find(|&z| {
                !module.contains(&z)
                    && module.iter().all(|&v| !sides.overlaps(z, v))
            })
            .ok_or(ConformalError::NoOrientationSeed)?;
        let r_side = sides.in_left(r, z);
        for &v in module {
            s.entry(v).or_insert_with(|| sides.in_left(v, z) == r_side);
        }
    }

    // Relative block order of every parallel pair, checked from both sides.
    let mut pairs: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    let verts: Vec<Vertex> = module.iter().copied().collect();
    for (i, &u) in verts.iter().enumerate() {
        for &v in &verts[i + 1..] {
            if sides.overlaps(u, v) {
                continue;
            }
            let v_after_u = sides.in_left(u, v) == s[&u];
            let u_after_v = sides.in_left(v, u) == s[&v];
            if v_after_u == u_after_v {
                return Err(ConformalError::InconsistentSides);
            }
            if v_after_u {
                pairs.insert((u, v));
            } else {
                pairs.insert((v, u));
            }
        }
    }
    let lt = TransitiveOrientation::new(pairs);
    if !lt.is_transitive() {
        return Err(ConformalError::NotTransitive);
    }

    let mut m0 = BTreeSet::new();
    let mut m1 = BTreeSet::new();
    for &v in module {
        let (a, b) = if s[&v] { (Letter::tail(v), Letter::head(v)) } else { (Letter::head(v), Letter::tail(v)) };
        m0.insert(a);
        m1.insert(b);
    }
    Ok(Metaedge { module: module.clone(), representant: r, m0, m1, lt })
}

/// A candidate pair of block subwords for a metaedge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdmissiblePair {
    pub tau0: Vec<Letter>,
    pub tau1: Vec<Letter>,
}

/// True iff (tau0, tau1) is an oriented permutation model of the module's
/// overlap relation whose derived parallel orientation equals the metaedge's
/// fixed order and whose derived overlap orientation is transitive.
pub fn is_admissible(p: &AdmissiblePair, me: &Metaedge, sides: &SideSets) -> bool {
    let set0: BTreeSet<Letter> = p.tau0.iter().copied().collect();
    let set1: BTreeSet<Letter> = p.tau1.iter().copied().collect();
    if set0 != me.m0 || set1 != me.m1 {
        return false;
    }
    if p.tau0.len() != me.module.len() || p.tau1.len() != me.module.len() {
        return false;
    }
    let pm = match PermutationModel::new(
        p.tau0.iter().map(|l| l.v).collect(),
        p.tau1.iter().map(|l| l.v).collect(),
    ) {
        Ok(pm) => pm,
        Err(_) => return false,
    };
    let verts: Vec<Vertex> = me.module.iter().copied().collect();
    for (i, &u) in verts.iter().enumerate() {
        for &v in &verts[i + 1..] {
            if pm.realizes_edge(u, v) != sides.overlaps(u, v) {
                return false;
            }
        }
    }
    match orients_from_perm_model(&pm) {
        Ok((lt, _prec)) => lt.pairs == me.lt.pairs,
        Err(_) => false,
    }
}

/// The canonical admissible pair of a metaedge: the module's overlap edges
/// are oriented canonically along its modular decomposition, the parallel
/// pairs by the metaedge itself, and the two block orders follow.
pub fn canonical_admissible(
    me: &Metaedge,
    sides: &SideSets,
) -> Result<AdmissiblePair, ConformalError> {
    let ov = overlap_graph_of(sides);
    let prec = canonical_transitive_orientation(&ov, &me.module)?;
    let pm = perm_model_from_orients(&me.lt, &prec, &me.module)?;
    let to_letters = |vs: &[Vertex], block: &BTreeSet<Letter>| -> Vec<Letter> {
        vs.iter()
            .map(|&v| {
                if block.contains(&Letter::tail(v)) { Letter::tail(v) } else { Letter::head(v) }
            })
            .collect()
    };
    let pair = AdmissiblePair {
        tau0: to_letters(&pm.tau0, &me.m0),
        tau1: to_letters(&pm.tau1, &me.m1),
    };
    debug_assert!(is_admissible(&pair, me, sides));
    Ok(pair)
}

/// Splits the circular word into maximal runs of equal class according to
/// `class_of`; returns (class, letters of the run) in circular order starting
/// at a run boundary.  Returns a single run when all letters share a class.
fn circular_runs<F>(w: &CircularWord, class_of: F) -> Vec<(usize, Vec<Letter>)>
where
    F: Fn(Letter) -> usize,
{
    let ls = w.letters();
    let n = ls.len();
    if n == 0 {
        return vec![];
    }
    let classes: Vec<usize> = ls.iter().map(|&l| class_of(l)).collect();
    let start = (0..n)
        .find(|&i| classes[i] != classes[(i + n - 1) % n])
        .unwrap_or(0);
    let mut runs: Vec<(usize, Vec<Letter>)> = Vec::new();
    for k in 0..n {
        let i = (start + k) % n;
        match runs.last_mut() {
            Some((c, letters)) if *c == classes[i] => letters.push(ls[i]),
            _ => runs.push((classes[i], vec![ls[i]])),
        }
    }
    runs
}

/// True iff `w` is composed, in circular order, of one block per child
/// followed by the second blocks of the same children in the same order, each
/// child's block pair admissible for its metaedge in either orientation.
/// This is exactly the shape of the conformal models of a serial module.
pub fn is_serial_model(
    w: &CircularWord,
    children: &[Metaedge],
    sides: &SideSets,
) -> bool {
    let mut expected: BTreeSet<Letter> = BTreeSet::new();
    let mut child_of: BTreeMap<Vertex, usize> = BTreeMap::new();
    for (i, me) in children.iter().enumerate() {
        expected.extend(me.m0.iter().copied());
        expected.extend(me.m1.iter().copied());
        for &v in &me.module {
            child_of.insert(v, i);
        }
    }
    if w.letter_set() != expected {
        return false;
    }
    let k = children.len();
    if k == 1 {
        return single_module_blocks(w, &children[0])
            .is_some_and(|p| is_admissible(&p, &children[0], sides));
    }
    let runs = circular_runs(w, |l| child_of[&l.v]);
    if runs.len() != 2 * k {
        return false;
    }
    for rot in 0..2 * k {
        let seq: Vec<usize> =
            (0..2 * k).map(|j| runs[(rot + j) % (2 * k)].0).collect();
        if seq[..k] != seq[k..] {
            continue;
        }
        let mut seen = vec![false; k];
        if !seq[..k].iter().all(|&c| !std::mem::replace(&mut seen[c], true)) {
            continue;
        }
        let ok = (0..k).all(|j| {
            let child = seq[j];
            let me = &children[child];
            let b = runs[(rot + j) % (2 * k)].1.clone();
            let b2 = runs[(rot + j + k) % (2 * k)].1.clone();
            let (tau0, tau1) = if b.iter().all(|l| me.m0.contains(l)) {
                (b, b2)
            } else {
                (b2, b)
            };
            is_admissible(&AdmissiblePair { tau0, tau1 }, me, sides)
        });
        if ok {
            return true;
        }
    }
    false
}

/// For a word over a single module, locate its two blocks: the letters of
/// `m0` must be contiguous; they are read as tau0 and the rest as tau1.
fn single_module_blocks(w: &CircularWord, me: &Metaedge) -> Option<AdmissiblePair> {
    let ls = w.letters();
    let n = ls.len();
    let half = me.m0.len();
    if n != 2 * half {
        return None;
    }
    for start in 0..n {
        if (0..half).all(|j| me.m0.contains(&ls[(start + j) % n]))
        {
            let tau0: Vec<Letter> = (0..half).map(|j| ls[(start + j) % n]).collect();
            let tau1: Vec<Letter> =
                (0..half).map(|j| ls[(start + half + j) % n]).collect();
            return Some(AdmissiblePair { tau0, tau1 });
        }
    }
    None
}

/// One canonical conformal model of a serial module: the children in index
/// order, each contributing its canonical admissible pair.
pub fn canonical_serial_model(
    children: &[Metaedge],
    sides: &SideSets,
) -> Result<CircularWord, ConformalError> {
    let mut letters = Vec::new();
    let pairs: Vec<AdmissiblePair> = children
        .iter()
        .map(|me| canonical_admissible(me, sides))
        .collect::<Result<_, _>>()?;
    for p in &pairs {
        letters.extend(p.tau0.iter().copied());
    }
    for p in &pairs {
        letters.extend(p.tau1.iter().copied());
    }
    let w = CircularWord::new(letters)?;
    debug_assert!(is_serial_model(&w, children, sides));
    Ok(w)
}

/// All conformal models of the side data restricted to `domain`, up to
/// rotation, by inserting whole chords one vertex at a time; stops early once
/// `limit` distinct models are found.  Every chord placement is pruned
/// against all already placed chords, so the search stays narrow exactly when
/// the instance is rigid.
pub(crate) fn conformal_models_by_insertion(
    sides: &SideSets,
    domain: &VertexSet,
    limit: usize,
) -> Result<Vec<CircularWord>, ConformalError> {
    if domain.is_empty() {
        return Ok(vec![]);
    }
    if domain.len() > PRIME_CORE_BOUND {
        return Err(ConformalError::BoundExceeded(domain.len(), PRIME_CORE_BOUND));
    }
    let verts: Vec<Vertex> = domain.iter().copied().collect();
    let first = verts[0];
    let mut word: Vec<Letter> = vec![Letter::tail(first), Letter::head(first)];
    let mut placed: Vec<Vertex> = vec![first];
    let mut rest: Vec<Vertex> = verts[1..].to_vec();
    let mut out: BTreeSet<CircularWord> = BTreeSet::new();
    insertion_search(sides, &mut word, &mut placed, &mut rest, limit, &mut out);
    Ok(out.into_iter().collect())
}

fn insertion_search(
    sides: &SideSets,
    word: &mut Vec<Letter>,
    placed: &mut Vec<Vertex>,
    rest: &mut Vec<Vertex>,
    limit: usize,
    out: &mut BTreeSet<CircularWord>,
) {
    PRIME_SEARCH_NODES.fetch_add(1, Ordering::Relaxed);
    if out.len() >= limit {
        return;
    }
    if rest.is_empty() {
        out.insert(CircularWord::new(word.clone()).unwrap().canonical());
        return;
    }
    // Pick the unplaced vertex with the most parallel constraints against
    // placed chords: each such constraint confines both endpoints to an arc.
    let (pick, _) = rest
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let c = placed.iter().filter(|&&u| !sides.overlaps(u, v)).count();
            (i, (std::cmp::Reverse(c), v))
        })
        .min_by_key(|&(_, key)| key)
        .unwrap();
    let v = rest.swap_remove(pick);

    let len = word.len();
    let mut pos = BTreeMap::new();
    for (i, &l) in word.iter().enumerate() {
        pos.insert(l, i);
    }
    // Gap g in 1..=len receives a letter between word[g-1] and word[g % len].
    // Restrict candidate gaps by every placed chord that must not cross v.
    let mut allowed: Vec<bool> = vec![true; len + 1];
    allowed[0] = false;
    let inside = |g: usize, p0: usize, p1: usize| -> bool {
        ((g - 1 + len - p0) % len) < ((p1 + len - p0) % len)
    };
    for &u in placed.iter() {
        if sides.overlaps(u, v) {
            continue;
        }
        let p0 = pos[&Letter::tail(u)];
        let p1 = pos[&Letter::head(u)];
        let want_inside = sides.in_left(u, v);
        for g in 1..=len {
            if allowed[g] && inside(g, p0, p1) != want_inside {
                allowed[g] = false;
            }
        }
    }
    let gaps: Vec<usize> = (1..=len).filter(|&g| allowed[g]).collect();
    for (a, &i) in gaps.iter().enumerate() {
        for &j in &gaps[a..] {
            for tags in [(0u8, 1u8), (1, 0)] {
                let l1 = Letter { v, tag: tags.0 };
                let l2 = Letter { v, tag: tags.1 };
                let mut cand = word.clone();
                cand.insert(i, l1);
                cand.insert(j + 1, l2);
                if !placement_ok(sides, &cand, v, placed) {
                    continue;
                }
                let saved = std::mem::replace(word, cand);
                placed.push(v);
                insertion_search(sides, word, placed, rest, limit, out);
                placed.pop();
                *word = saved;
                if out.len() >= limit {
                    rest.push(v);
                    return;
                }
            }
        }
    }
    rest.push(v);
}

/// Checks the freshly inserted chord v against every placed chord: crossing
/// exactly on overlap, and on non-overlap both chords lie on the sides they
/// prescribe for each other.
fn placement_ok(sides: &SideSets, word: &[Letter], v: Vertex, placed: &[Vertex]) -> bool {
    let len = word.len();
    let mut pos = BTreeMap::new();
    for (i, &l) in word.iter().enumerate() {
        pos.insert(l, i);
    }
    let strictly_inside = |x: usize, p0: usize, p1: usize| -> bool {
        let d = (x + len - p0) % len;
        d > 0 && d < (p1 + len - p0) % len
    };
    let v0 = pos[&Letter::tail(v)];
    let v1 = pos[&Letter::head(v)];
    for &u in placed {
        let u0 = pos[&Letter::tail(u)];
        let u1 = pos[&Letter::head(u)];
        let u0_in = strictly_inside(u0, v0, v1);
        let u1_in = strictly_inside(u1, v0, v1);
        if sides.overlaps(u, v) {
            if u0_in == u1_in {
                return false;
            }
            continue;
        }
        if u0_in != u1_in {
            return false;
        }
        // u entirely on v's left iff both its letters sit inside (v0, v1).
        if u0_in != sides.in_left(v, u) {
            return false;
        }
        let w0_in = strictly_inside(v0, u0, u1);
        if w0_in != sides.in_left(u, v) {
            return false;
        }
    }
    true
}

/// The two conformal models of a prime overlap structure, mutual
/// reflections, the lexicographically least canonical form first.
pub fn prime_conformal_pair(
    sides: &SideSets,
    domain: &VertexSet,
) -> Result<(ConformalModel, ConformalModel), ConformalError> {
    let models = conformal_models_by_insertion(sides, domain, 3)?;
    match models.len() {
        0 => Err(ConformalError::NoConformal),
        2 => {
            let a = models[0].clone();
            let b = models[1].clone();
            if b.canonical() != a.reflect().canonical() {
                return Err(ConformalError::ModelCountViolation(2));
            }
            Ok((ConformalModel::new(a, sides)?, ConformalModel::new(b, sides)?))
        }
        k => Err(ConformalError::ModelCountViolation(k)),
    }
}

/// A probe: a connected sub-structure (y, x, X, alpha(X)) whose model is
/// unique up to reflection and which interacts with the rest of the vertex
/// set only in one of three uniform ways.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub y: Vertex,
    pub x: Vertex,
    pub x_set: VertexSet,
    pub alpha: VertexSet,
}

/// Checks the three probe axioms of (p.y, p.x, p.x_set, p.alpha) inside the
/// overlap structure induced on `u_set`.
pub fn probe_axioms(sides: &SideSets, u_set: &VertexSet, p: &Probe) -> bool {
    let ov = overlap_graph_of(sides);
    probe_axioms_in(&ov, u_set, p)
}

fn probe_axioms_in(ov: &Graph, u_set: &VertexSet, p: &Probe) -> bool {
    let Probe { y, x, x_set, alpha } = p;
    let xa: VertexSet = x_set.union(alpha).copied().collect();
    let mut pset: VertexSet = xa.clone();
    pset.insert(*x);
    pset.insert(*y);
    // (1) shapes: nonempty, pairwise disjoint, strictly inside u_set
    if x == y
        || x_set.is_empty()
        || alpha.is_empty()
        || !x_set.is_disjoint(alpha)
        || xa.contains(x)
        || xa.contains(y)
        || !pset.is_subset(u_set)
        || pset.len() == u_set.len()
    {
        return false;
    }
    // (2) y ~ x, y avoids X and alpha, x ~ X, x avoids alpha, (P, ~) connected
    if !ov.has_edge(*x, *y)
        || xa.iter().any(|&z| ov.has_edge(*y, z))
        || x_set.iter().any(|&z| !ov.has_edge(*x, z))
        || alpha.iter().any(|&z| ov.has_edge(*x, z))
        || !ov.is_connected_within(&pset)
    {
        return false;
    }
    // (3) every outside vertex relates to X and alpha in one of three ways
    for &z in u_set {
        if pset.contains(&z) {
            continue;
        }
        let none_xa = xa.iter().all(|&t| !ov.has_edge(z, t));
        let all_x_none_a = x_set.iter().all(|&t| ov.has_edge(z, t))
            && alpha.iter().all(|&t| !ov.has_edge(z, t));
        let all_xa = xa.iter().all(|&t| ov.has_edge(z, t));
        if !(none_xa || all_x_none_a || all_xa) {
            return false;
        }
    }
    true
}

/// Searches for a probe (y, x, x_set, alpha) with the given last two
/// components; returns the lexicographically least (y, x) found, or None —
/// which happens exactly in the degenerate split configuration.
pub fn find_probe(
    sides: &SideSets,
    u_set: &VertexSet,
    x_set: &VertexSet,
    alpha: &VertexSet,
) -> Option<Probe> {
    let ov = overlap_graph_of(sides);
    let xa: VertexSet = x_set.union(alpha).copied().collect();
    let outside: Vec<Vertex> =
        u_set.iter().copied().filter(|v| !xa.contains(v)).collect();
    for &y in &outside {
        for &x in &outside {
            if x == y {
                continue;
            }
            let p = Probe {
                y,
                x,
                x_set: x_set.clone(),
                alpha: alpha.clone(),
            };
            if probe_axioms_in(&ov, u_set, &p) {
                return Some(p);
            }
        }
    }
    None
}

/// The consistent decomposition of an improper prime module: each child is
/// refined into classes that no outside representative chord can separate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistentDecomposition {
    /// Children of the module, ascending by least member.
    pub children: Vec<VertexSet>,
    /// All classes across children, ascending by least member.
    pub classes: Vec<VertexSet>,
    /// For each class, the index of the child containing it.
    pub class_child: Vec<usize>,
}

/// Computes the consistent decomposition of `m`, which must induce a prime
/// overlap structure.  Prime children stay whole; a parallel child is split
/// by which side of each outside avoiding representative its vertices lie
/// on; a serial child is split by the unordered pair of outside
/// representative sets on its two sides.
pub fn consistent_decomposition(
    sides: &SideSets,
    m: &VertexSet,
) -> Result<ConsistentDecomposition, ConformalError> {
    let ov = overlap_graph_of(sides);
    let tree = md_tree(&ov, m)?;
    let root = tree.node(tree.root);
    if root.kind != ModuleKind::Prime {
        return Err(ConformalError::NotPrime);
    }
    let mut child_nodes: Vec<usize> = root.children.clone();
    child_nodes.sort_by_key(|&c| *tree.node(c).vertices.iter().next().unwrap());
    let children: Vec<VertexSet> =
        child_nodes.iter().map(|&c| tree.node(c).vertices.clone()).collect();
    let reps: Vec<Vertex> =
        children.iter().map(|c| *c.iter().next().unwrap()).collect();

    let mut classes: Vec<VertexSet> = Vec::new();
    let mut class_child: Vec<usize> = Vec::new();
    for (ci, &cnode) in child_nodes.iter().enumerate() {
        let node = tree.node(cnode);
        let child = &node.vertices;
        let outside: Vec<Vertex> = reps
            .iter()
            .copied()
            .filter(|u| !child.contains(u))
            .collect();
        let mut groups: BTreeMap<Vec<Vertex>, VertexSet> = BTreeMap::new();
        match node.kind {
            ModuleKind::Leaf | ModuleKind::Prime => {
                groups.insert(vec![], child.clone());
            }
            ModuleKind::Parallel => {
                // Only outside chords avoiding the whole child can separate
                // its parts; the signature is which of them have v on their
                // left side.
                let avoiding: Vec<Vertex> = outside
                    .iter()
                    .copied()
                    .filter(|&u| !sides.overlaps(u, *child.iter().next().unwrap()))
                    .collect();
                for &v in child {
                    let sig: Vec<Vertex> = avoiding
                        .iter()
                        .copied()
                        .filter(|&u| sides.in_left(u, v))
                        .collect();
                    groups.entry(sig).or_default().insert(v);
                }
            }
            ModuleKind::Serial => {
                // The unordered pair of outside representative sets on v's
                // two sides.
                for &v in child {
                    let lefts: Vec<Vertex> = outside
                        .iter()
                        .copied()
                        .filter(|&u| sides.in_left(v, u))
                        .collect();
                    let rights: Vec<Vertex> = outside
                        .iter()
                        .copied()
                        .filter(|&u| sides.in_right(v, u))
                        .collect();
                    let (a, b) = if lefts <= rights { (lefts, rights) } else { (rights, lefts) };
                    // usize::MAX separates the two halves of the signature
                    let mut sig = a;
                    sig.push(usize::MAX);
                    sig.extend(b);
                    groups.entry(sig).or_default().insert(v);
                }
            }
        }
        // Each class must be a union of grandchildren.
        if node.kind == ModuleKind::Parallel || node.kind == ModuleKind::Serial {
            for &gnode in &node.children {
                let gset = &tree.node(gnode).vertices;
                let hit = groups
                    .values()
                    .filter(|cls| gset.iter().any(|v| cls.contains(v)))
                    .count();
                assert_eq!(
                    hit, 1,
                    "a child part was separated across consistency classes"
                );
            }
        }
        for cls in groups.into_values() {
            classes.push(cls);
            class_child.push(ci);
        }
    }
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by_key(|&i| *classes[i].iter().next().unwrap());
    let classes: Vec<VertexSet> = order.iter().map(|&i| classes[i].clone()).collect();
    let class_child: Vec<usize> = order.iter().map(|&i| class_child[i]).collect();
    Ok(ConsistentDecomposition { children, classes, class_child })
}

/// The two circular orders of the slots of an improper prime module, with
/// each slot's metaedge.  Every conformal model of the module arranges the
/// slot blocks in one of the two orders.
#[derive(Debug, Clone)]
pub struct SlotOrder {
    pub decomposition: ConsistentDecomposition,
    /// One skeleton vertex per class: its least member.
    pub skeleton: Vec<Vertex>,
    /// Per-class metaedge with the skeleton vertex as representant.
    pub metaedges: Vec<Metaedge>,
    /// Slots (class index, copy) in the circular order of the first skeleton
    /// model; `pi1` is its reflection.
    pub pi0: Vec<(usize, u8)>,
    pub pi1: Vec<(usize, u8)>,
    /// The two conformal models of the skeleton.
    pub phi0: CircularWord,
    pub phi1: CircularWord,
}

impl SlotOrder {
    /// The slot of a labeled letter: its class, and copy 0 iff the letter
    /// lies in the class metaedge's first block.
    pub fn slot_of(&self, l: Letter) -> Option<(usize, u8)> {
        let i = self
            .decomposition
            .classes
            .iter()
            .position(|c| c.contains(&l.v))?;
        let copy = if self.metaedges[i].m0.contains(&l) { 0 } else { 1 };
        Some((i, copy))
    }
}

/// Builds the slot order of an improper prime module: the consistent
/// decomposition, one skeleton vertex per class, the exactly two conformal
/// models of the skeleton, and the per-class metaedges.
pub fn slot_order(sides: &SideSets, m: &VertexSet) -> Result<SlotOrder, ConformalError> {
    let decomposition = consistent_decomposition(sides, m)?;
    let skeleton: Vec<Vertex> = decomposition
        .classes
        .iter()
        .map(|c| *c.iter().next().unwrap())
        .collect();
    let sset: VertexSet = skeleton.iter().copied().collect();
    let models = conformal_models_by_insertion(sides, &sset, 3)?;
    if models.is_empty() {
        return Err(ConformalError::NoConformal);
    }
    if models.len() != 2 {
        return Err(ConformalError::ModelCountViolation(models.len()));
    }
    let phi0 = models[0].clone();
    let phi1 = models[1].clone();
    if phi1.canonical() != phi0.reflect().canonical() {
        return Err(ConformalError::ModelCountViolation(2));
    }
    let metaedges: Vec<Metaedge> = decomposition
        .classes
        .iter()
        .zip(&skeleton)
        .map(|(c, &s)| metaedge(sides, c, s))
        .collect::<Result<_, _>>()?;
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
    Ok(SlotOrder { decomposition, skeleton, metaedges, pi0, pi1, phi0, phi1 })
}

pub(crate) fn reflect_slots(pi: &[(usize, u8)]) -> Vec<(usize, u8)> {
    pi.iter().rev().map(|&(i, t)| (i, 1 - t)).collect()
}

pub(crate) fn is_rotation<T: PartialEq + Clone>(a: &[T], b: &[T]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    (0..a.len()).any(|r| (0..a.len()).all(|i| a[(r + i) % a.len()] == b[i]))
}

/// True iff `w` parses into one contiguous block per slot, the blocks in the
/// circular order `pi_m`, with every class's block pair admissible for its
/// metaedge.  Together with the slot order this characterizes the conformal
/// models of the module.
pub fn is_admissible_for_slot_order(
    w: &CircularWord,
    so: &SlotOrder,
    m: u8,
    sides: &SideSets,
) -> bool {
    let mut expected: BTreeSet<Letter> = BTreeSet::new();
    for me in &so.metaedges {
        expected.extend(me.m0.iter().copied());
        expected.extend(me.m1.iter().copied());
    }
    if w.letter_set() != expected {
        return false;
    }
    let n_cls = so.decomposition.classes.len();
    let slot_ids: Option<Vec<(usize, u8)>> =
        w.letters().iter().map(|&l| so.slot_of(l)).collect();
    let Some(slot_ids) = slot_ids else { return false };
    let flat: Vec<usize> = slot_ids.iter().map(|&(i, t)| 2 * i + t as usize).collect();
    let letters = w.letters();
    // compress circular runs of slots
    let total = flat.len();
    let start = (0..total)
        .find(|&i| flat[i] != flat[(i + total - 1) % total])
        .unwrap_or(0);
    let mut runs: Vec<(usize, Vec<Letter>)> = Vec::new();
    for k in 0..total {
        let i = (start + k) % total;
        match runs.last_mut() {
            Some((c, ls)) if *c == flat[i] => ls.push(letters[i]),
            _ => runs.push((flat[i], vec![letters[i]])),
        }
    }
    if runs.len() != 2 * n_cls {
        return false;
    }
    let run_slots: Vec<(usize, u8)> =
        runs.iter().map(|&(c, _)| (c / 2, (c % 2) as u8)).collect();
    let pi = if m == 0 { &so.pi0 } else { &so.pi1 };
    if !is_rotation(&run_slots, pi) {
        return false;
    }
    for (i, me) in so.metaedges.iter().enumerate() {
        let block = |copy: u8| -> Vec<Letter> {
            runs.iter()
                .find(|&&(c, _)| c == 2 * i + copy as usize)
                .map(|(_, ls)| ls.clone())
                .unwrap_or_default()
        };
        let pair = AdmissiblePair { tau0: block(0), tau1: block(1) };
        if !is_admissible(&pair, me, sides) {
            return false;
        }
    }
    true
}

/// One canonical conformal model of an improper prime module: the first slot
/// order with each slot expanded to its canonical admissible block.
pub fn canonical_prime_model(
    so: &SlotOrder,
    sides: &SideSets,
) -> Result<CircularWord, ConformalError> {
    let pairs: Vec<AdmissiblePair> = so
        .metaedges
        .iter()
        .map(|me| canonical_admissible(me, sides))
        .collect::<Result<_, _>>()?;
    let mut letters = Vec::new();
    for &(i, t) in &so.pi0 {
        let block = if t == 0 { &pairs[i].tau0 } else { &pairs[i].tau1 };
        letters.extend(block.iter().copied());
    }
    let w = CircularWord::new(letters)?;
    debug_assert!(is_admissible_for_slot_order(&w, so, 0, sides));
    if !is_conformal(&w, sides) {
        return Err(ConformalError::NoConformal);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intersection::build_matrix;
    use crate::oracle::{enumerate_conformal, random_circular_arc, InstanceSeed, OracleError};
    use crate::circle_split::{maximal_split, split_components, ChordModel};

    fn word(text: &str) -> CircularWord {
        CircularWord::parse(text, None).unwrap()
    }

    /// Side data and overlap graph of a random reduced circular-arc instance.
    fn instance(seed: u64, n: usize) -> (Graph, SideSets) {
        let (g, _) = random_circular_arc(InstanceSeed::reduced(seed, n));
        let (_, sides, ov) = build_matrix(&g).unwrap();
        (ov.graph, sides)
    }

    /// Side data read off a uniformly random chord diagram; compared to the
    /// arc-graph source this yields far more split-decomposable prime
    /// overlap structures (sparse, path-like interlacements).
    fn chord_instance(seed: u64, n: usize) -> (Graph, SideSets) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut letters: Vec<Letter> = (0..n)
            .flat_map(|v| [Letter::tail(v), Letter::head(v)])
            .collect();
        letters.shuffle(&mut rng);
        let w = CircularWord::new(letters).unwrap();
        let sides = sides_of_chord_model(&w);
        (overlap_graph_of(&sides), sides)
    }

    #[test]
    fn metaedge_of_a_singleton_module_is_trivial() {
        // 0 with outside witness 1 crossing it
        let sides = SideSets {
            left: vec![VertexSet::new(); 2],
            right: vec![VertexSet::new(); 2],
        };
        let me = metaedge(&sides, &[0].into_iter().collect(), 0).unwrap();
        assert_eq!(me.m0, [Letter::tail(0)].into_iter().collect());
        assert_eq!(me.m1, [Letter::head(0)].into_iter().collect());
        assert!(me.lt.pairs.is_empty());
    }

    #[test]
    fn metaedge_orients_a_parallel_pair_from_its_sides() {
        // module {0,1}: 0 || 1 with 1 on 0's left and 0 on 1's right;
        // vertex 2 crosses both, making the module proper.
        let mut sides = SideSets {
            left: vec![VertexSet::new(); 3],
            right: vec![VertexSet::new(); 3],
        };
        sides.left[0].insert(1);
        sides.right[1].insert(0);
        let me = metaedge(&sides, &[0, 1].into_iter().collect(), 0).unwrap();
        assert_eq!(me.lt.pairs, [(0, 1)].into_iter().collect());
        assert_eq!(
            me.m0,
            [Letter::tail(0), Letter::tail(1)].into_iter().collect()
        );
        assert_eq!(
            me.m1,
            [Letter::head(0), Letter::head(1)].into_iter().collect()
        );
        // an unrelated module is rejected
        assert_eq!(
            metaedge(&sides, &[0].into_iter().collect(), 1),
            Err(ConformalError::Malformed("representant 1 not in module".into()))
        );
    }

    #[test]
    fn improper_module_is_rejected() {
        // nobody crosses {0,1}
        let mut sides = SideSets {
            left: vec![VertexSet::new(); 2],
            right: vec![VertexSet::new(); 2],
        };
        sides.left[0].insert(1);
        sides.right[1].insert(0);
        assert_eq!(
            metaedge(&sides, &[0, 1].into_iter().collect(), 0),
            Err(ConformalError::NotProper)
        );
    }

    /// For each strong prime/parallel proper module of each component of a
    /// random instance: the metaedge equals the block data extracted from
    /// every brute-forced conformal model, and every extracted block pair is
    /// admissible.
    #[test]
    fn metaedge_is_model_independent_on_random_instances() {
        let mut modules_checked = 0;
        for seed in 0..60u64 {
            let (ov, sides) = instance(seed, 6);
            for comp in ov.components() {
                if comp.len() < 2 {
                    continue;
                }
                let all = match enumerate_conformal(&sides, &comp) {
                    Ok(ws) => ws,
                    Err(OracleError::BoundExceeded(..)) => continue,
                };
                if all.is_empty() {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                for node in &tree.nodes {
                    let m = &node.vertices;
                    if m.len() == comp.len() {
                        continue;
                    }
                    if node.kind == ModuleKind::Serial {
                        continue;
                    }
                    let hood: VertexSet = comp
                        .iter()
                        .copied()
                        .filter(|&x| {
                            !m.contains(&x) && m.iter().all(|&v| ov.has_edge(x, v))
                        })
                        .collect();
                    if hood.is_empty() {
                        continue;
                    }
                    let r = *m.iter().next().unwrap();
                    let me = metaedge(&sides, m, r).unwrap();
                    modules_checked += 1;
                    for w in &all {
                        let keep: BTreeSet<Letter> = m
                            .iter()
                            .chain(hood.iter())
                            .flat_map(|&v| [Letter::tail(v), Letter::head(v)])
                            .collect();
                        let local = w.restrict_circular(&keep).unwrap();
                        let runs =
                            circular_runs(&local, |l| m.contains(&l.v) as usize);
                        let blocks: Vec<&Vec<Letter>> = runs
                            .iter()
                            .filter(|&&(c, _)| c == 1)
                            .map(|(_, ls)| ls)
                            .collect();
                        assert_eq!(blocks.len(), 2, "module letters must form two blocks");
                        let (tau0, tau1) =
                            if blocks[0].contains(&Letter { v: r, tag: me.letter_in_m0(r).tag })
                            {
                                (blocks[0].clone(), blocks[1].clone())
                            } else {
                                (blocks[1].clone(), blocks[0].clone())
                            };
                        let m0_w: BTreeSet<Letter> = tau0.iter().copied().collect();
                        assert_eq!(m0_w, me.m0, "block contents are model-independent");
                        let pair = AdmissiblePair { tau0, tau1 };
                        assert!(
                            is_admissible(&pair, &me, &sides),
                            "restriction of a conformal model must be admissible"
                        );
                    }
                }
            }
        }
        assert!(modules_checked >= 30, "only {modules_checked} proper modules exercised");
    }

    #[test]
    fn reversing_one_block_of_a_parallel_pair_breaks_admissibility() {
        let mut sides = SideSets {
            left: vec![VertexSet::new(); 3],
            right: vec![VertexSet::new(); 3],
        };
        sides.left[0].insert(1);
        sides.right[1].insert(0);
        let me = metaedge(&sides, &[0, 1].into_iter().collect(), 0).unwrap();
        let good = AdmissiblePair {
            tau0: vec![Letter::tail(0), Letter::tail(1)],
            tau1: vec![Letter::head(1), Letter::head(0)],
        };
        assert!(is_admissible(&good, &me, &sides));
        let flipped = AdmissiblePair {
            tau0: vec![Letter::tail(1), Letter::tail(0)],
            tau1: good.tau1.clone(),
        };
        assert!(!is_admissible(&flipped, &me, &sides));
        let canon = canonical_admissible(&me, &sides).unwrap();
        assert!(is_admissible(&canon, &me, &sides));
    }

    #[test]
    fn serial_checker_matches_conformality_for_two_crossing_singletons() {
        // serial module {0,1} with 0 ~ 1; outside witness 2 crossing both;
        // empty side sets mean every pair overlaps
        let sides = SideSets {
            left: vec![VertexSet::new(); 3],
            right: vec![VertexSet::new(); 3],
        };
        let children = vec![
            metaedge(&sides, &[0].into_iter().collect(), 0).unwrap(),
            metaedge(&sides, &[1].into_iter().collect(), 1).unwrap(),
        ];
        // all 6 circular words over {0,1}*
        let mut seen = BTreeSet::new();
        let base = [Letter::head(0), Letter::tail(1), Letter::head(1)];
        let perms = [
            [base[0], base[1], base[2]],
            [base[0], base[2], base[1]],
            [base[1], base[0], base[2]],
            [base[1], base[2], base[0]],
            [base[2], base[0], base[1]],
            [base[2], base[1], base[0]],
        ];
        for p in perms {
            let mut ls = vec![Letter::tail(0)];
            ls.extend(p);
            let w = CircularWord::new(ls).unwrap().canonical();
            if !seen.insert(w.clone()) {
                continue;
            }
            assert_eq!(
                is_serial_model(&w, &children, &sides),
                is_conformal(&w, &sides),
                "disagreement on {w}"
            );
        }
        let canon = canonical_serial_model(&children, &sides).unwrap();
        assert!(is_conformal(&canon, &sides));
    }

    #[test]
    fn serial_checker_matches_oracle_on_a_mixed_module() {
        // children {0}, {1}, {2,3} with 2 || 3 nested; all children crossing
        let w = word("0^0 1^0 2^0 3^0 0^1 1^1 3^1 2^1");
        let sides = sides_of_chord_model(&w);
        let domain: VertexSet = [0, 1, 2, 3].into_iter().collect();
        let ov = overlap_graph_of(&sides);
        let tree = md_tree(&ov, &domain).unwrap();
        assert_eq!(tree.node(tree.root).kind, ModuleKind::Serial);
        let children = vec![
            metaedge(&sides, &[0].into_iter().collect(), 0).unwrap(),
            metaedge(&sides, &[1].into_iter().collect(), 1).unwrap(),
            metaedge(&sides, &[2, 3].into_iter().collect(), 2).unwrap(),
        ];
        let all = enumerate_conformal(&sides, &domain).unwrap();
        assert!(!all.is_empty());
        for m in &all {
            assert!(is_serial_model(m, &children, &sides), "oracle model {m} rejected");
        }
        assert!(all.contains(&w.canonical()));
        // a word with the nested pair un-nested is not conformal: checker and
        // oracle agree it is gone
        let bad = word("0^0 1^0 2^0 3^0 0^1 1^1 2^1 3^1");
        assert!(!is_serial_model(&bad, &children, &sides));
        assert!(!all.contains(&bad.canonical()));
        let canon = canonical_serial_model(&children, &sides).unwrap();
        assert!(all.contains(&canon.canonical()));
    }

    #[test]
    fn prime_pair_on_the_four_chord_path() {
        // overlap graph P4: 0-1-2-3
        let w = word("0^0 1^0 0^1 2^0 1^1 3^0 2^1 3^1");
        let sides = sides_of_chord_model(&w);
        let domain: VertexSet = [0, 1, 2, 3].into_iter().collect();
        let (a, b) = prime_conformal_pair(&sides, &domain).unwrap();
        assert_eq!(
            b.word().canonical(),
            a.word().reflect().canonical()
        );
        let pair: BTreeSet<CircularWord> =
            [a.word().canonical(), b.word().canonical()].into_iter().collect();
        assert!(pair.contains(&w.canonical()));
        let oracle: BTreeSet<CircularWord> = enumerate_conformal(&sides, &domain)
            .unwrap()
            .into_iter()
            .collect();
        assert_eq!(pair, oracle);
    }

    #[test]
    fn prime_pair_matches_oracle_on_random_prime_components() {
        let mut found = 0;
        for seed in 0..150u64 {
            let (ov, sides) = instance(seed, if seed % 2 == 0 { 8 } else { 9 });
            for comp in ov.components() {
                if comp.len() < 4 {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                if tree.node(tree.root).kind != ModuleKind::Prime {
                    continue;
                }
                if tree.node(tree.root).children.len() != comp.len() {
                    continue; // only plain prime overlap structures here
                }
                let oracle: BTreeSet<CircularWord> =
                    match enumerate_conformal(&sides, &comp) {
                        Ok(ws) => ws.into_iter().collect(),
                        Err(_) => continue,
                    };
                if oracle.is_empty() {
                    continue;
                }
                let (a, b) = prime_conformal_pair(&sides, &comp).unwrap();
                let pair: BTreeSet<CircularWord> =
                    [a.word().canonical(), b.word().canonical()]
                        .into_iter()
                        .collect();
                assert_eq!(pair, oracle, "seed {seed}");
                found += 1;
            }
        }
        assert!(found >= 10, "only {found} prime components exercised");
    }

    #[test]
    fn no_probe_in_the_degenerate_path_configuration() {
        // (U,~) = P4, maximal split is trivial at the articulation 1 with
        // classes {0} (bare) and {2} with attachment {3}
        let w = word("0^0 1^0 0^1 2^0 1^1 3^0 2^1 3^1");
        let sides = sides_of_chord_model(&w);
        let domain: VertexSet = [0, 1, 2, 3].into_iter().collect();
        let ov = overlap_graph_of(&sides);
        let split = maximal_split(&ov, &domain).unwrap().unwrap();
        assert!(split.is_trivial());
        let comps = split_components(&ov, &domain, &split).unwrap();
        for (i, cls) in comps.classes.iter().enumerate() {
            let alpha = &comps.attach[i];
            if cls.len() + alpha.len() < 2 {
                continue;
            }
            assert!(find_probe(&sides, &domain, cls, alpha).is_none());
        }
    }

    #[test]
    fn probes_found_on_random_split_prime_components_pass_the_axioms() {
        let mut some = 0;
        for seed in 0..150u64 {
            let (ov, sides) =
                chord_instance(seed, if seed % 2 == 0 { 8 } else { 9 });
            for comp in ov.components() {
                if comp.len() < 5 {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                if tree.node(tree.root).kind != ModuleKind::Prime
                    || tree.node(tree.root).children.len() != comp.len()
                {
                    continue;
                }
                let Ok(Some(split)) = maximal_split(&ov, &comp) else { continue };
                let comps = match split_components(&ov, &comp, &split) {
                    Ok(c) => c,
                    Err(_) => continue,
                };
                for (i, cls) in comps.classes.iter().enumerate() {
                    let alpha = &comps.attach[i];
                    if cls.len() + alpha.len() < 2 {
                        continue;
                    }
                    if let Some(p) = find_probe(&sides, &comp, cls, alpha) {
                        assert!(probe_axioms(&sides, &comp, &p));
                        some += 1;
                    }
                }
            }
        }
        assert!(some >= 5, "only {some} probes found");
    }

    #[test]
    fn slot_order_describes_all_oracle_models_of_improper_prime_components()
    {
        let mut comps_checked = 0;
        let mut nontrivial_class = 0;
        for seed in 0..120u64 {
            let (ov, sides) = instance(seed, 9);
            for comp in ov.components() {
                if comp.len() < 4 {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                if tree.node(tree.root).kind != ModuleKind::Prime {
                    continue;
                }
                let oracle: Vec<CircularWord> =
                    match enumerate_conformal(&sides, &comp) {
                        Ok(ws) => ws,
                        Err(_) => continue,
                    };
                if oracle.is_empty() {
                    continue;
                }
                let so = slot_order(&sides, &comp).unwrap();
                comps_checked += 1;
                if so.decomposition.classes.iter().any(|c| c.len() > 1) {
                    nontrivial_class += 1;
                }
                // slot copies partition the letters of the module
                let mut letters: BTreeSet<Letter> = BTreeSet::new();
                let mut count = 0;
                for me in &so.metaedges {
                    count += me.m0.len() + me.m1.len();
                    letters.extend(me.m0.iter().copied());
                    letters.extend(me.m1.iter().copied());
                }
                assert_eq!(count, 2 * comp.len());
                assert_eq!(letters.len(), 2 * comp.len());
                for w in &oracle {
                    let ok0 = is_admissible_for_slot_order(w, &so, 0, &sides);
                    let ok1 = is_admissible_for_slot_order(w, &so, 1, &sides);
                    assert!(
                        ok0 ^ ok1,
                        "every conformal model must match exactly one slot order (seed {seed}, word {w})"
                    );
                }
                // converse at desk scale: the canonical admissible expansion
                // is conformal
                let canon = canonical_prime_model(&so, &sides).unwrap();
                assert!(oracle.contains(&canon.canonical()));
            }
        }
        assert!(comps_checked >= 20, "only {comps_checked} components exercised");
        assert!(
            nontrivial_class >= 3,
            "only {nontrivial_class} instances had a non-singleton class"
        );
    }

    #[test]
    fn consistent_decomposition_rules_on_random_instances() {
        let mut parallel_split_seen = 0;
        for seed in 0..300u64 {
            let (ov, sides) = instance(seed, 9);
            for comp in ov.components() {
                if comp.len() < 4 {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                if tree.node(tree.root).kind != ModuleKind::Prime {
                    continue;
                }
                let cd = consistent_decomposition(&sides, &comp).unwrap();
                // classes partition the module
                let union: VertexSet =
                    cd.classes.iter().flatten().copied().collect();
                assert_eq!(union, comp);
                let total: usize = cd.classes.iter().map(|c| c.len()).sum();
                assert_eq!(total, comp.len());
                // each class sits inside its child
                for (cls, &ci) in cd.classes.iter().zip(&cd.class_child) {
                    assert!(cls.is_subset(&cd.children[ci]));
                }
                // prime children stay whole
                for &cnode in &tree.node(tree.root).children {
                    let child = tree.node(cnode);
                    if child.kind == ModuleKind::Prime {
                        assert!(cd.classes.contains(&child.vertices));
                    }
                    if child.kind == ModuleKind::Parallel {
                        let parts = cd
                            .classes
                            .iter()
                            .filter(|c| c.is_subset(&child.vertices))
                            .count();
                        if parts > 1 {
                            parallel_split_seen += 1;
                        }
                    }
                }
            }
        }
        assert!(
            parallel_split_seen >= 1,
            "no instance split a parallel child into several classes"
        );
    }

    #[test]
    fn serial_child_with_uniform_outside_signature_stays_one_class() {
        // quotient is the path 0 - {1,2} - 3 - 4 with the middle child serial
        // (1 and 2 cross); no outside chord tells 1 and 2 apart
        let w = word("0^0 1^0 2^0 0^1 3^0 1^1 2^1 4^0 3^1 4^1");
        let sides = sides_of_chord_model(&w);
        let domain: VertexSet = (0..5).collect();
        let ov = overlap_graph_of(&sides);
        let tree = md_tree(&ov, &domain).unwrap();
        assert_eq!(tree.node(tree.root).kind, ModuleKind::Prime);
        let child = tree
            .node(tree.root)
            .children
            .iter()
            .map(|&c| tree.node(c))
            .find(|n| n.vertices.len() > 1)
            .unwrap();
        assert_eq!(child.kind, ModuleKind::Serial);
        assert_eq!(child.vertices, [1, 2].into_iter().collect());
        let cd = consistent_decomposition(&sides, &domain).unwrap();
        assert!(cd.classes.contains(&child.vertices));
        // the slot order covers all oracle models of the module
        let so = slot_order(&sides, &domain).unwrap();
        let oracle = enumerate_conformal(&sides, &domain).unwrap();
        assert!(oracle.contains(&w.canonical()));
        for m in &oracle {
            assert!(
                is_admissible_for_slot_order(m, &so, 0, &sides)
                    ^ is_admissible_for_slot_order(m, &so, 1, &sides)
            );
        }
    }

    #[test]
    fn breaking_a_slot_block_order_is_rejected() {
        // find an instance with a slot containing a parallel pair, flip the
        // pair inside tau0 only, and watch admissibility fail
        let mut exercised = 0;
        for seed in 0..200u64 {
            let (ov, sides) = instance(seed, 7);
            for comp in ov.components() {
                if comp.len() < 4 {
                    continue;
                }
                let tree = md_tree(&ov, &comp).unwrap();
                if tree.node(tree.root).kind != ModuleKind::Prime {
                    continue;
                }
                let Ok(so) = slot_order(&sides, &comp) else { continue };
                let Some(slot) = so.metaedges.iter().position(|me| !me.lt.pairs.is_empty())
                else {
                    continue;
                };
                let Ok(canon) = canonical_prime_model(&so, &sides) else { continue };
                assert!(is_admissible_for_slot_order(&canon, &so, 0, &sides));
                // swap the two letters of the first fixed parallel pair in
                // the tau0 block of that slot
                let &(a, b) = so.metaedges[slot].lt.pairs.iter().next().unwrap();
                let la = so.metaedges[slot].letter_in_m0(a);
                let lb = so.metaedges[slot].letter_in_m0(b);
                let mut ls = canon.letters().to_vec();
                let pa = ls.iter().position(|&l| l == la).unwrap();
                let pb = ls.iter().position(|&l| l == lb).unwrap();
                ls.swap(pa, pb);
                let twisted = CircularWord::new(ls).unwrap();
                assert!(!is_admissible_for_slot_order(&twisted, &so, 0, &sides));
                assert!(!is_admissible_for_slot_order(&twisted, &so, 1, &sides));
                exercised += 1;
            }
        }
        assert!(exercised >= 3, "only {exercised} twisted slots exercised");
    }

    #[test]
    fn chord_model_backend_agrees_with_prime_pair_reflection_count() {
        // sanity link to the split-decomposition backend: a prime overlap
        // structure has exactly two chord diagrams, matching the pair
        let w = word("0^0 1^0 0^1 2^0 1^1 3^0 2^1 3^1");
        let sides = sides_of_chord_model(&w);
        let domain: VertexSet = [0, 1, 2, 3].into_iter().collect();
        let ov = overlap_graph_of(&sides);
        let models = crate::circle_split::enumerate_chord_models(&ov, &domain).unwrap();
        assert_eq!(models.len(), 2);
        let (a, b) = prime_conformal_pair(&sides, &domain).unwrap();
        let as_chords: BTreeSet<ChordModel> = [a.word(), b.word()]
            .iter()
            .map(|cw| {
                ChordModel::new(cw.letters().iter().map(|l| l.v).collect()).unwrap()
            })
            .collect();
        let enumerated: BTreeSet<ChordModel> = models.into_iter().collect();
        assert_eq!(as_chords, enumerated);
    }
}
