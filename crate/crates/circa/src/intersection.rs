//! The five-way intersection matrix, per-vertex side sets and the overlap
//! graph.
//!
//! Every ordered pair of distinct vertices is classified from closed
//! neighborhoods alone: `di` for non-adjacent pairs, `cs`/`cd` for strict
//! neighborhood containment, `cc` when the two closed neighborhoods cover the
//! vertex set and each private neighbor is dominated, and `ov` otherwise.
//! Models never enter this computation; they are used downstream only to
//! validate it.

use crate::graph_core::{Graph, GraphError, Vertex, VertexSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntersectionError {
    #[error("pair classification requires distinct vertices")]
    EqualPair,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph has universal vertices; quotient it first")]
    UniversalPresent,
    #[error("graph has twins; quotient it first")]
    TwinsPresent,
}

/// Classification of an ordered vertex pair (v, u).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairType {
    /// vu is a non-edge.
    Di,
    /// N[u] is strictly contained in N[v].
    Cs,
    /// N[v] is strictly contained in N[u].
    Cd,
    /// N[v] and N[u] cover V and every private neighbor is dominated.
    Cc,
    /// Adjacent, none of the above.
    Ov,
}

impl fmt::Display for PairType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PairType::Di => "di",
            PairType::Cs => "cs",
            PairType::Cd => "cd",
            PairType::Cc => "cc",
            PairType::Ov => "ov",
        };
        f.write_str(s)
    }
}

/// n-by-n table of [`PairType`]; the diagonal is unused.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionMatrix {
    n: usize,
    entries: Vec<PairType>,
}

impl IntersectionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, v: Vertex, u: Vertex) -> PairType {
        assert_ne!(v, u, "diagonal is unused");
        self.entries[v * self.n + u]
    }
}

/// left(v) = {u : v cs u or v cc u}, right(v) = {u : v di u or v cd u}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideSets {
    pub left: Vec<VertexSet>,
    pub right: Vec<VertexSet>,
}

impl SideSets {
    pub fn n(&self) -> usize {
        self.left.len()
    }

    pub fn in_left(&self, v: Vertex, u: Vertex) -> bool {
        self.left[v].contains(&u)
    }

    pub fn in_right(&self, v: Vertex, u: Vertex) -> bool {
        self.right[v].contains(&u)
    }

    /// True iff u and v overlap (u is on neither side of v).
    pub fn overlaps(&self, v: Vertex, u: Vertex) -> bool {
        v != u && !self.in_left(v, u) && !self.in_right(v, u)
    }

    /// Restriction of the side data to `domain`, reindexed by ascending id.
    pub fn restrict(&self, domain: &VertexSet) -> (SideSets, Vec<Vertex>) {
        let old_ids: Vec<Vertex> = domain.iter().copied().collect();
        let mut new_id = vec![usize::MAX; self.n()];
        for (i, &v) in old_ids.iter().enumerate() {
            new_id[v] = i;
        }
        let remap = |s: &VertexSet| -> VertexSet {
            s.iter().filter(|u| domain.contains(u)).map(|&u| new_id[u]).collect()
        };
        let sides = SideSets {
            left: old_ids.iter().map(|&v| remap(&self.left[v])).collect(),
            right: old_ids.iter().map(|&v| remap(&self.right[v])).collect(),
        };
        (sides, old_ids)
    }
}

/// Graph on the same vertex set with edges exactly the `ov` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapGraph {
    pub graph: Graph,
}

impl OverlapGraph {
    /// The overlap relation, written u ~ v.
    pub fn sim(&self, u: Vertex, v: Vertex) -> bool {
        self.graph.has_edge(u, v)
    }

    /// The complement relation on distinct vertices, written u || v.
    pub fn par(&self, u: Vertex, v: Vertex) -> bool {
        u != v && !self.sim(u, v)
    }
}

/// Classifies the ordered pair (v, u) of distinct vertices.
///
/// The graph must be twin-free and universal-free for the containment and
/// cover clauses to be meaningful; [`build_matrix`] checks this once.
pub fn classify_pair(g: &Graph, v: Vertex, u: Vertex) -> Result<PairType, IntersectionError> {
    if v == u {
        return Err(IntersectionError::EqualPair);
    }
    let nv = g.closed_neighborhood(v)?;
    let nu = g.closed_neighborhood(u)?;
    Ok(classify_from_hoods(g, v, u, &nv, &nu))
}

fn classify_from_hoods(
    g: &Graph,
    v: Vertex,
    u: Vertex,
    nv: &VertexSet,
    nu: &VertexSet,
) -> PairType {
    if !g.has_edge(v, u) {
        return PairType::Di;
    }
    let nu_sub_nv = nu.is_subset(nv);
    let nv_sub_nu = nv.is_subset(nu);
    if nu_sub_nv && !nv_sub_nu {
        return PairType::Cs;
    }
    if nv_sub_nu && !nu_sub_nv {
        return PairType::Cd;
    }
    if !nu_sub_nv && nv.union(nu).count() == g.n() {
        let dominated = |w: Vertex, hood: &VertexSet| {
            let nw = g.closed_neighborhood(w).unwrap();
            nw.is_subset(hood) && nw.len() < hood.len()
        };
        if nv.difference(nu).all(|&w| dominated(w, nv))
            && nu.difference(nv).all(|&w| dominated(w, nu))
        {
            return PairType::Cc;
        }
    }
    PairType::Ov
}

/// Builds the full matrix, side sets and overlap graph in one pass.
pub fn build_matrix(
    g: &Graph,
) -> Result<(IntersectionMatrix, SideSets, OverlapGraph), IntersectionError> {
    if !g.universal_vertices().is_empty() {
        return Err(IntersectionError::UniversalPresent);
    }
    if g.has_twins() {
        return Err(IntersectionError::TwinsPresent);
    }
    let n = g.n();
    let hoods: Vec<VertexSet> =
        (0..n).map(|v| g.closed_neighborhood(v).unwrap()).collect();
    let mut entries = vec![PairType::Di; n * n];
    let mut left = vec![VertexSet::new(); n];
    let mut right = vec![VertexSet::new(); n];
    let mut ov = Graph::new(n);
    for v in 0..n {
        for u in 0..n {
            if u == v {
                continue;
            }
            let t = classify_from_hoods(g, v, u, &hoods[v], &hoods[u]);
            entries[v * n + u] = t;
            match t {
                PairType::Cs | PairType::Cc => {
                    left[v].insert(u);
                }
                PairType::Di | PairType::Cd => {
                    right[v].insert(u);
                }
                PairType::Ov => {
                    if u > v {
                        ov.add_edge(v, u).unwrap();
                    }
                }
            }
        }
    }
    Ok((
        IntersectionMatrix { n, entries },
        SideSets { left, right },
        OverlapGraph { graph: ov },
    ))
}
