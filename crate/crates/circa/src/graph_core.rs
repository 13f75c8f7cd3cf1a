//! Undirected graphs, twin/universal-vertex preprocessing and
//! multiplicity-annotated quotient graphs.
//!
//! Vertices are dense ids `0..n`.  External names, when present, live in a
//! side table and are only used for I/O.

use std::collections::BTreeSet;
use thiserror::Error;

pub type Vertex = usize;
pub type VertexSet = BTreeSet<Vertex>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {0} out of range (n = {1})")]
    InvalidVertex(Vertex, usize),
    #[error("self-loop on vertex {0}")]
    SelfLoop(Vertex),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph has universal vertices")]
    UniversalPresent,
    #[error("graph has twins")]
    TwinsPresent,
}

/// Simple undirected graph: symmetric, irreflexive adjacency over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<VertexSet>,
    labels: Option<Vec<String>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, adj: vec![VertexSet::new(); n], labels: None }
    }

    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: Vertex, v: Vertex) -> Result<(), GraphError> {
        if u >= self.n {
            return Err(GraphError::InvalidVertex(u, self.n));
        }
        if v >= self.n {
            return Err(GraphError::InvalidVertex(v, self.n));
        }
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.adj[u].insert(v);
        self.adj[v].insert(u);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        u < self.n && self.adj[u].contains(&v)
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adj[v].len()
    }

    pub fn neighbors(&self, v: Vertex) -> &VertexSet {
        &self.adj[v]
    }

    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for &v in &self.adj[u] {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|s| s.len()).sum::<usize>() / 2
    }

    pub fn set_labels(&mut self, labels: Vec<String>) {
        assert_eq!(labels.len(), self.n);
        self.labels = Some(labels);
    }

    pub fn label(&self, v: Vertex) -> String {
        match &self.labels {
            Some(l) => l[v].clone(),
            None => v.to_string(),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// N[v]: neighbors of `v` together with `v` itself.
    pub fn closed_neighborhood(&self, v: Vertex) -> Result<VertexSet, GraphError> {
        if v >= self.n {
            return Err(GraphError::InvalidVertex(v, self.n));
        }
        let mut s = self.adj[v].clone();
        s.insert(v);
        Ok(s)
    }

    pub fn is_universal(&self, v: Vertex) -> bool {
        self.adj[v].len() == self.n - 1
    }

    pub fn universal_vertices(&self) -> Vec<Vertex> {
        (0..self.n).filter(|&v| self.is_universal(v)).collect()
    }

    /// Induced subgraph on `keep` (in ascending id order).  Returns the
    /// subgraph and the map from new ids to old ids.
    pub fn induced(&self, keep: &VertexSet) -> (Graph, Vec<Vertex>) {
        let old_ids: Vec<Vertex> = keep.iter().copied().collect();
        let mut new_id = vec![usize::MAX; self.n];
        for (i, &v) in old_ids.iter().enumerate() {
            new_id[v] = i;
        }
        let mut g = Graph::new(old_ids.len());
        for &v in &old_ids {
            for &u in &self.adj[v] {
                if u > v && keep.contains(&u) {
                    g.add_edge(new_id[v], new_id[u]).unwrap();
                }
            }
        }
        if let Some(labels) = &self.labels {
            g.set_labels(old_ids.iter().map(|&v| labels[v].clone()).collect());
        }
        (g, old_ids)
    }

    pub fn complement(&self) -> Graph {
        let mut g = Graph::new(self.n);
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.has_edge(u, v) {
                    g.add_edge(u, v).unwrap();
                }
            }
        }
        g
    }

    /// Connected components restricted to `within`, each sorted ascending;
    /// components ordered by least member.
    pub fn components_within(&self, within: &VertexSet) -> Vec<VertexSet> {
        let mut seen: VertexSet = VertexSet::new();
        let mut comps = Vec::new();
        for &start in within {
            if seen.contains(&start) {
                continue;
            }
            let mut comp = VertexSet::new();
            let mut stack = vec![start];
            seen.insert(start);
            while let Some(v) = stack.pop() {
                comp.insert(v);
                for &u in &self.adj[v] {
                    if within.contains(&u) && seen.insert(u) {
                        stack.push(u);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    pub fn components(&self) -> Vec<VertexSet> {
        self.components_within(&(0..self.n).collect())
    }

    pub fn is_connected_within(&self, within: &VertexSet) -> bool {
        self.components_within(within).len() <= 1
    }

    /// Removes all vertices that are universal in `self`, simultaneously.
    /// Removal can create new universal vertices; callers wanting a
    /// universal-free result should use [`Graph::strip_universal_cascade`].
    pub fn strip_universal(&self) -> (Graph, usize) {
        let keep: VertexSet =
            (0..self.n).filter(|&v| !self.is_universal(v)).collect();
        let removed = self.n - keep.len();
        (self.induced(&keep).0, removed)
    }

    /// Repeats [`Graph::strip_universal`] to a fixpoint.
    pub fn strip_universal_cascade(&self) -> (Graph, usize) {
        let mut g = self.clone();
        let mut removed = 0;
        loop {
            let (next, r) = g.strip_universal();
            if r == 0 {
                return (g, removed);
            }
            removed += r;
            g = next;
        }
    }

    /// Partition of the vertices into twin classes (equal closed
    /// neighborhoods), each class sorted, classes ordered by least member.
    pub fn twin_partition(&self) -> TwinPartition {
        let hoods: Vec<VertexSet> =
            (0..self.n).map(|v| self.closed_neighborhood(v).unwrap()).collect();
        let mut class_of = vec![usize::MAX; self.n];
        let mut classes: Vec<Vec<Vertex>> = Vec::new();
        for v in 0..self.n {
            if class_of[v] != usize::MAX {
                continue;
            }
            let idx = classes.len();
            let mut class = vec![v];
            class_of[v] = idx;
            for u in v + 1..self.n {
                if class_of[u] == usize::MAX && hoods[u] == hoods[v] {
                    class_of[u] = idx;
                    class.push(u);
                }
            }
            classes.push(class);
        }
        TwinPartition { classes }
    }

    /// Contracts every twin class to its least member, recording class sizes
    /// as multiplicities.  Requires a graph without universal vertices.
    pub fn twin_quotient(&self) -> Result<(MultiGraph, TwinPartition), GraphError> {
        if !self.universal_vertices().is_empty() {
            return Err(GraphError::UniversalPresent);
        }
        let partition = self.twin_partition();
        let reps: VertexSet = partition.classes.iter().map(|c| c[0]).collect();
        let (base, old_ids) = self.induced(&reps);
        let mut multiplicity = Vec::with_capacity(old_ids.len());
        for &rep in &old_ids {
            let class = partition
                .classes
                .iter()
                .find(|c| c[0] == rep)
                .expect("representant has a class");
            multiplicity.push(class.len());
        }
        Ok((MultiGraph { base, multiplicity }, partition))
    }

    pub fn has_twins(&self) -> bool {
        self.twin_partition().classes.len() != self.n
    }

    /// Parses the text format: first line `n m`, then `m` lines `u v` where
    /// endpoints are 0-based ids or names.  `#` starts a comment.
    pub fn parse(text: &str) -> Result<Graph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(GraphError::Parse {
            line: 0,
            msg: "empty input".into(),
        })?;
        let mut it = header.split_whitespace();
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(GraphError::Parse { line: hline, msg: "expected vertex count".into() })?;
        let m: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or(GraphError::Parse { line: hline, msg: "expected edge count".into() })?;
        if it.next().is_some() {
            return Err(GraphError::Parse { line: hline, msg: "trailing tokens in header".into() });
        }
        let mut g = Graph::new(n);
        let mut names: Vec<String> = Vec::new();
        let resolve = |tok: &str, names: &mut Vec<String>, line: usize| -> Result<Vertex, GraphError> {
            if let Ok(id) = tok.parse::<usize>() {
                if id >= n {
                    return Err(GraphError::Parse {
                        line,
                        msg: format!("vertex id {id} out of range"),
                    });
                }
                return Ok(id);
            }
            if let Some(pos) = names.iter().position(|s| s == tok) {
                return Ok(pos);
            }
            if names.len() >= n {
                return Err(GraphError::Parse {
                    line,
                    msg: format!("more than {n} distinct vertex names"),
                });
            }
            names.push(tok.to_string());
            Ok(names.len() - 1)
        };
        let mut count = 0;
        for (line, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(GraphError::Parse { line, msg: "expected `u v`".into() });
            }
            let u = resolve(toks[0], &mut names, line)?;
            let v = resolve(toks[1], &mut names, line)?;
            g.add_edge(u, v)
                .map_err(|e| GraphError::Parse { line, msg: e.to_string() })?;
            count += 1;
        }
        if count != m {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("header announced {m} edges, found {count}"),
            });
        }
        if !names.is_empty() {
            if names.len() != n {
                return Err(GraphError::Parse {
                    line: 0,
                    msg: format!("{} named vertices but n = {n}", names.len()),
                });
            }
            g.set_labels(names);
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edge_count());
        for (u, v) in self.edges() {
            out.push_str(&format!("{} {}\n", self.label(u), self.label(v)));
        }
        out
    }
}

/// Twin-free, universal-free base graph with a positive multiplicity per
/// vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiGraph {
    pub base: Graph,
    pub multiplicity: Vec<usize>,
}

impl MultiGraph {
    pub fn plain(base: Graph) -> Self {
        let n = base.n();
        MultiGraph { base, multiplicity: vec![1; n] }
    }
}

/// Partition of the vertices into twin classes T(v) = {w : N[v] = N[w]}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwinPartition {
    pub classes: Vec<Vec<Vertex>>,
}

impl TwinPartition {
    pub fn class_of(&self, v: Vertex) -> &[Vertex] {
        self.classes
            .iter()
            .find(|c| c.contains(&v))
            .map(|c| c.as_slice())
            .expect("vertex covered by partition")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p4() -> Graph {
        // c - a - b - d with ids c=0, a=1, b=2, d=3
        Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn closed_neighborhood_p4() {
        let g = p4();
        let got = g.closed_neighborhood(1).unwrap();
        assert_eq!(got, VertexSet::from([0, 1, 2]));
    }

    #[test]
    fn closed_neighborhood_isolated_and_complete() {
        let g = Graph::new(1);
        assert_eq!(g.closed_neighborhood(0).unwrap(), VertexSet::from([0]));
        let k3 = Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        for v in 0..3 {
            assert_eq!(k3.closed_neighborhood(v).unwrap(), VertexSet::from([0, 1, 2]));
        }
    }

    #[test]
    fn strip_universal_cases() {
        let k3 = Graph::from_edges(3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let (g, r) = k3.strip_universal_cascade();
        assert_eq!((g.n(), r), (0, 3));

        let (g, r) = p4().strip_universal();
        assert_eq!((g.n(), r), (4, 0));

        // star K1,3: center 0 is universal
        let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let (g, r) = star.strip_universal();
        assert_eq!((g.n(), r, g.edge_count()), (3, 1, 0));
    }

    #[test]
    fn twin_quotient_cases() {
        // two disjoint edges: both endpoints of each edge are twins
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let (mg, tp) = g.twin_quotient().unwrap();
        assert_eq!(mg.base.n(), 2);
        assert_eq!(mg.base.edge_count(), 0);
        assert_eq!(mg.multiplicity, vec![2, 2]);
        assert_eq!(tp.classes, vec![vec![0, 1], vec![2, 3]]);

        let (mg, _) = p4().twin_quotient().unwrap();
        assert_eq!(mg.base, p4());
        assert_eq!(mg.multiplicity, vec![1; 4]);

        // isolated vertices are not twins: their closed neighborhoods differ
        let edgeless = Graph::new(3);
        let (mg, _) = edgeless.twin_quotient().unwrap();
        assert_eq!((mg.base.n(), mg.multiplicity.clone()), (3, vec![1; 3]));
    }

    #[test]
    fn quotient_base_has_no_twins_or_universal() {
        // random-ish fixed graphs
        for edges in [
            vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)],
            vec![(0, 1), (0, 2), (1, 2), (3, 4)],
            vec![(0, 1), (2, 3), (4, 5), (0, 2)],
        ] {
            let g = Graph::from_edges(6, &edges).unwrap();
            let (g, _) = g.strip_universal_cascade();
            if g.n() == 0 {
                continue;
            }
            let (mg, _) = g.twin_quotient().unwrap();
            assert!(!mg.base.has_twins());
            assert!(mg.base.universal_vertices().is_empty());
        }
    }

    #[test]
    fn parse_roundtrip() {
        let text = "# a comment\n4 3\n0 1\n1 2\n2 3\n";
        let g = Graph::parse(text).unwrap();
        assert_eq!(g, p4());
        let named = "3 2\na b\nb c\n";
        let g = Graph::parse(named).unwrap();
        assert_eq!(g.label(0), "a");
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
        let back = Graph::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn parse_errors() {
        assert!(Graph::parse("").is_err());
        assert!(Graph::parse("2 1\n0 0\n").is_err());
        assert!(Graph::parse("2 2\n0 1\n").is_err());
        assert!(Graph::parse("2 1\n0 5\n").is_err());
    }

    #[test]
    fn components_and_complement() {
        let g = Graph::from_edges(5, &[(0, 1), (2, 3)]).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0], VertexSet::from([0, 1]));
        let c = g.complement();
        assert!(!c.has_edge(0, 1) && c.has_edge(0, 2) && c.has_edge(0, 4));
    }
}
