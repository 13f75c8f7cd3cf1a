//! Circular words over labeled letters, arc models on a discrete circle, and
//! the transformations between them: normalization of arc models,
//! straightening into oriented chord models, and bending back.
//!
//! A labeled letter `v^0` marks the tail of vertex v's chord (the start of its
//! arc, clockwise) and `v^1` the head (the arc's end).  Circular words compare
//! up to rotation; the canonical form is the lexicographically least rotation
//! under (vertex id, end tag).
//!
//! Conventions: circle positions increase clockwise.  The left side of an
//! oriented chord is the open clockwise interval from its tail to its head,
//! which is exactly where the bent arc lies.

use crate::graph_core::{Vertex, VertexSet};
use crate::intersection::{IntersectionMatrix, PairType, SideSets};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WordError {
    #[error("letter {0:?} appears more than once")]
    DuplicateLetter(Letter),
    #[error("unknown letter {0:?}")]
    UnknownLetter(Letter),
    #[error("malformed word: {0}")]
    Malformed(String),
    #[error("arc endpoints must be distinct and within the circle")]
    BadArc,
    #[error("arc model is not a model of the given matrix (disjointness mismatch at pair {0}, {1})")]
    NotAModel(Vertex, Vertex),
    #[error("arc model is not normalized (pair {0}, {1})")]
    NotNormalized(Vertex, Vertex),
    #[error("word is not conformal: {0}")]
    NotConformal(String),
    #[error("normalization did not converge within {0} pulls")]
    NormalizationDiverged(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

/// One chord endpoint: vertex id plus end tag (0 = tail, 1 = head).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub v: Vertex,
    pub tag: u8,
}

impl Letter {
    pub fn tail(v: Vertex) -> Self {
        Letter { v, tag: 0 }
    }

    pub fn head(v: Vertex) -> Self {
        Letter { v, tag: 1 }
    }

    pub fn flipped(self) -> Self {
        Letter { v: self.v, tag: 1 - self.tag }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.v, self.tag)
    }
}

/// A sequence of distinct labeled letters read clockwise, up to rotation.
#[derive(Debug, Clone, Eq)]
pub struct CircularWord {
    letters: Vec<Letter>,
}

impl PartialEq for CircularWord {
    /// Equality up to rotation.
    fn eq(&self, other: &Self) -> bool {
        self.canonical_letters() == other.canonical_letters()
    }
}

impl PartialOrd for CircularWord {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CircularWord {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.canonical_letters().cmp(&other.canonical_letters())
    }
}

impl std::hash::Hash for CircularWord {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.canonical_letters().hash(state);
    }
}

impl CircularWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self, WordError> {
        let mut seen = BTreeSet::new();
        for &l in &letters {
            if !seen.insert(l) {
                return Err(WordError::DuplicateLetter(l));
            }
        }
        Ok(CircularWord { letters })
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn letter_set(&self) -> BTreeSet<Letter> {
        self.letters.iter().copied().collect()
    }

    pub fn vertices(&self) -> VertexSet {
        self.letters.iter().map(|l| l.v).collect()
    }

    fn canonical_letters(&self) -> Vec<Letter> {
        if self.letters.is_empty() {
            return Vec::new();
        }
        let n = self.letters.len();
        let mut best: Option<Vec<Letter>> = None;
        for start in 0..n {
            let rot: Vec<Letter> =
                (0..n).map(|i| self.letters[(start + i) % n]).collect();
            if best.as_ref().map_or(true, |b| rot < *b) {
                best = Some(rot);
            }
        }
        best.unwrap()
    }

    /// Lexicographically least rotation.
    pub fn canonical(&self) -> CircularWord {
        CircularWord { letters: self.canonical_letters() }
    }

    /// Reverse traversal with end tags swapped.
    pub fn reflect(&self) -> CircularWord {
        CircularWord {
            letters: self.letters.iter().rev().map(|l| l.flipped()).collect(),
        }
    }

    /// Keeps only `keep`, preserving the cyclic order.
    pub fn restrict_circular(&self, keep: &BTreeSet<Letter>) -> Result<CircularWord, WordError> {
        let present = self.letter_set();
        if let Some(&l) = keep.iter().find(|l| !present.contains(l)) {
            return Err(WordError::UnknownLetter(l));
        }
        Ok(CircularWord {
            letters: self.letters.iter().copied().filter(|l| keep.contains(l)).collect(),
        })
    }

    /// Maximal contiguous runs of `keep` in the circular order, each returned
    /// as a linear word; runs ordered by their starting position.
    pub fn restrict_segments(&self, keep: &BTreeSet<Letter>) -> Result<Vec<Vec<Letter>>, WordError> {
        let present = self.letter_set();
        if let Some(&l) = keep.iter().find(|l| !present.contains(l)) {
            return Err(WordError::UnknownLetter(l));
        }
        let n = self.letters.len();
        let kept: Vec<bool> = self.letters.iter().map(|l| keep.contains(l)).collect();
        if kept.iter().all(|&k| k) {
            return Ok(if n == 0 { vec![] } else { vec![self.letters.clone()] });
        }
        let mut runs = Vec::new();
        for start in 0..n {
            if kept[start] && !kept[(start + n - 1) % n] {
                let mut run = Vec::new();
                let mut i = start;
                while kept[i] {
                    run.push(self.letters[i]);
                    i = (i + 1) % n;
                }
                runs.push(run);
            }
        }
        Ok(runs)
    }

    fn positions(&self) -> BTreeMap<Letter, usize> {
        self.letters.iter().enumerate().map(|(i, &l)| (l, i)).collect()
    }

    /// True iff `idx` lies in the open clockwise interval (from, to).
    fn between(&self, from: usize, to: usize, idx: usize) -> bool {
        let n = self.letters.len();
        let d_end = (to + n - from) % n;
        let d_idx = (idx + n - from) % n;
        d_idx > 0 && d_idx < d_end
    }

    /// True iff the chords of u and v cross (their endpoints interleave).
    /// Both vertices must appear with both end tags.
    pub fn chords_cross(&self, u: Vertex, v: Vertex) -> bool {
        let pos = self.positions();
        let v0 = pos[&Letter::tail(v)];
        let v1 = pos[&Letter::head(v)];
        let u0 = pos[&Letter::tail(u)];
        let u1 = pos[&Letter::head(u)];
        self.between(v0, v1, u0) != self.between(v0, v1, u1)
    }

    /// True iff the chord of u lies entirely on the left side of the oriented
    /// chord of v (the open clockwise interval from v's tail to v's head).
    pub fn chord_on_left(&self, v: Vertex, u: Vertex) -> bool {
        let pos = self.positions();
        let v0 = pos[&Letter::tail(v)];
        let v1 = pos[&Letter::head(v)];
        let u0 = pos[&Letter::tail(u)];
        let u1 = pos[&Letter::head(u)];
        self.between(v0, v1, u0) && self.between(v0, v1, u1)
    }

    /// True iff the chord of u lies entirely on the right side of the oriented
    /// chord of v.
    pub fn chord_on_right(&self, v: Vertex, u: Vertex) -> bool {
        let pos = self.positions();
        let v0 = pos[&Letter::tail(v)];
        let v1 = pos[&Letter::head(v)];
        let u0 = pos[&Letter::tail(u)];
        let u1 = pos[&Letter::head(u)];
        self.between(v1, v0, u0) && self.between(v1, v0, u1)
    }

    /// Parses a single line of `name^0` / `name^1` tokens.  Names are resolved
    /// through `labels` when given, otherwise they must be numeric ids.
    pub fn parse(text: &str, labels: Option<&[String]>) -> Result<CircularWord, WordError> {
        let mut letters = Vec::new();
        for tok in text.split_whitespace() {
            let (name, tag) = tok
                .rsplit_once('^')
                .ok_or_else(|| WordError::Parse(format!("token `{tok}` lacks `^0`/`^1`")))?;
            let tag: u8 = match tag {
                "0" => 0,
                "1" => 1,
                _ => return Err(WordError::Parse(format!("bad end tag in `{tok}`"))),
            };
            let v = match labels {
                Some(ls) => ls
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| WordError::Parse(format!("unknown vertex `{name}`")))?,
                None => name
                    .parse()
                    .map_err(|_| WordError::Parse(format!("bad vertex id `{name}`")))?,
            };
            letters.push(Letter { v, tag });
        }
        CircularWord::new(letters)
    }

    pub fn display(&self, labels: Option<&[String]>) -> String {
        self.letters
            .iter()
            .map(|l| match labels {
                Some(ls) => format!("{}^{}", ls[l.v], l.tag),
                None => format!("{}^{}", l.v, l.tag),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for CircularWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display(None))
    }
}

/// Geometric relation between two arcs with distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Disjoint,
    Contains,
    Contained,
    Cover,
    Overlap,
}

impl Geometry {
    pub fn matches(self, t: PairType) -> bool {
        matches!(
            (self, t),
            (Geometry::Disjoint, PairType::Di)
                | (Geometry::Contains, PairType::Cs)
                | (Geometry::Contained, PairType::Cd)
                | (Geometry::Cover, PairType::Cc)
                | (Geometry::Overlap, PairType::Ov)
        )
    }
}

/// Arc model on a discrete circle with `2n` distinct endpoint positions.
/// Arc of vertex v runs clockwise from `arcs[v].0` to `arcs[v].1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArcModel {
    circle: usize,
    arcs: Vec<(usize, usize)>,
}

impl ArcModel {
    pub fn new(arcs: Vec<(usize, usize)>) -> Result<Self, WordError> {
        let circle = 2 * arcs.len();
        let mut used = vec![false; circle];
        for &(s, e) in &arcs {
            if s >= circle || e >= circle || s == e {
                return Err(WordError::BadArc);
            }
            for p in [s, e] {
                if used[p] {
                    return Err(WordError::BadArc);
                }
                used[p] = true;
            }
        }
        Ok(ArcModel { circle, arcs })
    }

    pub fn n(&self) -> usize {
        self.arcs.len()
    }

    pub fn circle(&self) -> usize {
        self.circle
    }

    pub fn arc(&self, v: Vertex) -> (usize, usize) {
        self.arcs[v]
    }

    /// Endpoints read clockwise as labeled letters: the arc start is the tail.
    pub fn sequence(&self) -> Vec<Letter> {
        let mut seq = vec![Letter::tail(0); self.circle];
        for (v, &(s, e)) in self.arcs.iter().enumerate() {
            seq[s] = Letter::tail(v);
            seq[e] = Letter::head(v);
        }
        seq
    }

    /// Rebuilds a model from a clockwise endpoint sequence.
    pub fn from_sequence(seq: &[Letter]) -> Result<Self, WordError> {
        if seq.len() % 2 != 0 {
            return Err(WordError::Malformed("odd endpoint count".into()));
        }
        let n = seq.len() / 2;
        let mut arcs = vec![(usize::MAX, usize::MAX); n];
        for (p, &l) in seq.iter().enumerate() {
            if l.v >= n {
                return Err(WordError::Malformed(format!("vertex {} out of range", l.v)));
            }
            let slot = if l.tag == 0 { &mut arcs[l.v].0 } else { &mut arcs[l.v].1 };
            if *slot != usize::MAX {
                return Err(WordError::DuplicateLetter(l));
            }
            *slot = p;
        }
        if arcs.iter().any(|&(s, e)| s == usize::MAX || e == usize::MAX) {
            return Err(WordError::Malformed("missing endpoint".into()));
        }
        ArcModel::new(arcs)
    }

    fn in_arc(&self, v: Vertex, p: usize) -> bool {
        let (s, e) = self.arcs[v];
        let span = (e + self.circle - s) % self.circle;
        let d = (p + self.circle - s) % self.circle;
        d <= span
    }

    /// Geometric classification of the arcs of v and u.
    pub fn geometry(&self, v: Vertex, u: Vertex) -> Geometry {
        let (su, eu) = self.arcs[u];
        let (sv, ev) = self.arcs[v];
        let u_in_v = self.in_arc(v, su) as u8 + self.in_arc(v, eu) as u8;
        let v_in_u = self.in_arc(u, sv) as u8 + self.in_arc(u, ev) as u8;
        match (u_in_v, v_in_u) {
            (0, 0) => Geometry::Disjoint,
            (2, 2) => Geometry::Cover,
            (2, _) => Geometry::Contains,
            (_, 2) => Geometry::Contained,
            _ => Geometry::Overlap,
        }
    }

    /// A model of the graph behind `m` intersects exactly at the non-`di`
    /// pairs.
    pub fn check_model_of(&self, m: &IntersectionMatrix) -> Result<(), WordError> {
        for v in 0..self.n() {
            for u in v + 1..self.n() {
                let disjoint = self.geometry(v, u) == Geometry::Disjoint;
                if disjoint != (m.get(v, u) == PairType::Di) {
                    return Err(WordError::NotAModel(v, u));
                }
            }
        }
        Ok(())
    }

    pub fn is_normalized(&self, m: &IntersectionMatrix) -> bool {
        self.first_violation(m).is_none()
    }

    fn first_violation(&self, m: &IntersectionMatrix) -> Option<(Vertex, Vertex)> {
        for v in 0..self.n() {
            for u in 0..self.n() {
                if u != v && !self.geometry(v, u).matches(m.get(v, u)) {
                    return Some((v, u));
                }
            }
        }
        None
    }

    /// Normalizes the model against `m` by pulling endpoints: containment
    /// violations first, then circle-cover violations, repeated to a fixpoint
    /// with a pull budget of 4n^2.
    pub fn normalize(&self, m: &IntersectionMatrix) -> Result<ArcModel, WordError> {
        self.check_model_of(m)?;
        let n = self.n();
        let cap = 4 * n * n + 4;
        let mut seq = self.sequence();
        // containment pairs sorted by decreasing container neighborhood size,
        // so that outer containers settle before the arcs inside them grow
        let mut cs_pairs: Vec<(Vertex, Vertex)> = Vec::new();
        for v in 0..n {
            for u in 0..n {
                if u != v && m.get(v, u) == PairType::Cs {
                    cs_pairs.push((v, u));
                }
            }
        }
        cs_pairs.sort_by_key(|&(v, u)| {
            (std::cmp::Reverse((0..n).filter(|&w| w == v || m.get(v, w) != PairType::Di).count()), v, u)
        });
        for _ in 0..cap {
            let model = ArcModel::from_sequence(&seq)?;
            if let Some(&(v, u)) = cs_pairs
                .iter()
                .find(|&&(v, u)| model.geometry(v, u) != Geometry::Contains)
            {
                seq = pull_containment(&seq, v, u);
                continue;
            }
            let mut pulled = false;
            'cover: for v in 0..n {
                for u in v + 1..n {
                    if m.get(v, u) == PairType::Cc && model.geometry(v, u) != Geometry::Cover {
                        seq = pull_cover(&seq, v, u, m)?;
                        pulled = true;
                        break 'cover;
                    }
                }
            }
            if !pulled {
                let model = ArcModel::from_sequence(&seq)?;
                return if model.is_normalized(m) {
                    Ok(model)
                } else {
                    let (v, u) = model.first_violation(m).unwrap();
                    Err(WordError::NotNormalized(v, u))
                };
            }
        }
        Err(WordError::NormalizationDiverged(cap))
    }

    /// Converts a normalized model into the conformal word: each arc becomes
    /// an oriented chord with the arc on its left.
    pub fn straighten(&self, sides: &SideSets) -> Result<ConformalModel, WordError> {
        for v in 0..self.n() {
            for u in 0..self.n() {
                if u != v && !self.geometry(v, u).matches(pair_type_from_sides(sides, v, u)) {
                    return Err(WordError::NotNormalized(v, u));
                }
            }
        }
        let word = CircularWord::new(self.sequence())?;
        ConformalModel::new(word, sides)
    }

    /// Parses the text format: line `circle 2n`, then per vertex
    /// `name start end`.
    pub fn parse(text: &str, labels: Option<&[String]>) -> Result<(ArcModel, Vec<String>), WordError> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| WordError::Parse("empty input".into()))?;
        let circle: usize = header
            .strip_prefix("circle")
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| WordError::Parse("expected `circle 2n` header".into()))?;
        let mut names = Vec::new();
        let mut arcs = Vec::new();
        for l in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(WordError::Parse(format!("expected `name start end`, got `{l}`")));
            }
            let s: usize = toks[1]
                .parse()
                .map_err(|_| WordError::Parse(format!("bad position `{}`", toks[1])))?;
            let e: usize = toks[2]
                .parse()
                .map_err(|_| WordError::Parse(format!("bad position `{}`", toks[2])))?;
            names.push(toks[0].to_string());
            arcs.push((s, e));
        }
        if let Some(ls) = labels {
            let mut ordered = vec![(0, 0); names.len()];
            if names.len() != ls.len() {
                return Err(WordError::Parse("vertex count mismatch".into()));
            }
            for (name, arc) in names.iter().zip(&arcs) {
                let id = ls
                    .iter()
                    .position(|l| l == name)
                    .ok_or_else(|| WordError::Parse(format!("unknown vertex `{name}`")))?;
                ordered[id] = *arc;
            }
            arcs = ordered;
            names = ls.to_vec();
        }
        let model = ArcModel::new(arcs)?;
        if model.circle() != circle {
            return Err(WordError::Parse(format!(
                "header circle {circle} does not match {} endpoints",
                2 * model.n()
            )));
        }
        Ok((model, names))
    }

    pub fn to_text(&self, labels: Option<&[String]>) -> String {
        let mut out = format!("circle {}\n", self.circle);
        for (v, &(s, e)) in self.arcs.iter().enumerate() {
            let name = match labels {
                Some(ls) => ls[v].clone(),
                None => v.to_string(),
            };
            out.push_str(&format!("{name} {s} {e}\n"));
        }
        out
    }
}

/// Reconstructs the pair classification from side-set membership.
pub fn pair_type_from_sides(sides: &SideSets, v: Vertex, u: Vertex) -> PairType {
    let ul = sides.in_left(v, u);
    let ur = sides.in_right(v, u);
    let vl = sides.in_left(u, v);
    let vr = sides.in_right(u, v);
    match (ul, ur, vl, vr) {
        (false, true, false, true) => PairType::Di,
        (true, false, false, true) => PairType::Cs,
        (false, true, true, false) => PairType::Cd,
        (true, false, true, false) => PairType::Cc,
        (false, false, false, false) => PairType::Ov,
        _ => panic!("inconsistent side sets for pair ({v}, {u})"),
    }
}

/// Moves the endpoint of v's arc lying inside u's arc just outside it, so
/// that v's arc contains u's arc (or progresses toward it).
fn pull_containment(seq: &[Letter], v: Vertex, u: Vertex) -> Vec<Letter> {
    let model = ArcModel::from_sequence(seq).expect("valid sequence");
    let (sv, ev) = model.arc(v);
    let (su, eu) = model.arc(u);
    // prefer moving v's head just past u's head; fall back to moving v's
    // tail just before u's tail
    let (moved, target, after) = if model.in_arc(u, ev) {
        (Letter::head(v), eu, true)
    } else {
        debug_assert!(model.in_arc(u, sv));
        (Letter::tail(v), su, false)
    };
    let mut out: Vec<Letter> = Vec::with_capacity(seq.len());
    for (p, &l) in seq.iter().enumerate() {
        if l == moved {
            continue;
        }
        if p == target && !after {
            out.push(moved);
        }
        out.push(l);
        if p == target && after {
            out.push(moved);
        }
    }
    out
}

/// Swaps the two outside endpoints of a circle-cover pair past each other,
/// choosing a meeting point in the gap that keeps the arcs a model of the
/// graph behind `m`.
fn pull_cover(
    seq: &[Letter],
    v: Vertex,
    u: Vertex,
    m: &IntersectionMatrix,
) -> Result<Vec<Letter>, WordError> {
    let model = ArcModel::from_sequence(seq).expect("valid sequence");
    let (sv, ev) = model.arc(v);
    let (su, eu) = model.arc(u);
    let v_out = if model.in_arc(u, sv) { Letter::head(v) } else { Letter::tail(v) };
    let u_out = if model.in_arc(v, su) { Letter::head(u) } else { Letter::tail(u) };
    let pos = |l: Letter| if l.tag == 0 { model.arc(l.v).0 } else { model.arc(l.v).1 };
    let pv = pos(v_out);
    let pu = pos(u_out);
    debug_assert!(!model.in_arc(u, pv) && !model.in_arc(v, pu));
    let circle = seq.len();
    // the gap runs clockwise from one outside endpoint to the other and
    // contains none of the four arc endpoints of u and v
    let four = [sv, ev, su, eu];
    let cw_gap_free = |from: usize, to: usize| {
        let span = (to + circle - from) % circle;
        four.iter().all(|&p| {
            let d = (p + circle - from) % circle;
            !(d > 0 && d < span)
        })
    };
    let (gap_from, gap_to) = if cw_gap_free(pv, pu) { (pv, pu) } else { (pu, pv) };
    debug_assert!(cw_gap_free(gap_from, gap_to));
    let from_letter = seq[gap_from];
    let to_letter = seq[gap_to];
    let mut gap = Vec::new();
    let mut i = (gap_from + 1) % circle;
    while i != gap_to {
        gap.push(seq[i]);
        i = (i + 1) % circle;
    }
    // rebuild with the boundary endpoints swapped at meeting point j
    for j in 0..=gap.len() {
        let mut out = Vec::with_capacity(circle);
        let mut i = gap_to;
        loop {
            i = (i + 1) % circle;
            if i == gap_from {
                break;
            }
            out.push(seq[i]);
        }
        // segment was [from, gap..., to]; becomes [gap_1..j, to, from, gap_j+1..]
        out.extend_from_slice(&gap[..j]);
        out.push(to_letter);
        out.push(from_letter);
        out.extend_from_slice(&gap[j..]);
        let cand = ArcModel::from_sequence(&out)?;
        if cand.check_model_of(m).is_ok() {
            return Ok(out);
        }
    }
    Err(WordError::NotAModel(v, u))
}

/// Validation report for conformality checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformalViolation {
    pub v: Vertex,
    pub u: Vertex,
    pub reason: String,
}

/// Checks a word against side sets: chords must cross exactly at overlap
/// pairs, and non-crossing chords must fall on the prescribed side.  The
/// word's own vertex set is the domain; side sets use global vertex ids.
pub fn check_conformal(w: &CircularWord, sides: &SideSets) -> Result<(), ConformalViolation> {
    let domain = w.vertices();
    for &l in w.letters() {
        let present = w.letter_set();
        if !present.contains(&l.flipped()) {
            return Err(ConformalViolation {
                v: l.v,
                u: l.v,
                reason: format!("letter {l} lacks its partner"),
            });
        }
    }
    let verts: Vec<Vertex> = domain.iter().copied().collect();
    for (i, &v) in verts.iter().enumerate() {
        for &u in &verts[i + 1..] {
            let cross = w.chords_cross(u, v);
            if cross != sides.overlaps(v, u) {
                return Err(ConformalViolation {
                    v,
                    u,
                    reason: "crossing pattern differs from overlap relation".into(),
                });
            }
            if cross {
                continue;
            }
            for (a, b) in [(v, u), (u, v)] {
                let want_left = sides.in_left(a, b);
                let on_left = w.chord_on_left(a, b);
                if want_left != on_left {
                    return Err(ConformalViolation {
                        v: a,
                        u: b,
                        reason: format!(
                            "chord of {b} should be on the {} side of {a}",
                            if want_left { "left" } else { "right" }
                        ),
                    });
                }
            }
        }
    }
    Ok(())
}

pub fn is_conformal(w: &CircularWord, sides: &SideSets) -> bool {
    check_conformal(w, sides).is_ok()
}

/// A circular word validated as a conformal model against side sets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConformalModel {
    word: CircularWord,
}

impl ConformalModel {
    pub fn new(word: CircularWord, sides: &SideSets) -> Result<Self, WordError> {
        check_conformal(&word, sides)
            .map_err(|v| WordError::NotConformal(format!("pair ({}, {}): {}", v.v, v.u, v.reason)))?;
        Ok(ConformalModel { word })
    }

    pub fn word(&self) -> &CircularWord {
        &self.word
    }

    pub fn into_word(self) -> CircularWord {
        self.word
    }

    /// Places every chord's arc on its left side, producing an arc model that
    /// is normalized for the matrix behind `sides`.
    pub fn bend(&self) -> Result<ArcModel, WordError> {
        ArcModel::from_sequence(self.word.letters())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_core::Graph;
    use crate::intersection::build_matrix;

    fn w(spec: &[(usize, u8)]) -> CircularWord {
        CircularWord::new(spec.iter().map(|&(v, t)| Letter { v, tag: t }).collect()).unwrap()
    }

    /// The hexagon word from the running example, vertices v1..v6 as 0..5:
    /// v2^0 v1^1 v3^0 v2^1 v4^0 v3^1 v5^0 v4^1 v6^0 v5^1 v1^0 v6^1
    fn c6_word() -> CircularWord {
        w(&[
            (1, 0),
            (0, 1),
            (2, 0),
            (1, 1),
            (3, 0),
            (2, 1),
            (4, 0),
            (3, 1),
            (5, 0),
            (4, 1),
            (0, 0),
            (5, 1),
        ])
    }

    fn c6() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap()
    }

    #[test]
    fn circular_equality_up_to_rotation() {
        let a = w(&[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let b = w(&[(0, 1), (1, 1), (0, 0), (1, 0)]);
        assert_eq!(a, b);
        let c = w(&[(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_ne!(a, c);
    }

    #[test]
    fn restriction_examples() {
        let phi = c6_word();
        // A' = {v1^0, v1^1, v6^0, v6^1}
        let keep = BTreeSet::from([
            Letter::tail(0),
            Letter::head(0),
            Letter::tail(5),
            Letter::head(5),
        ]);
        let circ = phi.restrict_circular(&keep).unwrap();
        assert_eq!(circ, w(&[(5, 0), (0, 0), (5, 1), (0, 1)]));
        let mut segs = phi.restrict_segments(&keep).unwrap();
        segs.sort();
        assert_eq!(segs.len(), 3);
        assert!(segs.contains(&vec![Letter::tail(5)]));
        assert!(segs.contains(&vec![Letter::head(0)]));
        assert!(segs.contains(&vec![Letter::tail(0), Letter::head(5)]));
        // identity restriction
        let all = phi.letter_set();
        assert_eq!(phi.restrict_circular(&all).unwrap(), phi);
    }

    #[test]
    fn reflection_example() {
        // phi = v2^0 v4^1 v1^0 v2^1 v3^0 v1^1 v4^0 v3^1 (v1..v4 as 0..3)
        let phi = w(&[(1, 0), (3, 1), (0, 0), (1, 1), (2, 0), (0, 1), (3, 0), (2, 1)]);
        // phi^R = v3^0 v4^1 v1^0 v3^1 v2^0 v1^1 v4^0 v2^1
        let expect = w(&[(2, 0), (3, 1), (0, 0), (2, 1), (1, 0), (0, 1), (3, 0), (1, 1)]);
        assert_eq!(phi.reflect(), expect);
        assert_eq!(phi.reflect().reflect(), phi);
        let single = w(&[(0, 0), (0, 1)]);
        assert_eq!(single.reflect(), single);
    }

    #[test]
    fn c6_word_is_conformal_and_bends_to_normalized_model() {
        let (m, sides, _) = build_matrix(&c6()).unwrap();
        let phi = ConformalModel::new(c6_word(), &sides).unwrap();
        let psi = phi.bend().unwrap();
        assert!(psi.is_normalized(&m));
        let back = psi.straighten(&sides).unwrap();
        assert_eq!(back.word(), &c6_word());
    }

    #[test]
    fn tag_swap_breaks_conformality() {
        let (_, sides, _) = build_matrix(&c6()).unwrap();
        let mut letters = c6_word().letters().to_vec();
        for l in letters.iter_mut() {
            if l.v == 0 {
                *l = l.flipped();
            }
        }
        let bad = CircularWord::new(letters).unwrap();
        assert!(!is_conformal(&bad, &sides));
    }

    #[test]
    fn empty_word_is_conformal() {
        let (_, sides, _) = build_matrix(&c6()).unwrap();
        let empty = CircularWord::new(vec![]).unwrap();
        assert!(is_conformal(&empty, &sides));
    }

    #[test]
    fn normalize_containment_violation() {
        // path c - a - b - d (ids 0,1,2,3): a cs c, b cs d, a cc b.
        // build a sloppy model: c's arc sticks out of a's arc
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let (m, _, _) = build_matrix(&g).unwrap();
        // c = [7,1] pokes out of a = [0,3]; d = [4,6] pokes out of b = [2,5];
        // a and b merely overlap although a cc b is required
        let psi = ArcModel::new(vec![(7, 1), (0, 3), (2, 5), (4, 6)]).unwrap();
        assert!(psi.check_model_of(&m).is_ok());
        assert!(!psi.is_normalized(&m));
        let norm = psi.normalize(&m).unwrap();
        assert!(norm.is_normalized(&m));
        // fixpoint
        let again = norm.normalize(&m).unwrap();
        assert_eq!(again.sequence(), norm.sequence());
    }

    #[test]
    fn normalize_preserves_already_normalized() {
        let g = c6();
        let (m, sides, _) = build_matrix(&g).unwrap();
        let psi = ConformalModel::new(c6_word(), &sides).unwrap().bend().unwrap();
        let norm = psi.normalize(&m).unwrap();
        assert_eq!(norm.sequence(), psi.sequence());
    }

    #[test]
    fn arc_model_text_roundtrip() {
        let psi = ArcModel::new(vec![(0, 2), (1, 3)]).unwrap();
        let text = psi.to_text(None);
        let (back, _) = ArcModel::parse(&text, None).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn word_text_roundtrip() {
        let phi = c6_word();
        let text = phi.display(None);
        let back = CircularWord::parse(&text, None).unwrap();
        assert_eq!(back, phi);
    }

    #[test]
    fn geometry_classification() {
        // circle of 8: disjoint, contains, cover, overlap
        let psi = ArcModel::new(vec![(0, 4), (1, 2), (6, 7), (3, 5)]).unwrap();
        assert_eq!(psi.geometry(0, 1), Geometry::Contains);
        assert_eq!(psi.geometry(1, 0), Geometry::Contained);
        assert_eq!(psi.geometry(0, 2), Geometry::Disjoint);
        assert_eq!(psi.geometry(0, 3), Geometry::Overlap);
        let cover = ArcModel::new(vec![(0, 3), (2, 1)]).unwrap();
        assert_eq!(cover.geometry(0, 1), Geometry::Cover);
    }
}
