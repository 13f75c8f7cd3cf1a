//! Canonical decomposition of circular-arc graphs and a polynomial-time
//! isomorphism test built on top of it.
//!
//! The pipeline goes: undirected graph -> intersection matrix and side sets ->
//! overlap graph -> conformal chord models (circular words over labeled
//! letters) -> split/modular decomposition -> metaedges, slots and slot
//! patterns -> isomorphism decision.  Exhaustive brute-force oracles validate
//! every stage on small instances.

pub mod graph_core;
pub mod intersection;
pub mod word_model;
pub mod circle_split;
pub mod modular;
pub mod conformal_core;
pub mod tnm;
pub mod isomorphism;
pub mod oracle;
