//! Core algorithms for the two-community labelled stochastic block model.
//!
//! The crate covers four layers of the same probabilistic object:
//!
//! - [`model`] — parameters `(a, b, mu, nu)` and the closed-form per-label
//!   quantities derived from them: flip probabilities, channel parameters,
//!   the observed label distribution and the detectability threshold `tau`.
//! - [`graph`] — sampling of labelled graphs with hidden planted types.
//! - [`bp`] — sum-product belief propagation on those graphs, plus an exact
//!   enumeration oracle for small instances.
//! - [`tree`] — the matching labelled Galton-Watson tree: broadcast process,
//!   exact maximum-likelihood root reconstruction, conductance/`Theta^2`
//!   bounds on the reconstruction advantage, and the noise-sensitivity
//!   functional `chi(d)`.
//! - [`ldp`] — the large-deviations rate function governing the growth of
//!   boundary populations in the associated branching random walk.
//!
//! The crate is `no_std` (with `alloc`); all transcendental math goes through
//! `libm` so results are identical across platforms. Everything is
//! deterministic given explicit 64-bit seeds.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bp;
pub mod graph;
pub mod ldp;
pub mod model;
pub mod rng;
pub mod tree;

pub use bp::{BpConfig, Marginals, MessageSet};
pub use graph::{LabelledEdge, LabelledGraph};
pub use model::{LabelDistribution, LabelId, LabelQuantities, LabelSet, ModelParams};
pub use tree::{LabelledTree, TreeBounds};
