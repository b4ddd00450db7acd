//! Experiment harness, file formats and configuration for the labelled
//! stochastic block model toolkit. The algorithms live in `lsbm-core`;
//! this crate owns everything that touches files: the TOML config schema,
//! the edge-list and tree text formats, CSV emission with fixed 9
//! significant-digit floats, and the overlap-vs-eps sweep driver behind
//! the `lsbm` binary.

pub mod config;
pub mod graph_io;
pub mod plot;
pub mod sweep;
pub mod textfmt;
pub mod tree_io;
