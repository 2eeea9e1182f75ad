//! Graphical causal inference over categorical data.
//!
//! * [`graph`]: causal DAGs, trails, d-separation, back-door adjustment.
//! * [`data`]: schemas, validated data tables, stratified contingency counts.
//! * [`citest`]: G² conditional-independence tests and graph-vs-data reports.
//! * [`estimate`]: logistic fits, propensity scores, IP weights, effects.
//! * [`synth`]: categorical structural causal models, sampling, exact oracles.
//! * [`reference`]: the bundled route-choice reference graph.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod citest;
pub mod data;
pub mod estimate;
pub mod graph;
pub mod reference;
pub mod rng;
pub mod special;
pub mod synth;

pub use data::{DataTable, Schema};
pub use graph::{CausalDag, GraphError, Variable};
