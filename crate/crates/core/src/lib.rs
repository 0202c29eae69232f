//! Graph preprocessing for GNN inference, modeled on a reconfigurable
//! accelerator built from two kernel families:
//!
//! - the unified processing element (UPE), which sorts and samples through
//!   stable set-partitioning (prefix sum + relocation), and
//! - the single-cycle reducer (SCR), which builds pointer arrays and
//!   renumbers vertices through set-counting (comparators + reducer tree).
//!
//! The data path is functional: [`pipeline::convert`] produces a real CSC
//! graph and [`pipeline::preprocess`] a real sampled subgraph. Alongside
//! the data, each engine accounts the cycles the hardware would spend.
//! [`cost`] holds the closed-form cost functions used by the planner to
//! choose among pre-built hardware variants, and [`scenario`] replays
//! sequences of workloads under interchangeable reconfiguration policies.

pub mod cost;
pub mod error;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod pipeline;
pub mod policy;
pub mod sampling;
pub mod scenario;
pub mod scr;
pub mod upe;

pub use error::{Error, Result};
pub use graph::{CscGraph, Edge, EdgeArrayCoo, EdgeDelta, Vid};
pub use scr::ScrConfig;
pub use upe::{Cycles, UpeConfig};

/// Clock used to turn cycle counts into time when none is configured.
pub const DEFAULT_CLOCK_HZ: f64 = 100.0e6;
