//! Dynamic correlation clustering with pivot-based algorithms.
//!
//! The crate is `no_std` (with `alloc`). It provides an adjacency store with
//! operation counters, the rank/pivot machinery, an exact reference
//! clustering, the sampling-based Sparse-Pivot insertion algorithm with its
//! cost estimators, a recompute-epoch maintenance engine, and an evaluator for
//! the correlation-clustering objective.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod estimate;
pub mod eval;
pub mod graph;
pub mod maintenance;
pub mod pivot;
pub mod reference;
pub mod sparse;

pub use error::{ClusterError, EvalError, GraphError};
pub use eval::{EvalScope, ObjectiveReport, Partition};
pub use graph::{AdjacencyStore, NodeId, NodeStatus, OpCounter};
pub use maintenance::{Clusterer, Engine, EpochState, Singletons, TriggerMode};
pub use pivot::{PivotState, RankAssignment, RankKey};
pub use reference::{static_pivot_oracle, ReferenceClustering};
pub use sparse::{break_cluster, BreakMode, ClusterCut, SampleSize, SparsePivot, SparsePivotParams, ThresholdGrid};
