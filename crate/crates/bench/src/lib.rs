//! Datasets, update streams and the experiment runner around the
//! `sparse-pivot` clustering crate.

pub mod dataset;
pub mod experiment;
pub mod stream;
pub mod summarize;
pub mod synthetic;

pub use dataset::{DistanceMode, DriftConfig, StaticGraph};
pub use experiment::{Algo, MetricsRecord, RunConfig, RunSummary};
pub use stream::UpdateEvent;
