//! Multi-view modularity clustering of armed groups by their attack profiles.
//!
//! The crate turns an event table into per-year count matrices, learns one
//! similarity graph per view, clusters the groups, builds a consensus over
//! seeded runs, compares consensus partitions across years, and fits an
//! exponential-family model for co-clustering.

pub mod ensemble;
pub mod ergm;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod mvmc;
pub mod netstats;
pub mod pipeline;
pub mod stability;
pub mod synth;

pub use error::{Error, EstimationError, Result};
