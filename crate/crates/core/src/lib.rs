//! k-anonymization of spatiotemporal trajectory datasets.
//!
//! The pipeline: raw GPS records are snapped to a grid ([`model`]), each grid
//! attribute gets a binary generalization hierarchy with a bit-count loss
//! measure ([`dgh`]), trajectories are grouped by a clustering strategy
//! ([`cluster`]), each group is merged into one shared released trajectory by
//! sequence alignment ([`align`]), and the result is scored ([`metrics`]).

pub mod align;
pub mod cluster;
pub mod dgh;
pub mod metrics;
pub mod model;
