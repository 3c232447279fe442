//! Point cloud neighbor graphs.
//!
//! The crate turns a raw 3D point cloud into a refined neighbor graph:
//!
//! 1. radius-capped kNN ("ball query") neighborhoods and their binary adjacency
//!    ([`construct`]),
//! 2. mutual-edge refinement, symmetric degree normalization and a truncated
//!    von Neumann power series followed by per-row top-K reselection ([`smooth`]),
//! 3. per-neighborhood covariance frames, shape descriptors and principal-axis
//!    cylindrical coordinates ([`geometry`]),
//! 4. fixed-weight neighbor aggregation operators ([`aggregate`]).
//!
//! Every stage has a brute-force or dense counterpart (see [`smooth::oracle`] and
//! the crate's test suites) so results can be checked at desk scale.
//!
//! Per-point loops run on rayon when the `parallel` feature is enabled (the
//! default) and sequentially otherwise. Outputs are identical either way.

pub mod aggregate;
pub mod cloud;
pub mod config;
pub mod construct;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod index;
pub mod io;
pub mod metrics;
pub mod neighbors;
pub mod pipeline;
pub mod smooth;
pub mod sparse;

mod par;

pub use cloud::{validate_cloud, Matrix, PointCloud, ValidationReport, Violation};
pub use config::SmoothingConfig;
pub use error::{Error, Result};
pub use neighbors::NeighborList;
pub use sparse::SparseAdjacency;
