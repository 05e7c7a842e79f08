//! Manifold fitting from noisy samples through convex support oracles.

pub mod cloud;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod net;
pub mod noise;
pub mod oracles;
pub mod output;
pub mod pca;
pub mod pipeline;
pub mod rng;
pub mod support;

pub use cloud::PointCloud;
pub use config::{ExperimentConfig, Mode};
pub use error::{MfError, Result};
pub use geometry::{GeometricBounds, Subspace};
pub use io::PointCloudFile;
pub use manifold::{AnalyticManifold, ManifoldSpec, Shape};
pub use net::{NetConfig, NetParams, ReconstructionNet};
pub use output::{ImplicitManifold, ManifoldDocument, OutputConfig};
pub use pca::AffineSubspace;
