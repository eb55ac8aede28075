//! Learned simulator for spray-based plaster printing.
//!
//! A wall is a fixed in-plane particle lattice whose out-of-plane offsets
//! encode the deposited thickness. A robot sweeps a spray gun over the wall
//! in layers; each trajectory step perturbs the particles under the spray
//! cone. The crates here cover the whole loop:
//!
//! * [`geometry`] — wall grid, trajectories, spray cones, spatial queries
//! * [`dataset`] — experiment storage and the two augmentation passes that
//!   turn sparse layer scans into per-step point-cloud sequences
//! * [`oracle`] — an analytic deposition simulator used as synthetic ground
//!   truth, plus the layer-wise regression benchmark
//! * [`graph`] — per-step graph construction (node/edge features)
//! * [`model`] — the encode-process-decode message-passing network
//! * [`training`] — losses, noise-injected sampling, the gradient loop
//! * [`rollout`] — recursive multi-step prediction and evaluation metrics
//!
//! All numeric code is generic over the scalar type via
//! [`Scalar`](spraygnn_autodiff::Scalar); the pipeline instantiates the
//! aliases below.

pub mod dataset;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod rollout;
pub mod training;

pub use error::CoreError;
pub use spraygnn_autodiff::Scalar;

/// Scalar type used by the command-line pipeline.
pub type Real = f64;

pub type RealTensor = spraygnn_autodiff::Tensor<Real>;
pub type RealVec3 = geometry::Vec3<Real>;
pub type RealGrid = geometry::WallGrid<Real>;
pub type RealTrajectory = geometry::Trajectory<Real>;
pub type RealDataset = dataset::ExperimentDataset<Real>;
pub type RealGraph = graph::SprayGraph<Real>;
pub type RealModel = model::ModelParams<Real>;
