//! Training neural samplers by iterative closest points.
//!
//! The idea: draw a batch of noise from an easy origin distribution, push it
//! through a network, build a bijective correspondence between the mapped
//! points and a batch of real data (greedy closest points, the alternating
//! variant, or the exact Hungarian assignment), then regress each mapped
//! point onto its matched data point. Repeating this drives the network to
//! transform the origin distribution into the target distribution. The total
//! matched distance is an upper bound on the empirical earth mover distance,
//! so the exact assignment doubles as a convergence oracle.
//!
//! Modules:
//! - [`batch`]: flat row-major sample batches.
//! - [`nn`]: dense network with bipolar SELU hidden units, manual
//!   backpropagation, Adam, and JSON checkpoints.
//! - [`distance`]: squared Euclidean, conditioned, and softmax cross-entropy
//!   metrics with analytic gradients.
//! - [`matching`]: greedy / alternating / Hungarian assignments and the
//!   empirical earth mover distance.
//! - [`distributions`]: origin noise, synthetic targets, and MNIST IDX files.
//! - [`trainer`]: the outer iteration, metrics history, and sample generation.
//! - [`experiment`]: presets, run directories, and the CSV-emitting entry
//!   points behind the `icpgen` binary.

pub mod batch;
pub mod distance;
pub mod distributions;
mod error;
pub mod experiment;
pub mod matching;
pub mod nn;
pub mod trainer;

pub use batch::SampleBatch;
pub use distance::MetricSpec;
pub use error::{Error, Result};
pub use matching::Assignment;
pub use nn::DenseNetwork;
pub use trainer::{MetricsHistory, TrainConfig};
