//! A small CPU neural-network engine: 2-D convolutions, dense layers, ReLU,
//! softmax cross-entropy and Adam, plus the zone classifiers built from them.
//!
//! Everything runs in `f64`. Training is bit-reproducible for a given seed when
//! run with one thread.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod model;
pub mod models;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use gradcheck::{gradient_check, GradCheck};
pub use layers::LayerSpec;
pub use model::{AdamConfig, BranchSpec, Model, ModelSpec, TrainingParams};
pub use models::{build_pdp_cnn, build_pnn, build_toa_rss_mlp, ModelKind};
pub use optim::Adam;
pub use tensor::Tensor;
pub use train::{accuracy, train, Dataset, EpochMetrics};
