//! Deep-metric-learning losses with an explicit tightness/contrastive split,
//! numerical verifiers for the bounds relating them, exact discrete
//! information measures, a small training loop and retrieval metrics.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! verifiers and the CLI use.

pub mod bounds;
pub mod campaign;
pub mod check;
pub mod error;
pub mod eval;
pub mod info;
pub mod io;
pub mod losses;
pub mod numeric;
pub mod rng;
pub mod scalar;
pub mod train;

pub use check::{BoundCheck, CheckKind};
pub use error::{Error, Result};
pub use losses::{HyperParams, LossKind};
pub use numeric::LabelVector;
pub use scalar::Scalar;

pub type Matrix = numeric::Matrix<f64>;
pub type EmbeddingBatch = losses::EmbeddingBatch<f64>;
pub type SoftmaxClassifier = losses::SoftmaxClassifier<f64>;
pub type LossReport = losses::LossReport<f64>;
pub type LossGrad = losses::LossGrad<f64>;
