//! Desk-scale training: Gaussian blobs, a small MLP encoder with manual
//! backpropagation, momentum SGD, finite-difference gradient checks, and
//! the alternating classifier/encoder demo.

mod bound_demo;
mod data;
mod gradcheck;
mod mlp;
mod trainer;

pub use bound_demo::{
    alternating_bound_demo, minimize_head, BoundDemoRow, BoundDemoTrace, INNER_MAX_ITER, INNER_TOL,
};
pub use data::{generate_blobs, Dataset, SyntheticSpec, MAX_MEAN_ATTEMPTS};
pub use gradcheck::{
    central_difference_error, finite_difference_check, gradient_suite, relative_error, suite_batch,
    GradCheckReport, GradSuiteConfig, GradSuiteRow, GRAD_FLOOR, KINK_BAND, MAX_COORDS,
};
pub use mlp::{Architecture, ForwardCache, Layer, MlpParams};
pub use trainer::{
    sgd_step, train_model, TraceRow, TrainConfig, TrainOutcome, TrainTrace, TRACE_HEADER,
};
