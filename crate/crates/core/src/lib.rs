//! Trainable quantum kernels benchmarked against classical SVM kernels.
//!
//! The crate is organised bottom-up:
//!
//! * [`statevec`]: dense statevector simulator (Ry, Rz, CNOT, state preparation).
//! * [`featuremap`]: amplitude and truncated coherent-state encoders plus the
//!   layered ansatz with its data-scaling multiplier.
//! * [`kernels`]: Gram matrices for the quantum and classical kernels.
//! * [`kta`]: kernel-target alignment, its parameter-shift gradient and Adam training.
//! * [`svm`]: SMO solver over precomputed kernels, one-vs-one multiclass.
//! * [`datapipe`]: CSV ingestion, imputation, scaling, PCA, stratified splits,
//!   learning curves and synthetic datasets.
//! * [`search`]: grid search for classical kernels and the two-stage randomized
//!   search used for quantum kernels.

pub mod datapipe;
pub mod error;
pub mod featuremap;
pub mod kernels;
pub mod kta;
pub mod search;
pub mod statevec;
pub mod svm;

pub use error::{Error, ErrorKind, Result};

/// Dense real matrix used for samples and Gram matrices.
pub type Matrix = nalgebra::DMatrix<f64>;
