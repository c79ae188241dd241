//! `qkbench`: declarative benchmark runner for classical and quantum SVM kernels.

pub mod config;
pub mod plot;
pub mod runner;
