//! Energy expenditure estimation from temporal silhouettes and wearable
//! accelerometers.
//!
//! The crate provides the full pipeline: a streaming multi-scale temporal
//! silhouette engine, gravity-filtered accelerometer windows, a small
//! deterministic neural network with exact backpropagation, the four model
//! variants plus a METs lookup baseline, a leave-one-subject-out evaluation
//! harness, and a deterministic synthetic dataset generator for desk-scale
//! verification.

pub mod accel;
pub mod augment;
pub mod cli;
pub mod core;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod silhouette;
pub mod synth;

pub use error::{Error, Result};
