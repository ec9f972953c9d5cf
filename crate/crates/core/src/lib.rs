//! Curriculum-guided Gaussian-mixture residual weighting for
//! physics-informed neural networks.
//!
//! The crate is organised around the training pipeline:
//!
//! - [`approximator`]: tanh network with exact input jets and parameter gradients
//! - [`problems`]: the six manufactured-solution benchmarks
//! - [`gmm`]: one-dimensional Gaussian mixture fitted by EM
//! - [`curriculum`]: difficulty scores, τ schedule and sample weights
//! - [`balancing`]: ReLoBRaLo loss-term weights
//! - [`optim`] and [`trainer`]: Adam, gradient descent, L-BFGS and the run loop

pub mod approximator;
pub mod balancing;
pub mod config;
pub mod curriculum;
pub mod gmm;
pub mod optim;
pub mod problems;
pub mod error;
pub mod experiment;
pub mod rng;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
