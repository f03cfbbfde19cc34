#![no_std]
//! Transfer-learning Bayesian optimization for expensive dynamic problems.
//!
//! The crate is `no_std` with `alloc`. It holds the numerical parts of the
//! method: single- and multi-output Gaussian-process surrogates, source data
//! selection, warm-start initialization, UCB acquisition optimization by a
//! hybrid differential evolution, the dynamic optimization loop with its
//! baselines, moving-peaks benchmarks and the evaluation metrics. IO, the CLI
//! and file formats live in the `dynbo` crate.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod benchmarks;
pub mod bounds;
pub mod design;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod metrics;
pub mod mogp;
pub mod optim;
pub mod optimizer;
pub mod rng;
pub mod select;
pub mod surrogate;
pub mod warm;

pub use bounds::Bounds;
pub use error::{Error, Result};
pub use surrogate::Surrogate;
