//! Goodness-of-fit machinery for ergodic scalar diffusion processes
//! `dX_t = S(X_t) dt + sigma(X_t) dW_t`.
//!
//! The crate builds the invariant law of a hypothesised model (density,
//! distribution function, median and the variance-clock functions that make
//! weighted Cramér–von Mises and Kolmogorov–Smirnov statistics
//! asymptotically distribution free), simulates stationary paths,
//! computes the empirical estimators and test statistics, samples the
//! limiting Wiener functionals for critical values, and carries the
//! composite-hypothesis correction for estimated drift parameters.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature when building without `std`. File formats, configuration and the
//! command line live in the companion `ergodiff-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("ergodiff-core requires either the `std` or the `libm` feature");

pub mod calibrate;
pub mod composite;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod law;
pub(crate) mod math;
pub mod model;
pub(crate) mod quad;
pub mod simulate;
pub mod stats;

pub use error::Error;
pub use grid::{GridPolicy, SpatialGrid};
pub use law::InvariantLaw;
pub use model::{DiffusionModel, DiffusionSpec, DriftSpec};
pub use simulate::{RngStream, SamplePath};
