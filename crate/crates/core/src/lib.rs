//! Stable-kernel laboratory.
//!
//! Reference kernels and boundary factors, Kato-class norms, the Duhamel
//! perturbation series for non-local Feynman-Kac semigroups, an independent
//! Monte Carlo estimator and a randomized inequality harness.

pub mod cli;
pub mod duhamel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod kato;
pub mod kernel;
pub mod measure;
pub mod models;
pub mod montecarlo;
pub mod pipeline;
pub mod quad;
pub mod report;
pub mod stable;

pub use error::{Error, Result};
pub use geometry::DomainGeometry;
pub use kernel::KernelParams;
