//! Simulation toolkit for one-way communication when the two parties hold
//! slightly different versions of the function to compute.
//!
//! * [`model`]: bit strings, Boolean functions and one-way protocols
//! * [`dist`]: joint input distributions
//! * [`csample`]: interactive and one-way correlated sampling
//! * [`uncertain`]: the uncertain-context protocol and its Monte Carlo harness
//! * [`families`]: noisy parity pairs
//! * [`lowerbound`]: spectral and discrepancy bounds
//! * [`agreement`]: agreement-distillation audits and Chernoff tails
//! * [`oracle`]: exact communication complexity on tiny domains
//!
//! Monte Carlo loops run on rayon when the `parallel` feature is on (the
//! default); [`exec::Execution::Sequential`] is always available and gives
//! identical results.

pub mod agreement;
pub mod cli;
pub mod csample;
pub mod dist;
pub mod error;
pub mod exec;
pub mod families;
pub mod lowerbound;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod uncertain;

pub use error::{Error, Result};
