//! Equivalence model between `M` colluding single-antenna eavesdroppers and a
//! single virtual eavesdropper carrying an `M`-element movable-antenna array.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: field-response vectors/matrices and per-receiver channels.
//! - [`metrics`]: instantaneous SNRs, capacities and secrecy rates.
//! - [`expectation`]: closed-form expected SNRs and the zero-gap distance.
//! - [`optimizer`]: alternating optimisation over distance and antenna positions.
//! - [`montecarlo`]: seeded sampling and empirical estimators used as oracles.
//! - [`harness`]: configuration, parameter sweeps and CSV output.

// `!(x > 0.0)` is used on purpose so that NaN fails domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod expectation;
pub mod harness;
pub mod metrics;
pub mod montecarlo;
pub mod optimizer;
pub mod params;

pub use error::{Error, Result};
pub use params::SystemParams;

/// Complex sample type used throughout the channel math.
pub type C64 = num_complex::Complex64;
