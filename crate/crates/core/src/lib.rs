//! Condensates in an accelerated optical lattice: exact balanced states, the
//! driven modulus equation and its chaos diagnostics, split-step evolution of
//! the field equation, and the seeded experiment and output plumbing.

pub mod chaos;
pub mod config;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod gpe;
pub mod model;
pub mod modulus;
pub mod ode;
pub mod output;
pub mod spectral;

pub use error::{Error, Result};
