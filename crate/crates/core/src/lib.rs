//! Population transfer in a driven three-level system.
//!
//! The crate shares one exact Lindblad propagator ([`dynamics`]) between
//! reference STIRAP pulses ([`stirap`]), numerical optimal control over
//! piecewise-constant pulses ([`oct`]) and a REINFORCE agent with a Gaussian
//! policy ([`rl`]). [`harness`] ties them together for the `qctrl` CLI.

pub mod dynamics;
pub mod error;
pub mod expm;
pub mod harness;
pub mod oct;
pub mod rl;
pub mod stirap;

pub use error::{Error, Result};
