//! Simulation and analysis of a source–destination link assisted by `K`
//! mobile, buffered, half-duplex relays.
//!
//! The crate is split into the physical model ([`geometry`], [`channel`]),
//! the traffic model ([`traffic`]), the frame-level relay protocols
//! ([`protocols`]), the frame loop and experiment drivers ([`engine`]) and
//! closed-form calculators ([`analysis`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod channel;
pub mod engine;
mod error;
pub mod geometry;
pub mod protocols;
pub mod rng;
pub mod traffic;

pub use error::{Error, Result};
