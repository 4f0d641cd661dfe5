//! Simulation and analysis of motional heating for a single trapped ion.
//!
//! The crate covers ambient heating from a high-temperature bath, the
//! semiclassical quantum-trajectory treatment of continuous field noise and
//! discrete photon recoil, the Doppler heating/cooling rate equation for
//! detection light, and the thermometry fits used to read motional
//! populations out of Rabi-flop data.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bath;
pub mod cli;
pub mod config;
pub mod constants;
pub mod curve;
pub mod data;
pub mod error;
pub mod fit;
pub mod io;
pub mod optim;
pub mod physics;
pub mod qtt;
pub mod rng;
pub mod scattering;
pub mod synth;
pub mod thermometry;

pub use error::{Error, Result};
