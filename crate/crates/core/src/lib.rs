//! Reservoir computing toolkit.
//!
//! A fixed high-dimensional dynamical system (a random echo state network or
//! a simulated qubit register) is driven by an input signal; its observed
//! state trajectory feeds a linear readout trained by ridge regression.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod esn;
pub mod experiment;
pub mod par;
pub mod qlinalg;
pub mod qrc;
pub mod readout;
pub mod reservoir;
pub mod tasks;

mod backend;

pub use backend::{Backend, BackendSpec, BackendState};
pub use error::{Error, Result};
pub use par::ExecutionMode;
pub use reservoir::{
    drive, drive_with_state, harvest, harvest_with_input, Reservoir, ReservoirDescriptor, ReservoirKind,
    StateTrajectory, TimeSeries,
};

/// Seeded generator used everywhere randomness appears; stable across platforms.
pub type SeededRng = rand_chacha::ChaCha8Rng;
