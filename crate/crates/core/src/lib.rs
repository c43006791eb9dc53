//! Simulation and estimation toolkit for dual-channel lock-in magnetometry
//! with a single spin.
//!
//! The crate is organised bottom-up:
//!
//! * [`physics`]: AC fields, Carr-Purcell pulse trains, closed-form
//!   accumulated phase, decoherence envelope and the fringe signal.
//! * [`readout`]: stochastic bit measurement (direct-bit and photon-count
//!   models) and the per-bit likelihood.
//! * [`pea`]: the weighted, power-of-two scheduled Bayesian phase estimator
//!   on a discretised phase grid.
//! * [`lockin`]: I/Q reconstruction of field amplitude and classical phase.
//! * [`analysis`]: sensitivity, dynamic range, time constants and the
//!   scenario runners that regenerate the figure datasets.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod lockin;
pub mod pea;
pub mod physics;
pub mod readout;
pub mod seeds;

pub use error::{Error, Result};
