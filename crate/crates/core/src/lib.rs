//! Joint transmit beamforming and reflection design for IRS-assisted
//! integrated sensing and communication in cluttered environments.
//!
//! The crate maximises the minimum sensing beampattern gain over a set of
//! target directions subject to per-user SINR, clutter-power, cross-correlation
//! and total-power constraints, alternating between a beamforming step and a
//! reflection-phase step, each solved as a semidefinite relaxation.

pub mod altopt;
pub mod channel;
pub mod error;
pub mod matrix;
pub mod relax;
pub mod sdp;

pub use error::{Error, Result};
