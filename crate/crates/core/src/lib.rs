//! Link-level model of joint OAM-mode and OFDM-subcarrier multiplexing (HODM)
//! over a sparse specular multipath channel.
//!
//! The modules build on each other in this order: [`geometry`] produces
//! per-element gains and delays, [`modem`] runs frames through them,
//! [`blockchannel`] gives the closed-form per-(mode, subcarrier) gains the
//! modem should measure, [`detection`] models zero-forcing under channel
//! estimation error and [`capacity`] water-fills over fading ensembles.

pub mod blockchannel;
pub mod capacity;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod modem;
pub mod random;

pub use error::{Error, Result};
