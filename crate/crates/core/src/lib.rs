//! Steady-state fault analysis of an IBR-fed offshore collector and the
//! percentage differential elements that protect it.

pub mod error;
pub mod ibr;
pub mod network;
pub mod phasor;
pub mod relays;
pub mod scenarios;
pub mod system;

pub use error::{Error, Result};
