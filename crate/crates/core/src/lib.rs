//! Simulation core for closed-loop balancing over a wireless link.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that does not
//! touch a file or a thread: the wheeled inverted pendulum plant, the remote
//! balancing controller, the TDMA/FDD and BLE-baseline link models, and the
//! discrete-event engine that closes the loop.
//!
//! Time inside the event engine is integer nanoseconds ([`Nanos`]) so that
//! slot arithmetic is exact; plant integration happens in `f64` seconds.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod control;
mod error;
pub mod linalg;
pub mod params;
pub mod plant;
pub mod rng;
pub mod sim;
mod stats;
mod time;
pub mod wireless;

pub use error::{Error, Result};
pub use time::Nanos;
