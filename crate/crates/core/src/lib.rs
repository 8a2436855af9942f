//! Receiver-aware TV white-space availability.
//!
//! The core answers "which channels may a white-space device use here, and
//! at what power" from three evidence sources: licensed transmitter data,
//! crowd-sourced spectrum sensing, and crowd-sourced reports of nearby TV
//! sets and what they are tuned to. It also carries a city-scale
//! Monte Carlo simulator for the spectrum gained by protecting receivers
//! instead of whole coverage areas.
//!
//! The crate is `no_std` with `alloc`; file formats, networking and the CLI
//! live in the `tvws` crate.

#![no_std]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod geo;
pub mod math;
pub mod propagation;
pub mod protection;
pub mod registry;
pub mod resolver;
pub mod simulator;

pub use engine::{Command, Engine, EngineConfig, Outcome};
pub use error::{Error, Result};
pub use geo::{AreaOfInterest, Cell, Channel, ChannelPlan, GeoPoint, PowerClass};
