//! File formats, configuration, persistence, HTTP service, command-line
//! tooling and a parallel experiment runner around `tvws-core`.

pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod persist;
pub mod server;
pub mod service;
pub mod wire;

pub use tvws_core as core;
