//! Command-line front end: monitoring, solving, simulation and plotting.

pub mod cli;
pub mod plot;
