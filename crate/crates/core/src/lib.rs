pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod noise;
pub mod packets;
pub mod parallel;
pub mod recovery;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod spline;
pub mod stats;
pub mod symbols;

pub use error::{Error, Result};
