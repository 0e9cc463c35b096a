//! Minimal complexes of graded modules on rational polyhedral fans.

pub mod cli;
pub mod complex;
pub mod decompose;
pub mod error;
pub mod exact;
pub mod fan;
pub mod graded;
pub mod io;
pub mod minimal;
pub mod oracles;
pub mod poly;
pub mod pushforward;

pub use error::{Error, Result};
