pub mod analysis;
pub mod attacks;
pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod protocols;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
