pub mod amplification;
pub mod dataset;
pub mod error;
pub mod fitting;
pub mod harness;
pub mod offset_model;
pub mod pose;

pub use error::{Error, Result};
