pub mod error;
pub mod geodata;
pub mod linalg;
pub mod optim;
pub mod special;

pub use error::{Error, Result};
pub mod gpcore;
pub mod climate;
pub mod synth;
pub mod weathercov;
pub mod nugget;
pub mod baseline;
pub mod simulator;
pub mod diagnostics;
pub mod pipeline;
pub mod config;
pub mod cli;
