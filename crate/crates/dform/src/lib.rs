pub mod algebra;
pub mod calculus;
pub mod charts;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod field;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod saintvenant;
pub mod verify;

pub use error::{Error, Result};
