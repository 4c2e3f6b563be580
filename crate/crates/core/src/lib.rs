pub mod ap;
pub mod basis;
pub mod bep;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod grid;
pub mod operators;
pub mod problems;
pub mod report;
pub mod solver;

pub use error::{DpmError, Result};
