pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod graph;
pub mod io;
pub mod manifest;
pub mod model;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
