pub mod datasets;
pub mod error;
pub mod grid;
pub mod io;
pub mod ns_classifier;
pub mod radon;
pub mod rscdt;
pub mod transforms1d;

pub use error::{Error, ErrorKind, Result};
