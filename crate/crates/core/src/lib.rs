pub mod boundary;
pub mod correlation;
pub mod error;
pub mod graph;
pub mod inference;
mod lattice;
pub mod mvn;
pub mod normal;
pub mod sim;
pub mod spending;

pub use error::{Error, Result};
