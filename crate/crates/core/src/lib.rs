pub mod error;
pub mod linalg;
pub mod quadrature;
pub mod special;
pub mod combinatorics;
pub mod densities;
pub mod harness;
pub mod montecarlo;
pub mod rmt;

pub use error::{Error, Result};
