pub mod marginal;
pub mod stats;
pub mod suites;
