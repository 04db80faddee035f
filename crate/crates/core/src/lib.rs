//! Configuration sampling for preprocessor-variable C code.
//!
//! The pipeline scans sources for conditional blocks ([`cppscan`]), selects
//! configurations with one of several sampling algorithms ([`sampling`],
//! backed by [`satsolver`] and [`covering`]), and measures how many known
//! configuration-dependent faults each sample exposes ([`eval`]).

pub mod covering;
pub mod cppscan;
pub mod eval;
pub mod formula;
pub mod sampling;
pub mod satsolver;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
