//! Concentration of normalized random matrix products `∏ (I + Xᵢ/n)`.
//!
//! The crate provides dense complex matrix primitives, bounded random-matrix
//! distributions, the Doob martingale decomposition of the product with its
//! increment and variation certificates, closed-form tail bounds, and a
//! reproducible Monte Carlo harness that compares empirical tails with them.

pub mod bounds;
pub mod config;
pub mod distributions;
pub mod error;
pub mod martingale;
pub mod matrix;
pub mod montecarlo;
pub mod oracle;
pub mod output;
pub mod products;
pub mod rng;

pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
