//! Exact lattice and pseudolattice calculus for Tyurin degenerations and
//! elliptic fibrations of K3 surfaces, with mechanical verification of
//! gluing, classification, polarisation transfer, admissibility and the
//! lattice-polarised mirror-pair conditions.
//!
//! All arithmetic is exact over arbitrary-precision integers and rationals.

pub mod cli;
pub mod error;
pub mod fibration;
pub mod lattice;
pub mod lll;
pub mod matrix;
pub mod mirror;
pub mod properties;
pub mod pseudo;
pub mod snf;
pub mod tyurin;

pub use error::{Error, Result};
