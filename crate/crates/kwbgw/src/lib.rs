//! Exact engine for the Kontsevich–Witten and Brezin–Gross–Witten tau-functions:
//! truncated series, normal-ordered operators on Fock space, constraint-driven
//! generation, and executable certificates for the operator identity that links them.

pub mod rational;
pub mod series1d;
pub mod fock;
pub mod operators;
pub mod taugen;
pub mod verify;
pub mod cli;
