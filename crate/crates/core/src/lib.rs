//! Closed-form phase-space dynamics of two Stern-Gerlach interferometers
//! coupled through a weak two-body interaction, with brute-force oracles.
// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod design;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod oracle;
pub mod phase_space;
pub mod potentials;
pub mod quadrature;

pub use error::{Error, Result};
