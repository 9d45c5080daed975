//! Independent numerical checks of the closed-form results.

pub mod compare;
pub mod finite_difference;
pub mod fock;
pub mod moments;
pub mod suite;
