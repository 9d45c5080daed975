//! Physical constants (CODATA 2018), SI units.

/// Newtonian constant of gravitation, m^3 kg^-1 s^-2.
pub const G: f64 = 6.674_30e-11;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Vacuum electric permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Vacuum magnetic permeability, N/A^2.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
