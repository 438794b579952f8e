//! CODATA 2018 constants used throughout the crate.

use std::f64::consts::PI;

/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit (kg).
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Coulomb constant for two elementary charges, e²/(4πε₀), in N·m².
pub fn coulomb_constant() -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (4.0 * PI * VACUUM_PERMITTIVITY)
}

/// The constant set bundled as a value, for reports and callers that want to
/// carry it around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub coulomb: f64,
    pub hbar: f64,
    pub amu: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            coulomb: coulomb_constant(),
            hbar: HBAR,
            amu: AMU,
        }
    }
}
