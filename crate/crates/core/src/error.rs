use thiserror::Error;

use crate::ode::OdeError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("equilibrium solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    EquilibriumNotConverged { iterations: usize, residual: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("near-degenerate normal modes {0} and {1} (|ΔA| = {2:.3e})")]
    DegenerateModes(usize, usize, f64),

    #[error("singular linear system while solving ansatz boundary conditions")]
    SingularSystem,

    #[error(
        "invalid protocol: ω₁² = {radicand:.3e} rad²/s² ≤ 0 at t = {t:.6e} s (final time too short for this ansatz)"
    )]
    InvalidProtocol { t: f64, radicand: f64 },

    #[error("singular Ermakov solution: ρ = {rho:.3e} ≤ 0 at t = {t:.6e} s")]
    SingularErmakov { t: f64, rho: f64 },

    #[error("ions {index} and {next} crossed at t = {t:.6e} s")]
    IonCrossing { t: f64, index: usize, next: usize },

    #[error(transparent)]
    Ode(#[from] OdeError),
}
