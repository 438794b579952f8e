//! Per-mode auxiliary equations of the Lewis–Riesenfeld invariants,
//!
//! ```text
//! ρ̈ + Ω²(t) ρ = Ω₀²/ρ³        (Ermakov)
//! α̈ + Ω²(t) α = ṗ₀(t)         (Newton)
//! ```
//!
//! the expansion-mode energies built from them, and the shooting search over
//! the free coefficients of the design-mode ansatz that minimizes the final
//! harmonic-frame excitation.
//!
//! Integration runs in scaled units: time in 1/Ω₀ of the mode, α in units
//! of the zero-point length √(ħ/Ω₀).

use crate::chain_model::{normal_mode_basis, Chain, NormalModeBasis};
use crate::constants::HBAR;
use crate::ode::{DenseSolution, Dopri5};
use crate::protocol_design::{
    build_extended_ansatz, momentum_shift_coefficients, omega_from_rho, p0dot_from_sample, BoundarySpec, ProtocolCurve,
    Provenance, RhoAnsatz,
};
use crate::simplex::NelderMead;
use crate::{Error, Result};

/// Objective value assigned to free parameters whose protocol is invalid,
/// in units of ħω₀.
pub const INVALID_PROTOCOL_PENALTY: f64 = 1e6;

/// Auxiliary state of one mode at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxState {
    pub rho: f64,
    pub drho: f64,
    /// Mass-weighted center (kg^½·m).
    pub alpha: f64,
    pub dalpha: f64,
}

/// Dense (ρ, ρ̇) solution of the Ermakov equation.
#[derive(Debug, Clone)]
pub struct ErmakovTrajectory {
    sol: DenseSolution,
    omega0: f64,
}

impl ErmakovTrajectory {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let y = self.sol.eval(t * self.omega0);
        (y[0], y[1] * self.omega0)
    }

    pub fn final_value(&self) -> (f64, f64) {
        let y = self.sol.final_state();
        (y[0], y[1] * self.omega0)
    }

    pub fn tf(&self) -> f64 {
        self.sol.t_end() / self.omega0
    }

    pub fn steps(&self) -> usize {
        self.sol.accepted_steps()
    }
}

/// Integrates ρ̈ + Ω²(t)ρ = Ω₀²/ρ³ on [0, t_f].
pub fn integrate_ermakov<F>(
    omega: F,
    omega0: f64,
    rho0: f64,
    drho0: f64,
    tf: f64,
    integrator: &Dopri5,
) -> Result<ErmakovTrajectory>
where
    F: Fn(f64) -> f64,
{
    if !(rho0 > 0.0) {
        return Err(Error::InvalidInput(format!("initial ρ must be positive, got {rho0}")));
    }
    if !(omega0 > 0.0 && tf > 0.0) {
        return Err(Error::InvalidInput("Ω₀ and t_f must be positive".into()));
    }
    let sol = integrator.solve_guarded(
        |tau, y, dy| {
            let w = omega(tau / omega0) / omega0;
            dy[0] = y[1];
            dy[1] = -w * w * y[0] + 1.0 / (y[0] * y[0] * y[0]);
        },
        0.0,
        tf * omega0,
        &[rho0, drho0 / omega0],
        |tau, y| {
            if y[0] > 0.0 {
                Ok(())
            } else {
                Err(Error::SingularErmakov {
                    t: tau / omega0,
                    rho: y[0],
                })
            }
        },
    )?;
    Ok(ErmakovTrajectory { sol, omega0 })
}

/// Dense (α, α̇) solution of the driven Newton equation.
#[derive(Debug, Clone)]
pub struct NewtonTrajectory {
    sol: DenseSolution,
    time_scale: f64,
    length_scale: f64,
}

impl NewtonTrajectory {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let y = self.sol.eval(t * self.time_scale);
        (y[0] * self.length_scale, y[1] * self.length_scale * self.time_scale)
    }

    pub fn final_value(&self) -> (f64, f64) {
        let y = self.sol.final_state();
        (y[0] * self.length_scale, y[1] * self.length_scale * self.time_scale)
    }

    /// Zero-point length √(ħ/Ω(0)) used as the α unit.
    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }
}

/// Integrates α̈ + Ω²(t)α = ṗ₀(t) from α(0) = α̇(0) = 0.
pub fn integrate_newton<F, G>(omega: F, p0dot: G, tf: f64, integrator: &Dopri5) -> Result<NewtonTrajectory>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let time_scale = omega(0.0);
    if !(time_scale > 0.0 && tf > 0.0) {
        return Err(Error::InvalidInput("Ω(0) and t_f must be positive".into()));
    }
    let length_scale = (HBAR / time_scale).sqrt();
    let force_scale = 1.0 / (time_scale * time_scale * length_scale);
    let sol = integrator.solve(
        |tau, y, dy| {
            let t = tau / time_scale;
            let w = omega(t) / time_scale;
            dy[0] = y[1];
            dy[1] = -w * w * y[0] + p0dot(t) * force_scale;
        },
        0.0,
        tf * time_scale,
        &[0.0, 0.0],
    )?;
    Ok(NewtonTrajectory {
        sol,
        time_scale,
        length_scale,
    })
}

/// Which frequency divides ṗ₀ in the displaced-center term of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyCenter {
    /// (α − ṗ₀/Ω₀²), as the energy formula is usually printed.
    #[default]
    InitialFrequency,
    /// (α − ṗ₀/Ω²), the completed square of the effective Hamiltonian.
    InstantaneousFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeEnergy {
    /// Energy (J).
    pub value: f64,
    pub mode: usize,
    /// Expansion-mode quantum number.
    pub n: u32,
}

/// Average energy of the n-th expansion mode of one normal mode:
///
/// ```text
/// (2n+1)ħ/(4Ω₀) (ρ̇² + Ω²ρ² + Ω₀²/ρ²) + α̇²/2 + Ω²/2 (α − ṗ₀/Ω₀²)²
/// ```
pub fn mode_energy(
    mode: usize,
    n: u32,
    state: &AuxState,
    omega_t: f64,
    omega0: f64,
    p0dot_t: f64,
    center: EnergyCenter,
) -> ModeEnergy {
    let AuxState {
        rho,
        drho,
        alpha,
        dalpha,
    } = *state;
    let width = (2 * n + 1) as f64 * HBAR / (4.0 * omega0)
        * (drho * drho + omega_t * omega_t * rho * rho + omega0 * omega0 / (rho * rho));
    let shift_freq = match center {
        EnergyCenter::InitialFrequency => omega0,
        EnergyCenter::InstantaneousFrequency => omega_t,
    };
    let offset = alpha - p0dot_t / (shift_freq * shift_freq);
    let value = width + 0.5 * dalpha * dalpha + 0.5 * omega_t * omega_t * offset * offset;
    ModeEnergy { value, mode, n }
}

/// How ρ of one mode is obtained.
#[derive(Debug, Clone)]
pub enum RhoSource {
    /// Design mode: ρ(t) is the ansatz itself.
    Analytic {
        ansatz: RhoAnsatz,
        tf: f64,
    },
    Integrated(ErmakovTrajectory),
}

impl RhoSource {
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            RhoSource::Analytic { ansatz, tf } => {
                let r = ansatz.eval((t / tf).clamp(0.0, 1.0));
                (r[0], r[1] / tf)
            }
            RhoSource::Integrated(traj) => traj.eval(t),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub mode: usize,
    /// Ω₀ν (rad/s).
    pub omega0: f64,
    pub frequency_ratio: f64,
    pub momentum_coefficient: f64,
    pub rho: RhoSource,
    pub alpha: NewtonTrajectory,
}

impl ModeTrajectory {
    pub fn state(&self, t: f64) -> AuxState {
        let (rho, drho) = self.rho.eval(t);
        let (alpha, dalpha) = self.alpha.eval(t);
        AuxState {
            rho,
            drho,
            alpha,
            dalpha,
        }
    }
}

/// Auxiliary functions of every normal mode for one protocol.
#[derive(Debug, Clone)]
pub struct AuxiliaryTrajectory {
    pub protocol: ProtocolCurve,
    pub modes: Vec<ModeTrajectory>,
}

impl AuxiliaryTrajectory {
    /// Expansion-mode energy E_{0ν}(t) of every mode.
    pub fn energies(&self, t: f64, center: EnergyCenter) -> Vec<ModeEnergy> {
        let w = self.protocol.eval(t);
        self.modes
            .iter()
            .map(|m| {
                let p0dot = p0dot_from_sample(m.momentum_coefficient, &w);
                mode_energy(
                    m.mode,
                    0,
                    &m.state(t),
                    m.frequency_ratio * w.omega,
                    m.omega0,
                    p0dot,
                    center,
                )
            })
            .collect()
    }
}

/// Solves the auxiliary equations of every mode for a given protocol.
///
/// If the protocol was designed on a mode (and `design_mode` names it), that
/// mode's ρ is taken from the ansatz instead of being integrated.
pub fn auxiliary_trajectory(
    chain: &Chain,
    basis: &NormalModeBasis,
    protocol: &ProtocolCurve,
    design_mode: Option<usize>,
    integrator: &Dopri5,
) -> Result<AuxiliaryTrajectory> {
    let coefficients = momentum_shift_coefficients(chain, basis);
    let tf = protocol.tf();
    let omega0 = protocol.boundary().omega0();
    let analytic = match (protocol.provenance(), design_mode) {
        (Provenance::Designed { ansatz, .. }, Some(mode)) if !protocol.is_reversed() => Some((mode, ansatz.clone())),
        _ => None,
    };
    let mut modes = Vec::with_capacity(basis.len());
    for (mode, (&ratio, &coefficient)) in basis.frequency_ratios.iter().zip(&coefficients).enumerate() {
        let mode_omega0 = ratio * omega0;
        let omega = |t: f64| ratio * protocol.omega(t);
        let rho = match &analytic {
            Some((m, ansatz)) if *m == mode => RhoSource::Analytic {
                ansatz: ansatz.clone(),
                tf,
            },
            _ => RhoSource::Integrated(integrate_ermakov(omega, mode_omega0, 1.0, 0.0, tf, integrator)?),
        };
        let alpha = integrate_newton(
            omega,
            |t| p0dot_from_sample(coefficient, &protocol.eval(t)),
            tf,
            integrator,
        )?;
        modes.push(ModeTrajectory {
            mode,
            omega0: mode_omega0,
            frequency_ratio: ratio,
            momentum_coefficient: coefficient,
            rho,
            alpha,
        });
    }
    Ok(AuxiliaryTrajectory {
        protocol: protocol.clone(),
        modes,
    })
}

/// Final-time summary of one mode in the harmonic frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFinal {
    pub mode: usize,
    pub state: AuxState,
    pub energy: ModeEnergy,
    /// E₀ν(t_f) − ħΩν(t_f)/2 (J).
    pub excess: f64,
    /// excess / ħΩν(t_f).
    pub quanta: f64,
    /// ρν(t_f) − γ.
    pub rho_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicEvaluation {
    pub modes: Vec<ModeFinal>,
    /// Σν excess (J).
    pub total_excess: f64,
    pub total_quanta: f64,
}

/// Final harmonic-frame excitation of a protocol.
pub fn harmonic_evaluation(
    chain: &Chain,
    basis: &NormalModeBasis,
    protocol: &ProtocolCurve,
    design_mode: Option<usize>,
    center: EnergyCenter,
    integrator: &Dopri5,
) -> Result<HarmonicEvaluation> {
    let traj = auxiliary_trajectory(chain, basis, protocol, design_mode, integrator)?;
    let tf = protocol.tf();
    let w = protocol.eval(tf);
    let gamma = protocol.boundary().gamma();
    let energies = traj.energies(tf, center);
    let mut modes = Vec::with_capacity(energies.len());
    for (m, energy) in traj.modes.iter().zip(energies) {
        let omega_f = m.frequency_ratio * w.omega;
        let ground = 0.5 * HBAR * omega_f;
        let state = m.state(tf);
        let excess = energy.value - ground;
        modes.push(ModeFinal {
            mode: m.mode,
            state,
            energy,
            excess,
            quanta: excess / (HBAR * omega_f),
            rho_residual: state.rho - gamma,
        });
    }
    Ok(HarmonicEvaluation {
        total_excess: modes.iter().map(|m| m.excess).sum(),
        total_quanta: modes.iter().map(|m| m.quanta).sum(),
        modes,
    })
}

/// The free-parameter search problem for one chain, ramp and ansatz order.
#[derive(Debug, Clone)]
pub struct ShootingProblem {
    pub chain: Chain,
    pub basis: NormalModeBasis,
    pub boundary: BoundarySpec,
    pub design_mode: usize,
    pub order: usize,
    pub center: EnergyCenter,
    pub integrator: Dopri5,
}

impl ShootingProblem {
    /// Lowest mode as design mode, basis built at ω₀.
    pub fn new(chain: &Chain, boundary: BoundarySpec, order: usize) -> Result<Self> {
        let basis = normal_mode_basis(chain, boundary.omega0())?;
        Ok(Self {
            chain: chain.clone(),
            basis,
            boundary,
            design_mode: 0,
            order,
            center: EnergyCenter::default(),
            integrator: Dopri5::default(),
        })
    }

    pub fn free_param_count(&self) -> usize {
        self.order.saturating_sub(9)
    }

    pub fn protocol(&self, free_params: &[f64]) -> Result<ProtocolCurve> {
        let ansatz = build_extended_ansatz(self.boundary.gamma(), self.order, free_params)?;
        omega_from_rho(&ansatz, &self.boundary, self.basis.frequency_ratios[self.design_mode])
    }

    pub fn evaluate(&self, free_params: &[f64]) -> Result<HarmonicEvaluation> {
        let protocol = self.protocol(free_params)?;
        harmonic_evaluation(
            &self.chain,
            &self.basis,
            &protocol,
            Some(self.design_mode),
            self.center,
            &self.integrator,
        )
    }

    pub fn trajectory(&self, free_params: &[f64]) -> Result<AuxiliaryTrajectory> {
        let protocol = self.protocol(free_params)?;
        auxiliary_trajectory(
            &self.chain,
            &self.basis,
            &protocol,
            Some(self.design_mode),
            &self.integrator,
        )
    }

    /// Final excess energy summed over modes (J); invalid protocols and
    /// collapsed Ermakov solutions map to a finite penalty.
    pub fn objective(&self, free_params: &[f64]) -> f64 {
        match self.evaluate(free_params) {
            Ok(e) => e.total_excess,
            Err(_) => INVALID_PROTOCOL_PENALTY * HBAR * self.boundary.omega0(),
        }
    }
}

/// Final excess energy (J) for the given free parameters.
pub fn shooting_objective(
    free_params: &[f64],
    chain: &Chain,
    basis: &NormalModeBasis,
    boundary: &BoundarySpec,
    design_mode: usize,
    order: usize,
) -> f64 {
    ShootingProblem {
        chain: chain.clone(),
        basis: basis.clone(),
        boundary: *boundary,
        design_mode,
        order,
        center: EnergyCenter::default(),
        integrator: Dopri5::default(),
    }
    .objective(free_params)
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    pub free_params: Vec<f64>,
    /// Final excess energy (J).
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub protocol: ProtocolCurve,
    pub evaluation: HarmonicEvaluation,
    /// Best objective per simplex iteration, in units of ħω₀.
    pub best_history: Vec<f64>,
}

impl ShootingResult {
    pub fn objective_quanta(&self) -> f64 {
        self.evaluation.total_quanta
    }

    /// Plain-text report: parameters, objective, final auxiliary states and
    /// boundary residuals.
    pub fn report(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("protocol: {}\n", self.protocol.metadata()));
        s.push_str(&format!("converged: {}\n", self.converged));
        s.push_str(&format!("iterations: {}\n", self.iterations));
        s.push_str(&format!("evaluations: {}\n", self.evaluations));
        s.push_str(&format!("free_parameter_count: {}\n", self.free_params.len()));
        for (k, p) in self.free_params.iter().enumerate() {
            s.push_str(&format!("a{}: {:.12e}\n", 10 + k, p));
        }
        s.push_str(&format!("objective_J: {:.12e}\n", self.objective));
        s.push_str(&format!("objective_quanta: {:.12e}\n", self.objective_quanta()));
        let audit = self.protocol.boundary_audit();
        s.push_str(&format!(
            "omega_bc_residuals: start_d1={:.3e} start_d2={:.3e} end_d1={:.3e} end_d2={:.3e}\n",
            audit.start_d1, audit.start_d2, audit.end_d1, audit.end_d2
        ));
        s.push_str("mode,rho,drho[1/s],alpha[kg^0.5 m],dalpha[kg^0.5 m/s],rho_minus_gamma,excess_quanta\n");
        for m in &self.evaluation.modes {
            s.push_str(&format!(
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                m.mode + 1,
                m.state.rho,
                m.state.drho,
                m.state.alpha,
                m.state.dalpha,
                m.rho_residual,
                m.quanta
            ));
        }
        s
    }
}

/// Nelder–Mead over the ansatz free parameters, starting from zero (the
/// ninth-order ansatz).
pub fn optimize_free_params(problem: &ShootingProblem, optimizer: &NelderMead) -> Result<ShootingResult> {
    optimize_free_params_from(problem, optimizer, &vec![0.0; problem.free_param_count()])
}

pub fn optimize_free_params_from(
    problem: &ShootingProblem,
    optimizer: &NelderMead,
    start: &[f64],
) -> Result<ShootingResult> {
    if start.len() != problem.free_param_count() {
        return Err(Error::InvalidInput(format!(
            "order {} takes {} free parameters, got {}",
            problem.order,
            problem.free_param_count(),
            start.len()
        )));
    }
    let unit = HBAR * problem.boundary.omega0();
    let outcome = optimizer.minimize(|x| problem.objective(x) / unit, start);
    let protocol = problem.protocol(&outcome.x)?;
    let evaluation = problem.evaluate(&outcome.x)?;
    Ok(ShootingResult {
        objective: evaluation.total_excess,
        free_params: outcome.x,
        iterations: outcome.iterations,
        evaluations: outcome.evaluations,
        converged: outcome.converged,
        protocol,
        evaluation,
        best_history: outcome.best_history,
    })
}
