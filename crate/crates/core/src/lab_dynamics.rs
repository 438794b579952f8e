//! Full classical dynamics of the Coulomb-coupled chain in the laboratory
//! frame and the final excitation bookkeeping.
//!
//! The equations of motion are integrated in scaled units: positions in the
//! initial equilibrium length l(ω₀), time in 1/ω₀, momenta in m₁ω₀l(ω₀).
//! In those units the Coulomb prefactor is exactly one. An extra state
//! component accumulates the work ∫∂H/∂t dt done by the ramp so that the
//! energy balance can be audited afterwards.

use crate::chain_model::{equilibrium_geometry, length_scale, normal_mode_basis, spring_constant, Chain};
use crate::constants::HBAR;
use crate::ode::{DenseSolution, Dopri5};
use crate::protocol_design::{ProtocolCurve, Provenance};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    /// Positions (m), strictly decreasing.
    pub q: Vec<f64>,
    /// Momenta (kg·m/s).
    pub p: Vec<f64>,
}

impl PhaseState {
    /// Ions at rest at their equilibrium positions for trap frequency `omega1`.
    pub fn equilibrium(chain: &Chain, omega1: f64) -> Result<Self> {
        let g = equilibrium_geometry(chain, omega1)?;
        Ok(Self {
            t: 0.0,
            q: g.positions,
            p: vec![0.0; chain.len()],
        })
    }
}

fn check_order(q: &[f64]) -> Option<usize> {
    q.windows(2).position(|w| !(w[0] > w[1]))
}

/// Potential energy (J) and forces (N) of the chain at positions `q` for
/// spring constant `u0`.
pub fn potential_and_forces(chain: &Chain, q: &[f64], u0: f64) -> Result<(f64, Vec<f64>)> {
    if q.len() != chain.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} positions, got {}",
            chain.len(),
            q.len()
        )));
    }
    if let Some(i) = check_order(q) {
        return Err(Error::InvalidInput(format!(
            "ions {i} and {} are not strictly ordered (q = {:e}, {:e})",
            i + 1,
            q[i],
            q[i + 1]
        )));
    }
    let c = chain.coulomb_strength();
    let n = q.len();
    let mut v = 0.0;
    let mut f = vec![0.0; n];
    for i in 0..n {
        v += 0.5 * u0 * q[i] * q[i];
        f[i] -= u0 * q[i];
        for j in (i + 1)..n {
            let d = q[i] - q[j];
            v += c / d;
            let fc = c / (d * d);
            f[i] += fc;
            f[j] -= fc;
        }
    }
    Ok((v, f))
}

/// Total energy H = Σp²/2m + V (J).
pub fn total_energy(chain: &Chain, state: &PhaseState, u0: f64) -> Result<f64> {
    let (v, _) = potential_and_forces(chain, &state.q, u0)?;
    let kinetic: f64 = state.p.iter().zip(chain.masses()).map(|(p, m)| p * p / (2.0 * m)).sum();
    Ok(kinetic + v)
}

/// Scales mapping SI quantities onto the integrator's units.
#[derive(Debug, Clone, Copy)]
struct LabScales {
    omega: f64,
    length: f64,
    momentum: f64,
    energy: f64,
}

#[derive(Debug, Clone)]
pub struct LabTrajectory {
    chain: Chain,
    protocol: ProtocolCurve,
    masses: Vec<f64>,
    scales: LabScales,
    sol: DenseSolution,
    initial_energy: f64,
}

impl LabTrajectory {
    pub fn protocol(&self) -> &ProtocolCurve {
        &self.protocol
    }

    pub fn tf(&self) -> f64 {
        self.protocol.tf()
    }

    pub fn steps(&self) -> usize {
        self.sol.accepted_steps()
    }

    fn unpack(&self, t: f64, y: &[f64]) -> PhaseState {
        let n = self.masses.len();
        PhaseState {
            t,
            q: y[..n].iter().map(|x| x * self.scales.length).collect(),
            p: y[n..2 * n].iter().map(|x| x * self.scales.momentum).collect(),
        }
    }

    pub fn state_at(&self, t: f64) -> PhaseState {
        let y = self.sol.eval(t * self.scales.omega);
        self.unpack(t, &y)
    }

    pub fn final_state(&self) -> PhaseState {
        self.unpack(self.tf(), self.sol.final_state())
    }

    /// `n ≥ 2` uniformly spaced states including both ends.
    pub fn sample(&self, n: usize) -> Vec<PhaseState> {
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let t = if k == n - 1 {
                    self.tf()
                } else {
                    self.tf() * k as f64 / (n - 1) as f64
                };
                self.state_at(t)
            })
            .collect()
    }

    /// |H(t_f) − H(0) − ∫∂H/∂t dt| / |H(0)|.
    pub fn energy_balance_residual(&self) -> Result<f64> {
        let n = self.masses.len();
        let work = self.sol.final_state()[2 * n] * self.scales.energy;
        let wf = self.protocol.eval(self.tf()).omega;
        let hf = total_energy(&self.chain, &self.final_state(), spring_constant(&self.chain, wf))?;
        Ok((hf - self.initial_energy - work).abs() / self.initial_energy.abs())
    }

    /// Final excitation with the energy-balance diagnostic filled in.
    pub fn excitation_report(&self) -> Result<ExcitationReport> {
        let omegaf = self.protocol.eval(self.tf()).omega;
        let mut report = excitation_report(&self.chain, &self.final_state(), omegaf)?;
        report.protocol = self.protocol.metadata();
        report.energy_balance_residual = Some(self.energy_balance_residual()?);
        Ok(report)
    }

    /// CSV with columns t, q_1…q_N, p_1…p_N, ω₁.
    pub fn to_csv(&self, samples: usize, extra_header: &[String]) -> String {
        let n = self.masses.len();
        let mut out = String::new();
        for h in extra_header {
            out.push_str(&format!("# {h}\n"));
        }
        out.push_str(&format!("# {}\n", self.protocol.metadata()));
        let mut header = vec!["t[s]".to_string()];
        header.extend((1..=n).map(|i| format!("q{i}[m]")));
        header.extend((1..=n).map(|i| format!("p{i}[kg m/s]")));
        header.push("omega1[rad/s]".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for s in self.sample(samples) {
            let mut row = vec![format!("{:.12e}", s.t)];
            row.extend(s.q.iter().map(|x| format!("{x:.12e}")));
            row.extend(s.p.iter().map(|x| format!("{x:.12e}")));
            row.push(format!("{:.12e}", self.protocol.omega(s.t)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Integrator settings for the lab-frame simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabOptions {
    pub integrator: Dopri5,
}

impl Default for LabOptions {
    fn default() -> Self {
        Self {
            integrator: Dopri5::new(1e-11, 1e-13),
        }
    }
}

/// Simulates the chain under `protocol` starting at rest in the equilibrium
/// of ω₁(0).
pub fn integrate_hamilton(chain: &Chain, protocol: &ProtocolCurve, options: &LabOptions) -> Result<LabTrajectory> {
    let initial = PhaseState::equilibrium(chain, protocol.eval(0.0).omega)?;
    integrate_hamilton_from(chain, protocol, &initial, options)
}

/// Simulates the chain under `protocol` from an arbitrary ordered state.
pub fn integrate_hamilton_from(
    chain: &Chain,
    protocol: &ProtocolCurve,
    initial: &PhaseState,
    options: &LabOptions,
) -> Result<LabTrajectory> {
    let n = chain.len();
    if initial.q.len() != n || initial.p.len() != n {
        return Err(Error::InvalidInput("initial state does not match chain size".into()));
    }
    let omega = protocol.boundary().omega0();
    let length = length_scale(chain, omega);
    let m1 = chain.reference_mass();
    let scales = LabScales {
        omega,
        length,
        momentum: m1 * omega * length,
        energy: m1 * omega * omega * length * length,
    };
    let masses: Vec<f64> = chain.masses().iter().map(|m| m / m1).collect();
    let initial_energy = total_energy(chain, initial, spring_constant(chain, protocol.eval(0.0).omega))?;

    let mut y0 = Vec::with_capacity(2 * n + 1);
    y0.extend(initial.q.iter().map(|x| x / length));
    y0.extend(initial.p.iter().map(|x| x / scales.momentum));
    y0.push(0.0);

    let frozen = matches!(protocol.provenance(), Provenance::Constant);
    let ramp = |tau: f64| {
        if frozen {
            (1.0, 0.0)
        } else {
            let w = protocol.eval(tau / omega);
            (w.omega / omega, w.domega / (omega * omega))
        }
    };
    let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| {
        let (w, dw) = ramp(tau);
        let (x, p) = y[..2 * n].split_at(n);
        let mut x2 = 0.0;
        for i in 0..n {
            dy[i] = p[i] / masses[i];
            dy[n + i] = -w * w * x[i];
            x2 += x[i] * x[i];
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = x[i] - x[j];
                let f = 1.0 / (d * d) * d.signum();
                dy[n + i] += f;
                dy[n + j] -= f;
            }
        }
        // ∂H/∂τ = ½ d(w²)/dτ Σx² in scaled energy units.
        dy[2 * n] = w * dw * x2;
    };
    let sol = options
        .integrator
        .solve_guarded(rhs, 0.0, protocol.tf() * omega, &y0, |tau, y| {
            match check_order(&y[..n]) {
                Some(i) => Err(Error::IonCrossing {
                    t: tau / omega,
                    index: i,
                    next: i + 1,
                }),
                None => Ok(()),
            }
        })?;
    Ok(LabTrajectory {
        chain: chain.clone(),
        protocol: protocol.clone(),
        masses,
        scales,
        sol,
        initial_energy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationReport {
    /// H(t_f) − V_min(ω_f) (J).
    pub total_excess: f64,
    /// Mode energy / ħΩν(t_f), modes ascending in frequency.
    pub per_mode_quanta: Vec<f64>,
    pub total_quanta: f64,
    /// Ων(t_f) (rad/s).
    pub mode_frequencies: Vec<f64>,
    /// total_excess − Σ harmonic mode energies (J); anharmonic remainder.
    pub quadratic_residual: f64,
    pub omegaf: f64,
    pub protocol: String,
    pub energy_balance_residual: Option<f64>,
}

impl ExcitationReport {
    pub fn total_excess_quanta(&self) -> f64 {
        self.total_excess / (HBAR * self.mode_frequencies[0])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("protocol: {}\n", self.protocol));
        s.push_str(&format!("omegaf[rad/s]: {:.12e}\n", self.omegaf));
        s.push_str(&format!("total_excess_J: {:.12e}\n", self.total_excess));
        s.push_str(&format!("total_quanta: {:.12e}\n", self.total_quanta));
        s.push_str(&format!("quadratic_residual_J: {:.12e}\n", self.quadratic_residual));
        match self.energy_balance_residual {
            Some(r) => s.push_str(&format!("energy_balance_residual: {r:.3e}\n")),
            None => s.push_str("energy_balance_residual: n/a\n"),
        }
        s.push_str("mode,Omega_f[rad/s],quanta\n");
        for (k, (w, q)) in self.mode_frequencies.iter().zip(&self.per_mode_quanta).enumerate() {
            s.push_str(&format!("{},{:.12e},{:.12e}\n", k + 1, w, q));
        }
        s
    }
}

/// Excitation of `final_state` relative to the chain at rest in the
/// equilibrium of the trap with frequency `omegaf`.
pub fn excitation_report(chain: &Chain, final_state: &PhaseState, omegaf: f64) -> Result<ExcitationReport> {
    let u0 = spring_constant(chain, omegaf);
    let eq = equilibrium_geometry(chain, omegaf)?;
    let (v_min, _) = potential_and_forces(chain, &eq.positions, u0)?;
    let total_excess = total_energy(chain, final_state, u0)? - v_min;

    let basis = normal_mode_basis(chain, omegaf)?;
    let displacement: Vec<f64> = final_state.q.iter().zip(&eq.positions).map(|(q, q0)| q - q0).collect();
    let (mq, mp) = basis.project(chain, &displacement, &final_state.p);
    let freqs = basis.frequencies(omegaf);
    let energies: Vec<f64> = (0..chain.len())
        .map(|nu| 0.5 * mp[nu] * mp[nu] + 0.5 * freqs[nu] * freqs[nu] * mq[nu] * mq[nu])
        .collect();
    let per_mode_quanta: Vec<f64> = energies.iter().zip(&freqs).map(|(e, w)| e / (HBAR * w)).collect();
    Ok(ExcitationReport {
        total_excess,
        total_quanta: per_mode_quanta.iter().sum(),
        per_mode_quanta,
        mode_frequencies: freqs,
        quadratic_residual: total_excess - energies.iter().sum::<f64>(),
        omegaf,
        protocol: String::new(),
        energy_balance_residual: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_model::IonSpecies;
    use crate::protocol_design::constant_protocol;
    use std::f64::consts::PI;

    const W0: f64 = 2.0 * PI * 1.2e6;

    #[test]
    fn equilibrium_has_no_force() {
        let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        let s = PhaseState::equilibrium(&chain, W0).unwrap();
        let u0 = spring_constant(&chain, W0);
        let (_, f) = potential_and_forces(&chain, &s.q, u0).unwrap();
        let scale = chain.coulomb_strength() / s.q[0].powi(2);
        assert!(f.iter().all(|x| x.abs() < 1e-12 * scale));
    }

    #[test]
    fn single_ion_at_center() {
        let chain = Chain::uniform(IonSpecies::ca40(), 1).unwrap();
        let (v, f) = potential_and_forces(&chain, &[0.0], 1.0).unwrap();
        assert_eq!((v, f[0]), (0.0, 0.0));
    }

    #[test]
    fn crossing_is_rejected() {
        let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        assert!(potential_and_forces(&chain, &[-1e-6, 1e-6], 1.0).is_err());
    }

    #[test]
    fn frozen_trap_equilibrium_is_stationary() {
        let chain = Chain::uniform(IonSpecies::ca40(), 4).unwrap();
        let tf = 10.0 * 2.0 * PI / W0;
        let p = constant_protocol(W0, tf).unwrap();
        let traj = integrate_hamilton(&chain, &p, &LabOptions::default()).unwrap();
        let s0 = PhaseState::equilibrium(&chain, W0).unwrap();
        let x0 = length_scale(&chain, W0);
        for s in traj.sample(50) {
            for (a, b) in s.q.iter().zip(&s0.q) {
                assert!((a - b).abs() < 1e-10 * x0);
            }
        }
        let r = traj.excitation_report().unwrap();
        assert!(r.total_quanta.abs() < 1e-6, "{}", r.total_quanta);
    }

    #[test]
    fn report_at_final_equilibrium_is_zero() {
        let chain = Chain::uniform(IonSpecies::ca40(), 3).unwrap();
        let s = PhaseState::equilibrium(&chain, W0 / 3.0).unwrap();
        let r = excitation_report(&chain, &s, W0 / 3.0).unwrap();
        assert!(r.per_mode_quanta.iter().all(|q| q.abs() < 1e-12));
        assert!(r.total_excess.abs() < 1e-6 * HBAR * W0);
    }
}
