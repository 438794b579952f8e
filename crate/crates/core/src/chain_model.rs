//! Ion chains in a common harmonic trap: equilibrium geometry and the
//! instantaneous (dynamical) normal-mode basis.
//!
//! Ions are indexed `0..N` in order of decreasing position, so ion 0 sits at
//! the largest coordinate. ω₁ always refers to the single-ion trap frequency
//! of ion 0; every other species sees ω_j = ω₁ √(m₀/m_j) because the spring
//! constant u₀ = m_j ω_j² is shared.

use nalgebra::DMatrix;

use crate::constants::{coulomb_constant, AMU};
use crate::eigen::jacobi_eigen;
use crate::{Error, Result};

/// ⁹Be⁺ mass in amu (electron mass neglected).
pub const BE9_AMU: f64 = 9.01218;
/// ⁴⁰Ca⁺ mass in amu (electron mass neglected).
pub const CA40_AMU: f64 = 39.9626;

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    name: String,
    mass: f64,
    charge_multiple: u32,
}

impl IonSpecies {
    /// Builds a species from a mass in atomic mass units.
    pub fn from_amu(name: impl Into<String>, mass_amu: f64, charge_multiple: u32) -> Result<Self> {
        if !(mass_amu.is_finite() && mass_amu > 0.0) {
            return Err(Error::InvalidInput(format!(
                "ion mass must be positive, got {mass_amu} amu"
            )));
        }
        if charge_multiple == 0 {
            return Err(Error::InvalidInput("charge multiple must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            mass: mass_amu * AMU,
            charge_multiple,
        })
    }

    pub fn ca40() -> Self {
        Self::from_amu("Ca40", CA40_AMU, 1).expect("valid constant")
    }

    pub fn be9() -> Self {
        Self::from_amu("Be9", BE9_AMU, 1).expect("valid constant")
    }

    /// Looks up a singly charged species by name (`Ca40`, `40Ca+`, `Be9`, `9Be+`).
    pub fn by_name(name: &str) -> Option<Self> {
        let key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "ca40" | "40ca" | "ca" => Some(Self::ca40()),
            "be9" | "9be" | "be" => Some(Self::be9()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Mass in kg.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mass_amu(&self) -> f64 {
        self.mass / AMU
    }

    pub fn charge_multiple(&self) -> u32 {
        self.charge_multiple
    }
}

/// An ordered, non-empty list of ions sharing one charge state.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    species: Vec<IonSpecies>,
}

impl Chain {
    pub fn new(species: Vec<IonSpecies>) -> Result<Self> {
        let first = species
            .first()
            .ok_or_else(|| Error::InvalidInput("a chain needs at least one ion".into()))?;
        if species.iter().any(|s| s.charge_multiple != first.charge_multiple) {
            return Err(Error::InvalidInput(
                "all ions in a chain must carry the same charge".into(),
            ));
        }
        Ok(Self { species })
    }

    /// `n` copies of the same species.
    pub fn uniform(species: IonSpecies, n: usize) -> Result<Self> {
        Self::new(vec![species; n])
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn species(&self) -> &[IonSpecies] {
        &self.species
    }

    pub fn masses(&self) -> Vec<f64> {
        self.species.iter().map(IonSpecies::mass).collect()
    }

    /// Mass of the reference ion (index 0), whose frequency is ω₁.
    pub fn reference_mass(&self) -> f64 {
        self.species[0].mass
    }

    /// μ = m₂/m₁ of a two-ion chain.
    pub fn mass_ratio(&self) -> Option<f64> {
        (self.len() == 2).then(|| self.species[1].mass / self.species[0].mass)
    }

    /// Z²·e²/(4πε₀) for the chain's common charge state Z.
    pub fn coulomb_strength(&self) -> f64 {
        let z = self.species[0].charge_multiple as f64;
        z * z * coulomb_constant()
    }

    pub fn is_equal_mass(&self) -> bool {
        let m0 = self.species[0].mass;
        self.species.iter().all(|s| (s.mass - m0).abs() <= 1e-12 * m0)
    }
}

/// Common spring constant u₀ = m₁ω₁² (N/m).
pub fn spring_constant(chain: &Chain, omega1: f64) -> f64 {
    chain.reference_mass() * omega1 * omega1
}

/// Uncoupled single-ion frequencies ω_j = √(u₀/m_j) for every ion.
pub fn species_frequencies(chain: &Chain, omega1: f64) -> Vec<f64> {
    let u0 = spring_constant(chain, omega1);
    chain.masses().iter().map(|m| (u0 / m).sqrt()).collect()
}

/// Equilibrium length scale l = (C/u₀)^{1/3}.
pub fn length_scale(chain: &Chain, omega1: f64) -> f64 {
    (chain.coulomb_strength() / spring_constant(chain, omega1)).cbrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumGeometry {
    /// Dimensionless equilibrium coordinates, strictly decreasing.
    pub u: Vec<f64>,
    /// Length scale l (m).
    pub l: f64,
    /// Positions l·u_i (m).
    pub positions: Vec<f64>,
    /// Spring constant (N/m).
    pub u0: f64,
}

/// Gradient of the dimensionless potential Σu²/2 + Σ_{i<j} 1/(u_i − u_j)
/// for decreasing `u`.
pub fn equilibrium_residual(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|k| {
            let mut g = u[k];
            for j in 0..n {
                if j == k {
                    continue;
                }
                let d = u[k] - u[j];
                // Repulsion pushes k away from j.
                g -= d.signum() / (d * d);
            }
            g
        })
        .collect()
}

/// Dimensionless curvature matrix K with V_ij = u₀ K_ij / √(m_i m_j).
pub fn dimensionless_curvature(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if i != j {
                let c = 2.0 / (u[i] - u[j]).abs().powi(3);
                k[(i, j)] = -c;
                diag += c;
            }
        }
        k[(i, i)] = diag;
    }
    k
}

const EQUILIBRIUM_MAX_ITER: usize = 200;
const EQUILIBRIUM_TOL: f64 = 1e-13;

/// Solves for the dimensionless equilibrium coordinates of `n` equal charges
/// by damped Newton iteration.
pub fn solve_equilibrium_u(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("a chain needs at least one ion".into()));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let half = n as f64 / 2.0;
    let mut u: Vec<f64> = (0..n)
        .map(|i| 0.6 * (half - i as f64 * (2.0 * half) / (n as f64 - 1.0)))
        .collect();
    let norm = |g: &[f64]| g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut g = equilibrium_residual(&u);
    let mut res = norm(&g);
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        if res < EQUILIBRIUM_TOL {
            break;
        }
        let k = dimensionless_curvature(&u);
        let rhs = nalgebra::DVector::from_iterator(n, g.iter().map(|x| -x));
        let step = k.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-8 {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
            if trial.windows(2).all(|w| w[0] > w[1]) {
                let gt = equilibrium_residual(&trial);
                let rt = norm(&gt);
                if rt < res {
                    u = trial;
                    g = gt;
                    res = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if res < 1e-12 {
        Ok(u)
    } else {
        Err(Error::EquilibriumNotConverged {
            iterations: EQUILIBRIUM_MAX_ITER,
            residual: res,
        })
    }
}

pub fn equilibrium_geometry(chain: &Chain, omega1: f64) -> Result<EquilibriumGeometry> {
    check_frequency(omega1)?;
    let u = solve_equilibrium_u(chain.len())?;
    Ok(geometry_from_u(chain, omega1, u))
}

pub(crate) fn geometry_from_u(chain: &Chain, omega1: f64, u: Vec<f64>) -> EquilibriumGeometry {
    let u0 = spring_constant(chain, omega1);
    let l = (chain.coulomb_strength() / u0).cbrt();
    let positions = u.iter().map(|x| l * x).collect();
    EquilibriumGeometry { u, l, positions, u0 }
}

/// Mass-weighted Hessian V_ij = (m_i m_j)^{-1/2} ∂²V/∂q_i∂q_j at equilibrium (1/s²).
pub fn hessian(chain: &Chain, geometry: &EquilibriumGeometry) -> DMatrix<f64> {
    let masses = chain.masses();
    let mut k = dimensionless_curvature(&geometry.u);
    for i in 0..chain.len() {
        for j in 0..chain.len() {
            k[(i, j)] *= geometry.u0 / (masses[i] * masses[j]).sqrt();
        }
    }
    k
}

/// Normal-mode eigenvectors (rows, ν ascending in frequency) and the
/// constant ratios A_ν = Ω_ν/ω₁.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeBasis {
    pub vectors: DMatrix<f64>,
    pub frequency_ratios: Vec<f64>,
    /// Dimensionless equilibrium coordinates the basis was built on.
    pub u: Vec<f64>,
}

impl NormalModeBasis {
    pub fn len(&self) -> usize {
        self.frequency_ratios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequency_ratios.is_empty()
    }

    /// Mode frequencies Ω_ν = A_ν ω₁.
    pub fn frequencies(&self, omega1: f64) -> Vec<f64> {
        self.frequency_ratios.iter().map(|a| a * omega1).collect()
    }

    pub fn vector(&self, mode: usize) -> Vec<f64> {
        self.vectors.row(mode).iter().copied().collect()
    }

    /// S_ν = Σ_i a_νi √m_i u_i (kg^½). The mass-weighted equilibrium
    /// displacement of mode ν is S_ν·l(t).
    ///
    /// Weights that cancel to round-off (modes symmetric under chain
    /// reversal in a symmetric chain) are returned as exactly zero.
    pub fn position_weights(&self, chain: &Chain) -> Vec<f64> {
        let masses = chain.masses();
        (0..self.len())
            .map(|nu| {
                let terms = (0..chain.len()).map(|i| self.vectors[(nu, i)] * masses[i].sqrt() * self.u[i]);
                let (sum, size) = terms.fold((0.0, 0.0), |(s, a), x| (s + x, a + x.abs()));
                if sum.abs() <= 1e-12 * size {
                    0.0
                } else {
                    sum
                }
            })
            .collect()
    }

    /// Projects lab-frame displacements and momenta onto mass-weighted mode
    /// coordinates and momenta.
    pub fn project(&self, chain: &Chain, displacement: &[f64], momentum: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let masses = chain.masses();
        let n = chain.len();
        let q = (0..n)
            .map(|nu| {
                (0..n)
                    .map(|i| self.vectors[(nu, i)] * masses[i].sqrt() * displacement[i])
                    .sum()
            })
            .collect();
        let p = (0..n)
            .map(|nu| {
                (0..n)
                    .map(|i| self.vectors[(nu, i)] * momentum[i] / masses[i].sqrt())
                    .sum()
            })
            .collect();
        (q, p)
    }
}

const DEGENERACY_TOL: f64 = 1e-9;

pub fn normal_mode_basis(chain: &Chain, omega1_ref: f64) -> Result<NormalModeBasis> {
    let geometry = equilibrium_geometry(chain, omega1_ref)?;
    let eig = jacobi_eigen(&hessian(chain, &geometry))?;
    let w2 = omega1_ref * omega1_ref;
    let mut ratios = Vec::with_capacity(chain.len());
    for (nu, lambda) in eig.values.iter().enumerate() {
        if *lambda <= 0.0 {
            return Err(Error::Eigen(format!(
                "non-positive eigenvalue {lambda:e} for mode {nu}"
            )));
        }
        ratios.push((lambda / w2).sqrt());
    }
    for nu in 1..ratios.len() {
        let gap = ratios[nu] - ratios[nu - 1];
        if gap.abs() < DEGENERACY_TOL {
            return Err(Error::DegenerateModes(nu - 1, nu, gap.abs()));
        }
    }
    Ok(NormalModeBasis {
        vectors: eig.vectors,
        frequency_ratios: ratios,
        u: geometry.u,
    })
}

/// Closed-form two-ion mode data for mass ratio μ = m₂/m₁.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoIonModes {
    /// A₋ (lower mode).
    pub a_minus: f64,
    /// A₊ (upper mode).
    pub a_plus: f64,
    /// (a₊, b₊)
    pub plus: [f64; 2],
    /// (a₋, b₋)
    pub minus: [f64; 2],
}

pub fn two_ion_analytic(mu: f64) -> Result<TwoIonModes> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::InvalidInput(format!("mass ratio must be positive, got {mu}")));
    }
    let inv = 1.0 / mu;
    let root = (1.0 - inv + inv * inv).sqrt();
    let a_plus = (1.0 + inv + root).sqrt();
    let a_minus = (1.0 + inv - root).sqrt();
    let cp = 1.0 - inv - root;
    let cm = 1.0 - inv + root;
    let ap = (1.0 / (1.0 + cp * cp * mu)).sqrt();
    let am = (1.0 / (1.0 + cm * cm * mu)).sqrt();
    Ok(TwoIonModes {
        a_minus,
        a_plus,
        plus: [ap, cp * mu.sqrt() * ap],
        minus: [am, cm * mu.sqrt() * am],
    })
}

fn check_frequency(omega1: f64) -> Result<()> {
    if omega1.is_finite() && omega1 > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "trap frequency must be positive, got {omega1}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const W0: f64 = 2.0 * PI * 1.2e6;

    #[test]
    fn spring_constant_of_calcium() {
        // m ω² with m = 39.9626 amu, ω = 2π·1.2 MHz, evaluated by hand:
        // 6.635946e-26 kg × 5.684892e13 s⁻² = 3.772464e-12 N/m.
        let u0 = spring_constant(&Chain::uniform(IonSpecies::ca40(), 1).unwrap(), W0);
        assert!((u0 / 3.772_464e-12 - 1.0).abs() < 1e-6, "{u0:e}");
    }

    #[test]
    fn spring_constant_scales_quadratically() {
        let chain = Chain::new(vec![IonSpecies::be9(), IonSpecies::ca40()]).unwrap();
        let a = spring_constant(&chain, W0);
        let b = spring_constant(&chain, 2.0 * W0);
        assert!((b / a - 4.0).abs() < 1e-14);
        let w = species_frequencies(&chain, W0);
        assert!((chain.masses()[1] * w[1] * w[1] / a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn equal_mass_species_share_frequency() {
        let chain = Chain::uniform(IonSpecies::ca40(), 3).unwrap();
        for w in species_frequencies(&chain, W0) {
            assert!((w / W0 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn small_chain_equilibria_are_analytic() {
        assert_eq!(solve_equilibrium_u(1).unwrap(), vec![0.0]);
        let u2 = solve_equilibrium_u(2).unwrap();
        let c2 = 0.25f64.cbrt();
        assert!((u2[0] - c2).abs() < 1e-14 && (u2[1] + c2).abs() < 1e-14);
        let u3 = solve_equilibrium_u(3).unwrap();
        let c3 = 1.25f64.cbrt();
        assert!((u3[0] - c3).abs() < 1e-14 && u3[1].abs() < 1e-14 && (u3[2] + c3).abs() < 1e-14);
    }

    #[test]
    fn equilibria_up_to_sixteen_ions() {
        for n in 1..=16 {
            let u = solve_equilibrium_u(n).unwrap();
            let res = equilibrium_residual(&u).iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(res < 1e-12, "n={n} residual {res:e}");
            assert!(u.windows(2).all(|w| w[0] > w[1]));
            for i in 0..n {
                assert!((u[i] + u[n - 1 - i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_calcium_separation() {
        // x₀ = 2 (C_c / 4u₀)^{1/3} with u₀ = 3.772464e-12 N/m gives 4.96389 μm.
        let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        let g = equilibrium_geometry(&chain, W0).unwrap();
        let x0 = 2.0 * (coulomb_constant() / (4.0 * g.u0)).cbrt();
        let d = g.positions[0] - g.positions[1];
        assert!((d - x0).abs() < 1e-15 * x0.max(1.0) + 1e-20);
        assert!((d / 4.96389e-6 - 1.0).abs() < 1e-5, "{d:e}");
    }

    #[test]
    fn distances_scale_with_trap_relaxation() {
        let chain = Chain::uniform(IonSpecies::ca40(), 5).unwrap();
        let a = equilibrium_geometry(&chain, W0).unwrap();
        let b = equilibrium_geometry(&chain, W0 / 3.0).unwrap();
        for (x, y) in a.positions.iter().zip(&b.positions) {
            if x.abs() > 0.0 {
                assert!((y / x - 3f64.powf(2.0 / 3.0)).abs() < 1e-12);
            }
        }
        let single = equilibrium_geometry(&Chain::uniform(IonSpecies::be9(), 1).unwrap(), W0).unwrap();
        assert_eq!(single.positions, vec![0.0]);
    }

    #[test]
    fn hessian_small_cases() {
        let one = Chain::uniform(IonSpecies::ca40(), 1).unwrap();
        let h = hessian(&one, &equilibrium_geometry(&one, W0).unwrap());
        assert!((h[(0, 0)] / (W0 * W0) - 1.0).abs() < 1e-14);

        let two = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        let h = hessian(&two, &equilibrium_geometry(&two, W0).unwrap());
        assert!((h[(0, 1)] - h[(1, 0)]).abs() == 0.0);
        let e = jacobi_eigen(&h).unwrap();
        assert!((e.values[0] / (W0 * W0) - 1.0).abs() < 1e-12);
        assert!((e.values[1] / (W0 * W0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_ion_eigenvalues_match_closed_form() {
        for &mu in &[0.1, 0.5, 1.0, 40.0 / 9.0, 9.0 / 40.0, 10.0] {
            let chain = Chain::new(vec![
                IonSpecies::from_amu("a", 10.0, 1).unwrap(),
                IonSpecies::from_amu("b", 10.0 * mu, 1).unwrap(),
            ])
            .unwrap();
            let h = hessian(&chain, &equilibrium_geometry(&chain, W0).unwrap());
            let e = jacobi_eigen(&h).unwrap();
            let inv = 1.0 / mu;
            let root = (1.0 - inv + inv * inv).sqrt();
            let lm = (1.0 + inv - root) * W0 * W0;
            let lp = (1.0 + inv + root) * W0 * W0;
            assert!((e.values[0] / lm - 1.0).abs() < 1e-10);
            assert!((e.values[1] / lp - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn three_equal_ions_modes() {
        let chain = Chain::uniform(IonSpecies::ca40(), 3).unwrap();
        let b = normal_mode_basis(&chain, W0).unwrap();
        let expected = [1.0, 3f64.sqrt(), (29.0f64 / 5.0).sqrt()];
        for (a, e) in b.frequency_ratios.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        let h = hessian(&chain, &equilibrium_geometry(&chain, W0).unwrap());
        for nu in 0..3 {
            let v = nalgebra::DVector::from_vec(b.vector(nu));
            let lambda = (b.frequency_ratios[nu] * W0).powi(2);
            assert!((&h * &v - lambda * &v).norm() < 1e-10 * h.norm());
        }
    }

    #[test]
    fn two_equal_ions_basis() {
        let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        let b = normal_mode_basis(&chain, W0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.frequency_ratios[0] - 1.0).abs() < 1e-14);
        assert!((b.frequency_ratios[1] - 3f64.sqrt()).abs() < 1e-14);
        assert!((b.vectors[(0, 0)] - h).abs() < 1e-14 && (b.vectors[(0, 1)] - h).abs() < 1e-14);
        let s = b.position_weights(&chain);
        assert!(s[0].abs() < 1e-15 * s[1].abs());
    }

    #[test]
    fn analytic_two_ion_symmetric_case() {
        let m = two_ion_analytic(1.0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.a_minus - 1.0).abs() < 1e-15);
        assert!((m.a_plus - 3f64.sqrt()).abs() < 1e-15);
        assert!((m.plus[0] - h).abs() < 1e-15 && (m.plus[1] + h).abs() < 1e-15);
        assert!((m.minus[0] - h).abs() < 1e-15 && (m.minus[1] - h).abs() < 1e-15);
        assert!(two_ion_analytic(0.0).is_err());
    }

    #[test]
    fn chain_validation() {
        assert!(Chain::new(vec![]).is_err());
        assert!(IonSpecies::from_amu("x", -1.0, 1).is_err());
        assert!(IonSpecies::from_amu("x", 1.0, 0).is_err());
        let mixed = Chain::new(vec![
            IonSpecies::ca40(),
            IonSpecies::from_amu("Ca40++", CA40_AMU, 2).unwrap(),
        ]);
        assert!(mixed.is_err());
        assert!(equilibrium_geometry(&Chain::uniform(IonSpecies::ca40(), 2).unwrap(), -1.0).is_err());
        assert_eq!(IonSpecies::by_name("40Ca+").unwrap(), IonSpecies::ca40());
        assert_eq!(IonSpecies::by_name("Be9").unwrap(), IonSpecies::be9());
        assert!(IonSpecies::by_name("Xe").is_none());
    }
}
