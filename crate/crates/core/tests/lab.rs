use std::f64::consts::PI;

use proptest::prelude::*;

use ionramp::chain_model::{length_scale, spring_constant, Chain, IonSpecies};
use ionramp::constants::HBAR;
use ionramp::lab_dynamics::{
    integrate_hamilton, integrate_hamilton_from, potential_and_forces, total_energy, LabOptions, PhaseState,
};
use ionramp::ode::Dopri5;
use ionramp::protocol_design::{constant_protocol, omega_from_rho, BoundarySpec, RhoAnsatz};

const W0: f64 = 2.0 * PI * 1.2e6;

fn smoothstep(tf: f64) -> ionramp::protocol_design::ProtocolCurve {
    let b = BoundarySpec::from_gamma_squared(W0, 3.0, tf).unwrap();
    omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0).unwrap()
}

fn mixed_chain(n: usize) -> Chain {
    let species = (0..n)
        .map(|i| {
            if i % 3 == 1 {
                IonSpecies::be9()
            } else {
                IonSpecies::ca40()
            }
        })
        .collect();
    Chain::new(species).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn forces_match_centered_differences(
        n in 2usize..7,
        jitter in prop::collection::vec(-0.2f64..0.2, 7),
        squeeze in 0.5f64..2.0,
    ) {
        let chain = mixed_chain(n);
        let x0 = length_scale(&chain, W0);
        let eq = PhaseState::equilibrium(&chain, W0).unwrap();
        // Perturbations below half the smallest gap keep the order intact.
        let q: Vec<f64> = eq.q.iter().zip(&jitter).map(|(q, j)| q * squeeze + j * x0).collect();
        let u0 = spring_constant(&chain, W0);
        let (_, f) = potential_and_forces(&chain, &q, u0).unwrap();
        let h = 1e-7 * x0;
        let fmax = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let vp = potential_and_forces(&chain, &qp, u0).unwrap().0;
            let vm = potential_and_forces(&chain, &qm, u0).unwrap().0;
            let fd = -(vp - vm) / (2.0 * h);
            prop_assert!((fd - f[i]).abs() < 1e-6 * fmax, "ion {}: {} vs {}", i, fd, f[i]);
        }
    }
}

#[test]
fn frozen_trap_conserves_energy() {
    let chain = mixed_chain(4);
    let tf = 50.0 * 2.0 * PI / W0;
    let p = constant_protocol(W0, tf).unwrap();
    let mut s = PhaseState::equilibrium(&chain, W0).unwrap();
    let kick = (HBAR * W0 * chain.reference_mass()).sqrt() * 30.0;
    for (i, p) in s.p.iter_mut().enumerate() {
        *p = kick * [1.0, -0.4, 0.7, 0.2][i];
    }
    let traj = integrate_hamilton_from(&chain, &p, &s, &LabOptions::default()).unwrap();
    let u0 = spring_constant(&chain, W0);
    let e0 = total_energy(&chain, &s, u0).unwrap();
    for st in traj.sample(200) {
        let e = total_energy(&chain, &st, u0).unwrap();
        assert!((e / e0 - 1.0).abs() < 1e-9, "t={} drift {:e}", st.t, e / e0 - 1.0);
    }
    assert!(traj.energy_balance_residual().unwrap() < 1e-9);
}

#[test]
fn ramp_energy_balance_closes() {
    let chain = Chain::uniform(IonSpecies::ca40(), 3).unwrap();
    let traj = integrate_hamilton(&chain, &smoothstep(3e-6), &LabOptions::default()).unwrap();
    assert!(traj.energy_balance_residual().unwrap() < 1e-9);
}

#[test]
fn uniform_kick_excites_only_the_center_of_mass() {
    let chain = Chain::uniform(IonSpecies::ca40(), 4).unwrap();
    let tf = 7.3 * 2.0 * PI / W0;
    let p = constant_protocol(W0, tf).unwrap();
    let mut s = PhaseState::equilibrium(&chain, W0).unwrap();
    let kick = (HBAR * W0 * chain.reference_mass()).sqrt() * 5.0;
    s.p.iter_mut().for_each(|p| *p = kick);
    let injected = 4.0 * kick * kick / (2.0 * chain.reference_mass());
    let r = integrate_hamilton_from(&chain, &p, &s, &LabOptions::default())
        .unwrap()
        .excitation_report()
        .unwrap();
    let com = r.per_mode_quanta[0] * HBAR * r.mode_frequencies[0];
    assert!((com / injected - 1.0).abs() < 1e-8);
    for (q, w) in r.per_mode_quanta.iter().zip(&r.mode_frequencies).skip(1) {
        assert!((q * HBAR * w).abs() < 1e-8 * injected, "{:?}", r.per_mode_quanta);
    }
}

#[test]
fn compression_mirrors_expansion() {
    for (n, tf) in [(2, 3e-6), (2, 4e-6), (4, 5e-6)] {
        let chain = Chain::uniform(IonSpecies::ca40(), n).unwrap();
        let forward = smoothstep(tf);
        let expand = integrate_hamilton(&chain, &forward, &LabOptions::default())
            .unwrap()
            .excitation_report()
            .unwrap();
        let compress = integrate_hamilton(&chain, &forward.reversed(), &LabOptions::default())
            .unwrap()
            .excitation_report()
            .unwrap();
        let ratio = compress.total_quanta / expand.total_quanta;
        assert!((0.5..=2.0).contains(&ratio), "n={n} tf={tf}: {ratio}");
    }
}

#[test]
fn expanded_chain_spacing_scales() {
    let chain = Chain::uniform(IonSpecies::ca40(), 8).unwrap();
    let traj = integrate_hamilton(&chain, &smoothstep(4.4e-6), &LabOptions::default()).unwrap();
    let first = traj.state_at(0.0);
    let last = traj.final_state();
    let ratio = (last.q[0] - last.q[7]) / (first.q[0] - first.q[7]);
    // The residual breathing oscillation shows up at the per-mille level.
    assert!((ratio / 3f64.powf(2.0 / 3.0) - 1.0).abs() < 1e-2, "{ratio}");
}

#[test]
fn halving_tolerances_leaves_result_unchanged() {
    let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
    let p = smoothstep(4e-6);
    let coarse = LabOptions::default();
    let fine = LabOptions {
        integrator: Dopri5::new(coarse.integrator.rtol / 2.0, coarse.integrator.atol / 2.0),
    };
    let a = integrate_hamilton(&chain, &p, &coarse)
        .unwrap()
        .excitation_report()
        .unwrap();
    let b = integrate_hamilton(&chain, &p, &fine)
        .unwrap()
        .excitation_report()
        .unwrap();
    assert!((a.total_quanta / b.total_quanta - 1.0).abs() < 1e-4);
}
