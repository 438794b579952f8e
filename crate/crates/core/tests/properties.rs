use std::f64::consts::PI;

use proptest::prelude::*;

use ionramp::auxiliary_dynamics::{
    auxiliary_trajectory, integrate_ermakov, optimize_free_params, optimize_free_params_from, ShootingProblem,
};
use ionramp::chain_model::{normal_mode_basis, two_ion_analytic, Chain, IonSpecies};
use ionramp::constants::HBAR;
use ionramp::ode::Dopri5;
use ionramp::protocol_design::{build_extended_ansatz, omega_from_rho, BoundarySpec, RhoAnsatz};
use ionramp::simplex::NelderMead;

const W0: f64 = 2.0 * PI * 1.2e6;

fn pair(mu: f64) -> Chain {
    let ca = IonSpecies::ca40();
    let other = IonSpecies::from_amu("X", ca.mass_amu() * mu, 1).unwrap();
    Chain::new(vec![ca, other]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn two_ion_ratios_match_closed_form(mu in 0.1f64..10.0) {
        let basis = normal_mode_basis(&pair(mu), W0).unwrap();
        let a = two_ion_analytic(mu).unwrap();
        prop_assert!((basis.frequency_ratios[0] / a.a_minus - 1.0).abs() < 1e-10);
        prop_assert!((basis.frequency_ratios[1] / a.a_plus - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frequency_ratios_do_not_depend_on_trap(
        heavy in prop::collection::vec(any::<bool>(), 1..8),
        scale in 0.3f64..3.0,
    ) {
        let species = heavy.iter().map(|h| if *h { IonSpecies::ca40() } else { IonSpecies::be9() }).collect();
        let chain = Chain::new(species).unwrap();
        if let (Ok(a), Ok(b)) = (normal_mode_basis(&chain, W0), normal_mode_basis(&chain, scale * W0)) {
            for (x, y) in a.frequency_ratios.iter().zip(&b.frequency_ratios) {
                prop_assert!((x / y - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn extended_ansatz_meets_boundary_conditions(
        order in 10usize..17,
        raw in prop::collection::vec(-50.0f64..50.0, 7),
        gamma_sq in 1.2f64..6.0,
    ) {
        let gamma = gamma_sq.sqrt();
        let free = &raw[..order - 9];
        let a = build_extended_ansatz(gamma, order, free).unwrap();
        let size = 1.0 + a.coefficients().iter().map(|c| c.abs()).sum::<f64>();
        let start = a.eval(0.0);
        let end = a.eval(1.0);
        prop_assert!((start[0] - 1.0).abs() < 1e-12 * size);
        prop_assert!((end[0] - gamma).abs() < 1e-10 * size);
        for k in 1..5 {
            prop_assert!(start[k].abs() < 1e-12 * size);
            prop_assert!(end[k].abs() < 1e-9 * size, "order {} derivative {}: {}", order, k, end[k]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ermakov_invariant_holds_for_any_start(rho0 in 0.5f64..3.0, v0 in -1.0f64..1.0) {
        let tf = 100.0 * 2.0 * PI / W0;
        let traj = integrate_ermakov(|_| W0, W0, rho0, v0 * W0, tf, &Dopri5::default()).unwrap();
        let inv = |r: f64, dr: f64| dr * dr + W0 * W0 * r * r + W0 * W0 / (r * r);
        let i0 = inv(rho0, v0 * W0);
        for k in 0..=2000 {
            let (r, dr) = traj.eval(tf * k as f64 / 2000.0);
            prop_assert!((inv(r, dr) / i0 - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn shooting_objective_is_nonnegative(a10 in -3000.0f64..0.0, a11 in 0.0f64..600.0) {
        let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 3e-6).unwrap();
        let problem = ShootingProblem::new(&chain, b, 11).unwrap();
        prop_assert!(problem.objective(&[a10, a11]) >= -1e-9 * HBAR * W0);
    }
}

#[test]
fn reversal_symmetric_modes_are_never_displaced() {
    for n in [2, 3, 4, 5] {
        let chain = Chain::uniform(IonSpecies::ca40(), n).unwrap();
        let basis = normal_mode_basis(&chain, W0).unwrap();
        let b = BoundarySpec::from_gamma_squared(W0, 3.0, 3e-6).unwrap();
        let p = omega_from_rho(&RhoAnsatz::smoothstep(b.gamma()), &b, 1.0).unwrap();
        let traj = auxiliary_trajectory(&chain, &basis, &p, Some(0), &Dopri5::default()).unwrap();
        for m in &traj.modes {
            let v = basis.vector(m.mode);
            let symmetric = (0..n).all(|i| (v[i] - v[n - 1 - i]).abs() < 1e-9);
            if !symmetric {
                continue;
            }
            for k in 0..=200 {
                let s = m.state(3e-6 * k as f64 / 200.0);
                assert_eq!(s.alpha, 0.0, "n={n} mode {}", m.mode);
            }
        }
    }
}

#[test]
fn optimizer_history_is_monotone_for_be_ca() {
    let chain = Chain::new(vec![IonSpecies::be9(), IonSpecies::ca40()]).unwrap();
    let b = BoundarySpec::from_gamma_squared(W0, 3.0, 6e-6).unwrap();
    let problem = ShootingProblem::new(&chain, b, 13).unwrap();
    assert_eq!(problem.free_param_count(), 4);
    let opt = NelderMead {
        max_iterations: 300,
        ..NelderMead::default()
    };
    let r = optimize_free_params(&problem, &opt).unwrap();
    assert!(r.best_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.objective <= problem.objective(&[0.0; 4]));
}

#[test]
fn restart_at_the_optimum_stays_put() {
    let chain = Chain::uniform(IonSpecies::ca40(), 2).unwrap();
    let b = BoundarySpec::from_gamma_squared(W0, 3.0, 3e-6).unwrap();
    let problem = ShootingProblem::new(&chain, b, 11).unwrap();
    let first = optimize_free_params(&problem, &NelderMead::default()).unwrap();
    let second = optimize_free_params_from(&problem, &NelderMead::default(), &first.free_params).unwrap();
    assert!(second.objective <= first.objective + 1e-12 * HBAR * W0);
    assert!(second.objective_quanta() < 1e-3);
}
