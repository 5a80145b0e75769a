use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use nalgebra::DMatrix;
use proptest::prelude::*;

use modewitness::fock::{
    apply_loss, apply_passive_unitary, apply_passive_unitary_density, db_to_r, squeezed_vacuum,
    subtract_photon_at_angles, DensityState, FockBasis, PureState, QuantumState,
};
use modewitness::generators::{build_generator_set, GeneratorSet, Partition};
use modewitness::homodyne::{analytic_fisher, MeasurementSetting};
use modewitness::mode_basis::{lift_matrix, BasisChange};
use modewitness::optimize::OptimizerConfig;
use modewitness::recipe::Recipe;
use modewitness::sweep::witness_of_state;
use modewitness::witness::{default_config, state_moments, WitnessProblem};

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

fn moved(state: &QuantumState, bc: &BasisChange) -> QuantumState {
    let u = bc.mode_unitary();
    match state {
        QuantumState::Pure(s) => apply_passive_unitary(s, &u).unwrap().into(),
        QuantumState::Mixed(r) => apply_passive_unitary_density(r, &u).unwrap().into(),
    }
}

fn subtracted(r: &[f64], angles: &[f64], cutoff: usize) -> PureState {
    let mut s = squeezed_vacuum(r, cutoff).unwrap();
    for &a in angles {
        s = subtract_photon_at_angles(&s, &[a]).unwrap().state;
    }
    s
}

/// Squeezing with magnitude in `[0.05, max)`, so subtractions never vanish.
fn squeeze(max: f64) -> impl Strategy<Value = f64> {
    (0.05f64..max, any::<bool>()).prop_map(|(r, neg)| if neg { -r } else { r })
}

fn density_distance(a: &DensityState, b: &DensityState) -> f64 {
    (a.matrix() - b.matrix()).camax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lift_is_a_homomorphism(
        m in 2usize..=3,
        a in prop::collection::vec(-1.5f64..1.5, 36),
        b in prop::collection::vec(-1.5f64..1.5, 36),
    ) {
        let d = 2 * m;
        let oa = DMatrix::from_iterator(d, d, a.into_iter().take(d * d));
        let ob = DMatrix::from_iterator(d, d, b.into_iter().take(d * d));
        let gens = build_generator_set(3, m).unwrap();
        let lhs = lift_matrix(&(&oa * &ob), &gens).unwrap();
        let rhs = lift_matrix(&oa, &gens).unwrap() * lift_matrix(&ob, &gens).unwrap();
        let scale = max_abs(&lhs).max(1.0);
        prop_assert!(max_abs(&(lhs - rhs)) < 1e-9 * scale);
    }

    #[test]
    fn pure_state_qfi_is_four_covariances(
        r1 in squeeze(0.35),
        r2 in squeeze(0.35),
        t1 in 0.0f64..TAU,
        t2 in 0.0f64..TAU,
        order in 1usize..=2,
    ) {
        let psi = subtracted(&[r1, r2], &[t1, t2], 14);
        let gens = build_generator_set(order, 2).unwrap();
        // The density route runs the general eigen-decomposition formula.
        let rho: QuantumState = psi.to_density().unwrap().into();
        let mo = state_moments(&rho, &gens).unwrap();
        let diff = &mo.qfi - &mo.cov * 4.0;
        prop_assert!(max_abs(&diff) < 1e-7 * max_abs(&mo.qfi).max(1.0), "{}", max_abs(&diff));
    }

    #[test]
    fn passive_unitaries_compose(
        p1 in prop::collection::vec(0.0f64..TAU, 2),
        p2 in prop::collection::vec(0.0f64..TAU, 2),
        r in squeeze(0.3),
    ) {
        let psi = subtracted(&[r, -0.5 * r], &[0.3], 14);
        let u1 = BasisChange::from_params(&p1, 2).unwrap().mode_unitary();
        let u2 = BasisChange::from_params(&p2, 2).unwrap().mode_unitary();
        let seq = apply_passive_unitary(&apply_passive_unitary(&psi, &u1).unwrap(), &u2).unwrap();
        let once = apply_passive_unitary(&psi, &(&u2 * &u1)).unwrap();
        prop_assert!(seq.inner(&once).norm() > 1.0 - 1e-10);
    }

    #[test]
    fn loss_is_a_semigroup(e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0, t in 0.0f64..TAU) {
        let psi: QuantumState = subtracted(&[0.2, -0.2], &[t], 10).into();
        let two = apply_loss(&apply_loss(&psi, &[e1, e2]).unwrap().into(), &[e2, e1]).unwrap();
        let one = apply_loss(&psi, &[e1 * e2, e1 * e2]).unwrap();
        prop_assert!(density_distance(&two, &one) < 1e-8);
    }

    #[test]
    fn classical_fisher_is_bounded_by_qfi(
        r in squeeze(0.3),
        t in 0.0f64..TAU,
        eta in 0.6f64..=1.0,
        phi1 in 0.0f64..3.14,
        phi2 in 0.0f64..3.14,
        order in 1usize..=2,
    ) {
        let psi = subtracted(&[r, -r], &[t], 14);
        let state: QuantumState = if eta < 1.0 {
            apply_loss(&psi.into(), &[eta, eta]).unwrap().into()
        } else {
            psi.into()
        };
        let gens = build_generator_set(order, 2).unwrap();
        let q = state_moments(&state, &gens).unwrap().qfi;
        let setting = MeasurementSetting::adapted(&state, vec![phi1, phi2]).unwrap();
        let f = analytic_fisher(&state, &gens, &setting).unwrap();
        let gap = (&q - &f.values).symmetric_eigenvalues().min();
        prop_assert!(gap > -1e-6 * max_abs(&q).max(1.0), "λmin(Q−F) = {gap}");
    }

    #[test]
    fn recipe_json_round_trip(
        r in prop::collection::vec(-1.0f64..1.0, 3),
        angles in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 0..3),
        eta in prop::collection::vec(0.0f64..=1.0, 3),
        cutoff in 2usize..20,
        seed in any::<u64>(),
    ) {
        let recipe = Recipe {
            name: None,
            modes: 3,
            cutoff,
            squeezing_db: None,
            squeezing_r: Some(r),
            interferometer: None,
            subtractions: angles.into_iter().map(|angles| modewitness::recipe::Subtraction { angles }).collect(),
            loss_eta: Some(eta),
            seed,
            leakage_threshold: 1e-8,
            cluster: None,
            sweep: None,
        };
        let back = Recipe::from_json(&recipe.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, recipe);
    }

    #[test]
    fn partition_and_generator_round_trip(m in 1usize..=5, order in 1usize..=3) {
        for p in Partition::all_shapes(m) {
            let back = Partition::parse(&p.to_string(), m).unwrap();
            prop_assert_eq!(&back, &p);
            let json: Partition = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
            prop_assert_eq!(json, p);
        }
        let gens = build_generator_set(order, m).unwrap();
        let back: GeneratorSet = serde_json::from_str(&serde_json::to_string(&gens).unwrap()).unwrap();
        prop_assert_eq!(back.labels(), gens.labels());
    }
}

/// Random product states, moved into a random basis: undoing the move must
/// leave a non-positive witness.
#[test]
fn product_states_are_not_witnessed() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(200));
    let strategy = (
        0usize..3,
        squeeze(0.3),
        squeeze(0.3),
        0u16..3,
        0u16..3,
        0.5f64..=1.0,
        prop::collection::vec(0.0f64..TAU, 2),
        1usize..=2,
    );
    let basis = FockBasis::shared(2, 10).unwrap();
    runner
        .run(&strategy, |(kind, r1, r2, n1, n2, eta, params, order)| {
            let psi = match kind {
                0 => squeezed_vacuum(&[r1, r2], 20).unwrap(),
                1 => subtracted(&[r1, r2], &[0.0], 20),
                _ => PureState::number_state(basis.clone(), &[n1, n2]).unwrap(),
            };
            let product: QuantumState = if eta < 0.75 {
                apply_loss(&psi.into(), &[eta, 1.0]).unwrap().into()
            } else {
                psi.into()
            };
            let bc = BasisChange::from_params(&params, 2).unwrap();
            let state = moved(&product, &bc);
            let gens = build_generator_set(order, 2).unwrap();
            let problem =
                WitnessProblem::from_moments(&state_moments(&state, &gens).unwrap(), &Partition::singletons(2))
                    .unwrap();
            let e = problem.evaluate_orthogonal(&bc.orthogonal().transpose()).unwrap();
            prop_assert!(e <= 1e-6, "E = {e}");
            Ok(())
        })
        .unwrap();
}

#[test]
fn gaussian_states_are_never_witnessed() {
    let cases: [(usize, Vec<f64>, Vec<f64>); 4] = [
        (2, vec![0.3, -0.1], vec![0.7, 1.3]),
        (2, vec![-0.25, 0.2], vec![2.1, 0.4]),
        (3, vec![0.2, -0.15, 0.1], vec![0.3, 1.1, -0.6, 0.2, 2.0, 0.9]),
        (3, vec![-0.2, 0.0, 0.25], vec![1.7, -0.4, 0.8, 1.0, 0.1, -2.2]),
    ];
    for (m, r, params) in cases {
        let psi = squeezed_vacuum(&r, if m == 2 { 14 } else { 13 }).unwrap();
        let mixed = BasisChange::from_params(&params, m).unwrap().mode_unitary();
        let state: QuantumState = apply_passive_unitary(&psi, &mixed).unwrap().into();
        for order in 1..=2 {
            for p in Partition::all_shapes(m) {
                let cfg = if m == 2 { OptimizerConfig::default() } else { default_config(m, 3) };
                let w = witness_of_state(&state, order, &p, &cfg).unwrap().value;
                assert!(w <= 1e-3, "m={m} N={order} {p}: W = {w}");
            }
        }
    }
}

#[test]
fn product_qfi_is_block_diagonal() {
    let psi = subtracted(&[0.3, -0.2], &[0.0], 22);
    let lossy: QuantumState = apply_loss(&psi.into(), &[0.8, 0.7]).unwrap().into();
    let gens = build_generator_set(2, 2).unwrap();
    let mo = state_moments(&lossy, &gens).unwrap();
    let local = gens.local_indices(&Partition::singletons(2)).unwrap();
    let on_mode = |i: usize| {
        let e = gens.get(i).exponents();
        if e[1] == 0 && e[3] == 0 {
            0
        } else {
            1
        }
    };
    for &i in &local {
        for &j in &local {
            if on_mode(i) != on_mode(j) {
                assert!(mo.qfi[(i, j)].abs() < 1e-7, "cross term {i},{j} = {}", mo.qfi[(i, j)]);
            }
        }
    }
    // The first-mode block is a single-mode squeezed vacuum, subtracted once then attenuated.
    let one = {
        let s = squeezed_vacuum(&[0.3], 22).unwrap();
        let s = subtract_photon_at_angles(&s, &[]).unwrap().state;
        apply_loss(&s.into(), &[0.8]).unwrap().into()
    };
    let g1 = build_generator_set(2, 1).unwrap();
    let q1 = state_moments(&one, &g1).unwrap().qfi;
    for (a, ga) in g1.generators().iter().enumerate() {
        for (b, gb) in g1.generators().iter().enumerate() {
            let lift = |e: &[u8]| gens.index_of(&[e[0], 0, e[1], 0]).unwrap();
            let (i, j) = (lift(ga.exponents()), lift(gb.exponents()));
            assert!((mo.qfi[(i, j)] - q1[(a, b)]).abs() < 1e-7, "{ga},{gb}");
        }
    }
}

/// The positive part of `E` at fixed bases never grows as efficiency drops,
/// for the one-photon and two-photon loss families. `E` itself returns to 0
/// from below as the state approaches the vacuum.
#[test]
fn witness_decreases_with_loss() {
    let one = |t: f64| subtracted(&[0.2, -0.2], &[t], 12);
    let two = |t: f64| subtracted(&[db_to_r(1.5), db_to_r(-2.6)], &[FRAC_PI_4, t], 12);
    let bases = [[0.0, 0.0], [0.4, 1.0], [FRAC_PI_4, FRAC_PI_2], [1.2, 2.5]];
    let etas = [1.0, 0.9, 0.75, 0.6, 0.45, 0.3, 0.15, 0.05];
    for family in [&one as &dyn Fn(f64) -> PureState, &two] {
        for t in [-FRAC_PI_4, -0.25, 0.3, FRAC_PI_4] {
            let psi = family(t);
            for order in 1..=2 {
                let gens = build_generator_set(order, 2).unwrap();
                let problems: Vec<WitnessProblem> = etas
                    .iter()
                    .map(|&e| {
                        let s: QuantumState = apply_loss(&psi.clone().into(), &[e, e]).unwrap().into();
                        WitnessProblem::from_moments(&state_moments(&s, &gens).unwrap(), &Partition::singletons(2))
                            .unwrap()
                    })
                    .collect();
                for b in &bases {
                    let vals: Vec<f64> = problems.iter().map(|p| p.evaluate_params(b).unwrap().max(0.0)).collect();
                    for w in vals.windows(2) {
                        assert!(w[1] <= w[0] + 1e-6, "Θ={t} N={order} ϑ={b:?}: {vals:?}");
                    }
                }
            }
        }
    }
}
