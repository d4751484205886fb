use ncprob_core::dilation::{
    dilate_discrete, markov_scenario, white_noise_increment_check, white_noise_scenario,
    DilationScenario, IncrementMode, TimedFunction, DEFAULT_BUDGET,
};
use ncprob_core::linalg::{cr, frob};
use ncprob_core::random;
use ncprob_core::{MapKind, MatrixStarAlgebra, PositiveMap};
use proptest::prelude::*;

fn coherence_all(sc: &DilationScenario) {
    let n = sc.system.horizon();
    for m in 0..=n {
        for k in 0..=(n - m) {
            let rep = sc.system.coherence(m, k, 1e-9).unwrap();
            assert!(rep.passed, "E_{m} ⊙ E_{k}: {:?}", rep.failures);
        }
    }
}

#[test]
fn two_state_chain() {
    let p = vec![vec![0.5, 0.5], vec![0.3, 0.7]];
    let m = markov_scenario(&p, 3, DEFAULT_BUDGET).unwrap();
    for n in 0..=3 {
        assert!(m.scenario.recovery_residual(n).unwrap() < 1e-12);
    }
    assert!(m.moment_residual(40, 1).unwrap() < 1e-9);
    for a in 0..=3 {
        for t in 0..=(3 - a) {
            assert!(m.shift_residual(a, t, 5, 2).unwrap() < 1e-9);
        }
    }
    coherence_all(&m.scenario);
    let rep = m.scenario.verify_endomorphisms(2, 3, 1e-9).unwrap();
    assert!(rep.passed, "{:?}", rep.failures);
}

#[test]
fn chain_is_markov_but_not_white_noise() {
    let p = vec![vec![0.5, 0.5], vec![0.3, 0.7]];
    let m = markov_scenario(&p, 3, DEFAULT_BUDGET).unwrap();
    let rep = white_noise_increment_check(&m.scenario.system, (1, 2, 3), 60, 5, 4, 1e-9).unwrap();
    assert_eq!(rep.mode, IncrementMode::MarkovProperty);
    assert!(rep.invariance_residual > 1e-6);
    assert!(rep.max_residual < 1e-9, "{}", rep.max_residual);
}

#[test]
fn unitary_average_recovers_powers() {
    let mut rng = random::seeded(8);
    let u = random::unitary(2, &mut rng);
    let b = MatrixStarAlgebra::full(2);
    let t = PositiveMap::from_fn(b.clone(), b.clone(), MapKind::CpMap, |x| {
        (x + &u * x * u.adjoint()) * cr(0.5)
    })
    .unwrap();
    let sc = dilate_discrete(&t, 3, DEFAULT_BUDGET).unwrap();
    for n in 0..=3 {
        assert!(sc.recovery_residual(n).unwrap() < 1e-10);
    }
    coherence_all(&sc);
    let rep = sc.verify_endomorphisms(2, 9, 1e-9).unwrap();
    assert!(rep.passed, "{:?}", rep.failures);
}

#[test]
fn scalar_white_noise() {
    let sc = white_noise_scenario(&MatrixStarAlgebra::scalars(), 2, 3, DEFAULT_BUDGET).unwrap();
    assert_eq!(sc.system.scalar_dims(), &[1, 2, 4, 8]);
    let rep = white_noise_increment_check(&sc.system, (1, 2, 3), 100, 6, 5, 1e-9).unwrap();
    assert_eq!(rep.mode, IncrementMode::WhiteNoise);
    assert!(rep.max_residual < 1e-9, "{}", rep.max_residual);
}

#[test]
fn matrix_white_noise() {
    let sc = white_noise_scenario(&MatrixStarAlgebra::full(2), 2, 3, DEFAULT_BUDGET).unwrap();
    coherence_all(&sc);
    let rep = white_noise_increment_check(&sc.system, (1, 2, 3), 100, 6, 6, 1e-9).unwrap();
    assert_eq!(rep.mode, IncrementMode::WhiteNoise);
    assert!(rep.invariance_residual < 1e-12);
    assert!(rep.max_residual < 1e-9, "{}", rep.max_residual);
    let rep = sc.verify_endomorphisms(1, 10, 1e-9).unwrap();
    assert!(rep.passed, "{:?}", rep.failures);
}

#[test]
fn white_noise_window_from_zero() {
    let sc = white_noise_scenario(&MatrixStarAlgebra::full(2), 2, 3, DEFAULT_BUDGET).unwrap();
    let rep = white_noise_increment_check(&sc.system, (0, 1, 3), 60, 5, 7, 1e-9).unwrap();
    assert!(rep.max_residual < 1e-9, "{}", rep.max_residual);
}

#[test]
fn bad_window_rejected() {
    let sc = white_noise_scenario(&MatrixStarAlgebra::scalars(), 2, 3, DEFAULT_BUDGET).unwrap();
    assert!(white_noise_increment_check(&sc.system, (2, 2, 3), 5, 3, 0, 1e-9).is_err());
    assert!(white_noise_increment_check(&sc.system, (1, 2, 4), 5, 3, 0, 1e-9).is_err());
}

#[test]
fn identity_chain_is_constant() {
    let p = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
    let m = markov_scenario(&p, 3, DEFAULT_BUDGET).unwrap();
    assert!(!m.warnings.is_empty());
    let f = vec![0.3, -1.0, 2.5];
    for n in 0..=3 {
        let v = m
            .module_expectation(&[TimedFunction {
                time: n,
                values: f.clone(),
            }])
            .unwrap();
        for (a, b) in v.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn uniform_chain_decorrelates_in_one_step() {
    let p = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
    let m = markov_scenario(&p, 2, DEFAULT_BUDGET).unwrap();
    let f = vec![1.0, 3.0];
    let g = vec![-2.0, 0.5];
    let v = m
        .module_expectation(&[
            TimedFunction { time: 1, values: f },
            TimedFunction { time: 0, values: g.clone() },
        ])
        .unwrap();
    for (a, gy) in v.iter().zip(&g) {
        assert!((a - 2.0 * gy).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn random_maps_dilate_coherently(seed in 0u64..10_000, kraus in 1usize..3) {
        let mut rng = random::seeded(seed);
        let t = random::unital_cp_map(2, kraus, &mut rng).unwrap();
        let sc = dilate_discrete(&t, 2, DEFAULT_BUDGET).unwrap();
        for n in 0..=2 {
            prop_assert!(sc.recovery_residual(n).unwrap() < 1e-9);
        }
        let rep = sc.system.coherence(1, 1, 1e-9).unwrap();
        prop_assert!(rep.passed, "{:?}", rep.failures);
        let inc = white_noise_increment_check(&sc.system, (0, 1, 2), 10, 4, seed, 1e-9).unwrap();
        prop_assert!(inc.max_residual < 1e-9, "{:?}", inc);
    }

    #[test]
    fn chains_match_path_space(a in 0.05f64..0.95, b in 0.05f64..0.95, seed in 0u64..1000) {
        let p = vec![vec![a, 1.0 - a], vec![b, 1.0 - b]];
        let m = markov_scenario(&p, 3, DEFAULT_BUDGET).unwrap();
        prop_assert!(m.moment_residual(5, seed).unwrap() < 1e-9);
    }
}

#[test]
fn gram_distance_sanity() {
    let sc = white_noise_scenario(&MatrixStarAlgebra::full(2), 2, 2, DEFAULT_BUDGET).unwrap();
    let e = sc.system.power(2).unwrap();
    let xi = sc.system.unit(2).unwrap();
    assert!(frob(&(e.inner(xi, xi) - MatrixStarAlgebra::full(2).unit())) < 1e-12);
}

#[test]
fn literal_base_copy_fails_white_noise_formula() {
    use ncprob_core::dilation::{random_operator, Increments};
    use ncprob_core::independence::{alternate, nested_formula, Leg};
    let sc = white_noise_scenario(&MatrixStarAlgebra::full(2), 2, 3, DEFAULT_BUDGET).unwrap();
    let sys = &sc.system;
    let inc = Increments::new(sys, 1, 2, 3).unwrap();
    let mut rng = random::seeded(12);
    let e1 = sys.power(1).unwrap();
    let (a, b, c) = (
        random_operator(e1, &mut rng).unwrap(),
        random_operator(e1, &mut rng).unwrap(),
        random_operator(e1, &mut rng).unwrap(),
    );
    let letters = vec![
        (Leg::Two, inc.past(&a).unwrap()),
        (Leg::One, inc.future(&b).unwrap()),
        (Leg::Two, inc.past(&c).unwrap()),
    ];
    let id = sys.power(3).unwrap().identity_matrix();
    let word = letters.iter().fold(id.clone(), |acc, (_, x)| acc * x);
    let shape = alternate(letters, Leg::One, &id, |x, y| x * y);
    let p = |x: &ncprob_core::CMat| sys.expectation(3, x);
    let exact = sys.expectation(3, &word).unwrap();
    let right = nested_formula(&shape, p, |v| inc.base_in_past(v), p, |x, y| x * y, |x, y| x * y).unwrap();
    let literal = nested_formula(&shape, p, |v| sys.embed_base(3, v), p, |x, y| x * y, |x, y| x * y).unwrap();
    assert!(frob(&(&exact - right)) < 1e-10);
    assert!(frob(&(exact - literal)) > 1e-4);
}

#[test]
fn slot_acts_on_pure_tensors() {
    let mut rng = random::seeded(12);
    let t = random::unital_cp_map(2, 2, &mut rng).unwrap();
    let sc = dilate_discrete(&t, 3, DEFAULT_BUDGET).unwrap();
    let sys = &sc.system;
    let (k, m) = (1, 2);
    let c = ncprob_core::dilation::random_operator(sys.power(m).unwrap(), &mut rng).unwrap();
    let s = sys.slot(k, &c, m).unwrap();
    let ek = sys.power(k).unwrap();
    let en = sys.power(k + m).unwrap();
    for g in 0..en.gens() {
        let idx = sys.multi_index(k + m, g).to_vec();
        let (x, y) = (sys.pure_tensor(&idx[..k]).unwrap(), sys.pure_tensor(&idx[k..]).unwrap());
        let ip = ek.inner(sys.unit(k).unwrap(), &x);
        let inner = c.clone() * (sys.left(m, &ip).unwrap() * y);
        let expected = sys.concat(k, sys.unit(k).unwrap(), m, &inner).unwrap();
        let got = s.clone() * sys.pure_tensor(&idx).unwrap();
        assert!(en.vector_distance(&got, &expected) < 1e-10);
    }
}

#[test]
fn theta_acts_on_pure_tensors() {
    let mut rng = random::seeded(13);
    let t = random::unital_cp_map(2, 2, &mut rng).unwrap();
    let sc = dilate_discrete(&t, 3, DEFAULT_BUDGET).unwrap();
    let sys = &sc.system;
    for (k, n) in [(0, 2), (1, 2), (2, 1), (0, 3)] {
        let ek = sys.power(k).unwrap();
        let a = ncprob_core::dilation::random_operator(ek, &mut rng).unwrap();
        let th = sys.theta(k, n, &a).unwrap();
        let en = sys.power(k + n).unwrap();
        for g in 0..en.gens() {
            let idx = sys.multi_index(k + n, g).to_vec();
            let x = a.clone() * sys.pure_tensor(&idx[..k]).unwrap();
            let expected = sys.concat(k, &x, n, &sys.pure_tensor(&idx[k..]).unwrap()).unwrap();
            let got = th.clone() * sys.pure_tensor(&idx).unwrap();
            assert!(en.vector_distance(&got, &expected) < 1e-10, "k={k} n={n}");
        }
    }
}
