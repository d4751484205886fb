use ncprob_core::independence::{
    conditional_monotone_moment_formula, conditional_monotone_realize, monotone_moment_formula,
    monotone_realize, sandwich_residual, scalar_oracle, tensor_moment_formula, tensor_realize,
    verify_independence, AlternatingWord, CoinsGame, Leg, QuantumProbabilitySpace, WordSampler,
};
use ncprob_core::linalg::{self, frob, CMat};
use ncprob_core::random;
use ncprob_core::{MapKind, MatrixStarAlgebra, PositiveMap};
use proptest::prelude::*;

fn random_spaces(seed: u64) -> (QuantumProbabilitySpace, QuantumProbabilitySpace) {
    let mut rng = random::seeded(seed);
    let a1 = MatrixStarAlgebra::full(2);
    let a2 = MatrixStarAlgebra::diagonal(3);
    (
        QuantumProbabilitySpace::new(random::state(&a1, &mut rng).unwrap()).unwrap(),
        QuantumProbabilitySpace::new(random::state(&a2, &mut rng).unwrap()).unwrap(),
    )
}

fn diagonal_compression() -> PositiveMap {
    PositiveMap::from_fn(
        MatrixStarAlgebra::full(2),
        MatrixStarAlgebra::diagonal(2),
        MapKind::ConditionalExpectation,
        linalg::diag_part,
    )
    .unwrap()
}

#[test]
fn monotone_formula_matches_realization() {
    let (s1, s2) = random_spaces(1);
    let real = monotone_realize(&s1, &s2).unwrap();
    let sampler = WordSampler::new(s1.algebra().clone(), s2.algebra().clone(), 6);
    let oracle = scalar_oracle(monotone_moment_formula, s1.functional(), s2.functional());
    let report = verify_independence(&real, oracle, |r| sampler.sample(r), 100, 3).unwrap();
    assert!(report.max_residual < 1e-9, "{}", report.max_residual);
}

#[test]
fn tensor_formula_matches_realization() {
    let (s1, s2) = random_spaces(2);
    let real = tensor_realize(&s1, &s2).unwrap();
    let sampler = WordSampler::new(s1.algebra().clone(), s2.algebra().clone(), 6);
    let oracle = scalar_oracle(tensor_moment_formula, s1.functional(), s2.functional());
    let report = verify_independence(&real, oracle, |r| sampler.sample(r), 100, 4).unwrap();
    assert!(report.max_residual < 1e-9, "{}", report.max_residual);
}

#[test]
fn wrong_oracle_is_detected() {
    let (s1, s2) = random_spaces(3);
    let real = monotone_realize(&s1, &s2).unwrap();
    let sampler = WordSampler::new(s1.algebra().clone(), s2.algebra().clone(), 6);
    let oracle = scalar_oracle(tensor_moment_formula, s1.functional(), s2.functional());
    let report = verify_independence(&real, oracle, |r| sampler.sample(r), 100, 5).unwrap();
    assert!(report.max_residual > 0.01);
}

#[test]
fn conditional_monotone_formula_matches_realization() {
    let phi = diagonal_compression();
    let real = conditional_monotone_realize(&phi, &phi).unwrap();
    let rep = real.verify(1e-9);
    assert!(rep.passed, "{:?}", rep.failures);
    let m2 = MatrixStarAlgebra::full(2);
    let sampler = WordSampler::new(m2.clone(), m2, 5);
    let report = verify_independence(
        &real,
        |w| conditional_monotone_moment_formula(w, &phi, &phi),
        |r| sampler.sample(r),
        100,
        6,
    )
    .unwrap();
    assert!(report.max_residual < 1e-9, "{}", report.max_residual);
}

#[test]
fn conditional_monotone_with_unequal_expectations() {
    let a1 = MatrixStarAlgebra::full(2);
    let a2 = MatrixStarAlgebra::diagonal(2);
    let phi1 = diagonal_compression();
    let phi2 = PositiveMap::identity(a2.clone(), MapKind::ConditionalExpectation).unwrap();
    let real = conditional_monotone_realize(&phi1, &phi2).unwrap();
    let sampler = WordSampler::new(a1, a2, 6);
    let report = verify_independence(
        &real,
        |w| conditional_monotone_moment_formula(w, &phi1, &phi2),
        |r| sampler.sample(r),
        50,
        9,
    )
    .unwrap();
    assert!(report.max_residual < 1e-9, "{}", report.max_residual);
}

#[test]
fn conditional_sandwich_identity() {
    let phi = diagonal_compression();
    let real = conditional_monotone_realize(&phi, &phi).unwrap();
    let mut rng = random::seeded(10);
    let m2 = MatrixStarAlgebra::full(2);
    for _ in 0..10 {
        let a1 = random::element(&m2, &mut rng);
        let a2 = random::element(&m2, &mut rng);
        let a3 = random::element(&m2, &mut rng);
        assert!(sandwich_residual(&real, &phi, &a1, &a2, &a3).unwrap() < 1e-10);
    }
}

fn coins_oracle(game: &CoinsGame, f: [f64; 2], g: [f64; 2]) -> CMat {
    // exhaustive sum over the 8 outcomes (y, x1, x2) conditioned on y
    let mut vals = [0.0; 2];
    for (y, v) in vals.iter_mut().enumerate() {
        for x1 in 0..2 {
            for x2 in 0..2 {
                let p1 = if x1 == y { game.bias1 } else { 1.0 - game.bias1 };
                let p2 = if x2 == y { game.bias2 } else { 1.0 - game.bias2 };
                *v += p1 * p2 * f[x1] * g[x2];
            }
        }
    }
    CoinsGame::of_y(vals)
}

#[test]
fn coins_game_exhaustive() {
    let game = CoinsGame::default();
    let prod = game.realize().unwrap();
    for f in CoinsGame::indicators() {
        for g in CoinsGame::indicators() {
            let (fx, gx) = (CoinsGame::of_x(f), CoinsGame::of_x(g));
            let oracle = coins_oracle(&game, f, g);
            assert!(frob(&(prod.expectation_of(&fx, &gx).unwrap() - &oracle)) < 1e-12);
            assert!(frob(&(prod.factorized(&fx, &gx).unwrap() - &oracle)) < 1e-12);
            assert!(frob(&(prod.realized(&fx, &gx).unwrap() - &oracle)) < 1e-12);
        }
    }
}

#[test]
fn coins_unit_factor_reduces_to_phi1() {
    let game = CoinsGame::default();
    let prod = game.realize().unwrap();
    let phi1 = game.phi1().unwrap();
    let f = CoinsGame::of_x([0.25, -1.5]);
    let v = prod.expectation_of(&f, &linalg::identity(4)).unwrap();
    assert!(frob(&(v - phi1.apply(&f).unwrap())) < 1e-12);
}

#[test]
fn coins_insertion_either_side() {
    let prod = CoinsGame::default().realize().unwrap();
    for f in CoinsGame::indicators() {
        for g in CoinsGame::indicators() {
            let h = CoinsGame::of_y([2.0, -0.5]);
            let r = prod
                .insertion_residual(&CoinsGame::of_x(f), &h, &CoinsGame::of_x(g))
                .unwrap();
            assert!(r < 1e-12);
        }
    }
}

#[test]
fn non_symmetry_witness() {
    let d = MatrixStarAlgebra::diagonal(2);
    let s1 = QuantumProbabilitySpace::new(
        PositiveMap::state_from_density(d.clone(), &linalg::diag_real(&[0.5, 0.5])).unwrap(),
    )
    .unwrap();
    let s2 = QuantumProbabilitySpace::new(
        PositiveMap::state_from_density(d, &linalg::diag_real(&[0.7, 0.3])).unwrap(),
    )
    .unwrap();
    let real = monotone_realize(&s1, &s2).unwrap();
    let x = linalg::diag_real(&[1.0, -1.0]);
    let f = linalg::diag_real(&[1.0, 0.0]);
    let ordered = AlternatingWord::new().with(Leg::One, f.clone()).with(Leg::Two, x.clone());
    let v = real.evaluate(&ordered).unwrap()[(0, 0)];
    let expected = s1.functional().value(&f).unwrap() * s2.functional().value(&x).unwrap();
    assert!((v - expected).norm() < 1e-12);
    let reversed = AlternatingWord::new()
        .with(Leg::Two, x.clone())
        .with(Leg::One, f.clone())
        .with(Leg::Two, x.clone());
    let v = real.evaluate(&reversed).unwrap()[(0, 0)];
    let naive = s2.functional().value(&(&x * &x)).unwrap() * s1.functional().value(&f).unwrap();
    assert!((v - naive).norm() > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_agreement_for_any_seed(seed in 0u64..10_000) {
        let (s1, s2) = random_spaces(seed);
        let real = monotone_realize(&s1, &s2).unwrap();
        let sampler = WordSampler::new(s1.algebra().clone(), s2.algebra().clone(), 6);
        let oracle = scalar_oracle(monotone_moment_formula, s1.functional(), s2.functional());
        let report = verify_independence(&real, oracle, |r| sampler.sample(r), 10, seed).unwrap();
        prop_assert!(report.max_residual < 1e-9);
    }

    #[test]
    fn conditional_output_stays_in_base(seed in 0u64..10_000) {
        let phi = diagonal_compression();
        let m2 = MatrixStarAlgebra::full(2);
        let sampler = WordSampler::new(m2.clone(), m2, 5);
        let mut rng = random::seeded(seed);
        let w = sampler.sample(&mut rng);
        let out = conditional_monotone_moment_formula(&w, &phi, &phi).unwrap();
        let (_, residual) = phi.codomain().project(&out).unwrap();
        prop_assert!(residual < 1e-9);
    }
}
