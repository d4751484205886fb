use ncprob_core::linalg::{self, frob};
use ncprob_core::random;
use ncprob_core::{subalgebra_project, verify_algebra, verify_positive_map, MatrixStarAlgebra};
use proptest::prelude::*;

#[test]
fn generated_algebras_close() {
    let mut rng = random::seeded(31);
    for d in 2..=3 {
        let g = random::hermitian_letter(&MatrixStarAlgebra::full(d), &mut rng);
        let alg = MatrixStarAlgebra::generated_by(d, std::slice::from_ref(&g)).unwrap();
        assert!(verify_algebra(&alg, 1e-9).passed);
        assert!(alg.contains(&(&g * &g), 1e-9));
        assert!(alg.commutator_residual() < 1e-9);
    }
}

#[test]
fn kraus_composition_stays_unital_cp() {
    let mut rng = random::seeded(32);
    let s = random::unital_cp_map(2, 2, &mut rng).unwrap();
    let t = random::unital_cp_map(2, 3, &mut rng).unwrap();
    let st = s.compose(&t).unwrap();
    assert!(st.unital_residual() < 1e-12);
    assert!(verify_positive_map(&st, 1e-9).unwrap().passed);
    let b = random::element(st.domain(), &mut rng);
    let direct = s.apply(&t.apply(&b).unwrap()).unwrap();
    assert!(frob(&(st.apply(&b).unwrap() - direct)) < 1e-12);
}

#[test]
fn transpose_is_positive_but_not_cp() {
    let m2 = MatrixStarAlgebra::full(2);
    let t = ncprob_core::PositiveMap::from_fn(m2.clone(), m2, ncprob_core::MapKind::CpMap, |x| {
        x.transpose()
    })
    .unwrap();
    assert!(t.choi_min_eigenvalue() < -0.5);
    assert!(!verify_positive_map(&t, 1e-9).unwrap().passed);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_is_idempotent(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let alg = MatrixStarAlgebra::diagonal(3);
        let x = random::matrix(3, 3, &mut rng);
        let (p, r) = subalgebra_project(&alg, &x).unwrap();
        let (pp, rr) = subalgebra_project(&alg, &p).unwrap();
        prop_assert!(frob(&(p - pp)) < 1e-12);
        prop_assert!(rr < 1e-12);
        prop_assert!(r >= 0.0);
    }

    #[test]
    fn states_are_positive_and_normalized(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let alg = MatrixStarAlgebra::full(2);
        let phi = random::state(&alg, &mut rng).unwrap();
        prop_assert!((phi.value(alg.unit()).unwrap() - linalg::cr(1.0)).norm() < 1e-12);
        let a = random::element(&alg, &mut rng);
        prop_assert!(phi.value(&(a.adjoint() * &a)).unwrap().re >= -1e-12);
    }
}
