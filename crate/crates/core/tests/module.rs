use ncprob_core::linalg::{self, frob};
use ncprob_core::module::{associativity_residual, gns_residual, quotient_null_space, tensor_raw};
use ncprob_core::random::{self, SeededRng};
use ncprob_core::{gns_construct, tensor_over_b, AdjointableOperator, HilbertModule, MatrixStarAlgebra};
use proptest::prelude::*;

fn random_bimodule(b: &MatrixStarAlgebra, rng: &mut SeededRng) -> HilbertModule {
    let t = if b.ambient_dim() == 2 && b.len() == 4 {
        random::unital_cp_map(2, rand::Rng::gen_range(rng, 1..=3), rng).unwrap()
    } else {
        random::stochastic_map(b.len(), rng).unwrap()
    };
    gns_construct(&t).unwrap()
}

fn random_vector(e: &HilbertModule, rng: &mut SeededRng) -> linalg::CMat {
    let coeffs: Vec<_> = (0..e.gens()).map(|_| random::element(e.base(), rng)).collect();
    e.vector(&coeffs).unwrap()
}

#[test]
fn gns_reproduces_sampled_maps() {
    let mut rng = random::seeded(21);
    for i in 0..10 {
        let map = random::sample_map(i, &mut rng).unwrap();
        let e = gns_construct(&map).unwrap();
        assert!(gns_residual(&map, &e).unwrap() <= 1e-10, "family {i}");
        let rep = e.verify(1e-9, &mut rng);
        assert!(rep.passed, "family {i}: {:?}", rep.failures);
    }
}

#[test]
fn tensor_is_associative() {
    let mut rng = random::seeded(22);
    for i in 0..10 {
        let b = if i % 2 == 0 {
            MatrixStarAlgebra::full(2)
        } else {
            MatrixStarAlgebra::diagonal(3)
        };
        let (e1, e2, e3) = (
            random_bimodule(&b, &mut rng),
            random_bimodule(&b, &mut rng),
            random_bimodule(&b, &mut rng),
        );
        assert!(associativity_residual(&e1, &e2, &e3).unwrap() <= 1e-10);
    }
}

#[test]
fn adjoint_reverses_products() {
    let mut rng = random::seeded(23);
    let e = random_bimodule(&MatrixStarAlgebra::full(2), &mut rng);
    let a1 = e.left_operator(&random::element(e.base(), &mut rng)).unwrap();
    let x = random_vector(&e, &mut rng);
    let y = random_vector(&e, &mut rng);
    let a2 = ncprob_core::rank_one(&e, &x, &y);
    let prod = a1.compose(&a2).unwrap();
    let lhs = e.adjoint(&prod);
    let rhs = e.adjoint(&a2).compose(&e.adjoint(&a1)).unwrap();
    assert!(e.matrix_distance(lhs.action(), rhs.action()) < 1e-10);
    assert!(e.adjoint_residual(&prod, &lhs) < 1e-10);
}

#[test]
fn quotient_preserves_inner_products() {
    let mut rng = random::seeded(24);
    let b = MatrixStarAlgebra::full(2);
    let (e1, e2) = (random_bimodule(&b, &mut rng), random_bimodule(&b, &mut rng));
    let raw = tensor_raw(&e1, &e2).unwrap();
    let q = quotient_null_space(&raw).unwrap();
    for _ in 0..5 {
        let x = random_vector(&raw, &mut rng);
        let y = random_vector(&raw, &mut rng);
        let lhs = raw.inner(&x, &y);
        let rhs = q.module.inner(&q.vector(&x), &q.vector(&y));
        assert!(frob(&(lhs - rhs)) < 1e-10);
    }
    assert!(q.module.gens() <= raw.gens());
    assert_eq!(q.scalar_dim, raw.scalar_dim());
}

#[test]
fn left_action_tensors_through() {
    let mut rng = random::seeded(25);
    let b = MatrixStarAlgebra::full(2);
    let (e1, e2) = (random_bimodule(&b, &mut rng), random_bimodule(&b, &mut rng));
    let t = tensor_over_b(&e1, &e2).unwrap();
    let a = random::element(e1.left_action().unwrap().algebra(), &mut rng);
    let x1 = random_vector(&e1, &mut rng);
    let x2 = random_vector(&e2, &mut rng);
    let op = t.left_operator(&e1.left_operator(&a).unwrap()).unwrap();
    let lhs = op.apply(&t.vector(&x1, &x2).unwrap()).unwrap();
    let rhs = t.vector(&e1.left_operator(&a).unwrap().apply(&x1).unwrap(), &x2).unwrap();
    assert!(t.module().vector_distance(&lhs, &rhs) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gram_is_positive(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let b = MatrixStarAlgebra::full(2);
        let e = random_bimodule(&b, &mut rng);
        let x = random_vector(&e, &mut rng);
        let ip = e.inner(&x, &x);
        prop_assert!(frob(&(&ip - ip.adjoint())) < 1e-12);
        prop_assert!(linalg::min_eigenvalue(&ip) > -1e-9);
    }

    #[test]
    fn inner_product_is_right_linear(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let e = random_bimodule(&MatrixStarAlgebra::diagonal(3), &mut rng);
        let x = random_vector(&e, &mut rng);
        let y = random_vector(&e, &mut rng);
        let b = random::element(e.base(), &mut rng);
        let lhs = e.inner(&x, &(&y * &b));
        prop_assert!(frob(&(lhs - e.inner(&x, &y) * &b)) < 1e-10);
    }

    #[test]
    fn identity_operator_is_neutral(seed in 0u64..10_000) {
        let mut rng = random::seeded(seed);
        let e = random_bimodule(&MatrixStarAlgebra::full(2), &mut rng);
        let id = AdjointableOperator::identity(&e);
        let x = random_vector(&e, &mut rng);
        prop_assert!(e.vector_distance(&id.apply(&x).unwrap(), &x) < 1e-12);
    }
}
