//! Seeded samplers for algebra elements, states and CP maps.
//!
//! All randomness flows from an explicit generator; [`seeded`] fixes the
//! stream so that every run with the same seed sees the same data.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{MapKind, MatrixStarAlgebra, PositiveMap};
use crate::error::Result;
use crate::linalg::{self, c, cr, CMat};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex<R: Rng>(rng: &mut R) -> Complex64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Random complex matrix with entries uniform in the unit square.
pub fn matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex(rng))
}

/// Element of the algebra with uniform random complex coordinates.
pub fn element<R: Rng>(alg: &MatrixStarAlgebra, rng: &mut R) -> CMat {
    let coords: Vec<Complex64> = (0..alg.len()).map(|_| complex(rng)).collect();
    alg.element(&coords)
}

/// Largest absolute eigenvalue of a self-adjoint matrix.
pub fn spectral_radius(h: &CMat) -> f64 {
    linalg::hermitian_eigen(h)
        .0
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Self-adjoint element with spectrum inside `[-2, 2]`.
pub fn hermitian_letter<R: Rng>(alg: &MatrixStarAlgebra, rng: &mut R) -> CMat {
    let a = element(alg, rng);
    let h = linalg::hermitian_part(&a);
    let radius = spectral_radius(&h);
    let target = rng.gen_range(0.5..2.0);
    if radius > 0.0 {
        h * cr(target / radius)
    } else {
        h
    }
}

/// Density in the algebra with spectrum bounded away from zero on the
/// support of the unit.
pub fn density<R: Rng>(alg: &MatrixStarAlgebra, rng: &mut R) -> CMat {
    let a = element(alg, rng);
    let rho = a.adjoint() * &a + alg.unit() * cr(0.1 * (1.0 + rng.gen::<f64>()));
    let t = rho.trace().re;
    rho * cr(1.0 / t)
}

/// Faithful state `tr(ρ ·)` with a random density.
pub fn state<R: Rng>(alg: &MatrixStarAlgebra, rng: &mut R) -> Result<PositiveMap> {
    PositiveMap::state_from_density(alg.clone(), &density(alg, rng))
}

/// Haar-ish unitary from the QR factorisation of a random matrix.
pub fn unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let qr = matrix(d, d, rng).qr();
    let (q, r) = qr.unpack();
    let phases = CMat::from_fn(d, d, |i, j| {
        if i == j && r[(i, i)].norm() > 0.0 {
            r[(i, i)] / r[(i, i)].norm()
        } else {
            cr(0.0)
        }
    });
    q * phases
}

/// Kraus operators `K_i = G_i S^{-1/2}`, `S = Σ G_i* G_i`, so that
/// `Σ K_i* K_i = 1`.
pub fn unital_kraus<R: Rng>(d: usize, count: usize, rng: &mut R) -> Vec<CMat> {
    let gs: Vec<CMat> = (0..count).map(|_| matrix(d, d, rng)).collect();
    let s = gs
        .iter()
        .fold(linalg::zeros(d, d), |acc, g| acc + g.adjoint() * g);
    let (values, vectors) = linalg::hermitian_eigen(&s);
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        values.iter().map(|v| cr(1.0 / v.sqrt())),
    ));
    let s_inv_sqrt = &vectors * inv_sqrt * vectors.adjoint();
    gs.into_iter().map(|g| g * &s_inv_sqrt).collect()
}

/// Unital CP map `b ↦ Σ K_i* b K_i` on `M_d`.
pub fn unital_cp_map<R: Rng>(d: usize, count: usize, rng: &mut R) -> Result<PositiveMap> {
    PositiveMap::from_kraus(MatrixStarAlgebra::full(d), &unital_kraus(d, count, rng))
}

/// Row-stochastic matrix with entries bounded away from zero.
pub fn stochastic<R: Rng>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = row.iter().sum();
            row.into_iter().map(|x| x / total).collect()
        })
        .collect()
}

/// `f ↦ P f` on the diagonal algebra of `n` points.
pub fn stochastic_map<R: Rng>(n: usize, rng: &mut R) -> Result<PositiveMap> {
    crate::dilation::transition_map(&stochastic(n, rng))
}

/// Conditional expectation `a ↦ φ(a) 1` onto the multiples of the unit.
pub fn state_expectation<R: Rng>(alg: &MatrixStarAlgebra, rng: &mut R) -> Result<PositiveMap> {
    let phi = state(alg, rng)?;
    let scalars = MatrixStarAlgebra::new(vec![alg.unit().clone()], None)?;
    let unit = alg.unit().clone();
    PositiveMap::from_fn(alg.clone(), scalars, MapKind::ConditionalExpectation, move |a| {
        &unit * phi.value(a).expect("element of the domain")
    })
}

/// Verified conditional expectation or CP map on an algebra of dimension
/// at most 8, cycling through several families.
pub fn sample_map<R: Rng>(index: usize, rng: &mut R) -> Result<PositiveMap> {
    match index % 5 {
        0 => unital_cp_map(2, rng.gen_range(1..=3), rng),
        1 => stochastic_map(rng.gen_range(2..=4), rng),
        2 => state_expectation(&MatrixStarAlgebra::full(2), rng),
        3 => stochastic_map(8, rng),
        _ => PositiveMap::from_fn(
            MatrixStarAlgebra::full(2),
            MatrixStarAlgebra::diagonal(2),
            MapKind::ConditionalExpectation,
            linalg::diag_part,
        ),
    }
}
