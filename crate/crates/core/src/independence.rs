//! Realizations of tensor, monotone, conditional tensor and conditional
//! monotone independence, and the moment formulas they must satisfy.
//!
//! A word is a product of letters from two algebras, read left to right as
//! an operator product. In the scalar monotone model leg 1 (the later
//! measurement) is embedded non-unitally as `a ⊗ 11*`; in the conditional
//! monotone model the roles swap and leg 2 is embedded as `11* ⊙ a`. A unit
//! letter on the non-unital leg is therefore a projection, not the
//! identity: normalization only ever inserts units on the unital leg.

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{membership_tol, verify_positive_map, MapKind, MatrixStarAlgebra, PositiveMap,
    VerificationReport};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, frob, CMat, DEFAULT_TOL};
use crate::module::{gns_construct, gns_construct_with_base, rank_one, tensor_over_b,
    AdjointableOperator, HilbertModule, LeftAction, ModuleTensor};
use crate::random::{self, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    One,
    Two,
}

impl Leg {
    pub fn number(self) -> u8 {
        match self {
            Leg::One => 1,
            Leg::Two => 2,
        }
    }

    pub fn from_number(n: u64) -> Option<Self> {
        match n {
            1 => Some(Leg::One),
            2 => Some(Leg::Two),
            _ => None,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Leg::One => Leg::Two,
            Leg::Two => Leg::One,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Letter {
    pub leg: Leg,
    pub element: CMat,
}

/// Finite word over two algebras. Letters need not alternate; adjacent
/// letters from the same leg are multiplied during normalization.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AlternatingWord {
    pub letters: Vec<Letter>,
}

impl AlternatingWord {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_letters(letters: Vec<(Leg, CMat)>) -> Self {
        Self {
            letters: letters
                .into_iter()
                .map(|(leg, element)| Letter { leg, element })
                .collect(),
        }
    }

    pub fn with(mut self, leg: Leg, element: CMat) -> Self {
        self.letters.push(Letter { leg, element });
        self
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// The same word with legs 1 and 2 exchanged.
    pub fn swap_legs(&self) -> Self {
        Self {
            letters: self
                .letters
                .iter()
                .map(|l| Letter {
                    leg: l.leg.other(),
                    element: l.element.clone(),
                })
                .collect(),
        }
    }

    /// Ordered product of the letters of one leg.
    pub fn leg_product(&self, leg: Leg, unit: &CMat) -> CMat {
        self.letters
            .iter()
            .filter(|l| l.leg == leg)
            .fold(unit.clone(), |acc, l| acc * &l.element)
    }

    /// Reject letters outside their algebras.
    pub fn check_membership(&self, a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra) -> Result<()> {
        for l in &self.letters {
            let alg = if l.leg == Leg::One { a1 } else { a2 };
            alg.coords(&l.element)?;
        }
        Ok(())
    }
}

/// Alternating normal form `u_0 n_1 u_1 … n_k u_k`: `outer` holds the
/// unital-leg slots (length `k + 1`), `inner` the non-unital letters.
#[derive(Clone, Debug, PartialEq)]
pub struct Alternating<T> {
    pub outer: Vec<T>,
    pub inner: Vec<T>,
}

/// Merge adjacent same-leg letters and insert units into missing
/// unital-leg slots.
pub fn alternate<T: Clone>(
    letters: impl IntoIterator<Item = (Leg, T)>,
    unital_leg: Leg,
    unit: &T,
    mul: impl Fn(&T, &T) -> T,
) -> Alternating<T> {
    let mut merged: Vec<(Leg, T)> = Vec::new();
    for (leg, x) in letters {
        match merged.last_mut() {
            Some((last, acc)) if *last == leg => *acc = mul(acc, &x),
            _ => merged.push((leg, x)),
        }
    }
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    let mut expect_outer = true;
    for (leg, x) in merged {
        if leg == unital_leg {
            outer.push(x);
            expect_outer = false;
        } else {
            if expect_outer {
                outer.push(unit.clone());
            }
            inner.push(x);
            expect_outer = true;
        }
    }
    if expect_outer {
        outer.push(unit.clone());
    }
    Alternating { outer, inner }
}

fn word_shape(word: &AlternatingWord, unital_leg: Leg, unit: &CMat) -> Alternating<CMat> {
    alternate(
        word.letters.iter().map(|l| (l.leg, l.element.clone())),
        unital_leg,
        unit,
        |a, b| a * b,
    )
}

fn require_state(map: &PositiveMap) -> Result<()> {
    if map.kind() != MapKind::State {
        return Err(Error::WrongKind {
            expected: "state",
            found: map.kind(),
        });
    }
    Ok(())
}

fn scalar(z: Complex64) -> CMat {
    CMat::from_element(1, 1, z)
}

/// Tensor independence: `φ1(product of leg-1 letters) · φ2(product of
/// leg-2 letters)`.
pub fn tensor_moment_formula(
    word: &AlternatingWord,
    phi1: &PositiveMap,
    phi2: &PositiveMap,
) -> Result<Complex64> {
    require_state(phi1)?;
    require_state(phi2)?;
    let f = word.leg_product(Leg::One, phi1.domain().unit());
    let g = word.leg_product(Leg::Two, phi2.domain().unit());
    Ok(phi1.value(&f)? * phi2.value(&g)?)
}

/// Monotone independence with leg 1 non-unital:
/// `φ(g_0 f_1 g_1 … f_n g_n) = φ2(g_0) ⋯ φ2(g_n) · φ1(f_1 ⋯ f_n)`.
pub fn monotone_moment_formula(
    word: &AlternatingWord,
    phi1: &PositiveMap,
    phi2: &PositiveMap,
) -> Result<Complex64> {
    require_state(phi1)?;
    require_state(phi2)?;
    let shape = word_shape(word, Leg::Two, phi2.domain().unit());
    let mut value = cr(1.0);
    for g in &shape.outer {
        value *= phi2.value(g)?;
    }
    let f = shape
        .inner
        .iter()
        .fold(phi1.domain().unit().clone(), |acc, x| acc * x);
    Ok(value * phi1.value(&f)?)
}

/// Nested conditional monotone evaluation on an alternating shape with the
/// unital leg outside:
/// `Φ1(u_0) · Φ2(n_1 ι(Φ1(u_1)) n_2 ⋯ n_k) · Φ1(u_k)`.
///
/// `inner_copy` places a value of `Φ1` inside the non-unital chain; for
/// concrete algebras with `A0 ⊂ A2` it is the identity.
pub fn nested_formula<T: Clone, V>(
    shape: &Alternating<T>,
    phi1: impl Fn(&T) -> Result<V>,
    inner_copy: impl Fn(&V) -> Result<T>,
    phi2: impl Fn(&T) -> Result<V>,
    mul_t: impl Fn(&T, &T) -> T,
    mul_v: impl Fn(&V, &V) -> V,
) -> Result<V> {
    let k = shape.inner.len();
    let first = phi1(&shape.outer[0])?;
    if k == 0 {
        return Ok(first);
    }
    let mut chain = shape.inner[0].clone();
    for i in 1..k {
        let mid = inner_copy(&phi1(&shape.outer[i])?)?;
        chain = mul_t(&mul_t(&chain, &mid), &shape.inner[i]);
    }
    let middle = phi2(&chain)?;
    let last = phi1(&shape.outer[k])?;
    Ok(mul_v(&mul_v(&first, &middle), &last))
}

/// Read an element of `A0` inside `A2`; scalars become multiples of the unit.
fn lift_into(b: &CMat, alg: &MatrixStarAlgebra) -> CMat {
    if b.nrows() == 1 && alg.ambient_dim() != 1 {
        alg.unit() * b[(0, 0)]
    } else {
        b.clone()
    }
}

fn check_common_base(phi1: &PositiveMap, phi2: &PositiveMap) -> Result<()> {
    let b1 = phi1.codomain();
    let b2 = phi2.codomain();
    let same = b1.ambient_dim() == b2.ambient_dim()
        && b1.len() == b2.len()
        && b1.basis().iter().all(|b| b2.contains(b, membership_tol(b)));
    if !same {
        return Err(Error::ModuleMismatch(
            "the two conditional expectations have different ranges".into(),
        ));
    }
    Ok(())
}

/// Conditional monotone independence with leg 2 non-unital:
/// `Φ(a_1⁰ a_2¹ a_1¹ ⋯ a_2ⁿ a_1ⁿ) = Φ1(a_1⁰) Φ2(a_2¹ Φ1(a_1¹) ⋯ a_2ⁿ) Φ1(a_1ⁿ)`.
/// The result is checked to lie in the common range `A0`.
pub fn conditional_monotone_moment_formula(
    word: &AlternatingWord,
    phi1: &PositiveMap,
    phi2: &PositiveMap,
) -> Result<CMat> {
    check_common_base(phi1, phi2)?;
    word.check_membership(phi1.domain(), phi2.domain())?;
    let shape = word_shape(word, Leg::One, phi1.domain().unit());
    let out = nested_formula(
        &shape,
        |x| phi1.apply(x),
        |b| Ok(lift_into(b, phi2.domain())),
        |x| phi2.apply(x),
        |a, b| a * b,
        |a, b| a * b,
    )?;
    let (_, residual) = phi1.codomain().project(&out)?;
    if residual > membership_tol(&out) {
        return Err(Error::NotInAlgebra { residual });
    }
    Ok(out)
}

/// A probability space `(A, φ)` with `φ` a verified state or conditional
/// expectation.
#[derive(Clone, Debug)]
pub struct QuantumProbabilitySpace {
    functional: PositiveMap,
}

impl QuantumProbabilitySpace {
    pub fn new(functional: PositiveMap) -> Result<Self> {
        let tol = DEFAULT_TOL * frob(functional.matrix()).max(1.0);
        let report = verify_positive_map(&functional, tol)?;
        if !report.passed {
            return Err(Error::UnverifiedMap {
                kind: functional.kind(),
                residual: report.worst_residual,
                detail: report
                    .failures
                    .first()
                    .map(|f| f.identity.clone())
                    .unwrap_or_default(),
            });
        }
        Ok(Self { functional })
    }

    pub fn algebra(&self) -> &MatrixStarAlgebra {
        self.functional.domain()
    }

    pub fn functional(&self) -> &PositiveMap {
        &self.functional
    }
}

/// Two algebras represented on a common module with a vacuum vector.
#[derive(Clone, Debug)]
pub struct JointRealization {
    pub carrier: HilbertModule,
    pub embed1: LeftAction,
    pub embed2: LeftAction,
    pub vacuum: CMat,
    /// Leg embedded through a projection, if any.
    pub nonunital: Option<Leg>,
}

impl JointRealization {
    fn embedding(&self, leg: Leg) -> &LeftAction {
        match leg {
            Leg::One => &self.embed1,
            Leg::Two => &self.embed2,
        }
    }

    pub fn embed(&self, leg: Leg, a: &CMat) -> Result<CMat> {
        self.embedding(leg).matrix(a)
    }

    /// Operator of the whole word.
    pub fn operator(&self, word: &AlternatingWord) -> Result<CMat> {
        let mut op = self.carrier.identity_matrix();
        for l in &word.letters {
            op *= self.embed(l.leg, &l.element)?;
        }
        Ok(op)
    }

    /// `⟨Ω, w Ω⟩`.
    pub fn evaluate(&self, word: &AlternatingWord) -> Result<CMat> {
        let mut v = self.vacuum.clone();
        for l in word.letters.iter().rev() {
            v = self.embed(l.leg, &l.element)? * v;
        }
        Ok(self.carrier.inner(&self.vacuum, &v))
    }

    /// Both embeddings are *-homomorphisms (on basis pairs), the unital
    /// ones preserve the unit and the vacuum is a unit vector.
    pub fn verify(&self, tol: f64) -> VerificationReport {
        let mut report = VerificationReport::new();
        let m = &self.carrier;
        for leg in [Leg::One, Leg::Two] {
            let e = self.embedding(leg);
            let alg = e.algebra();
            let n = leg.number();
            for (i, a) in alg.basis().iter().enumerate() {
                let ca = AdjointableOperator::new(e.images()[i].clone());
                if let Ok(cs) = e.matrix_projected(&a.adjoint()) {
                    let r = m.adjoint_residual(&ca, &AdjointableOperator::new(cs));
                    report.record(r, tol, || format!("embed{n} preserves adjoints on b{i}"));
                }
                for (j, b) in alg.basis().iter().enumerate() {
                    if let Ok(cab) = e.matrix_projected(&(a * b)) {
                        let r = m.matrix_distance(&cab, &(&e.images()[i] * &e.images()[j]));
                        report.record(r, tol, || format!("embed{n} is multiplicative on (b{i}, b{j})"));
                    }
                }
            }
            if self.nonunital != Some(leg) {
                if let Ok(one) = e.matrix_projected(alg.unit()) {
                    let r = m.matrix_distance(&one, &m.identity_matrix());
                    report.record(r, tol, || format!("embed{n} is unital"));
                }
            }
        }
        let unit = m.inner(&self.vacuum, &self.vacuum);
        let r = frob(&(unit - m.base().unit()));
        report.record(r, tol, || "vacuum is a unit vector".into());
        report
    }
}

fn cyclic_vector(e: &HilbertModule) -> Result<CMat> {
    e.distinguished()
        .get("xi")
        .or_else(|| e.distinguished().get("1"))
        .cloned()
        .ok_or_else(|| Error::MissingVector("xi".into()))
}

fn scalar_pair(
    s1: &QuantumProbabilitySpace,
    s2: &QuantumProbabilitySpace,
) -> Result<(HilbertModule, HilbertModule, ModuleTensor)> {
    require_state(s1.functional())?;
    require_state(s2.functional())?;
    let e1 = gns_construct(s1.functional())?;
    let e2 = gns_construct(s2.functional())?;
    let t = tensor_over_b(&e1, &e2)?;
    Ok((e1, e2, t))
}

fn images<F>(alg: &MatrixStarAlgebra, f: F) -> Result<LeftAction>
where
    F: Fn(&CMat) -> Result<AdjointableOperator>,
{
    let imgs = alg
        .basis()
        .iter()
        .map(|b| f(b).map(AdjointableOperator::into_action))
        .collect::<Result<Vec<_>>>()?;
    LeftAction::new(alg.clone(), imgs)
}

/// `GNS(φ1) ⊗ GNS(φ2)` with `a ↦ a ⊗ id`, `a ↦ id ⊗ a` and vacuum `1 ⊗ 1`.
pub fn tensor_realize(
    s1: &QuantumProbabilitySpace,
    s2: &QuantumProbabilitySpace,
) -> Result<JointRealization> {
    let (e1, e2, t) = scalar_pair(s1, s2)?;
    let embed1 = images(s1.algebra(), |a| t.left_operator(&e1.left_operator(a)?))?;
    let embed2 = images(s2.algebra(), |a| t.right_operator(&e2.left_operator(a)?))?;
    let vacuum = t.vector(&cyclic_vector(&e1)?, &cyclic_vector(&e2)?)?;
    Ok(JointRealization {
        carrier: t.into_module(),
        embed1,
        embed2,
        vacuum,
        nonunital: None,
    })
}

/// `GNS(φ1) ⊗ GNS(φ2)` with `a ↦ a ⊗ 11*` (non-unital) and `a ↦ id ⊗ a`.
pub fn monotone_realize(
    s1: &QuantumProbabilitySpace,
    s2: &QuantumProbabilitySpace,
) -> Result<JointRealization> {
    let (e1, e2, t) = scalar_pair(s1, s2)?;
    let xi2 = cyclic_vector(&e2)?;
    let p = rank_one(&e2, &xi2, &xi2);
    let embed1 = images(s1.algebra(), |a| t.tensor_operators(&e1.left_operator(a)?, &p))?;
    let embed2 = images(s2.algebra(), |a| t.right_operator(&e2.left_operator(a)?))?;
    let vacuum = t.vector(&cyclic_vector(&e1)?, &xi2)?;
    Ok(JointRealization {
        carrier: t.into_module(),
        embed1,
        embed2,
        vacuum,
        nonunital: Some(Leg::One),
    })
}

/// `embed1(f') embed2(g) embed1(f)` against `embed1(f' f) φ2(g)`, compared
/// on generators.
pub fn nivelation_residual(
    real: &JointRealization,
    phi2: &PositiveMap,
    f_prime: &CMat,
    g: &CMat,
    f: &CMat,
) -> Result<f64> {
    let lhs = real.embed(Leg::One, f_prime)? * real.embed(Leg::Two, g)? * real.embed(Leg::One, f)?;
    let rhs = real.embed(Leg::One, &(f_prime * f))? * phi2.value(g)?;
    Ok(real.carrier.matrix_distance(&lhs, &rhs))
}

/// Realization on `E1 ⊙ E2` with `a1 ↦ a1 ⊙ id` and
/// `a2 ↦ (1⊙id) a2 (1*⊙id)`, i.e. `x1 ⊙ x2 ↦ 1 ⊙ a2 ⟨1, x1⟩ x2`.
///
/// `E1` needs a left action and a unit vector (`xi` or `1`), `E2` a left
/// action, a left action of the base algebra and a unit vector.
pub fn conditional_monotone_embed(e1: &HilbertModule, e2: &HilbertModule) -> Result<JointRealization> {
    let xi1 = cyclic_vector(e1)?;
    let residual = frob(&(e1.inner(&xi1, &xi1) - e1.base().unit()));
    if residual > DEFAULT_TOL {
        return Err(Error::NotUnitVector { residual });
    }
    let xi2 = cyclic_vector(e2)?;
    let a1 = e1.left_action().ok_or(Error::MissingAction("the first algebra"))?;
    let a2 = e2.left_action().ok_or(Error::MissingAction("the second algebra"))?;
    let t = tensor_over_b(e1, e2)?;
    let embed1 = images(a1.algebra(), |a| t.left_operator(&e1.left_operator(a)?))?;
    let embed2 = images(a2.algebra(), |a| t.unit_sandwich(&xi1, &e2.left_operator(a)?))?;
    let vacuum = t.vector(&xi1, &xi2)?;
    Ok(JointRealization {
        carrier: t.into_module(),
        embed1,
        embed2,
        vacuum,
        nonunital: Some(Leg::Two),
    })
}

/// Conditional monotone realization on `GNS(Φ1) ⊙ GNS(Φ2)`.
pub fn conditional_monotone_realize(
    phi1: &PositiveMap,
    phi2: &PositiveMap,
) -> Result<JointRealization> {
    check_common_base(phi1, phi2)?;
    let e1 = gns_construct(phi1)?;
    let e2 = gns_construct(phi2)?;
    conditional_monotone_embed(&e1, &e2)
}

/// `(11*⊙a2)(a1⊙id)(11*⊙a2')` against `11*⊙(a2 Φ1(a1) a2')` on generators.
pub fn sandwich_residual(
    real: &JointRealization,
    phi1: &PositiveMap,
    a1: &CMat,
    a2: &CMat,
    a2_prime: &CMat,
) -> Result<f64> {
    let lhs = real.embed(Leg::Two, a2)? * real.embed(Leg::One, a1)? * real.embed(Leg::Two, a2_prime)?;
    let middle = a2 * phi1.apply(a1)? * a2_prime;
    let rhs = real.embedding(Leg::Two).matrix_projected(&middle)?;
    Ok(real.carrier.matrix_distance(&lhs, &rhs))
}

/// Conditional tensor product of two commutative algebras amalgamated over
/// a common subalgebra `A0`.
///
/// The amalgamated algebra `A1 ⊙ A2` is realized as functions on the fiber
/// product of the spectra: pairs of minimal projections `(p, p')` of `A1`
/// and `A2` lying under the same minimal projection of `A0`. The common
/// subalgebra is identified through its two bases (basis element `k` of the
/// range of `Φ1` corresponds to basis element `k` of the range of `Φ2`).
#[derive(Clone, Debug)]
pub struct ConditionalTensorProduct {
    phi1: PositiveMap,
    phi2: PositiveMap,
    /// `A1 ⊙ A2` as a diagonal algebra on the fiber pairs.
    pub algebra: MatrixStarAlgebra,
    /// Copy of `A0` inside `A1 ⊙ A2`, basis matched with the range of `Φ1`.
    pub base: MatrixStarAlgebra,
    /// `Φ(a1 ⊙ a2) = Φ1(a1) Φ2(a2)` as a conditional expectation onto `base`.
    pub expectation: PositiveMap,
    /// Module realization on `GNS(Φ1) ⊙ GNS(Φ2)`, values in the range of `Φ1`.
    pub realization: JointRealization,
    atoms1: Vec<CMat>,
    atoms2: Vec<CMat>,
    pairs: Vec<(usize, usize, usize)>,
}

fn atom_value(a: &CMat, p: &CMat) -> Complex64 {
    (p * a).trace() / p.trace()
}

fn parent_of(p: &CMat, fibers: &[CMat]) -> Result<usize> {
    fibers
        .iter()
        .position(|q| ((p * q).trace() - p.trace()).norm() <= 1e-8 * p.trace().norm().max(1.0))
        .ok_or_else(|| {
            Error::InvalidArgument("a minimal projection does not lie under the common subalgebra".into())
        })
}

fn structure_residual(b1: &MatrixStarAlgebra, b2: &MatrixStarAlgebra) -> Result<f64> {
    let mut worst = 0.0_f64;
    let diff = |x: &[Complex64], y: &[Complex64]| {
        x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    };
    for (i, x1) in b1.basis().iter().enumerate() {
        let x2 = &b2.basis()[i];
        worst = worst.max(diff(&b1.coords_unchecked(&x1.adjoint())?, &b2.coords_unchecked(&x2.adjoint())?));
        for (j, y1) in b1.basis().iter().enumerate() {
            let y2 = &b2.basis()[j];
            worst = worst.max(diff(&b1.coords_unchecked(&(x1 * y1))?, &b2.coords_unchecked(&(x2 * y2))?));
        }
    }
    worst = worst.max(diff(&b1.coords_unchecked(b1.unit())?, &b2.coords_unchecked(b2.unit())?));
    Ok(worst)
}

/// Build `A1 ⊙ A2`, `Φ` and the module realization from two conditional
/// expectations onto copies of the same commutative `A0`.
pub fn conditional_tensor_realize(
    phi1: &PositiveMap,
    phi2: &PositiveMap,
) -> Result<ConditionalTensorProduct> {
    for phi in [phi1, phi2] {
        if phi.kind() != MapKind::ConditionalExpectation {
            return Err(Error::WrongKind {
                expected: "conditional_expectation",
                found: phi.kind(),
            });
        }
        QuantumProbabilitySpace::new(phi.clone())?;
        let r = phi.domain().commutator_residual();
        if r > DEFAULT_TOL {
            return Err(Error::NonCommutative { residual: r });
        }
    }
    let c1 = phi1.codomain();
    let c2 = phi2.codomain();
    if c1.len() != c2.len() {
        return Err(Error::ModuleMismatch(
            "the ranges of the two conditional expectations have different dimensions".into(),
        ));
    }
    let r = structure_residual(c1, c2)?;
    if r > DEFAULT_TOL {
        return Err(Error::ModuleMismatch(format!(
            "the two copies of the common subalgebra are not identified by their bases (residual {r:.3e})"
        )));
    }
    let fibers1 = c1.atoms(DEFAULT_TOL)?;
    let fibers2: Vec<CMat> = fibers1
        .iter()
        .map(|q| c1.coords_unchecked(q).map(|k| c2.element(&k)))
        .collect::<Result<_>>()?;
    let atoms1 = phi1.domain().atoms(DEFAULT_TOL)?;
    let atoms2 = phi2.domain().atoms(DEFAULT_TOL)?;
    let parents1 = atoms1.iter().map(|p| parent_of(p, &fibers1)).collect::<Result<Vec<_>>>()?;
    let parents2 = atoms2.iter().map(|p| parent_of(p, &fibers2)).collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for (s, &t) in parents1.iter().enumerate() {
        for (s2, &t2) in parents2.iter().enumerate() {
            if t == t2 {
                pairs.push((s, s2, t));
            }
        }
    }
    let m = pairs.len();
    let algebra = MatrixStarAlgebra::diagonal(m);
    let base_basis: Vec<CMat> = c1
        .basis()
        .iter()
        .map(|b| {
            let vals: Vec<Complex64> = pairs.iter().map(|&(_, _, t)| atom_value(b, &fibers1[t])).collect();
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vals))
        })
        .collect();
    let base = MatrixStarAlgebra::new(base_basis, None)?;
    let w1: Vec<Complex64> = pairs
        .iter()
        .map(|&(s, _, t)| phi1.apply(&atoms1[s]).map(|x| atom_value(&x, &fibers1[t])))
        .collect::<Result<_>>()?;
    let w2: Vec<Complex64> = pairs
        .iter()
        .map(|&(_, s2, t)| phi2.apply(&atoms2[s2]).map(|x| atom_value(&x, &fibers2[t])))
        .collect::<Result<_>>()?;
    let weights: Vec<(usize, Complex64)> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(_, _, t))| (t, w1[k] * w2[k]))
        .collect();
    let fiber_of: Vec<usize> = pairs.iter().map(|&(_, _, t)| t).collect();
    let expectation = PositiveMap::from_fn(
        algebra.clone(),
        base.clone(),
        MapKind::ConditionalExpectation,
        |f| {
            let mut per_fiber = vec![cr(0.0); fibers1.len()];
            for (k, &(t, w)) in weights.iter().enumerate() {
                per_fiber[t] += f[(k, k)] * w;
            }
            let vals: Vec<Complex64> = fiber_of.iter().map(|&t| per_fiber[t]).collect();
            CMat::from_diagonal(&nalgebra::DVector::from_vec(vals))
        },
    )?;

    // Module route: E2 = GNS of Φ2 transported onto the range of Φ1.
    let transported = PositiveMap::new(
        phi2.domain().clone(),
        c1.clone(),
        phi2.matrix().clone(),
        MapKind::CpMap,
    )?;
    let e1 = gns_construct(phi1)?;
    let e2 = gns_construct_with_base(&transported, Some(c2.basis()))?;
    let t = tensor_over_b(&e1, &e2)?;
    let embed1 = images(phi1.domain(), |a| t.left_operator(&e1.left_operator(a)?))?;
    let embed2 = images(phi2.domain(), |a| t.right_operator(&e2.left_operator(a)?))?;
    let vacuum = t.vector(&cyclic_vector(&e1)?, &cyclic_vector(&e2)?)?;
    let realization = JointRealization {
        carrier: t.into_module(),
        embed1,
        embed2,
        vacuum,
        nonunital: None,
    };
    Ok(ConditionalTensorProduct {
        phi1: phi1.clone(),
        phi2: phi2.clone(),
        algebra,
        base,
        expectation,
        realization,
        atoms1,
        atoms2,
        pairs,
    })
}

impl ConditionalTensorProduct {
    fn diag(&self, f: impl Fn(usize, usize) -> Complex64) -> CMat {
        let vals: Vec<Complex64> = self.pairs.iter().map(|&(s, s2, _)| f(s, s2)).collect();
        CMat::from_diagonal(&nalgebra::DVector::from_vec(vals))
    }

    /// `a1 ↦ a1 ⊙ 1`.
    pub fn embed1(&self, a1: &CMat) -> Result<CMat> {
        self.phi1.domain().coords(a1)?;
        Ok(self.diag(|s, _| atom_value(a1, &self.atoms1[s])))
    }

    /// `a2 ↦ 1 ⊙ a2`.
    pub fn embed2(&self, a2: &CMat) -> Result<CMat> {
        self.phi2.domain().coords(a2)?;
        Ok(self.diag(|_, s2| atom_value(a2, &self.atoms2[s2])))
    }

    /// Element of the range of `Φ2` corresponding to `b` in the range of `Φ1`.
    pub fn base_in_second(&self, b: &CMat) -> Result<CMat> {
        Ok(self.phi2.codomain().element(&self.phi1.codomain().coords(b)?))
    }

    /// Read an element of the base copy as an element of the range of `Φ1`.
    pub fn to_first_base(&self, x: &CMat) -> Result<CMat> {
        Ok(self.phi1.codomain().element(&self.base.coords(x)?))
    }

    /// `Φ(f ⊙ g)` through the amalgamated algebra, in the range of `Φ1`.
    pub fn expectation_of(&self, f: &CMat, g: &CMat) -> Result<CMat> {
        let x = self.embed1(f)? * self.embed2(g)?;
        self.to_first_base(&self.expectation.apply(&x)?)
    }

    /// `Φ1(f) Φ2(g)` with the second factor read in the range of `Φ1`.
    pub fn factorized(&self, f: &CMat, g: &CMat) -> Result<CMat> {
        let g0 = self.phi2.apply(g)?;
        let g1 = self.phi1.codomain().element(&self.phi2.codomain().coords(&g0)?);
        Ok(self.phi1.apply(f)? * g1)
    }

    /// `Φ(f ⊙ g)` through the module realization.
    pub fn realized(&self, f: &CMat, g: &CMat) -> Result<CMat> {
        let word = AlternatingWord::new()
            .with(Leg::One, f.clone())
            .with(Leg::Two, g.clone());
        self.realization.evaluate(&word)
    }

    /// `h ∈ A0` attached to the first leg (`f h ⊙ g`) and to the second
    /// (`f ⊙ h g`): both must give `Φ1(f) h Φ2(g)`. Returns the larger of
    /// the two deviations.
    pub fn insertion_residual(&self, f: &CMat, h: &CMat, g: &CMat) -> Result<f64> {
        let left = self.expectation_of(&(f * h), g)?;
        let right = self.expectation_of(f, &(self.base_in_second(h)? * g))?;
        let g0 = self.phi2.apply(g)?;
        let g1 = self.phi1.codomain().element(&self.phi2.codomain().coords(&g0)?);
        let expected = self.phi1.apply(f)? * h * g1;
        Ok(frob(&(left - &expected)).max(frob(&(right - &expected))))
    }

    /// The relation `a1 a0 ⊙ a2 = a1 ⊙ a0 a2` and multiplicativity of the
    /// product on basis elements.
    pub fn verify_well_defined(&self, tol: f64) -> Result<VerificationReport> {
        let mut report = VerificationReport::new();
        let a1 = self.phi1.domain();
        let a2 = self.phi2.domain();
        for (i, x) in a1.basis().iter().enumerate() {
            for (j, y) in a2.basis().iter().enumerate() {
                for (k, h) in self.phi1.codomain().basis().iter().enumerate() {
                    let lhs = self.embed1(&(x * h))? * self.embed2(y)?;
                    let rhs = self.embed1(x)? * self.embed2(&(self.base_in_second(h)? * y))?;
                    report.record(frob(&(lhs - rhs)), tol, || {
                        format!("a{i} c{k} ⊙ b{j} = a{i} ⊙ c{k} b{j}")
                    });
                }
                for (i2, x2) in a1.basis().iter().enumerate() {
                    for (j2, y2) in a2.basis().iter().enumerate() {
                        let lhs = self.embed1(x)? * self.embed2(y)? * self.embed1(x2)? * self.embed2(y2)?;
                        let rhs = self.embed1(&(x * x2))? * self.embed2(&(y * y2))?;
                        report.record(frob(&(lhs - rhs)), tol, || {
                            format!("(a{i} ⊙ b{j})(a{i2} ⊙ b{j2}) = a{i}a{i2} ⊙ b{j}b{j2}")
                        });
                    }
                }
            }
        }
        report.merge(verify_positive_map(&self.expectation, tol)?);
        Ok(report)
    }
}

/// One sampled word with its realized and predicted values.
#[derive(Clone, Debug)]
pub struct WordRow {
    pub word: AlternatingWord,
    pub realization: CMat,
    pub formula: CMat,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct IndependenceReport {
    pub max_residual: f64,
    pub rows: Vec<WordRow>,
}

/// Random words of bounded length with self-adjoint letters.
#[derive(Clone, Debug)]
pub struct WordSampler {
    pub algebra1: MatrixStarAlgebra,
    pub algebra2: MatrixStarAlgebra,
    pub max_len: usize,
}

impl WordSampler {
    pub fn new(algebra1: MatrixStarAlgebra, algebra2: MatrixStarAlgebra, max_len: usize) -> Self {
        Self {
            algebra1,
            algebra2,
            max_len,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> AlternatingWord {
        let len = rng.gen_range(1..=self.max_len.max(1));
        let mut word = AlternatingWord::new();
        for _ in 0..len {
            let leg = if rng.gen_bool(0.5) { Leg::One } else { Leg::Two };
            let alg = if leg == Leg::One { &self.algebra1 } else { &self.algebra2 };
            word = word.with(leg, random::hermitian_letter(alg, rng));
        }
        word
    }
}

/// Compare `⟨Ω, w Ω⟩` with an oracle on `trials` sampled words.
pub fn verify_independence(
    real: &JointRealization,
    oracle: impl Fn(&AlternatingWord) -> Result<CMat>,
    mut words: impl FnMut(&mut SeededRng) -> AlternatingWord,
    trials: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    let mut rng = random::seeded(seed);
    let mut rows = Vec::with_capacity(trials);
    let mut max_residual = 0.0_f64;
    for _ in 0..trials {
        let word = words(&mut rng);
        let realization = real.evaluate(&word)?;
        let formula = oracle(&word)?;
        let residual = frob(&(&realization - &formula));
        max_residual = max_residual.max(if residual.is_nan() { f64::INFINITY } else { residual });
        rows.push(WordRow {
            word,
            realization,
            formula,
            residual,
        });
    }
    Ok(IndependenceReport { max_residual, rows })
}

/// Oracle adaptor for scalar formulas.
pub fn scalar_oracle<'a>(
    formula: fn(&AlternatingWord, &PositiveMap, &PositiveMap) -> Result<Complex64>,
    phi1: &'a PositiveMap,
    phi2: &'a PositiveMap,
) -> impl Fn(&AlternatingWord) -> Result<CMat> + 'a {
    move |w| formula(w, phi1, phi2).map(scalar)
}

/// The coins game: a fair coin `Y`, then two coins `X1`, `X2` whose biases
/// depend on `Y` in opposite directions. Functions of `(Y, X_i)` are the
/// diagonal `4 × 4` matrices indexed by `2y + x` (`0` = head), written in
/// the character basis `{1, s_Y, s_X, s_Y s_X}` with `s = ±1`.
#[derive(Clone, Debug)]
pub struct CoinsGame {
    /// `P(X1 = head | Y = head)`; `P(X1 = head | Y = tail) = 1 − bias1`.
    pub bias1: f64,
    /// `P(X2 = head | Y = head)`; `P(X2 = head | Y = tail) = 1 − bias2`.
    pub bias2: f64,
}

impl Default for CoinsGame {
    fn default() -> Self {
        Self {
            bias1: 0.7,
            bias2: 0.3,
        }
    }
}

impl CoinsGame {
    /// Functions of `(Y, X)`.
    pub fn pair_algebra() -> MatrixStarAlgebra {
        let s_y = linalg::diag_real(&[1.0, 1.0, -1.0, -1.0]);
        let s_x = linalg::diag_real(&[1.0, -1.0, 1.0, -1.0]);
        let both = &s_y * &s_x;
        MatrixStarAlgebra::new(vec![linalg::identity(4), s_y, s_x, both], None)
            .expect("characters are independent")
    }

    /// Functions of `Y` inside the pair algebra.
    pub fn base_algebra() -> MatrixStarAlgebra {
        let s_y = linalg::diag_real(&[1.0, 1.0, -1.0, -1.0]);
        MatrixStarAlgebra::new(vec![linalg::identity(4), s_y], None).expect("characters are independent")
    }

    /// `f(X)` as an element of the pair algebra.
    pub fn of_x(f: [f64; 2]) -> CMat {
        linalg::diag_real(&[f[0], f[1], f[0], f[1]])
    }

    /// `b(Y)` as an element of the pair algebra.
    pub fn of_y(b: [f64; 2]) -> CMat {
        linalg::diag_real(&[b[0], b[0], b[1], b[1]])
    }

    /// `E[f | Y]` for a coin with `P(head | Y = head) = bias`.
    pub fn expectation(bias: f64) -> Result<PositiveMap> {
        let p = [[bias, 1.0 - bias], [1.0 - bias, bias]];
        PositiveMap::from_fn(
            Self::pair_algebra(),
            Self::base_algebra(),
            MapKind::ConditionalExpectation,
            move |f| {
                let v: Vec<f64> = (0..2)
                    .map(|y| (0..2).map(|x| p[y][x] * f[(2 * y + x, 2 * y + x)].re).sum())
                    .collect();
                let im: Vec<f64> = (0..2)
                    .map(|y| (0..2).map(|x| p[y][x] * f[(2 * y + x, 2 * y + x)].im).sum())
                    .collect();
                CMat::from_fn(4, 4, |i, j| {
                    if i == j {
                        Complex64::new(v[i / 2], im[i / 2])
                    } else {
                        cr(0.0)
                    }
                })
            },
        )
    }

    pub fn phi1(&self) -> Result<PositiveMap> {
        Self::expectation(self.bias1)
    }

    pub fn phi2(&self) -> Result<PositiveMap> {
        Self::expectation(self.bias2)
    }

    /// The 4 indicator functions of subsets of `{head, tail}`.
    pub fn indicators() -> [[f64; 2]; 4] {
        [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
    }

    pub fn realize(&self) -> Result<ConditionalTensorProduct> {
        conditional_tensor_realize(&self.phi1()?, &self.phi2()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    fn diagonal_pair() -> (QuantumProbabilitySpace, QuantumProbabilitySpace, CMat) {
        let d = MatrixStarAlgebra::diagonal(2);
        let s1 = QuantumProbabilitySpace::new(
            PositiveMap::state_from_density(d.clone(), &diag_real(&[0.5, 0.5])).unwrap(),
        )
        .unwrap();
        let s2 = QuantumProbabilitySpace::new(
            PositiveMap::state_from_density(d, &diag_real(&[0.7, 0.3])).unwrap(),
        )
        .unwrap();
        (s1, s2, diag_real(&[1.0, -1.0]))
    }

    fn close(a: &CMat, z: f64) -> bool {
        (a[(0, 0)].re - z).abs() < 1e-12 && a[(0, 0)].im.abs() < 1e-12
    }

    #[test]
    fn normal_form_inserts_units_on_unital_leg_only() {
        let w = vec![(Leg::One, 2), (Leg::One, 3), (Leg::Two, 5)];
        let s = alternate(w, Leg::Two, &1, |a, b| a * b);
        assert_eq!(s.outer, vec![1, 5]);
        assert_eq!(s.inner, vec![6]);
        let s = alternate(Vec::<(Leg, i32)>::new(), Leg::Two, &1, |a, b| a * b);
        assert_eq!(s.outer, vec![1]);
        assert!(s.inner.is_empty());
    }

    #[test]
    fn tensor_examples() {
        let (s1, s2, x) = diagonal_pair();
        let real = tensor_realize(&s1, &s2).unwrap();
        assert_eq!(real.carrier.gens(), 4);
        let w = AlternatingWord::new().with(Leg::One, x.clone()).with(Leg::Two, x.clone());
        assert!(close(&real.evaluate(&w).unwrap(), 0.0));
        let w = AlternatingWord::new().with(Leg::Two, x.clone());
        assert!(close(&real.evaluate(&w).unwrap(), 0.4));
        assert!(close(&real.evaluate(&AlternatingWord::new()).unwrap(), 1.0));
        assert!(real.verify(1e-9).passed);
    }

    #[test]
    fn monotone_examples() {
        let (s1, s2, x) = diagonal_pair();
        let real = monotone_realize(&s1, &s2).unwrap();
        let (p1, p2) = (s1.functional(), s2.functional());
        let w = AlternatingWord::new()
            .with(Leg::One, x.clone())
            .with(Leg::Two, x.clone())
            .with(Leg::One, x.clone());
        assert!(close(&real.evaluate(&w).unwrap(), 0.4));
        assert!((monotone_moment_formula(&w, p1, p2).unwrap().re - 0.4).abs() < 1e-12);

        // a unit letter on the non-unital leg is the projection 11*
        let w = AlternatingWord::new()
            .with(Leg::Two, x.clone())
            .with(Leg::One, linalg::identity(2))
            .with(Leg::Two, x.clone());
        assert!(close(&real.evaluate(&w).unwrap(), 0.16));
        assert!((monotone_moment_formula(&w, p1, p2).unwrap().re - 0.16).abs() < 1e-12);

        let w = AlternatingWord::new()
            .with(Leg::Two, x.clone())
            .with(Leg::One, x.clone())
            .with(Leg::Two, x.clone())
            .with(Leg::One, x.clone())
            .with(Leg::Two, x.clone());
        assert!((monotone_moment_formula(&w, p1, p2).unwrap().re - 0.064).abs() < 1e-12);
        assert!(close(&real.evaluate(&w).unwrap(), 0.064));
        assert!(real.verify(1e-9).passed);
    }

    #[test]
    fn monotone_nivelation() {
        let (s1, s2, x) = diagonal_pair();
        let real = monotone_realize(&s1, &s2).unwrap();
        let f = diag_real(&[2.0, 0.5]);
        let r = nivelation_residual(&real, s2.functional(), &f, &x, &x).unwrap();
        assert!(r < 1e-12);
    }

    #[test]
    fn coins_expectation_of_heads() {
        let game = CoinsGame::default();
        let prod = game.realize().unwrap();
        let head = CoinsGame::of_x([1.0, 0.0]);
        let v = prod.expectation_of(&head, &head).unwrap();
        let expected = CoinsGame::of_y([0.21, 0.21]);
        assert!(frob(&(v - &expected)) < 1e-12);
        let v = prod.realized(&head, &head).unwrap();
        assert!(frob(&(v - &expected)) < 1e-12);
        assert_eq!(prod.algebra.len(), 8);
        assert!(prod.verify_well_defined(1e-12).unwrap().passed);
    }

    #[test]
    fn coins_gns_has_two_generators() {
        let e = gns_construct(&CoinsGame::default().phi1().unwrap()).unwrap();
        assert_eq!(e.gens(), 2);
    }

    #[test]
    fn conditional_tensor_rejects_noncommutative() {
        let m2 = MatrixStarAlgebra::full(2);
        let d = MatrixStarAlgebra::diagonal(2);
        let phi = PositiveMap::from_fn(m2, d, MapKind::ConditionalExpectation, linalg::diag_part).unwrap();
        assert!(matches!(
            conditional_tensor_realize(&phi, &phi),
            Err(Error::NonCommutative { .. })
        ));
    }

    #[test]
    fn conditional_monotone_scalar_case_is_monotone_with_roles_swapped() {
        let (s1, s2, x) = diagonal_pair();
        let y = diag_real(&[0.3, 2.0]);
        let w = AlternatingWord::new()
            .with(Leg::Two, x.clone())
            .with(Leg::One, y.clone())
            .with(Leg::Two, y.clone())
            .with(Leg::One, x.clone());
        let c = conditional_monotone_moment_formula(&w, s1.functional(), s2.functional()).unwrap();
        let m = monotone_moment_formula(&w.swap_legs(), s2.functional(), s1.functional()).unwrap();
        assert!((c[(0, 0)] - m).norm() < 1e-12);
    }
}
