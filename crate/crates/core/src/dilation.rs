//! Discrete-time dilations of unital CP maps through product systems.
//!
//! `E_n = E_1^{⊙n}` is built left-nested, `E_n = E_{n−1} ⊙ E_1`. Every
//! surviving generator of `E_n` is a pure tensor of fiber generators and is
//! recorded by its multi-index, which makes the identifications
//! `E_m ⊙ E_n = E_{m+n}` explicit: a pure tensor maps to the concatenated
//! multi-index. Time runs right to left: the rightmost factor is the
//! earliest step, and `θ_n(a) = a ⊙ id_{E_n}` shifts an observable `n`
//! steps into the future.

use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;

use crate::algebra::{verify_positive_map, MapKind, MatrixStarAlgebra, PositiveMap, VerificationReport};
use crate::error::{Error, Result};
use crate::independence::{alternate, nested_formula, Leg};
use crate::linalg::{self, cr, frob, CMat, DEFAULT_TOL};
use crate::module::{gns_construct, rank_one, tensor_over_b, AdjointableOperator, HilbertModule, ModuleTensor};
use crate::random::{self, SeededRng};

/// Default bound on the complex dimension of `E_N`.
pub const DEFAULT_BUDGET: usize = 4096;

/// `E_0 = B, E_1, …, E_N` with units `ξ_n = ξ^{⊙n}`.
#[derive(Clone, Debug)]
pub struct DiscreteProductSystem {
    fiber: HilbertModule,
    powers: Vec<HilbertModule>,
    // steps[n] realizes E_{n-1} ⊙ E_1 = E_n for n >= 2
    steps: Vec<Option<ModuleTensor>>,
    multi: Vec<Vec<Vec<usize>>>,
    units: Vec<CMat>,
    dims: Vec<usize>,
}

impl DiscreteProductSystem {
    /// Tensor powers of a fiber carrying a left action of its base algebra
    /// and a unit vector `xi`.
    pub fn from_fiber(fiber: HilbertModule, horizon: usize, budget: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if fiber.base_action().is_none() {
            return Err(Error::MissingAction("the base algebra"));
        }
        let xi = fiber.vector_named("xi")?.clone();
        let residual = frob(&(fiber.inner(&xi, &xi) - fiber.base().unit()));
        if residual > DEFAULT_TOL {
            return Err(Error::NotUnitVector { residual });
        }
        let base = fiber.base().clone();
        let k = base.len();
        let e0 = HilbertModule::base_as_module(&base);
        let mut sys = Self {
            powers: vec![e0.clone(), fiber.clone()],
            steps: vec![None, None],
            multi: vec![vec![vec![]], (0..fiber.gens()).map(|j| vec![j]).collect()],
            units: vec![e0.vector_named("1")?.clone(), xi],
            dims: vec![k, fiber.scalar_dim()],
            fiber,
        };
        check_budget(sys.dims[1], budget)?;
        for n in 2..=horizon {
            let prev = &sys.powers[n - 1];
            let raw = prev.gens() * sys.fiber.gens() * k;
            if raw > budget.saturating_mul(64) {
                return Err(Error::BudgetExceeded {
                    dimension: raw,
                    budget,
                });
            }
            let t = tensor_over_b(prev, &sys.fiber)?;
            let n_fiber = sys.fiber.gens();
            let multi: Vec<Vec<usize>> = t
                .quotient()
                .kept
                .iter()
                .map(|&raw| {
                    let mut idx = sys.multi[n - 1][raw / n_fiber].clone();
                    idx.push(raw % n_fiber);
                    idx
                })
                .collect();
            let unit = t.vector(&sys.units[n - 1], &sys.units[1])?;
            let dim = t.quotient().scalar_dim;
            check_budget(dim, budget)?;
            sys.powers.push(t.module().clone());
            sys.steps.push(Some(t));
            sys.multi.push(multi);
            sys.units.push(unit);
            sys.dims.push(dim);
        }
        Ok(sys)
    }

    pub fn base(&self) -> &MatrixStarAlgebra {
        self.fiber.base()
    }

    pub fn fiber(&self) -> &HilbertModule {
        &self.fiber
    }

    pub fn horizon(&self) -> usize {
        self.powers.len() - 1
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.horizon() {
            return Err(Error::HorizonExceeded {
                requested: n,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    pub fn power(&self, n: usize) -> Result<&HilbertModule> {
        self.check_level(n)?;
        Ok(&self.powers[n])
    }

    /// `ξ_n` in `E_n`.
    pub fn unit(&self, n: usize) -> Result<&CMat> {
        self.check_level(n)?;
        Ok(&self.units[n])
    }

    /// Fiber multi-index of generator `g` of `E_n`.
    pub fn multi_index(&self, n: usize, g: usize) -> &[usize] {
        &self.multi[n][g]
    }

    /// Complex dimension of each `E_n`.
    pub fn scalar_dims(&self) -> &[usize] {
        &self.dims
    }

    /// The CP map of the unit, `T(b) = ⟨ξ, b ξ⟩`.
    pub fn cp_map(&self) -> Result<PositiveMap> {
        let xi = &self.units[1];
        PositiveMap::from_fn(self.base().clone(), self.base().clone(), MapKind::CpMap, |b| {
            let lb = self.fiber.base_matrix(b).expect("fiber carries a base action");
            self.fiber.inner(xi, &(lb * xi))
        })
    }

    /// `x ⊙ e_{j_1} ⊙ … ⊙ e_{j_m}` for `x ∈ E_k`, in `E_{k+m}`.
    fn extend(&self, level: usize, x: &CMat, idx: &[usize]) -> Result<CMat> {
        let mut v = x.clone();
        let mut k = level;
        for &j in idx {
            v = if k == 0 {
                self.fiber.base_matrix(&v)? * self.fiber.generator(j)
            } else {
                self.steps[k + 1]
                    .as_ref()
                    .expect("levels above one carry their step")
                    .vector(&v, &self.fiber.generator(j))?
            };
            k += 1;
        }
        Ok(v)
    }

    /// Pure tensor of fiber generators as a vector of `E_{len}`.
    pub fn pure_tensor(&self, idx: &[usize]) -> Result<CMat> {
        self.check_level(idx.len())?;
        self.extend(0, &self.units[0], idx)
    }

    /// `x ⊙ y ∈ E_{a+b}` for `x ∈ E_a`, `y ∈ E_b`.
    pub fn concat(&self, a: usize, x: &CMat, b: usize, y: &CMat) -> Result<CMat> {
        self.check_level(a + b)?;
        if b == 0 {
            return Ok(x * y);
        }
        let eb = &self.powers[b];
        let mut out: Option<CMat> = None;
        for g in 0..eb.gens() {
            let term = self.extend(a, x, &self.multi[b][g])? * eb.coefficient(y, g);
            out = Some(match out {
                Some(acc) => acc + term,
                None => term,
            });
        }
        Ok(out.expect("modules have at least one generator"))
    }

    /// Block matrix on `E_n` whose column block `g` is `col(prefix, suffix)`
    /// for the split of generator `g` after `split` factors.
    fn columns(&self, n: usize, split: usize, col: impl Fn(&[usize], &[usize]) -> Result<CMat>) -> Result<CMat> {
        let en = &self.powers[n];
        let d = en.block();
        let mut m = linalg::zeros(en.gens() * d, en.gens() * d);
        for g in 0..en.gens() {
            let idx = &self.multi[n][g];
            let c = col(&idx[..split], &idx[split..])?;
            m.columns_mut(g * d, d).copy_from(&c);
        }
        Ok(m)
    }

    /// `θ_n(a) = a ⊙ id_{E_n}` for an operator `a` on `E_k`; lands on `E_{k+n}`.
    pub fn theta(&self, k: usize, n: usize, a: &CMat) -> Result<CMat> {
        self.check_level(k + n)?;
        let mut x = a.clone();
        for level in k + 1..=k + n {
            x = match &self.steps[level] {
                Some(t) => t.left_operator(&AdjointableOperator::new(x))?.into_action(),
                None => self.fiber.base_matrix(&x)?,
            };
        }
        Ok(x)
    }

    /// `id_{E_a} ⊙ c` for an operator `c` on `E_b` commuting with the left
    /// action of `B`; lands on `E_{a+b}`.
    pub fn id_tensor(&self, a: usize, c: &CMat, b: usize) -> Result<CMat> {
        self.check_level(a + b)?;
        let eb = &self.powers[b];
        let mut worst = 0.0_f64;
        for x in self.base().basis() {
            let l = eb.base_matrix(x)?;
            worst = worst.max(eb.matrix_distance(&(&l * c), &(c * &l)));
        }
        if worst > DEFAULT_TOL * frob(c).max(1.0) {
            return Err(Error::NotBimoduleMap { residual: worst });
        }
        self.columns(a + b, a, |pre, suf| {
            let y = c * self.pure_tensor(suf)?;
            self.concat(a, &self.pure_tensor(pre)?, b, &y)
        })
    }

    /// `ξ_k ξ_k* ⊙ c` on `E_{k+m}`: `x ⊙ y ↦ ξ_k ⊙ c ⟨ξ_k, x⟩ y`.
    pub fn slot(&self, k: usize, c: &CMat, m: usize) -> Result<CMat> {
        let (w, v) = self.compressor(k, m)?;
        Ok(v * c * w)
    }

    /// `(ξ_k* ⊙ id) x (ξ_k ⊙ id)` for an operator `x` on `E_{k+m}`; lands on `E_m`.
    pub fn compress(&self, k: usize, m: usize, x: &CMat) -> Result<CMat> {
        let (w, v) = self.compressor(k, m)?;
        Ok(w * x * v)
    }

    /// The matrices of `ξ_k* ⊙ id` and `ξ_k ⊙ id` between `E_{k+m}` and `E_m`.
    fn compressor(&self, k: usize, m: usize) -> Result<(CMat, CMat)> {
        self.check_level(k + m)?;
        let em = &self.powers[m];
        let ek = &self.powers[k];
        let en = &self.powers[k + m];
        let d = en.block();
        let mut w = linalg::zeros(em.gens() * d, en.gens() * d);
        for g in 0..en.gens() {
            let idx = &self.multi[k + m][g];
            let ip = ek.inner(&self.units[k], &self.pure_tensor(&idx[..k])?);
            let col = em.base_matrix(&ip)? * self.pure_tensor(&idx[k..])?;
            w.columns_mut(g * d, d).copy_from(&col);
        }
        let mut v = linalg::zeros(en.gens() * d, em.gens() * d);
        for g in 0..em.gens() {
            let col = self.concat(k, &self.units[k], m, &em.generator(g))?;
            v.columns_mut(g * d, d).copy_from(&col);
        }
        Ok((w, v))
    }

    /// `⟨ξ_n, a ξ_n⟩`.
    pub fn expectation(&self, n: usize, a: &CMat) -> Result<CMat> {
        self.check_level(n)?;
        let xi = &self.units[n];
        Ok(self.powers[n].inner(xi, &(a * xi)))
    }

    /// `ξ_n b ξ_n*`: `z ↦ ξ_n b ⟨ξ_n, z⟩`.
    pub fn embed_base(&self, n: usize, b: &CMat) -> Result<CMat> {
        self.check_level(n)?;
        let xi = &self.units[n];
        Ok(xi * b * xi.adjoint() * self.powers[n].gram())
    }

    /// Left action of `b ∈ B` on `E_n` (through the leftmost factor).
    pub fn left(&self, n: usize, b: &CMat) -> Result<CMat> {
        self.check_level(n)?;
        self.powers[n].base_matrix(b)
    }

    /// Gram of `E_m ⊙ E_n` against `E_{m+n}` under the identification, and
    /// `ξ_m ⊙ ξ_n ↦ ξ_{m+n}`.
    pub fn coherence(&self, m: usize, n: usize, tol: f64) -> Result<VerificationReport> {
        self.check_level(m + n)?;
        let mut report = VerificationReport::new();
        let (em, en) = (&self.powers[m], &self.powers[n]);
        let t = tensor_over_b(em, en)?;
        let emn = &self.powers[m + n];
        let d = emn.block();
        let kept = &t.quotient().kept;
        let mut psi = linalg::zeros(emn.gens() * d, kept.len() * d);
        for (p, &raw) in kept.iter().enumerate() {
            let (u, v) = (raw / en.gens(), raw % en.gens());
            let col = self.concat(m, &em.generator(u), n, &en.generator(v))?;
            psi.columns_mut(p * d, d).copy_from(&col);
        }
        let pulled = psi.adjoint() * emn.gram() * &psi;
        let r = crate::module::max_block_norm(&(pulled - t.module().gram()), d);
        report.record(r, tol, || format!("Gram of E_{m} ⊙ E_{n} equals Gram of E_{}", m + n));
        let units = &psi * t.vector(&self.units[m], &self.units[n])?;
        let r = emn.vector_distance(&units, &self.units[m + n]);
        report.record(r, tol, || format!("ξ_{m} ⊙ ξ_{n} = ξ_{}", m + n));
        Ok(report)
    }
}

fn check_budget(dimension: usize, budget: usize) -> Result<()> {
    if dimension > budget {
        return Err(Error::BudgetExceeded { dimension, budget });
    }
    Ok(())
}

/// A unital CP map together with its product-system dilation.
#[derive(Clone, Debug)]
pub struct DilationScenario {
    pub cp_map: PositiveMap,
    pub system: DiscreteProductSystem,
}

/// GNS fiber of `T`, its tensor powers and units up to `horizon`.
pub fn dilate_discrete(t: &PositiveMap, horizon: usize, budget: usize) -> Result<DilationScenario> {
    if t.domain().ambient_dim() != t.codomain().ambient_dim() || t.domain().len() != t.codomain().len() {
        return Err(Error::DimensionMismatch(
            "a dilation needs a map from an algebra to itself".into(),
        ));
    }
    let scale = frob(t.matrix()).max(1.0);
    let r = t.unital_residual();
    if r > DEFAULT_TOL * scale {
        return Err(Error::NonUnital { residual: r });
    }
    let t = t.clone().with_kind(MapKind::CpMap)?;
    let fiber = gns_construct(&t)?;
    let system = DiscreteProductSystem::from_fiber(fiber, horizon, budget)?;
    Ok(DilationScenario { cp_map: t, system })
}

/// White noise on a free fiber `B ⊗ C^k` with the central unit vector
/// `1 ⊗ e_1`.
pub fn white_noise_scenario(base: &MatrixStarAlgebra, rank: usize, horizon: usize, budget: usize) -> Result<DilationScenario> {
    let fiber = HilbertModule::free_bimodule(base, rank)?;
    let system = DiscreteProductSystem::from_fiber(fiber, horizon, budget)?;
    Ok(DilationScenario {
        cp_map: system.cp_map()?,
        system,
    })
}

/// Random adjointable operator: two rank-one terms plus a left action.
pub fn random_operator<R: Rng>(module: &HilbertModule, rng: &mut R) -> Result<CMat> {
    let base = module.base();
    let vec = |rng: &mut R| -> Result<CMat> {
        let coeffs: Vec<CMat> = (0..module.gens()).map(|_| random::element(base, rng)).collect();
        module.vector(&coeffs)
    };
    let mut a = linalg::zeros(module.gens() * module.block(), module.gens() * module.block());
    for _ in 0..2 {
        let (x, y) = (vec(rng)?, vec(rng)?);
        a += rank_one(module, &x, &y).into_action();
    }
    a += module.base_matrix(&random::element(base, rng))?;
    let scale = frob(&a).max(1.0);
    Ok(a * cr(1.0 / scale))
}

impl DilationScenario {
    /// `max_b ‖T^n(b) − ⟨ξ_n, b ξ_n⟩‖` over the base basis, `T^n` by
    /// repeated application.
    pub fn recovery_residual(&self, n: usize) -> Result<f64> {
        let mut worst = 0.0_f64;
        for b in self.system.base().basis() {
            let mut tb = b.clone();
            for _ in 0..n {
                tb = self.cp_map.apply(&tb)?;
            }
            let lb = self.system.left(n, b)?;
            let v = self.system.expectation(n, &lb)?;
            worst = worst.max(frob(&(tb - v)));
        }
        Ok(worst)
    }

    /// Unitality, multiplicativity, adjoints and the semigroup law of `θ`,
    /// plus `p ∘ i = id` and `p ∘ θ_n ∘ i = T^n`.
    pub fn verify_endomorphisms(&self, samples: usize, seed: u64, tol: f64) -> Result<VerificationReport> {
        let sys = &self.system;
        let big_n = sys.horizon();
        let mut rng = random::seeded(seed);
        let mut report = VerificationReport::new();
        for k in 0..big_n {
            let ek = sys.power(k)?;
            for n in 0..=(big_n - k) {
                let en = sys.power(k + n)?;
                let id = sys.theta(k, n, &ek.identity_matrix())?;
                report.record(en.matrix_distance(&id, &en.identity_matrix()), tol, || {
                    format!("θ_{n}(id) = id on E_{}", k + n)
                });
                for s in 0..samples {
                    let a = random_operator(ek, &mut rng)?;
                    let b = random_operator(ek, &mut rng)?;
                    let ta = sys.theta(k, n, &a)?;
                    let tb = sys.theta(k, n, &b)?;
                    let tab = sys.theta(k, n, &(&a * &b))?;
                    report.record(en.matrix_distance(&tab, &(&ta * &tb)), tol, || {
                        format!("θ_{n} multiplicative on E_{k}, sample {s}")
                    });
                    let a_star = ek.adjoint(&crate::module::AdjointableOperator::new(a.clone()));
                    let ta_star = sys.theta(k, n, a_star.action())?;
                    let r = en.adjoint_residual(
                        &crate::module::AdjointableOperator::new(ta.clone()),
                        &crate::module::AdjointableOperator::new(ta_star),
                    );
                    report.record(r, tol, || format!("θ_{n}(a*) = θ_{n}(a)* on E_{k}, sample {s}"));
                    for m in 1..=(big_n - k - n) {
                        let lhs = sys.theta(k + n, m, &ta)?;
                        let rhs = sys.theta(k, n + m, &a)?;
                        report.record(sys.power(k + n + m)?.matrix_distance(&lhs, &rhs), tol, || {
                            format!("θ_{m} ∘ θ_{n} = θ_{} on E_{k}, sample {s}", n + m)
                        });
                    }
                }
            }
        }
        for b in sys.base().basis() {
            let ib = sys.embed_base(big_n, b)?;
            let r = frob(&(sys.expectation(big_n, &ib)? - b));
            report.record(r, tol, || "p ∘ i = id".into());
            for n in 1..=big_n {
                let ib = sys.embed_base(big_n - n, b)?;
                let v = sys.expectation(big_n, &sys.theta(big_n - n, n, &ib)?)?;
                let mut tb = b.clone();
                for _ in 0..n {
                    tb = self.cp_map.apply(&tb)?;
                }
                report.record(frob(&(v - tb)), tol, || format!("p ∘ θ_{n} ∘ i = T^{n}"));
            }
        }
        Ok(report)
    }

    /// `θ_n(a)` for `a` on `E_{N−n}`, landing on `E_N`.
    pub fn e0_apply(&self, n: usize, a: &CMat) -> Result<CMat> {
        let big_n = self.system.horizon();
        if n > big_n {
            return Err(Error::HorizonExceeded {
                requested: n,
                horizon: big_n,
            });
        }
        self.system.theta(big_n - n, n, a)
    }
}

/// Which form of the increment check ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IncrementMode {
    /// Invariant unit-vector functional: conditional monotone independence
    /// over `Ă_0 ≅ B`.
    WhiteNoise,
    /// Not invariant: conditional monotone independence over the past
    /// algebra `Ă_s` (the Markov property).
    MarkovProperty,
}

impl IncrementMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IncrementMode::WhiteNoise => "white-noise",
            IncrementMode::MarkovProperty => "markov-property",
        }
    }
}

#[derive(Clone, Debug)]
pub struct IncrementReport {
    pub mode: IncrementMode,
    pub invariance_residual: f64,
    pub max_residual: f64,
    pub words: usize,
    pub worst_word: Vec<u8>,
}

/// Increment algebras of the time windows `[r, s]` (past, leg 2) and
/// `[s, t]` (future, leg 1) on `E_N`:
/// `Ă_[r,s] = θ_r(ξξ* ⊙ B^a(E_{s−r}))`.
pub struct Increments<'a> {
    sys: &'a DiscreteProductSystem,
    r: usize,
    s: usize,
    t: usize,
    // (ξ_k* ⊙ id, ξ_k ⊙ id) for the future, past and conditioning slots
    future_slot: (CMat, CMat),
    past_slot: (CMat, CMat),
    present_slot: (CMat, CMat),
}

impl<'a> Increments<'a> {
    pub fn new(sys: &'a DiscreteProductSystem, r: usize, s: usize, t: usize) -> Result<Self> {
        if !(r < s && s < t) {
            return Err(Error::InvalidArgument(format!(
                "increment window needs r < s < t, got ({r}, {s}, {t})"
            )));
        }
        sys.check_level(t)?;
        let n = sys.horizon();
        Ok(Self {
            sys,
            r,
            s,
            t,
            future_slot: sys.compressor(n - t, t - s)?,
            past_slot: sys.compressor(n - s, s - r)?,
            present_slot: sys.compressor(n - s, s)?,
        })
    }

    fn n(&self) -> usize {
        self.sys.horizon()
    }

    /// Element of `Ă_[s,t]` from an operator on `E_{t−s}`.
    pub fn future(&self, a: &CMat) -> Result<CMat> {
        let (w, v) = &self.future_slot;
        self.sys.theta(self.n() - self.s, self.s, &(v * a * w))
    }

    /// Element of `Ă_[r,s]` from an operator on `E_{s−r}`.
    pub fn past(&self, a: &CMat) -> Result<CMat> {
        let (w, v) = &self.past_slot;
        self.sys.theta(self.n() - self.r, self.r, &(v * a * w))
    }

    /// The copy of `b ∈ B` inside the past increment, `θ_r(ξξ* ⊙ b)`.
    pub fn base_in_past(&self, b: &CMat) -> Result<CMat> {
        let lb = self.sys.left(self.s - self.r, b)?;
        self.past(&lb)
    }

    /// Conditional expectation onto `Ă_s = ξξ* ⊙ B^a(E_s)`.
    pub fn onto_past(&self, x: &CMat) -> Result<CMat> {
        let (w, v) = &self.present_slot;
        Ok(v * (w * x * v) * w)
    }

    fn sample_letter(&self, rng: &mut SeededRng) -> Result<(Leg, CMat)> {
        if rng.gen_bool(0.5) {
            let a = random_operator(self.sys.power(self.t - self.s)?, rng)?;
            Ok((Leg::One, self.future(&a)?))
        } else {
            let a = random_operator(self.sys.power(self.s - self.r)?, rng)?;
            Ok((Leg::Two, self.past(&a)?))
        }
    }
}

/// `max ‖p(θ_n(a)) − p(a)‖` over sampled `a` on `E_{N−n}`, `p` the
/// unit-vector expectation.
pub fn invariance_residual(sys: &DiscreteProductSystem, samples: usize, rng: &mut SeededRng) -> Result<f64> {
    let big_n = sys.horizon();
    let mut worst = 0.0_f64;
    for n in 1..=big_n {
        let ek = sys.power(big_n - n)?;
        for _ in 0..samples {
            let a = random_operator(ek, rng)?;
            let lhs = sys.expectation(big_n, &sys.theta(big_n - n, n, &a)?)?;
            let rhs = sys.expectation(big_n - n, &a)?;
            worst = worst.max(frob(&(lhs - rhs)));
        }
    }
    Ok(worst)
}

/// Conditional monotone independence of the increments `Ă_[s,t]` (leg 1)
/// and `Ă_[r,s]` (leg 2) on sampled words.
///
/// The invariance of the unit-vector functional is checked first. If it
/// holds the words are tested over `Ă_0 ≅ B`, with the values of the
/// future leg reinserted into the past chain as `θ_r(ξξ* ⊙ b)`. Otherwise
/// the check runs over `Ă_s` and the report says so.
pub fn white_noise_increment_check(
    sys: &DiscreteProductSystem,
    window: (usize, usize, usize),
    trials: usize,
    max_len: usize,
    seed: u64,
    tol: f64,
) -> Result<IncrementReport> {
    let inc = Increments::new(sys, window.0, window.1, window.2)?;
    let mut rng = random::seeded(seed);
    let invariance = invariance_residual(sys, 3, &mut rng)?;
    let mode = if invariance <= tol {
        IncrementMode::WhiteNoise
    } else {
        IncrementMode::MarkovProperty
    };
    let big_n = sys.horizon();
    let en = sys.power(big_n)?;
    let id = en.identity_matrix();
    let mut max_residual = 0.0_f64;
    let mut worst_word = Vec::new();
    for _ in 0..trials {
        let len = rng.gen_range(1..=max_len.max(1));
        let letters = (0..len)
            .map(|_| inc.sample_letter(&mut rng))
            .collect::<Result<Vec<_>>>()?;
        let legs: Vec<u8> = letters.iter().map(|(l, _)| l.number()).collect();
        let word = letters.iter().fold(id.clone(), |acc, (_, x)| acc * x);
        let shape = alternate(letters, Leg::One, &id, |a, b| a * b);
        let residual = match mode {
            IncrementMode::WhiteNoise => {
                let p = |x: &CMat| sys.expectation(big_n, x);
                let formula = nested_formula(&shape, p, |b| inc.base_in_past(b), p, |a, b| a * b, |a, b| a * b)?;
                frob(&(sys.expectation(big_n, &word)? - formula))
            }
            IncrementMode::MarkovProperty => {
                let phi = |x: &CMat| inc.onto_past(x);
                let formula = nested_formula(&shape, phi, |b| Ok(b.clone()), phi, |a, b| a * b, |a, b| a * b)?;
                en.matrix_distance(&inc.onto_past(&word)?, &formula)
            }
        };
        if residual > max_residual || residual.is_nan() {
            max_residual = if residual.is_nan() { f64::INFINITY } else { residual };
            worst_word = legs;
        }
    }
    Ok(IncrementReport {
        mode,
        invariance_residual: invariance,
        max_residual,
        words: trials,
        worst_word,
    })
}

/// Classical finite-state Markov chain with its product-system dilation
/// and an explicit path-space model used as the oracle.
#[derive(Clone, Debug)]
pub struct MarkovScenario {
    pub transition: Vec<Vec<f64>>,
    pub scenario: DilationScenario,
    pub warnings: Vec<String>,
    // indicator_ops[t][j] is 1_{X_t = j} on E_N
    indicator_ops: OnceLock<Vec<Vec<CMat>>>,
}

/// Largest state-space path count enumerated exhaustively.
pub const MAX_PATHS: usize = 10_000;

/// `T(f)(y) = Σ_x P(y, x) f(x)` on the diagonal algebra of `S` points.
pub fn transition_map(p: &[Vec<f64>]) -> Result<PositiveMap> {
    let s = p.len();
    let b = MatrixStarAlgebra::diagonal(s);
    let rows = p.to_vec();
    PositiveMap::from_fn(b.clone(), b, MapKind::CpMap, move |f| {
        let vals: Vec<Complex64> = (0..s)
            .map(|y| (0..s).map(|x| f[(x, x)] * rows[y][x]).sum())
            .collect();
        CMat::from_diagonal(&nalgebra::DVector::from_vec(vals))
    })
}

/// Chain on `S` points: validates `P` and dilates `T`.
pub fn markov_scenario(p: &[Vec<f64>], horizon: usize, budget: usize) -> Result<MarkovScenario> {
    let s = p.len();
    if s == 0 {
        return Err(Error::NotStochastic("empty matrix".into()));
    }
    for (y, row) in p.iter().enumerate() {
        if row.len() != s {
            return Err(Error::NotStochastic(format!("row {y} has {} entries, expected {s}", row.len())));
        }
        if let Some(x) = row.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotStochastic(format!("entry ({y},{x}) is {}", row[x])));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotStochastic(format!("row {y} sums to {sum}")));
        }
    }
    let mut warnings = Vec::new();
    if p.iter().flatten().any(|v| *v == 0.0) {
        warnings.push(
            "transition matrix has zero entries; rows are not all equivalent to a common reference measure"
                .into(),
        );
    }
    let t = transition_map(p)?;
    let report = verify_positive_map(&t, DEFAULT_TOL)?;
    if !report.passed {
        return Err(Error::NotStochastic("induced map is not completely positive".into()));
    }
    let scenario = dilate_discrete(&t, horizon, budget)?;
    Ok(MarkovScenario {
        transition: p.to_vec(),
        scenario,
        warnings,
        indicator_ops: OnceLock::new(),
    })
}

/// A function of `X_t`.
#[derive(Clone, Debug)]
pub struct TimedFunction {
    pub time: usize,
    pub values: Vec<f64>,
}

impl MarkovScenario {
    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn horizon(&self) -> usize {
        self.scenario.system.horizon()
    }

    /// Path weight of `x_0 … x_n` given `x_0`.
    fn weight(&self, path: &[usize]) -> f64 {
        path.windows(2).map(|w| self.transition[w[0]][w[1]]).product()
    }

    /// All paths of `n + 1` points starting at `y`, as digit vectors.
    fn paths_from(&self, y: usize, n: usize) -> Result<Vec<Vec<usize>>> {
        let s = self.states();
        let count = s.checked_pow(n as u32).filter(|c| c * s <= MAX_PATHS).ok_or_else(|| {
            Error::InvalidArgument(format!("{s}^{} paths exceed the enumeration limit {MAX_PATHS}", n + 1))
        })?;
        Ok((0..count)
            .map(|mut code| {
                let mut path = vec![y];
                for _ in 0..n {
                    path.push(code % s);
                    code /= s;
                }
                path
            })
            .collect())
    }

    /// `E[Π f_i(X_{t_i}) | X_0 = y]` for every `y`, by path enumeration.
    pub fn path_expectation(&self, factors: &[TimedFunction]) -> Result<Vec<f64>> {
        let n = self.horizon();
        (0..self.states())
            .map(|y| {
                Ok(self
                    .paths_from(y, n)?
                    .iter()
                    .map(|path| {
                        self.weight(path) * factors.iter().map(|f| f.values[path[f.time]]).product::<f64>()
                    })
                    .sum())
            })
            .collect()
    }

    /// `f(X_t)` on `E_N`: `id_{E_{N−t}} ⊙ f`, `f` acting on `E_t` from the left.
    pub fn process_operator(&self, f: &TimedFunction) -> Result<CMat> {
        let sys = &self.scenario.system;
        let n = sys.horizon();
        if f.time > n {
            return Err(Error::HorizonExceeded {
                requested: f.time,
                horizon: n,
            });
        }
        let b = linalg::diag_real(&f.values);
        sys.id_tensor(n - f.time, &sys.left(f.time, &b)?, f.time)
    }

    fn indicator_ops(&self) -> Result<&Vec<Vec<CMat>>> {
        if let Some(ops) = self.indicator_ops.get() {
            return Ok(ops);
        }
        let s = self.states();
        let ops = (0..=self.horizon())
            .map(|t| {
                (0..s)
                    .map(|j| {
                        let mut values = vec![0.0; s];
                        values[j] = 1.0;
                        self.process_operator(&TimedFunction { time: t, values })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.indicator_ops.get_or_init(|| ops))
    }

    /// `⟨ξ_N, Π f_i(X_{t_i}) ξ_N⟩` as a function of `X_0`.
    pub fn module_expectation(&self, factors: &[TimedFunction]) -> Result<Vec<f64>> {
        let sys = &self.scenario.system;
        let n = sys.horizon();
        if let Some(f) = factors.iter().find(|f| f.time > n) {
            return Err(Error::HorizonExceeded {
                requested: f.time,
                horizon: n,
            });
        }
        let ops = self.indicator_ops()?;
        let mut op = sys.power(n)?.identity_matrix();
        for f in factors {
            let fx = f
                .values
                .iter()
                .zip(&ops[f.time])
                .fold(linalg::zeros(op.nrows(), op.ncols()), |acc, (v, e)| acc + e * cr(*v));
            op *= fx;
        }
        let v = sys.expectation(n, &op)?;
        Ok((0..self.states()).map(|i| v[(i, i)].re).collect())
    }

    fn random_factors(&self, rng: &mut SeededRng) -> Vec<TimedFunction> {
        let n = self.horizon();
        let count = rng.gen_range(1..=n + 2);
        let mut factors: Vec<TimedFunction> = (0..count)
            .map(|_| TimedFunction {
                time: rng.gen_range(0..=n),
                values: (0..self.states()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect();
        // always include a function of the starting point
        factors.push(TimedFunction {
            time: 0,
            values: (0..self.states()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        });
        factors
    }

    /// Largest deviation between path-space and module moments.
    pub fn moment_residual(&self, trials: usize, seed: u64) -> Result<f64> {
        let mut rng = random::seeded(seed);
        let mut worst = 0.0_f64;
        for _ in 0..trials {
            let factors = self.random_factors(&mut rng);
            let lhs = self.path_expectation(&factors)?;
            let rhs = self.module_expectation(&factors)?;
            for (a, b) in lhs.iter().zip(&rhs) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    /// `⟨F, F'⟩` on `E_n`: `Σ_paths P(path) conj(F) F'` given `X_0`.
    fn path_inner(&self, n: usize, f: &dyn Fn(&[usize]) -> Complex64, g: &dyn Fn(&[usize]) -> Complex64) -> Result<Vec<Complex64>> {
        (0..self.states())
            .map(|y| {
                Ok(self
                    .paths_from(y, n)?
                    .iter()
                    .map(|path| f(path).conj() * g(path) * self.weight(path))
                    .sum())
            })
            .collect()
    }

    /// The shift `F ⊙ G ↦ F(X_t, …, X_{a+t}) G(X_0, …, X_t)` from
    /// `E_a ⊙ E_t` to `E_{a+t}` preserves inner products; returns the
    /// largest deviation over random path functions.
    pub fn shift_residual(&self, a: usize, t: usize, trials: usize, seed: u64) -> Result<f64> {
        if a + t > self.horizon() {
            return Err(Error::HorizonExceeded {
                requested: a + t,
                horizon: self.horizon(),
            });
        }
        let s = self.states();
        let mut rng = random::seeded(seed);
        let table = |rng: &mut SeededRng, len: usize| -> Vec<Complex64> {
            (0..s.pow(len as u32))
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        let code = |path: &[usize]| path.iter().rev().fold(0usize, |acc, x| acc * s + x);
        let mut worst = 0.0_f64;
        for _ in 0..trials {
            let (f, f2) = (table(&mut rng, a + 1), table(&mut rng, a + 1));
            let (g, g2) = (table(&mut rng, t + 1), table(&mut rng, t + 1));
            // tensor side: ⟨G, ⟨F, F'⟩(X_t) G'⟩_{E_t}
            let ff = self.path_inner(a, &|p| f[code(p)], &|p| f2[code(p)])?;
            let lhs = self.path_inner(t, &|p| g[code(p)], &|p| ff[p[t]] * g2[code(p)])?;
            // shifted side on E_{a+t}
            let rhs = self.path_inner(
                a + t,
                &|p| f[code(&p[t..])] * g[code(&p[..=t])],
                &|p| f2[code(&p[t..])] * g2[code(&p[..=t])],
            )?;
            for (x, y) in lhs.iter().zip(&rhs) {
                worst = worst.max((x - y).norm());
            }
        }
        Ok(worst)
    }
}
