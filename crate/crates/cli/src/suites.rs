//! Built-in property suites for `verify`.

use ncprob_core::dilation::{
    dilate_discrete, markov_scenario, white_noise_increment_check, white_noise_scenario, DilationScenario,
    IncrementMode, MarkovScenario, TimedFunction,
};
use ncprob_core::independence::{
    conditional_monotone_moment_formula, conditional_monotone_realize, conditional_tensor_realize,
    monotone_moment_formula, monotone_realize, nivelation_residual, sandwich_residual, scalar_oracle,
    tensor_moment_formula, tensor_realize, verify_independence, AlternatingWord, CoinsGame, IndependenceReport,
    JointRealization, Leg, QuantumProbabilitySpace, WordSampler,
};
use ncprob_core::linalg::{self, frob, CMat};
use ncprob_core::module::{associativity_residual, gns_residual, quotient_null_space, tensor_raw};
use ncprob_core::random::{self, SeededRng};
use ncprob_core::{
    gns_construct, rank_one, verify_algebra, verify_positive_map, Error, MapKind, MatrixStarAlgebra, PositiveMap,
    Result, VerificationReport,
};
use rand::Rng;

use crate::report::Report;
use crate::{Ctx, RunConfig, Suite};

pub fn verify(suite: Suite, cfg: &RunConfig) -> Result<Report> {
    let mut ctx = Ctx::new("verify", suite.name(), cfg);
    let list: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    for s in list {
        match s {
            Suite::Algebra => algebra(&mut ctx)?,
            Suite::Module => module(&mut ctx)?,
            Suite::Monotone => monotone(&mut ctx)?,
            Suite::ConditionalMonotone => conditional_monotone(&mut ctx)?,
            Suite::ConditionalTensor => conditional_tensor(&mut ctx)?,
            Suite::Dilation => dilation(&mut ctx)?,
            Suite::WhiteNoise => white_noise(&mut ctx)?,
            Suite::Markov => markov(&mut ctx)?,
            Suite::All => unreachable!("expanded above"),
        }
    }
    Ok(ctx.report)
}

fn first_failure(rep: &VerificationReport) -> Option<String> {
    rep.failures.first().map(|f| f.identity.clone())
}

fn record(ctx: &mut Ctx, suite: &str, name: impl Into<String>, rep: &VerificationReport) {
    ctx.check(suite, name, rep.worst_residual, first_failure(rep));
}

pub fn legs(word: &AlternatingWord) -> String {
    word.letters
        .iter()
        .map(|l| l.leg.number().to_string())
        .collect::<Vec<_>>()
        .join("")
}

fn record_words(ctx: &mut Ctx, suite: &str, name: &str, rep: &IndependenceReport) {
    let worst = rep
        .rows
        .iter()
        .max_by(|a, b| a.residual.total_cmp(&b.residual))
        .map(|r| format!("{} words, worst word legs {}", rep.rows.len(), legs(&r.word)));
    ctx.check(suite, name, rep.max_residual, worst);
}

fn algebra(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "algebra";
    let tol = ctx.cfg.tolerance;
    let mut rng = random::seeded(ctx.seed(1));
    let g = random::hermitian_letter(&MatrixStarAlgebra::full(3), &mut rng);
    let algebras = [
        ("M2", MatrixStarAlgebra::full(2)),
        ("M3", MatrixStarAlgebra::full(3)),
        ("diag3", MatrixStarAlgebra::diagonal(3)),
        ("pauli", MatrixStarAlgebra::pauli()),
        ("scalars", MatrixStarAlgebra::scalars()),
        ("generated", MatrixStarAlgebra::generated_by(3, &[g])?),
    ];
    for (name, alg) in &algebras {
        record(ctx, S, format!("closure/{name}"), &verify_algebra(alg, tol));
    }
    for i in 0..10 {
        let map = random::sample_map(i, &mut rng)?;
        let rep = verify_positive_map(&map, tol)?;
        record(ctx, S, format!("map/{i}/{}", map.kind()), &rep);
    }
    for (name, alg) in &algebras[..3] {
        let phi = random::state(alg, &mut rng)?;
        record(ctx, S, format!("state/{name}"), &verify_positive_map(&phi, tol)?);
    }
    let m2 = MatrixStarAlgebra::full(2);
    let transpose = PositiveMap::from_fn(m2.clone(), m2, MapKind::CpMap, |x| x.transpose())?;
    let rejected = !verify_positive_map(&transpose, tol)?.passed;
    ctx.flag(S, "transpose rejected as not completely positive", rejected, None);
    Ok(())
}

fn random_bimodule(b: &MatrixStarAlgebra, rng: &mut SeededRng) -> Result<ncprob_core::HilbertModule> {
    let t = if b.len() == 4 && b.ambient_dim() == 2 {
        random::unital_cp_map(2, rng.gen_range(1..=3), rng)?
    } else {
        random::stochastic_map(b.len(), rng)?
    };
    gns_construct(&t)
}

fn random_vector(e: &ncprob_core::HilbertModule, rng: &mut SeededRng) -> Result<CMat> {
    let coeffs: Vec<CMat> = (0..e.gens()).map(|_| random::element(e.base(), rng)).collect();
    e.vector(&coeffs)
}

fn module(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "module";
    let tol = ctx.cfg.tolerance;
    let mut rng = random::seeded(ctx.seed(2));
    for i in 0..10 {
        let map = random::sample_map(i, &mut rng)?;
        let e = gns_construct(&map)?;
        ctx.check(S, format!("gns/{i}/{}", map.kind()), gns_residual(&map, &e)?, None);
        record(ctx, S, format!("invariants/{i}"), &e.verify(tol, &mut rng));
    }
    for i in 0..10 {
        let b = if i % 2 == 0 {
            MatrixStarAlgebra::full(2)
        } else {
            MatrixStarAlgebra::diagonal(3)
        };
        let e1 = random_bimodule(&b, &mut rng)?;
        let e2 = random_bimodule(&b, &mut rng)?;
        let e3 = random_bimodule(&b, &mut rng)?;
        ctx.check(S, format!("associativity/{i}"), associativity_residual(&e1, &e2, &e3)?, None);
    }
    let b = MatrixStarAlgebra::full(2);
    let e1 = random_bimodule(&b, &mut rng)?;
    let e2 = random_bimodule(&b, &mut rng)?;
    let raw = tensor_raw(&e1, &e2)?;
    let q = quotient_null_space(&raw)?;
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let x = random_vector(&raw, &mut rng)?;
        let y = random_vector(&raw, &mut rng)?;
        worst = worst.max(frob(&(raw.inner(&x, &y) - q.module.inner(&q.vector(&x), &q.vector(&y)))));
    }
    ctx.check(S, "quotient preserves inner products", worst, None);
    let a1 = e1.left_operator(&random::element(&b, &mut rng))?;
    let x = random_vector(&e1, &mut rng)?;
    let y = random_vector(&e1, &mut rng)?;
    let a2 = rank_one(&e1, &x, &y);
    let prod = a1.compose(&a2)?;
    let lhs = e1.adjoint(&prod);
    let rhs = e1.adjoint(&a2).compose(&e1.adjoint(&a1))?;
    ctx.check(S, "(ab)* = b*a*", e1.matrix_distance(lhs.action(), rhs.action()), None);
    Ok(())
}

fn state_pairs(rng: &mut SeededRng) -> Result<Vec<(QuantumProbabilitySpace, QuantumProbabilitySpace)>> {
    let algebras = [
        (MatrixStarAlgebra::full(2), MatrixStarAlgebra::diagonal(3)),
        (MatrixStarAlgebra::diagonal(4), MatrixStarAlgebra::full(2)),
    ];
    algebras
        .iter()
        .map(|(a1, a2)| {
            Ok((
                QuantumProbabilitySpace::new(random::state(a1, rng)?)?,
                QuantumProbabilitySpace::new(random::state(a2, rng)?)?,
            ))
        })
        .collect()
}

fn monotone(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "monotone";
    let (trials, max_len) = (ctx.cfg.trials, ctx.cfg.max_word_length);
    let mut rng = random::seeded(ctx.seed(3));
    for (k, (s1, s2)) in state_pairs(&mut rng)?.iter().enumerate() {
        let sampler = WordSampler::new(s1.algebra().clone(), s2.algebra().clone(), max_len);
        let real = monotone_realize(s1, s2)?;
        record(ctx, S, format!("pair{k}/realization"), &real.verify(ctx.cfg.tolerance));
        let oracle = scalar_oracle(monotone_moment_formula, s1.functional(), s2.functional());
        let rep = verify_independence(&real, oracle, |r| sampler.sample(r), trials, ctx.seed(30 + k as u64))?;
        record_words(ctx, S, &format!("pair{k}/monotone words"), &rep);
        let real_t = tensor_realize(s1, s2)?;
        let oracle = scalar_oracle(tensor_moment_formula, s1.functional(), s2.functional());
        let rep = verify_independence(&real_t, oracle, |r| sampler.sample(r), trials, ctx.seed(40 + k as u64))?;
        record_words(ctx, S, &format!("pair{k}/tensor words"), &rep);
        let mut worst = 0.0_f64;
        for _ in 0..10 {
            let fp = random::hermitian_letter(s1.algebra(), &mut rng);
            let g = random::hermitian_letter(s2.algebra(), &mut rng);
            let f = random::hermitian_letter(s1.algebra(), &mut rng);
            worst = worst.max(nivelation_residual(&real, s2.functional(), &fp, &g, &f)?);
        }
        ctx.check(S, format!("pair{k}/nivelation"), worst, None);
        witness(ctx, &real, s1, s2, &mut rng, k)?;
    }
    Ok(())
}

/// Ordered factorization holds, the reversed naive one does not.
fn witness(
    ctx: &mut Ctx,
    real: &JointRealization,
    s1: &QuantumProbabilitySpace,
    s2: &QuantumProbabilitySpace,
    rng: &mut SeededRng,
    k: usize,
) -> Result<()> {
    const S: &str = "monotone";
    let (phi1, phi2) = (s1.functional(), s2.functional());
    let mut ordered = 0.0_f64;
    let mut reversed = 0.0_f64;
    for _ in 0..20 {
        let f = random::hermitian_letter(s1.algebra(), rng);
        let g = random::hermitian_letter(s2.algebra(), rng);
        let g2 = random::hermitian_letter(s2.algebra(), rng);
        let w = AlternatingWord::new().with(Leg::One, f.clone()).with(Leg::Two, g.clone());
        let v = real.evaluate(&w)?[(0, 0)];
        ordered = ordered.max((v - phi1.value(&f)? * phi2.value(&g)?).norm());
        let w = AlternatingWord::new()
            .with(Leg::Two, g.clone())
            .with(Leg::One, f.clone())
            .with(Leg::Two, g2.clone());
        let v = real.evaluate(&w)?[(0, 0)];
        reversed = reversed.max((v - phi2.value(&(&g * &g2))? * phi1.value(&f)?).norm());
    }
    ctx.check(S, format!("pair{k}/ordered factorization f(X1)g(X2)"), ordered, None);
    ctx.check_above(S, format!("pair{k}/reversed word breaks naive factorization"), reversed, 1e-3);
    Ok(())
}

fn diagonal_compression() -> Result<PositiveMap> {
    PositiveMap::from_fn(
        MatrixStarAlgebra::full(2),
        MatrixStarAlgebra::diagonal(2),
        MapKind::ConditionalExpectation,
        linalg::diag_part,
    )
}

/// Formula against realization on sampled words plus the largest distance
/// of a formula value from the common subalgebra.
fn conditional_words(
    ctx: &mut Ctx,
    label: &str,
    phi1: &PositiveMap,
    phi2: &PositiveMap,
    seed: u64,
) -> Result<()> {
    const S: &str = "conditional-monotone";
    let real = conditional_monotone_realize(phi1, phi2)?;
    record(ctx, S, format!("{label}/realization"), &real.verify(ctx.cfg.tolerance));
    let sampler = WordSampler::new(phi1.domain().clone(), phi2.domain().clone(), ctx.cfg.max_word_length);
    let mut rng = random::seeded(seed);
    let (mut worst, mut membership) = (0.0_f64, 0.0_f64);
    let mut worst_word = String::new();
    for _ in 0..ctx.cfg.trials {
        let w = sampler.sample(&mut rng);
        let realized = real.evaluate(&w)?;
        let residual = match conditional_monotone_moment_formula(&w, phi1, phi2) {
            Ok(out) => {
                membership = membership.max(phi1.codomain().project(&out)?.1);
                frob(&(realized - out))
            }
            Err(Error::NotInAlgebra { residual }) => {
                membership = membership.max(residual);
                f64::INFINITY
            }
            Err(e) => return Err(e),
        };
        if residual > worst || residual.is_nan() {
            worst = residual;
            worst_word = legs(&w);
        }
    }
    let detail = Some(format!("{} words, worst word legs {worst_word}", ctx.cfg.trials));
    ctx.check(S, format!("{label}/words"), worst, detail);
    ctx.check(S, format!("{label}/formula values lie in the base"), membership, None);
    Ok(())
}

fn conditional_monotone(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "conditional-monotone";
    let phi = diagonal_compression()?;
    conditional_words(ctx, "compression", &phi, &phi, ctx.seed(50))?;
    let a2 = MatrixStarAlgebra::diagonal(2);
    let id = PositiveMap::identity(a2, MapKind::ConditionalExpectation)?;
    conditional_words(ctx, "compression-identity", &phi, &id, ctx.seed(51))?;
    let real = conditional_monotone_realize(&phi, &phi)?;
    let mut rng = random::seeded(ctx.seed(52));
    let m2 = MatrixStarAlgebra::full(2);
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let a1 = random::element(&m2, &mut rng);
        let a2 = random::element(&m2, &mut rng);
        let a3 = random::element(&m2, &mut rng);
        worst = worst.max(sandwich_residual(&real, &phi, &a1, &a2, &a3)?);
    }
    ctx.check(S, "sandwich identity", worst, None);
    Ok(())
}

/// `E[f(X1) g(X2) | Y]` by summing over the 8 outcomes.
pub fn coins_oracle(game: &CoinsGame, f: [f64; 2], g: [f64; 2]) -> CMat {
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

fn conditional_tensor(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "conditional-tensor";
    let game = CoinsGame {
        bias1: ctx.cfg.bias1,
        bias2: ctx.cfg.bias2,
    };
    let prod = game.realize()?;
    let (mut amalgamated, mut factorized, mut realized, mut insertion) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let h = CoinsGame::of_y([2.0, -0.5]);
    for f in CoinsGame::indicators() {
        for g in CoinsGame::indicators() {
            let (fx, gx) = (CoinsGame::of_x(f), CoinsGame::of_x(g));
            let oracle = coins_oracle(&game, f, g);
            amalgamated = amalgamated.max(frob(&(prod.expectation_of(&fx, &gx)? - &oracle)));
            factorized = factorized.max(frob(&(prod.factorized(&fx, &gx)? - &oracle)));
            realized = realized.max(frob(&(prod.realized(&fx, &gx)? - &oracle)));
            insertion = insertion.max(prod.insertion_residual(&fx, &h, &gx)?);
        }
    }
    ctx.check(S, "coins/amalgamated expectation vs enumeration", amalgamated, None);
    ctx.check(S, "coins/factorized vs enumeration", factorized, None);
    ctx.check(S, "coins/module realization vs enumeration", realized, None);
    ctx.check(S, "coins/base insertion on either leg", insertion, None);
    let phi1 = game.phi1()?;
    let f = CoinsGame::of_x([0.25, -1.5]);
    let v = prod.expectation_of(&f, &linalg::identity(4))?;
    ctx.check(S, "coins/unit second factor", frob(&(v - phi1.apply(&f)?)), None);
    record(ctx, S, "coins/well defined", &prod.verify_well_defined(ctx.cfg.tolerance)?);
    let phi = diagonal_compression()?;
    let rejected = matches!(conditional_tensor_realize(&phi, &phi), Err(Error::NonCommutative { .. }));
    ctx.flag(S, "noncommutative input rejected", rejected, None);
    Ok(())
}

pub fn recovery(ctx: &mut Ctx, suite: &str, label: &str, sc: &DilationScenario) -> Result<()> {
    let mut worst = 0.0_f64;
    for n in 0..=sc.system.horizon() {
        worst = worst.max(sc.recovery_residual(n)?);
    }
    ctx.check(suite, format!("{label}/T^n(b) = <xi_n, b xi_n>"), worst, None);
    Ok(())
}

pub fn coherence(ctx: &mut Ctx, suite: &str, label: &str, sc: &DilationScenario) -> Result<()> {
    let n = sc.system.horizon();
    let mut merged = VerificationReport::new();
    for m in 0..=n {
        for k in 0..=(n - m) {
            merged.merge(sc.system.coherence(m, k, ctx.cfg.tolerance)?);
        }
    }
    record(ctx, suite, format!("{label}/E_m ⊙ E_n = E_(m+n)"), &merged);
    Ok(())
}

fn dilation(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "dilation";
    let (horizon, budget) = (ctx.cfg.horizon, ctx.cfg.budget);
    let mut rng = random::seeded(ctx.seed(6));
    for i in 0..10 {
        let t = random::unital_cp_map(2, rng.gen_range(1..=3), &mut rng)?;
        let sc = dilate_discrete(&t, horizon, budget)?;
        recovery(ctx, S, &format!("random{i}"), &sc)?;
        if i < 2 {
            coherence(ctx, S, &format!("random{i}"), &sc)?;
            let rep = sc.verify_endomorphisms(1, ctx.seed(60 + i as u64), ctx.cfg.tolerance)?;
            record(ctx, S, format!("random{i}/theta"), &rep);
        }
    }
    let chain = markov_scenario(&[vec![0.5, 0.5], vec![0.3, 0.7]], horizon, budget)?;
    recovery(ctx, S, "chain", &chain.scenario)?;
    coherence(ctx, S, "chain", &chain.scenario)?;
    let rep = chain.scenario.verify_endomorphisms(2, ctx.seed(61), ctx.cfg.tolerance)?;
    record(ctx, S, "chain/theta", &rep);
    for (name, b) in [("M2", MatrixStarAlgebra::full(2)), ("diag3", MatrixStarAlgebra::diagonal(3))] {
        let id = PositiveMap::identity(b.clone(), MapKind::CpMap)?;
        let sc = dilate_discrete(&id, horizon, budget)?;
        let mut trivial = true;
        for n in 0..=horizon {
            let e = sc.system.power(n)?;
            trivial &= e.gens() == 1 && e.gram_entry(0, 0) == *b.unit();
        }
        ctx.flag(S, format!("identity/{name}/E_n = B exactly"), trivial, None);
    }
    let t = random::unital_cp_map(2, 3, &mut rng)?;
    let over = dilate_discrete(&t, horizon.max(2), 8);
    ctx.flag(
        S,
        "budget overrun reported",
        matches!(over, Err(Error::BudgetExceeded { .. })),
        None,
    );
    let e = chain.scenario.system.power(0)?.identity_matrix();
    let beyond = chain.scenario.e0_apply(horizon + 1, &e);
    ctx.flag(
        S,
        "horizon overrun reported",
        matches!(beyond, Err(Error::HorizonExceeded { .. })),
        None,
    );
    Ok(())
}

/// `(N−2, N−1, N)` when it fits, else the earliest window.
pub fn window(horizon: usize) -> Result<(usize, usize, usize)> {
    match horizon {
        0 | 1 => Err(Error::InvalidArgument(
            "increment checks need a horizon of at least 2".into(),
        )),
        2 => Ok((0, 1, 2)),
        n => Ok((n - 2, n - 1, n)),
    }
}

pub fn increments(ctx: &mut Ctx, suite: &str, label: &str, sc: &DilationScenario, seed: u64) -> Result<IncrementMode> {
    increment_words(ctx, suite, label, sc, seed, ctx.cfg.trials)
}

fn increment_words(
    ctx: &mut Ctx,
    suite: &str,
    label: &str,
    sc: &DilationScenario,
    seed: u64,
    trials: usize,
) -> Result<IncrementMode> {
    let w = window(sc.system.horizon())?;
    let rep = white_noise_increment_check(
        &sc.system,
        w,
        trials,
        ctx.cfg.max_word_length,
        seed,
        ctx.cfg.tolerance,
    )?;
    let detail = Some(format!(
        "window ({}, {}, {}), mode {}, worst word legs {}",
        w.0,
        w.1,
        w.2,
        rep.mode.as_str(),
        rep.worst_word.iter().map(|l| l.to_string()).collect::<String>()
    ));
    ctx.check(suite, format!("{label}/increment words ({})", rep.mode.as_str()), rep.max_residual, detail);
    Ok(rep.mode)
}

fn white_noise(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "white-noise";
    let (horizon, budget) = (ctx.cfg.horizon, ctx.cfg.budget);
    for (k, (name, base)) in [("M2", MatrixStarAlgebra::full(2)), ("scalar", MatrixStarAlgebra::scalars())]
        .into_iter()
        .enumerate()
    {
        let sc = white_noise_scenario(&base, 2, horizon, budget)?;
        let mut rng = random::seeded(ctx.seed(70 + k as u64));
        let inv = ncprob_core::dilation::invariance_residual(&sc.system, 5, &mut rng)?;
        ctx.check(S, format!("{name}/invariance of the unit-vector functional"), inv, None);
        let mode = increments(ctx, S, name, &sc, ctx.seed(72 + k as u64))?;
        ctx.flag(S, format!("{name}/white-noise mode"), mode == IncrementMode::WhiteNoise, None);
    }
    Ok(())
}

fn chain_checks(ctx: &mut Ctx, label: &str, m: &MarkovScenario, seed: u64) -> Result<()> {
    const S: &str = "markov";
    recovery(ctx, S, label, &m.scenario)?;
    ctx.check(S, format!("{label}/path moments = module moments"), m.moment_residual(ctx.cfg.trials.min(100), seed)?, None);
    let n = m.horizon();
    let mut worst = 0.0_f64;
    for a in 0..=n {
        for t in 0..=(n - a) {
            worst = worst.max(m.shift_residual(a, t, 3, seed.wrapping_add((a * 16 + t) as u64))?);
        }
    }
    ctx.check(S, format!("{label}/shift preserves inner products"), worst, None);
    if n >= 2 {
        let trials = ctx.cfg.trials.min(100);
        let mode = increment_words(ctx, S, label, &m.scenario, seed.wrapping_add(1), trials)?;
        if mode == IncrementMode::MarkovProperty {
            ctx.note(format!(
                "{label}: the unit-vector functional is not shift invariant, increments checked over the past algebra"
            ));
        }
    }
    for w in &m.warnings {
        ctx.note(format!("{label}: {w}"));
    }
    Ok(())
}

fn markov(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "markov";
    let (horizon, budget) = (ctx.cfg.horizon, ctx.cfg.budget);
    let chain = markov_scenario(&[vec![0.5, 0.5], vec![0.3, 0.7]], horizon, budget)?;
    chain_checks(ctx, "two-state", &chain, ctx.seed(80))?;
    let mut rng = random::seeded(ctx.seed(81));
    let p = random::stochastic(3, &mut rng);
    let chain3 = markov_scenario(&p, horizon, budget)?;
    chain_checks(ctx, "three-state", &chain3, ctx.seed(82))?;
    let id = markov_scenario(&[vec![1.0, 0.0], vec![0.0, 1.0]], horizon, budget)?;
    let f = vec![0.3, -1.0];
    let mut worst = 0.0_f64;
    for n in 0..=horizon {
        let v = id.module_expectation(&[TimedFunction {
            time: n,
            values: f.clone(),
        }])?;
        worst = worst.max(v.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ctx.check(S, "identity chain/E[f(X_n) | X_0] = f(X_0)", worst, None);
    let uniform = markov_scenario(&[vec![0.5, 0.5], vec![0.5, 0.5]], horizon, budget)?;
    let (f, g) = (vec![1.0, 3.0], vec![-2.0, 0.5]);
    let v = uniform.module_expectation(&[
        TimedFunction { time: 1, values: f },
        TimedFunction {
            time: 0,
            values: g.clone(),
        },
    ])?;
    let worst = v.iter().zip(&g).map(|(a, gy)| (a - 2.0 * gy).abs()).fold(0.0, f64::max);
    ctx.check(S, "uniform chain/one-step decorrelation", worst, None);
    Ok(())
}
