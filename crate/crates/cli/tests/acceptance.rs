//! The acceptance criteria, one line each. Exits non-zero if any fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ncprob_core::dilation::{
    dilate_discrete, invariance_residual, markov_scenario, white_noise_increment_check, white_noise_scenario,
    IncrementMode, DEFAULT_BUDGET,
};
use ncprob_core::independence::{
    conditional_monotone_moment_formula, conditional_monotone_realize, monotone_moment_formula, monotone_realize,
    scalar_oracle, verify_independence, AlternatingWord, CoinsGame, Leg, QuantumProbabilitySpace, WordSampler,
};
use ncprob_core::linalg::{self, frob, CMat};
use ncprob_core::module::{associativity_residual, gns_residual};
use ncprob_core::random::{self, SeededRng};
use ncprob_core::{gns_construct, HilbertModule, MapKind, MatrixStarAlgebra, PositiveMap, Result};
use rand::Rng;

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Result<Outcome> {
    Ok(Outcome { passed, summary })
}

fn within(elapsed: Duration, limit: f64) -> bool {
    elapsed.as_secs_f64() < limit
}

fn states(a1: &MatrixStarAlgebra, a2: &MatrixStarAlgebra, rng: &mut SeededRng) -> Result<(QuantumProbabilitySpace, QuantumProbabilitySpace)> {
    Ok((
        QuantumProbabilitySpace::new(random::state(a1, rng)?)?,
        QuantumProbabilitySpace::new(random::state(a2, rng)?)?,
    ))
}

fn scalar_monotone() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = random::seeded(101);
    let (a1, a2) = (MatrixStarAlgebra::full(2), MatrixStarAlgebra::diagonal(4));
    let (s1, s2) = states(&a1, &a2, &mut rng)?;
    let real = monotone_realize(&s1, &s2)?;
    let sampler = WordSampler::new(a1, a2, 6);
    let oracle = scalar_oracle(monotone_moment_formula, s1.functional(), s2.functional());
    let rep = verify_independence(&real, oracle, |r| sampler.sample(r), 200, 102)?;
    let t = start.elapsed();
    outcome(
        rep.max_residual <= 1e-9 && within(t, 5.0),
        format!("200 words, max residual {:.3e}, {:.2?}", rep.max_residual, t),
    )
}

fn witness() -> Result<Outcome> {
    let mut rng = random::seeded(103);
    let (a1, a2) = (MatrixStarAlgebra::full(2), MatrixStarAlgebra::full(2));
    let (s1, s2) = states(&a1, &a2, &mut rng)?;
    let (phi1, phi2) = (s1.functional(), s2.functional());
    let real = monotone_realize(&s1, &s2)?;
    let (mut ordered, mut reversed) = (0.0_f64, 0.0_f64);
    for _ in 0..50 {
        let f = random::hermitian_letter(&a1, &mut rng);
        let g = random::hermitian_letter(&a2, &mut rng);
        let g2 = random::hermitian_letter(&a2, &mut rng);
        let w = AlternatingWord::new().with(Leg::One, f.clone()).with(Leg::Two, g.clone());
        ordered = ordered.max((real.evaluate(&w)?[(0, 0)] - phi1.value(&f)? * phi2.value(&g)?).norm());
        let w = AlternatingWord::new()
            .with(Leg::Two, g.clone())
            .with(Leg::One, f.clone())
            .with(Leg::Two, g2.clone());
        reversed = reversed.max((real.evaluate(&w)?[(0, 0)] - phi2.value(&(&g * &g2))? * phi1.value(&f)?).norm());
    }
    outcome(
        ordered <= 1e-9 && reversed > 1e-3,
        format!("ordered {ordered:.3e}, widest reversed gap {reversed:.3e}"),
    )
}

/// `E[f(X1) g(X2) | Y]` summed over the eight outcomes.
fn enumerate(game: &CoinsGame, f: [f64; 2], g: [f64; 2]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (y, v) in out.iter_mut().enumerate() {
        for x1 in 0..2 {
            for x2 in 0..2 {
                let p1 = if x1 == y { game.bias1 } else { 1.0 - game.bias1 };
                let p2 = if x2 == y { game.bias2 } else { 1.0 - game.bias2 };
                *v += p1 * p2 * f[x1] * g[x2];
            }
        }
    }
    out
}

fn coins() -> Result<Outcome> {
    let start = Instant::now();
    let game = CoinsGame::default();
    let prod = game.realize()?;
    let (mut worst, mut insertion) = (0.0_f64, 0.0_f64);
    let h = CoinsGame::of_y([0.25, -3.0]);
    for f in CoinsGame::indicators() {
        for g in CoinsGame::indicators() {
            let (fx, gx) = (CoinsGame::of_x(f), CoinsGame::of_x(g));
            let expected = CoinsGame::of_y(enumerate(&game, f, g));
            for value in [prod.expectation_of(&fx, &gx)?, prod.factorized(&fx, &gx)?] {
                worst = worst.max(frob(&(value - &expected)));
            }
            insertion = insertion.max(prod.insertion_residual(&fx, &h, &gx)?);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && insertion <= 1e-12 && within(t, 1.0),
        format!("16 pairs, max residual {worst:.3e}, insertion {insertion:.3e}, {t:.2?}"),
    )
}

fn conditional_monotone() -> Result<Outcome> {
    let start = Instant::now();
    let m2 = MatrixStarAlgebra::full(2);
    let phi = PositiveMap::from_fn(m2.clone(), MatrixStarAlgebra::diagonal(2), MapKind::ConditionalExpectation, linalg::diag_part)?;
    let real = conditional_monotone_realize(&phi, &phi)?;
    let sampler = WordSampler::new(m2.clone(), m2, 5);
    let mut rng = random::seeded(104);
    let (mut worst, mut membership) = (0.0_f64, 0.0_f64);
    let mut outside = 0;
    for _ in 0..200 {
        let w = sampler.sample(&mut rng);
        match conditional_monotone_moment_formula(&w, &phi, &phi) {
            Ok(formula) => {
                membership = membership.max(phi.codomain().project(&formula)?.1);
                worst = worst.max(frob(&(real.evaluate(&w)? - formula)));
            }
            Err(_) => outside += 1,
        }
    }
    let t = start.elapsed();
    outcome(
        outside == 0 && worst <= 1e-9 && membership <= 1e-9 && within(t, 10.0),
        format!("200 words, max residual {worst:.3e}, membership {membership:.3e}, {outside} rejected, {t:.2?}"),
    )
}

fn gns() -> Result<Outcome> {
    let mut rng = random::seeded(105);
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let map = random::sample_map(i, &mut rng)?;
        worst = worst.max(gns_residual(&map, &gns_construct(&map)?)?);
    }
    outcome(worst <= 1e-10, format!("10 maps, max residual {worst:.3e}"))
}

fn random_bimodule(b: &MatrixStarAlgebra, rng: &mut SeededRng) -> Result<HilbertModule> {
    let t = if b.ambient_dim() == 2 && b.len() == 4 {
        random::unital_cp_map(2, rng.gen_range(1..=3), rng)?
    } else {
        random::stochastic_map(b.len(), rng)?
    };
    gns_construct(&t)
}

fn associativity() -> Result<Outcome> {
    let mut rng = random::seeded(106);
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let b = match i % 3 {
            0 => MatrixStarAlgebra::full(2),
            1 => MatrixStarAlgebra::diagonal(3),
            _ => MatrixStarAlgebra::diagonal(4),
        };
        let (e1, e2, e3) = (
            random_bimodule(&b, &mut rng)?,
            random_bimodule(&b, &mut rng)?,
            random_bimodule(&b, &mut rng)?,
        );
        worst = worst.max(associativity_residual(&e1, &e2, &e3)?);
    }
    outcome(worst <= 1e-10, format!("10 triples, max entry deviation {worst:.3e}"))
}

fn recovery() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = random::seeded(107);
    let mut scenarios = Vec::new();
    for _ in 0..10 {
        let t = random::unital_cp_map(2, rng.gen_range(1..=3), &mut rng)?;
        scenarios.push(dilate_discrete(&t, 3, DEFAULT_BUDGET)?);
    }
    scenarios.push(markov_scenario(&[vec![0.5, 0.5], vec![0.3, 0.7]], 3, DEFAULT_BUDGET)?.scenario);
    let mut worst = 0.0_f64;
    for sc in &scenarios {
        for n in 0..=3 {
            worst = worst.max(sc.recovery_residual(n)?);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-9 && within(t, 10.0),
        format!("11 maps, n <= 3, max residual {worst:.3e}, {t:.2?}"),
    )
}

fn markov() -> Result<Outcome> {
    let chain = markov_scenario(&[vec![0.5, 0.5], vec![0.3, 0.7]], 3, DEFAULT_BUDGET)?;
    let moments = chain.moment_residual(200, 108)?;
    let mut shift = 0.0_f64;
    for a in 0..=3 {
        for t in 0..=(3 - a) {
            shift = shift.max(chain.shift_residual(a, t, 10, 109 + (4 * a + t) as u64)?);
        }
    }
    outcome(
        moments <= 1e-9 && shift <= 1e-10,
        format!("moments {moments:.3e}, shift {shift:.3e}"),
    )
}

fn white_noise() -> Result<Outcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, base, seed) in [
        ("M2", MatrixStarAlgebra::full(2), 110),
        ("scalar", MatrixStarAlgebra::scalars(), 111),
    ] {
        let sc = white_noise_scenario(&base, 2, 3, DEFAULT_BUDGET)?;
        let mut rng = random::seeded(seed);
        let inv = invariance_residual(&sc.system, 10, &mut rng)?;
        let rep = white_noise_increment_check(&sc.system, (1, 2, 3), 100, 6, seed + 10, 1e-9)?;
        passed &= inv <= 1e-9 && rep.mode == IncrementMode::WhiteNoise && rep.max_residual <= 1e-9;
        parts.push(format!(
            "{name}: invariance {inv:.3e}, 100 words {:.3e} ({})",
            rep.max_residual,
            rep.mode.as_str()
        ));
    }
    let t = start.elapsed();
    outcome(passed && within(t, 20.0), format!("{}, {t:.2?}", parts.join("; ")))
}

fn trivial() -> Result<Outcome> {
    let mut exact = true;
    for b in [MatrixStarAlgebra::full(2), MatrixStarAlgebra::diagonal(3), MatrixStarAlgebra::scalars()] {
        let id = PositiveMap::identity(b.clone(), MapKind::CpMap)?;
        let sc = dilate_discrete(&id, 3, DEFAULT_BUDGET)?;
        for n in 0..=3 {
            let e = sc.system.power(n)?;
            let unit: &CMat = b.unit();
            exact &= e.gens() == 1 && e.gram() == unit;
        }
    }
    outcome(exact, "E_n has one generator with Gram equal to the unit, n <= 3".into())
}

fn determinism() -> Result<Outcome> {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_ncprob"))
            .args(["verify", "all", "--seed", "7"])
            .env_remove("NCPROB_SEED")
            .output()
            .expect("ncprob runs")
    };
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    outcome(
        same && a.status.success() && b.status.success(),
        format!(
            "{} bytes, identical: {same}, exit codes {:?}/{:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Outcome>); 11] = [
        ("scalar monotone moments", scalar_monotone),
        ("non-symmetry witness", witness),
        ("conditional tensor coins game", coins),
        ("conditional monotone over diagonals", conditional_monotone),
        ("GNS reproduces the map", gns),
        ("tensor over B is associative", associativity),
        ("dilation recovers T^n", recovery),
        ("Markov chain cross-check", markov),
        ("white-noise increments", white_noise),
        ("identity map gives the trivial system", trivial),
        ("verify all is deterministic", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (passed, summary) = match check() {
            Ok(o) => (o.passed, o.summary),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!("{} {:>2} {name}: {summary}", if passed { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
