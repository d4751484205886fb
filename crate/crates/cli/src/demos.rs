//! Named examples for `demo`.

use ncprob_core::dilation::{markov_scenario, white_noise_scenario, TimedFunction};
use ncprob_core::independence::{monotone_realize, nivelation_residual, AlternatingWord, CoinsGame, Leg, QuantumProbabilitySpace};
use ncprob_core::linalg::{self, diag_real, frob, CMat};
use ncprob_core::{random, MatrixStarAlgebra, PositiveMap, Result};

use crate::report::{Cell, Report, Table};
use crate::suites::{coins_oracle, increments, recovery};
use crate::{Ctx, DemoName, RunConfig};

pub fn demo(name: DemoName, cfg: &RunConfig) -> Result<Report> {
    let mut ctx = Ctx::new("demo", name.name(), cfg);
    match name {
        DemoName::TwoTime => two_time(&mut ctx)?,
        DemoName::Coins => coins(&mut ctx)?,
        DemoName::Markov => markov(&mut ctx)?,
        DemoName::WhiteNoise => white_noise(&mut ctx)?,
    }
    Ok(ctx.report)
}

const OUTCOMES: [&str; 2] = ["1{0}", "1{1}"];

fn indicator(i: usize) -> CMat {
    linalg::matrix_unit(2, i, i)
}

fn column(v: &[f64]) -> Cell {
    Cell::Matrix(CMat::from_fn(v.len(), 1, |i, _| linalg::cr(v[i])))
}

/// Two measurements on a two-level system, the first one non-unital.
fn two_time(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "two-time";
    let d = MatrixStarAlgebra::diagonal(2);
    let s1 = QuantumProbabilitySpace::new(PositiveMap::state_from_density(d.clone(), &diag_real(&[0.6, 0.4]))?)?;
    let s2 = QuantumProbabilitySpace::new(PositiveMap::state_from_density(d, &diag_real(&[0.7, 0.3]))?)?;
    let (phi1, phi2) = (s1.functional(), s2.functional());
    let real = monotone_realize(&s1, &s2)?;
    ctx.note("X1 is embedded as f ⊗ P with P the vacuum projection of the second factor");

    let mut niv = Table::new("nivelation", &["f'", "g", "f", "phi2(g)", "residual"]);
    let mut worst = 0.0_f64;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                let r = nivelation_residual(&real, phi2, &indicator(a), &indicator(b), &indicator(c))?;
                worst = worst.max(r);
                niv.push(vec![
                    Cell::Text(OUTCOMES[a].into()),
                    Cell::Text(OUTCOMES[b].into()),
                    Cell::Text(OUTCOMES[c].into()),
                    Cell::Num(phi2.value(&indicator(b))?.re),
                    Cell::Num(r),
                ]);
            }
        }
    }
    ctx.check(S, "f'(X1) g(X2) f(X1) = (f'f)(X1) phi2(g)", worst, None);
    ctx.report.tables.push(niv);

    let mut ordered = Table::new("ordered", &["f", "g", "<f(X1) g(X2)>", "phi1(f) phi2(g)", "residual"]);
    let mut reversed = Table::new("reversed", &["g", "f", "g'", "<g(X2) f(X1) g'(X2)>", "phi2(g g') phi1(f)", "gap"]);
    let (mut worst_ordered, mut widest_gap) = (0.0_f64, 0.0_f64);
    for a in 0..2 {
        for b in 0..2 {
            let (f, g) = (indicator(a), indicator(b));
            let w = AlternatingWord::new().with(Leg::One, f.clone()).with(Leg::Two, g.clone());
            let v = real.evaluate(&w)?[(0, 0)].re;
            let formula = (phi1.value(&f)? * phi2.value(&g)?).re;
            worst_ordered = worst_ordered.max((v - formula).abs());
            ordered.push(vec![
                Cell::Text(OUTCOMES[a].into()),
                Cell::Text(OUTCOMES[b].into()),
                Cell::Num(v),
                Cell::Num(formula),
                Cell::Num((v - formula).abs()),
            ]);
            for c in 0..2 {
                let g2 = indicator(c);
                let w = AlternatingWord::new()
                    .with(Leg::Two, g.clone())
                    .with(Leg::One, f.clone())
                    .with(Leg::Two, g2.clone());
                let v = real.evaluate(&w)?[(0, 0)].re;
                let naive = (phi2.value(&(&g * &g2))? * phi1.value(&f)?).re;
                widest_gap = widest_gap.max((v - naive).abs());
                reversed.push(vec![
                    Cell::Text(OUTCOMES[b].into()),
                    Cell::Text(OUTCOMES[a].into()),
                    Cell::Text(OUTCOMES[c].into()),
                    Cell::Num(v),
                    Cell::Num(naive),
                    Cell::Num((v - naive).abs()),
                ]);
            }
        }
    }
    ctx.check(S, "ordered word factorizes", worst_ordered, None);
    ctx.check_above(S, "reversed word does not factorize", widest_gap, 1e-3);
    ctx.report.tables.push(ordered);
    ctx.report.tables.push(reversed);
    Ok(())
}

fn coins(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "coins";
    let game = CoinsGame {
        bias1: ctx.cfg.bias1,
        bias2: ctx.cfg.bias2,
    };
    let prod = game.realize()?;
    ctx.note(format!(
        "Y is a fair coin; P(X1 = head | Y = head) = {}, P(X2 = head | Y = head) = {}",
        game.bias1, game.bias2
    ));
    let mut table = Table::new(
        "coins",
        &["f", "g", "Phi Y=head", "Phi Y=tail", "E[f|Y]E[g|Y] Y=head", "E[f|Y]E[g|Y] Y=tail", "enumeration Y=head", "enumeration Y=tail", "residual"],
    );
    let names = ["0", "1{head}", "1{tail}", "1"];
    let mut worst = 0.0_f64;
    for (i, f) in CoinsGame::indicators().into_iter().enumerate() {
        for (j, g) in CoinsGame::indicators().into_iter().enumerate() {
            let (fx, gx) = (CoinsGame::of_x(f), CoinsGame::of_x(g));
            let phi = prod.expectation_of(&fx, &gx)?;
            let fact = prod.factorized(&fx, &gx)?;
            let oracle = coins_oracle(&game, f, g);
            let r = frob(&(&phi - &fact)).max(frob(&(&phi - &oracle)));
            worst = worst.max(r);
            // Y = head and Y = tail sit at diagonal positions 0 and 2.
            table.push(vec![
                Cell::Text(names[i].into()),
                Cell::Text(names[j].into()),
                Cell::Num(phi[(0, 0)].re),
                Cell::Num(phi[(2, 2)].re),
                Cell::Num(fact[(0, 0)].re),
                Cell::Num(fact[(2, 2)].re),
                Cell::Num(oracle[(0, 0)].re),
                Cell::Num(oracle[(2, 2)].re),
                Cell::Num(r),
            ]);
        }
    }
    ctx.check(S, "Phi(f(X1) g(X2)) = E[f|Y] E[g|Y]", worst, Some("16 pairs".into()));
    ctx.report.tables.push(table);
    Ok(())
}

fn markov(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "markov";
    let p = vec![vec![0.9, 0.1], vec![0.4, 0.6]];
    let chain = markov_scenario(&p, ctx.cfg.horizon, ctx.cfg.budget)?;
    ctx.note("transition matrix [[0.9, 0.1], [0.4, 0.6]]");
    let mut table = Table::new("recovery", &["n", "f", "P^n f", "<xi_n, f xi_n>", "residual"]);
    let mut worst = 0.0_f64;
    for n in 0..=chain.horizon() {
        for (j, name) in OUTCOMES.iter().enumerate() {
            let mut values = vec![0.0; 2];
            values[j] = 1.0;
            let factor = [TimedFunction { time: n, values }];
            let paths = chain.path_expectation(&factor)?;
            let module = chain.module_expectation(&factor)?;
            let r = paths.iter().zip(&module).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(r);
            table.push(vec![
                Cell::Int(n as i64),
                Cell::Text((*name).into()),
                column(&paths),
                column(&module),
                Cell::Num(r),
            ]);
        }
    }
    ctx.check(S, "P^n f = <xi_n, f xi_n>", worst, None);
    ctx.report.tables.push(table);
    recovery(ctx, S, "chain", &chain.scenario)?;
    let r = chain.moment_residual(ctx.cfg.trials.min(100), ctx.seed(5))?;
    ctx.check(S, "chain/path moments = module moments", r, None);
    if chain.horizon() >= 2 {
        increments(ctx, S, "chain", &chain.scenario, ctx.seed(6))?;
    } else {
        ctx.note("horizon below 2, increment check skipped");
    }
    for w in &chain.warnings {
        ctx.note(w.clone());
    }
    Ok(())
}

fn white_noise(ctx: &mut Ctx) -> Result<()> {
    const S: &str = "white-noise";
    let sc = white_noise_scenario(&MatrixStarAlgebra::full(2), 2, ctx.cfg.horizon, ctx.cfg.budget)?;
    let mut dims = Table::new("fibers", &["n", "generators", "complex dimension"]);
    for (n, d) in sc.system.scalar_dims().iter().enumerate() {
        dims.push(vec![
            Cell::Int(n as i64),
            Cell::Int(sc.system.power(n)?.gens() as i64),
            Cell::Int(*d as i64),
        ]);
    }
    ctx.report.tables.push(dims);
    let mut rng = random::seeded(ctx.seed(7));
    let inv = ncprob_core::dilation::invariance_residual(&sc.system, 5, &mut rng)?;
    ctx.check(S, "M2/invariance of the unit-vector functional", inv, None);
    recovery(ctx, S, "M2", &sc)?;
    if sc.system.horizon() >= 2 {
        increments(ctx, S, "M2", &sc, ctx.seed(8))?;
    } else {
        ctx.note("horizon below 2, increment check skipped");
    }
    Ok(())
}
