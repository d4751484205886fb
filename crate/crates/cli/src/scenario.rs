//! Scenario files: `verify --scenario` and `moments`.

use std::fs;
use std::path::Path;

use ncprob_core::dilation::{dilate_discrete, markov_scenario, white_noise_scenario, DilationScenario, MarkovScenario};
use ncprob_core::independence::{
    conditional_monotone_moment_formula, conditional_monotone_realize, conditional_tensor_realize,
    monotone_moment_formula, monotone_realize, tensor_moment_formula, tensor_realize, AlternatingWord,
    JointRealization, Leg, QuantumProbabilitySpace, WordSampler, scalar_oracle,
};
use ncprob_core::io::{decode_scenario, decode_words, Construction, DilationCheck, DilationSource, DilationSpec,
    IndependenceScenario, Pointer, Scenario};
use ncprob_core::linalg::{frob, CMat};
use ncprob_core::{random, Error, MatrixStarAlgebra, Result};
use serde_json::Value;

use crate::report::{Cell, Report, Table};
use crate::suites::{self, legs};
use crate::{Ctx, RunConfig, Suite};

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Schema { pointer, message } => Error::Schema {
            pointer,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        pointer: "/".into(),
        message: format!("{}: invalid JSON: {e}", path.display()),
    })
}

/// Realized and predicted value of a word.
type Evaluate<'a> = Box<dyn Fn(&AlternatingWord) -> Result<(CMat, CMat)> + 'a>;

struct Realized {
    realization: JointRealization,
    evaluate: Evaluate<'static>,
    algebras: [MatrixStarAlgebra; 2],
}

fn spaces(scn: &IndependenceScenario) -> Result<(QuantumProbabilitySpace, QuantumProbabilitySpace)> {
    let at = Pointer::root().key("spaces");
    Ok((
        at.index(0).wrap(QuantumProbabilitySpace::new(scn.spaces[0].clone()))?,
        at.index(1).wrap(QuantumProbabilitySpace::new(scn.spaces[1].clone()))?,
    ))
}

fn realize(scn: &IndependenceScenario) -> Result<Realized> {
    let at = Pointer::root().key("spaces");
    let [phi1, phi2] = scn.spaces.clone();
    let algebras = [phi1.domain().clone(), phi2.domain().clone()];
    match scn.construction {
        Construction::Tensor | Construction::Monotone => {
            let (s1, s2) = spaces(scn)?;
            let monotone = scn.construction == Construction::Monotone;
            let realization = at.wrap(if monotone {
                monotone_realize(&s1, &s2)
            } else {
                tensor_realize(&s1, &s2)
            })?;
            let formula = if monotone {
                monotone_moment_formula
            } else {
                tensor_moment_formula
            };
            let real = realization.clone();
            Ok(Realized {
                realization,
                evaluate: Box::new(move |w| Ok((real.evaluate(w)?, scalar_oracle(formula, &phi1, &phi2)(w)?))),
                algebras,
            })
        }
        Construction::ConditionalMonotone => {
            let realization = at.wrap(conditional_monotone_realize(&phi1, &phi2))?;
            let real = realization.clone();
            Ok(Realized {
                realization,
                evaluate: Box::new(move |w| {
                    Ok((real.evaluate(w)?, conditional_monotone_moment_formula(w, &phi1, &phi2)?))
                }),
                algebras,
            })
        }
        Construction::ConditionalTensor => {
            let prod = at.wrap(conditional_tensor_realize(&phi1, &phi2))?;
            let realization = prod.realization.clone();
            let unit1 = phi1.domain().unit().clone();
            let unit2 = phi2.domain().unit().clone();
            Ok(Realized {
                realization,
                evaluate: Box::new(move |w| {
                    let f = w.leg_product(Leg::One, &unit1);
                    let g = w.leg_product(Leg::Two, &unit2);
                    Ok((prod.realization.evaluate(w)?, prod.factorized(&f, &g)?))
                }),
                algebras,
            })
        }
    }
}

/// Every letter must lie in the algebra of its leg.
fn check_letters(words: &[AlternatingWord], algebras: &[MatrixStarAlgebra; 2], at: &Pointer) -> Result<()> {
    for (i, w) in words.iter().enumerate() {
        for (j, l) in w.letters.iter().enumerate() {
            let alg = &algebras[l.leg.number() as usize - 1];
            let here = at.index(i).key("letters").index(j).key("element");
            if l.element.shape() != (alg.ambient_dim(), alg.ambient_dim()) {
                return Err(here.error(format!(
                    "element is {}x{}, leg {} acts on {}x{} matrices",
                    l.element.nrows(),
                    l.element.ncols(),
                    l.leg.number(),
                    alg.ambient_dim(),
                    alg.ambient_dim()
                )));
            }
            let (_, r) = alg.project(&l.element)?;
            if r > 1e-9 * frob(&l.element).max(1.0) {
                return Err(here.error(format!(
                    "element is not in the algebra of leg {} (distance {r:.3e})",
                    l.leg.number()
                )));
            }
        }
    }
    Ok(())
}

fn moment_table(
    ctx: &mut Ctx,
    label: &str,
    words: &[AlternatingWord],
    eval: &Evaluate<'_>,
) -> Result<Table> {
    let mut table = Table::new("moments", &["index", "legs", "realization", "formula", "residual"]);
    let mut worst = 0.0_f64;
    let mut failing = Vec::new();
    for (i, w) in words.iter().enumerate() {
        let (real, formula) = eval(w)?;
        let r = frob(&(&real - &formula));
        let r = if r.is_nan() { f64::INFINITY } else { r };
        if r > ctx.cfg.tolerance {
            failing.push(format!("#{i} legs {}", legs(w)));
        }
        worst = worst.max(r);
        table.push(vec![
            Cell::Int(i as i64),
            Cell::Text(legs(w)),
            Cell::Matrix(real),
            Cell::Matrix(formula),
            Cell::Num(r),
        ]);
    }
    if !words.is_empty() {
        let detail = if failing.is_empty() {
            format!("{} words", words.len())
        } else {
            format!("{} of {} words fail: {}", failing.len(), words.len(), failing.join(", "))
        };
        ctx.check("moments", format!("{label}/formula = realization"), worst, Some(detail));
    }
    Ok(table)
}

pub fn moments(scenario_path: &Path, words_path: &Path, cfg: &RunConfig) -> Result<Report> {
    let scn = match decode_scenario(&read_json(scenario_path)?).map_err(|e| in_file(scenario_path, e))? {
        Scenario::Independence(s) => s,
        Scenario::Dilation(_) => {
            return Err(Error::InvalidArgument(
                "moments needs an independence scenario (with a \"construction\" field)".into(),
            ))
        }
    };
    let realized = realize(&scn).map_err(|e| in_file(scenario_path, e))?;
    let words = decode_words(&read_json(words_path)?, &Pointer::root()).map_err(|e| in_file(words_path, e))?;
    let at = match read_json(words_path)? {
        Value::Object(_) => Pointer::root().key("words"),
        _ => Pointer::root(),
    };
    check_letters(&words, &realized.algebras, &at).map_err(|e| in_file(words_path, e))?;
    let mut ctx = Ctx::new("moments", scn.construction.as_str(), cfg);
    let table = moment_table(&mut ctx, scn.construction.as_str(), &words, &realized.evaluate)?;
    ctx.report.tables.push(table);
    Ok(ctx.report)
}

pub fn verify_file(suite: Suite, path: &Path, cfg: &RunConfig) -> Result<Report> {
    let scn = decode_scenario(&read_json(path)?).map_err(|e| in_file(path, e))?;
    let target = format!("{} {}", suite.name(), path.display());
    let mut ctx = Ctx::new("verify", &target, cfg);
    match scn {
        Scenario::Independence(s) => verify_independence_file(&mut ctx, &s, path)?,
        Scenario::Dilation(spec) => verify_dilation_file(&mut ctx, &spec).map_err(|e| in_file(path, e))?,
    }
    Ok(ctx.report)
}

fn verify_independence_file(ctx: &mut Ctx, scn: &IndependenceScenario, path: &Path) -> Result<()> {
    let realized = realize(scn).map_err(|e| in_file(path, e))?;
    check_letters(&scn.words, &realized.algebras, &Pointer::root().key("words")).map_err(|e| in_file(path, e))?;
    let label = scn.construction.as_str();
    if scn.construction != Construction::ConditionalTensor {
        let rep = realized.realization.verify(ctx.cfg.tolerance);
        ctx.check(label, "realization", rep.worst_residual, rep.failures.first().map(|f| f.identity.clone()));
    }
    let mut words = scn.words.clone();
    if scn.sampler.is_some() || words.is_empty() {
        let spec = scn.sampler.unwrap_or(ncprob_core::io::SamplerSpec {
            max_word_length: None,
            trials: None,
        });
        let [a1, a2] = realized.algebras.clone();
        let sampler = WordSampler::new(a1, a2, spec.max_word_length.unwrap_or(ctx.cfg.max_word_length));
        let mut rng = random::seeded(ctx.seed(90));
        words.extend((0..spec.trials.unwrap_or(ctx.cfg.trials)).map(|_| sampler.sample(&mut rng)));
    }
    let table = moment_table(ctx, label, &words, &realized.evaluate)?;
    ctx.report.tables.push(table);
    Ok(())
}

enum Built {
    Plain(DilationScenario),
    Chain(MarkovScenario),
}

impl Built {
    fn scenario(&self) -> &DilationScenario {
        match self {
            Built::Plain(s) => s,
            Built::Chain(m) => &m.scenario,
        }
    }
}

fn build(spec: &DilationSpec, horizon: usize, budget: usize) -> Result<Built> {
    Ok(match &spec.source {
        DilationSource::CpMap(t) => Built::Plain(Pointer::root().key("cp_map").wrap(dilate_discrete(t, horizon, budget))?),
        DilationSource::Stochastic(p) => Built::Chain(
            markov_scenario(p, horizon, budget).map_err(|e| match e {
                Error::NotStochastic(m) => Pointer::root().key("stochastic").error(m),
                other => other,
            })?,
        ),
        DilationSource::WhiteNoise { base, rank } => Built::Plain(white_noise_scenario(base, *rank, horizon, budget)?),
    })
}

fn verify_dilation_file(ctx: &mut Ctx, spec: &DilationSpec) -> Result<()> {
    const S: &str = "dilation";
    let horizon = spec.horizon.unwrap_or(ctx.cfg.horizon);
    let built = build(spec, horizon, ctx.cfg.budget)?;
    let chain = matches!(built, Built::Chain(_));
    let checks: Vec<DilationCheck> = if spec.checks.is_empty() {
        DilationCheck::ALL
            .into_iter()
            .filter(|c| chain || !matches!(c, DilationCheck::Moments | DilationCheck::Shift))
            .filter(|c| horizon >= 2 || *c != DilationCheck::Increments)
            .collect()
    } else {
        spec.checks.clone()
    };
    let sc = built.scenario();
    let mut dims = Table::new("dimensions", &["n", "generators", "complex dimension"]);
    for (n, d) in sc.system.scalar_dims().iter().enumerate() {
        dims.push(vec![
            Cell::Int(n as i64),
            Cell::Int(sc.system.power(n)?.gens() as i64),
            Cell::Int(*d as i64),
        ]);
    }
    ctx.report.tables.push(dims);
    for check in checks {
        match check {
            DilationCheck::Recovery => suites::recovery(ctx, S, "scenario", sc)?,
            DilationCheck::Coherence => suites::coherence(ctx, S, "scenario", sc)?,
            DilationCheck::Endomorphisms => {
                let rep = sc.verify_endomorphisms(1, ctx.seed(91), ctx.cfg.tolerance)?;
                ctx.check(S, "scenario/theta", rep.worst_residual, rep.failures.first().map(|f| f.identity.clone()));
            }
            DilationCheck::Increments => {
                suites::increments(ctx, S, "scenario", sc, ctx.seed(92))?;
            }
            DilationCheck::Moments | DilationCheck::Shift => {
                let Built::Chain(m) = &built else {
                    return Err(Pointer::root().key("checks").error(format!(
                        "check \"{}\" needs a \"stochastic\" source",
                        check.as_str()
                    )));
                };
                if check == DilationCheck::Moments {
                    let r = m.moment_residual(ctx.cfg.trials.min(100), ctx.seed(93))?;
                    ctx.check(S, "scenario/path moments = module moments", r, None);
                } else {
                    let n = m.horizon();
                    let mut worst = 0.0_f64;
                    for a in 0..=n {
                        for t in 0..=(n - a) {
                            worst = worst.max(m.shift_residual(a, t, 3, ctx.seed(94))?);
                        }
                    }
                    ctx.check(S, "scenario/shift preserves inner products", worst, None);
                }
            }
        }
    }
    if let Built::Chain(m) = &built {
        for w in &m.warnings {
            ctx.note(w.clone());
        }
    }
    Ok(())
}
