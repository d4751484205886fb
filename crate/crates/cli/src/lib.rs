//! `ncprob`: verification suites, demos and moment tables for the
//! `ncprob-core` library.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncprob_core::Error;
use serde::Serialize;

pub mod demos;
pub mod report;
pub mod scenario;
pub mod suites;

use report::{Check, Relation, Report};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ncprob", version, about = "Operator-valued independence and product-system dilations, checked numerically")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a property suite and report every residual.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Check a scenario file instead of the built-in cases.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build a named example and print its tables.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Moment table of a words file under an independence scenario.
    Moments {
        scenario: PathBuf,
        words: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Algebra,
    Module,
    Monotone,
    ConditionalMonotone,
    ConditionalTensor,
    Dilation,
    WhiteNoise,
    Markov,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Algebra,
        Suite::Module,
        Suite::Monotone,
        Suite::ConditionalMonotone,
        Suite::ConditionalTensor,
        Suite::Dilation,
        Suite::WhiteNoise,
        Suite::Markov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Module => "module",
            Suite::Monotone => "monotone",
            Suite::ConditionalMonotone => "conditional-monotone",
            Suite::ConditionalTensor => "conditional-tensor",
            Suite::Dilation => "dilation",
            Suite::WhiteNoise => "white-noise",
            Suite::Markov => "markov",
            Suite::All => "all",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    TwoTime,
    Coins,
    Markov,
    WhiteNoise,
}

impl DemoName {
    pub fn name(self) -> &'static str {
        match self {
            DemoName::TwoTime => "two-time",
            DemoName::Coins => "coins",
            DemoName::Markov => "markov",
            DemoName::WhiteNoise => "white-noise",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

fn positive_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err("must be a positive finite number".into())
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Absolute tolerance on Frobenius residuals.
    #[arg(long, default_value_t = 1e-9, value_parser = positive_real)]
    pub tolerance: f64,
    /// Seed for every sampled quantity.
    #[arg(long, env = "NCPROB_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_word_length: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: u64,
    /// Largest allowed complex dimension of a tensor power.
    #[arg(long, default_value_t = 4096, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to json for verify and moments, text for demo.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Coins demo: `P(X1 = head | Y = head)`.
    #[arg(long, default_value_t = 0.7, value_parser = probability)]
    pub bias1: f64,
    /// Coins demo: `P(X2 = head | Y = head)`.
    #[arg(long, default_value_t = 0.3, value_parser = probability)]
    pub bias2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub tolerance: f64,
    pub seed: u64,
    pub max_word_length: usize,
    pub trials: usize,
    pub horizon: usize,
    pub budget: usize,
    pub output_format: Format,
    pub bias1: f64,
    pub bias2: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            seed: 42,
            max_word_length: 6,
            trials: 200,
            horizon: 3,
            budget: ncprob_core::dilation::DEFAULT_BUDGET,
            output_format: Format::Json,
            bias1: 0.7,
            bias2: 0.3,
        }
    }
}

impl CommonArgs {
    fn config(&self, default_format: Format) -> RunConfig {
        RunConfig {
            tolerance: self.tolerance,
            seed: self.seed,
            max_word_length: self.max_word_length as usize,
            trials: self.trials as usize,
            horizon: self.horizon as usize,
            budget: self.budget as usize,
            output_format: self.format.unwrap_or(default_format),
            bias1: self.bias1,
            bias2: self.bias2,
        }
    }
}

/// Collects checks for one report.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub report: Report,
}

impl<'a> Ctx<'a> {
    pub fn new(command: &str, target: &str, cfg: &'a RunConfig) -> Self {
        Self {
            cfg,
            report: Report::new(command, target, cfg),
        }
    }

    /// `value ≤ tolerance`.
    pub fn check(&mut self, suite: &str, name: impl Into<String>, value: f64, detail: Option<String>) {
        let bound = self.cfg.tolerance;
        self.push(suite, name, value, bound, Relation::AtMost, detail);
    }

    pub fn check_above(&mut self, suite: &str, name: impl Into<String>, value: f64, bound: f64) {
        self.push(suite, name, value, bound, Relation::Above, None);
    }

    /// A yes/no property, recorded as `0` (holds) or `1`.
    pub fn flag(&mut self, suite: &str, name: impl Into<String>, holds: bool, detail: Option<String>) {
        self.push(suite, name, if holds { 0.0 } else { 1.0 }, 0.0, Relation::AtMost, detail);
    }

    fn push(&mut self, suite: &str, name: impl Into<String>, value: f64, bound: f64, relation: Relation, detail: Option<String>) {
        self.report.checks.push(Check {
            suite: suite.into(),
            name: name.into(),
            value: if value.is_nan() { f64::INFINITY } else { value },
            bound,
            relation,
            detail,
        });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.report.notes.push(note.into());
    }

    /// Seed for a named sub-stream.
    pub fn seed(&self, offset: u64) -> u64 {
        self.cfg.seed.wrapping_mul(1_000_003).wrapping_add(offset)
    }
}

/// Errors from bad input or configuration exit with 2, everything else
/// with 1.
fn error_code(e: &Error) -> i32 {
    match e {
        Error::Schema { .. } | Error::InvalidArgument(_) | Error::HorizonExceeded { .. } | Error::BudgetExceeded { .. } => {
            EXIT_USAGE
        }
        _ => EXIT_FAIL,
    }
}

fn emit(report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let bytes = match report.config.output_format {
        Format::Json => report.render_json(),
        Format::Csv => report.render_csv(),
        Format::Text => report.render_text(),
    };
    match out {
        Some(path) => fs::write(path, bytes),
        None => std::io::stdout().write_all(&bytes),
    }
}

/// Parse arguments, run, print, and return the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let (result, out) = match &cli.command {
        Command::Verify { suite, scenario, common } => {
            let cfg = common.config(Format::Json);
            let r = match scenario {
                Some(path) => scenario::verify_file(*suite, path, &cfg),
                None => suites::verify(*suite, &cfg),
            };
            (r, common.out.clone())
        }
        Command::Demo { name, common } => {
            let cfg = common.config(Format::Text);
            (demos::demo(*name, &cfg), common.out.clone())
        }
        Command::Moments { scenario, words, common } => {
            let cfg = common.config(Format::Json);
            (scenario::moments(scenario, words, &cfg), common.out.clone())
        }
    };
    match result {
        Ok(report) => {
            if let Err(e) = emit(&report, out.as_deref()) {
                eprintln!("error: cannot write report: {e}");
                return EXIT_USAGE;
            }
            if report.passed() {
                EXIT_PASS
            } else {
                for c in report.failures() {
                    eprintln!("{}", c.describe());
                }
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}
