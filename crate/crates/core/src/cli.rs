//! `perfect-sim` command line.
//!
//! Every sampler subcommand writes one record per sample, in sample order,
//! as JSONL (default) or CSV with a header row. Sample `j` draws from
//! `RandomStream::derived(seed, j)`, so output does not depend on how
//! samples are spread over threads.
//!
//! Exit codes: 0 success, 1 runtime error (including a failed check in
//! `verify`), 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ar::{ar_sample, die_five_record, FiniteMeasure};
use crate::cftp::{
    cftp_doubling, cftp_single, ExhaustiveDetector, Graph, IsingModel, MonotoneDetector,
    ReflectingWalk, ResetWalk,
};
use crate::engine::{RunLimits, SampleRecord, DEFAULT_MAX_DOUBLINGS};
use crate::error::SimError;
use crate::factory::{exp_factory, linear_factory, von_neumann};
use crate::randomness::{CoinSource, RandomStream};
use crate::verify::suites::{run_suite, Suite};

pub const DEFAULT_VERIFY_SEED: u64 = 20_161_016;

/// Samples generated in parallel before being written out.
const CHUNK: u64 = 4096;

#[derive(Debug, Parser)]
#[command(
    name = "perfect-sim",
    version,
    about = "Perfect simulation samplers and their verification suite"
)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Acceptance/rejection samplers.
    #[command(subcommand)]
    Ar(ArCommand),
    /// Coupling from the past.
    #[command(subcommand)]
    Cftp(CftpCommand),
    /// Bernoulli factories driven by a simulated coin.
    #[command(subcommand)]
    Factory(FactoryCommand),
    /// Run verification checks and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum ArCommand {
    /// Five-sided die from a six-sided die.
    Die(OutputArgs),
    /// A finite table conditioned on an acceptance set.
    Custom {
        /// Two-column CSV: value,probability.
        #[arg(long)]
        table: PathBuf,
        /// Comma-separated values to accept.
        #[arg(long, value_delimiter = ',', required = true)]
        accept_set: Vec<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Subcommand)]
pub enum CftpCommand {
    /// Ferromagnetic Ising grid via monotone doubling CFTP.
    Ising {
        #[arg(long, value_parser = positive_usize)]
        width: usize,
        #[arg(long, value_parser = positive_usize)]
        height: usize,
        #[arg(long, value_parser = nonnegative_f64)]
        beta: f64,
        /// Initial number of steps (default: number of sites).
        #[arg(long, value_parser = positive_u64)]
        t0: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Three-state toy chains.
    Toy {
        #[arg(long, value_enum)]
        chain: ToyChain,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ToyChain {
    /// Single-step CFTP on the reset walk.
    ResetWalk,
    /// Doubling CFTP (t0 = 2) on the reflecting walk.
    Reflecting,
}

#[derive(Debug, Subcommand)]
pub enum FactoryCommand {
    /// Fair coin from a p-coin.
    VonNeumann {
        #[arg(long, value_parser = probability)]
        p: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// exp(-C p) coin.
    Exp {
        #[arg(long, value_parser = positive_f64)]
        c: f64,
        #[arg(long, value_parser = probability)]
        p: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// C p coin, valid while C p <= 1 - eps.
    Linear {
        #[arg(long, value_parser = linear_c)]
        c: f64,
        #[arg(long, value_parser = open_unit)]
        eps: f64,
        #[arg(long, value_parser = probability)]
        p: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_parser = positive_u64)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    pub suite: Suite,
    #[arg(long, default_value_t = DEFAULT_VERIFY_SEED)]
    pub seed: u64,
    /// Report path (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
        .map_err(|_| "expected one of all, ar, cftp, factory, bounds".to_string())
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err("p must lie in [0, 1]".into())
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn nonnegative_f64(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err("must be nonnegative".into())
    }
}

fn linear_c(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 1.0 {
        Ok(x)
    } else {
        Err("C must exceed 1".into())
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x = parse_f64(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn positive_u64(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(x) => Ok(x),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    positive_u64(s).map(|x| x as usize)
}

/// Parse and validate an argument vector (including the program name).
pub fn parse_args<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    RunConfig::try_parse_from(args)
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0} check(s) failed")]
    ChecksFailed(usize),
}

#[derive(Serialize)]
struct ValueRow<V> {
    value: V,
    depth: u64,
    draws: u64,
}

impl<V> From<SampleRecord<V>> for ValueRow<V> {
    fn from(r: SampleRecord<V>) -> Self {
        Self {
            value: r.value,
            depth: r.depth,
            draws: r.randomness_units,
        }
    }
}

#[derive(Serialize)]
struct BitRow {
    bit: u8,
    flips: u64,
    depth: u64,
}

impl From<SampleRecord<bool>> for BitRow {
    fn from(r: SampleRecord<bool>) -> Self {
        Self {
            bit: r.value as u8,
            flips: r.flips,
            depth: r.depth,
        }
    }
}

enum Sink<W: Write> {
    Jsonl(W),
    Csv(Box<csv::Writer<W>>),
}

impl<W: Write> Sink<W> {
    fn new(w: W, format: Format) -> Self {
        match format {
            Format::Jsonl => Sink::Jsonl(w),
            Format::Csv => Sink::Csv(Box::new(csv::Writer::from_writer(w))),
        }
    }

    fn write<R: Serialize>(&mut self, row: &R) -> Result<(), CliError> {
        match self {
            Sink::Jsonl(w) => {
                serde_json::to_writer(&mut *w, row)?;
                w.write_all(b"\n")?;
            }
            Sink::Csv(w) => w.serialize(row)?,
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        match self {
            Sink::Jsonl(mut w) => w.flush()?,
            Sink::Csv(mut w) => w.flush()?,
        }
        Ok(())
    }
}

fn open_out<'a>(
    path: &Option<PathBuf>,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

/// Generate `output.samples` rows in parallel chunks and write them in
/// sample order. Stops at the first failing sample.
fn emit<R, F>(output: &OutputArgs, stdout: &mut dyn Write, generate: F) -> Result<(), CliError>
where
    R: Serialize + Send,
    F: Fn(u64) -> Result<R, SimError> + Sync + Send,
{
    let mut sink = Sink::new(open_out(&output.out, stdout)?, output.format);
    let mut start = 0;
    while start < output.samples {
        let end = (start + CHUNK).min(output.samples);
        let rows: Vec<Result<R, SimError>> = (start..end).into_par_iter().map(&generate).collect();
        for row in rows {
            sink.write(&row?)?;
        }
        start = end;
    }
    sink.finish()
}

fn stream(seed: u64, i: u64) -> RandomStream {
    RandomStream::derived(seed, i)
}

fn coin(p: f64, seed: u64, i: u64) -> Result<CoinSource, SimError> {
    CoinSource::new(p, RandomStream::derived_for_coin(seed, i))
}

fn dispatch(
    config: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let limits = RunLimits::default();
    match &config.command {
        Command::Ar(ArCommand::Die(o)) => emit(o, stdout, |i| {
            die_five_record(&mut stream(o.seed, i)).map(ValueRow::from)
        }),
        Command::Ar(ArCommand::Custom {
            table,
            accept_set,
            output: o,
        }) => {
            let measure = FiniteMeasure::from_csv(File::open(table)?)?;
            // Validate the acceptance set once before sampling.
            measure.conditioned_on(accept_set)?;
            emit(o, stdout, |i| {
                let mut kernel = measure.conditioned_on(accept_set)?;
                let r = ar_sample(&mut kernel, &mut stream(o.seed, i), limits)?;
                Ok(ValueRow::from(r.map(|k| measure.labels()[k].clone())))
            })
        }
        Command::Cftp(CftpCommand::Ising {
            width,
            height,
            beta,
            t0,
            output: o,
        }) => {
            let model = IsingModel::new(Graph::grid(*width, *height), *beta)?;
            let detector = MonotoneDetector::for_update(&model);
            let t0 = t0.unwrap_or((width * height) as u64);
            emit(o, stdout, |i| {
                let r = cftp_doubling(
                    &model,
                    &detector,
                    t0,
                    &mut stream(o.seed, i),
                    DEFAULT_MAX_DOUBLINGS,
                )?;
                Ok(ValueRow::from(r.map(|s| s.to_string())))
            })
        }
        Command::Cftp(CftpCommand::Toy { chain, output: o }) => match chain {
            ToyChain::ResetWalk => emit(o, stdout, |i| {
                cftp_single(
                    &ResetWalk,
                    &ExhaustiveDetector,
                    &mut stream(o.seed, i),
                    limits,
                )
                .map(ValueRow::from)
            }),
            ToyChain::Reflecting => emit(o, stdout, |i| {
                cftp_doubling(
                    &ReflectingWalk,
                    &ExhaustiveDetector,
                    2,
                    &mut stream(o.seed, i),
                    DEFAULT_MAX_DOUBLINGS,
                )
                .map(ValueRow::from)
            }),
        },
        Command::Factory(FactoryCommand::VonNeumann { p, output: o }) => emit(o, stdout, |i| {
            von_neumann(coin(*p, o.seed, i)?, &mut stream(o.seed, i), limits).map(BitRow::from)
        }),
        Command::Factory(FactoryCommand::Exp { c, p, output: o }) => emit(o, stdout, |i| {
            exp_factory(coin(*p, o.seed, i)?, *c, &mut stream(o.seed, i), limits).map(BitRow::from)
        }),
        Command::Factory(FactoryCommand::Linear {
            c,
            eps,
            p,
            output: o,
        }) => emit(o, stdout, |i| {
            linear_factory(
                coin(*p, o.seed, i)?,
                *c,
                *eps,
                &mut stream(o.seed, i),
                limits,
            )
            .map(BitRow::from)
        }),
        Command::Verify(v) => {
            let report = run_suite(v.suite, v.seed)?;
            for check in &report.checks {
                writeln!(stderr, "{check}")?;
            }
            let mut out = open_out(&v.out, stdout)?;
            serde_json::to_writer_pretty(&mut out, &report)?;
            writeln!(out)?;
            out.flush()?;
            let failed = report.failures().count();
            if failed > 0 {
                return Err(CliError::ChecksFailed(failed));
            }
            Ok(())
        }
    }
}

/// Run a parsed command. Returns the process exit code.
pub fn execute(config: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match dispatch(config, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(line: &str) -> Result<RunConfig, clap::Error> {
        parse_args(std::iter::once("perfect-sim").chain(line.split_whitespace()))
    }

    fn run_line(line: &str) -> (i32, String, String) {
        let cfg = parse(line).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = execute(&cfg, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn valid_configs() {
        let cfg = parse("factory linear --c 2 --eps 0.2 --p 0.4 --samples 100 --seed 7").unwrap();
        match cfg.command {
            Command::Factory(FactoryCommand::Linear { c, eps, p, output }) => {
                assert_eq!(
                    (c, eps, p, output.samples, output.seed),
                    (2.0, 0.2, 0.4, 100, 7)
                );
                assert_eq!(output.format, Format::Jsonl);
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("cftp ising --width 3 --height 3 --beta 0.4 --samples 10 --seed 1").is_ok());
        assert!(parse("cftp toy --chain reset-walk --samples 10 --seed 1").is_ok());
        assert!(parse("ar custom --table t.csv --accept-set a,b --samples 3 --seed 1").is_ok());
        assert!(parse("verify --suite bounds").is_ok());
    }

    #[test]
    fn usage_errors_name_the_flag() {
        let e =
            parse("factory linear --c 0.5 --eps 0.2 --p 0.4 --samples 100 --seed 7").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--c"), "{e}");
        assert!(e.to_string().contains("C must exceed 1"));

        for bad in [
            "factory linear --c 2 --eps 1 --p 0.4 --samples 1 --seed 1",
            "factory exp --c 0 --p 0.4 --samples 1 --seed 1",
            "factory von-neumann --p 1.5 --samples 1 --seed 1",
            "ar die --samples 0 --seed 1",
            "ar die --samples 5 --seed -1",
            "cftp ising --width 0 --height 3 --beta 0.4 --samples 1 --seed 1",
            "cftp ising --width 3 --height 3 --beta -0.4 --samples 1 --seed 1",
            "cftp toy --chain other --samples 1 --seed 1",
            "verify --suite everything",
        ] {
            assert_eq!(parse(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn die_writes_n_records() {
        let (code, out, _) = run_line("ar die --samples 10 --seed 42");
        assert_eq!(code, 0);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines.len(), 10);
        for l in lines {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            assert!((1..=5).contains(&v["value"].as_u64().unwrap()));
            assert_eq!(
                v["draws"].as_u64().unwrap(),
                v["depth"].as_u64().unwrap() + 1
            );
        }
    }

    #[test]
    fn degenerate_coin_fails_with_exit_one() {
        let (code, _, err) = run_line("factory von-neumann --p 1 --samples 3 --seed 1");
        assert_eq!(code, 1);
        assert!(err.contains("max depth"), "{err}");
    }

    #[test]
    fn csv_has_header() {
        let (code, out, _) =
            run_line("factory exp --c 1 --p 0.5 --samples 4 --seed 3 --format csv");
        assert_eq!(code, 0);
        let mut lines = out.lines();
        assert_eq!(lines.next(), Some("bit,flips,depth"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn output_is_independent_of_chunking() {
        // More samples than one chunk: the first rows must match a short run.
        let (_, long, _) = run_line("cftp toy --chain reflecting --samples 5000 --seed 9");
        let (_, short, _) = run_line("cftp toy --chain reflecting --samples 10 --seed 9");
        assert!(long.starts_with(&short));
        assert_eq!(long.lines().count(), 5000);
    }
}
