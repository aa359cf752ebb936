//! Command-line front end. Every subcommand accepts a JSON config file whose keys
//! mirror its flags (snake_case); flags given on the command line take precedence.

mod commands;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;

#[derive(Parser, Debug)]
#[command(name = "sppkit", version, about = "Stochastic Pauli processes, temporal correlations and memory-aware QEC benchmarks")]
pub struct Cli {
    /// JSON config file with keys mirroring the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Twirl a dilation into its SPP and emit the MPS as JSON.
    Twirl(SourceArgs),
    /// Sample Pauli trajectories as CSV.
    Sample(SampleArgs),
    /// Transfer-operator spectral summary as JSON.
    Spectrum(SourceArgs),
    /// Stationary covariance C(τ) as CSV.
    Covariance(CovarianceArgs),
    /// Storm parameters solved over a correlation-length grid, with analytic and empirical diagnostics.
    StormSweep(StormSweepArgs),
    /// PCA bath density statistics over a θ grid.
    QcaSweep(QcaSweepArgs),
    /// Surface-code memory benchmark.
    QecMemory(QecMemoryArgs),
    /// Run the oracle and property suite.
    Verify(VerifyArgs),
}

/// Process source: a dilation file, a worked model, or a storm chain.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceArgs {
    /// Dilation JSON file.
    #[arg(long, value_name = "FILE")]
    pub dilation: Option<PathBuf>,
    /// Worked model: heisenberg, crx, heisenberg-field.
    #[arg(long)]
    pub model: Option<String>,
    /// Model coupling θ.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Number of time steps (k + 1).
    #[arg(long)]
    pub steps: Option<usize>,
    /// Storm chain as `key=value` pairs: a, b or xi, marginal; optional q0, q1 as comma lists.
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    pub storm: Vec<String>,
    /// Output file (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CovarianceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    /// Observable f over Pauli labels, comma separated (default: non-identity indicator).
    #[arg(long, value_delimiter = ',')]
    pub f: Vec<f64>,
    /// Observable g (default: f).
    #[arg(long, value_delimiter = ',')]
    pub g: Vec<f64>,
    #[arg(long)]
    pub max_tau: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct StormSweepArgs {
    /// Correlation lengths.
    #[arg(long, value_delimiter = ',')]
    pub xi: Vec<f64>,
    /// Total marginal error rate.
    #[arg(long)]
    pub marginal: Option<f64>,
    /// Error budget of the storm state.
    #[arg(long)]
    pub q1_budget: Option<f64>,
    /// Steps of the empirical chain.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct QcaSweepArgs {
    /// Lattice: `surface:D`, `rect:WxH`, `torus:WxH` or `path:N`.
    #[arg(long)]
    pub layout: Option<String>,
    /// Shorthand for `--layout surface:D`.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// θ values in units of π.
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    /// Total cycles per trajectory, burn-in included.
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub trajectories: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Per-cycle density dump (CSV).
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct QecMemoryArgs {
    #[arg(long, value_delimiter = ',')]
    pub d_list: Vec<usize>,
    /// Rounds per shot as a multiple of d.
    #[arg(long)]
    pub rounds_factor: Option<usize>,
    /// Injected noise: storm, qca, iid or none.
    #[arg(long)]
    pub noise: Option<String>,
    /// Baseline circuit noise.
    #[arg(long)]
    pub p: Option<f64>,
    /// Storm correlation lengths.
    #[arg(long, value_delimiter = ',')]
    pub xi: Vec<f64>,
    /// Marginal rate of injected faults (storm, iid).
    #[arg(long)]
    pub marginal: Option<f64>,
    #[arg(long)]
    pub q1_budget: Option<f64>,
    /// QCA θ values in units of π.
    #[arg(long, value_delimiter = ',')]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub prior_cycles: Option<usize>,
    /// Memory basis: z or x.
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output prefix; writes PREFIX.csv and PREFIX.json.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyArgs {
    /// Reduced sample sizes.
    #[arg(long)]
    pub quick: bool,
    /// Also run the scaled reproduction criteria (7, 8, 9).
    #[arg(long)]
    pub reproduction: bool,
    /// Restrict to these criteria.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Vec<usize>,
    /// JSON report file.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

/// Failure categories mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Verification,
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::ShapeMismatch(_) | Error::Json(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// Overlay set command-line values onto the file config. Unset flags are
/// `null`, empty lists or `false` and leave file values in place.
pub fn merge_config<T: Serialize + DeserializeOwned>(file: Option<&Value>, flags: &T) -> CliResult<T> {
    let mut base = file.cloned().unwrap_or(Value::Object(Default::default()));
    let over = serde_json::to_value(flags).map_err(|e| CliError::Runtime(e.to_string()))?;
    let (Value::Object(b), Value::Object(o)) = (&mut base, over) else {
        return usage("config file must hold a JSON object");
    };
    if let Some(k) = b.keys().find(|k| !o.contains_key(*k)) {
        return usage(format!("config: unknown key '{k}'"));
    }
    for (k, v) in o {
        let unset = match &v {
            Value::Null | Value::Bool(false) => true,
            Value::Array(a) => a.is_empty(),
            _ => false,
        };
        if !unset {
            b.insert(k, v);
        }
    }
    serde_json::from_value(base).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Output sink: a file or stdout.
pub(crate) fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// CSV with a leading `# config=<json>` line and a header row.
pub(crate) fn write_table(path: Option<&Path>, config: &Value, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = sink(path)?;
    writeln!(out, "# config={config}")?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json<S: Serialize>(path: Option<&Path>, value: &S) -> CliResult<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn load_config(path: Option<&Path>, command: &str) -> CliResult<Option<Value>> {
    let Some(p) = path else { return Ok(None) };
    let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", p.display())))?;
    // A saved report config carries the command name; drop it before merging.
    if let Value::Object(m) = &mut v {
        if let Some(Value::String(c)) = m.remove("command") {
            if c != command {
                return usage(format!("config is for '{c}', not '{command}'"));
            }
        }
    }
    Ok(Some(v))
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Verification) => 1,
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    macro_rules! merged {
        ($name:expr, $args:expr) => {
            merge_config(load_config(config, $name)?.as_ref(), &$args)?
        };
    }
    match cli.command {
        Command::Twirl(a) => commands::twirl(merged!("twirl", a)),
        Command::Sample(a) => commands::sample(merged!("sample", a)),
        Command::Spectrum(a) => commands::spectrum(merged!("spectrum", a)),
        Command::Covariance(a) => commands::covariance(merged!("covariance", a)),
        Command::StormSweep(a) => commands::storm_sweep(merged!("storm-sweep", a)),
        Command::QcaSweep(a) => commands::qca_sweep(merged!("qca-sweep", a)),
        Command::QecMemory(a) => commands::qec_memory(merged!("qec-memory", a)),
        Command::Verify(a) => commands::verify(merged!("verify", a)),
    }
}
