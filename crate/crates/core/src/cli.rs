//! Command-line front end. Every subcommand takes its parameters from flags,
//! from a `--config` JSON file, or from built-in defaults, in that order of
//! precedence. The resolved parameters are echoed in the JSON summary, which
//! can itself be passed back through `--config` to replay a run.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ensembles::{sample_wigner, EnsembleKind, EnsembleSpec};
use crate::experiments::{
    histogram_svg, lower_tail, refuse_existing, run_delocalization_experiment, run_distance_experiment,
    run_hanson_wright_check, run_identity_suite, run_independent_distance_experiment, run_inverse_entry_experiment,
    run_sv_tail_experiment, run_trials, write_json, write_records_csv, CsvRecord, ExperimentConfig, ExperimentError,
    HwMatrixKind, IdentitySuiteConfig, IdentityViolation, SvMode, WORKERS_ENV,
};
use crate::lcd::{self, LcdParams, LevyMode};
use crate::spectral::{count_partition, IntervalCount, Normalization};

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Bad flags, unreadable config, invalid parameters or I/O failure.
pub const EXIT_USAGE: i32 = 1;
/// More than half of the trials were flagged degenerate.
pub const EXIT_DEGENERATE: i32 = 2;
/// The identity suite found a violation.
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "wigdist",
    version,
    about = "Distance concentration experiments for Wigner matrices",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct IoArgs {
    /// JSON object of parameters; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-trial CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary output (printed to stdout when absent).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Histogram of (dist² - m)/sqrt(m) from row 1 to rows 2..=n+1 of a symmetric matrix.
    DistHist {
        #[command(flatten)]
        params: DistHistParams,
        #[command(flatten)]
        io: IoArgs,
        /// SVG histogram output.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Tail of |dist - sqrt(m)| for a row independent of the subspace.
    DistTail {
        #[command(flatten)]
        params: DistTailParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Lower tail of the least singular value.
    SvTail {
        #[command(flatten)]
        params: SvTailParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Tails of centred quadratic forms and of ‖Ax‖.
    HwCheck {
        #[command(flatten)]
        params: HwParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// ‖x‖∞ of the unit normal to rows 2..=N.
    Deloc {
        #[command(flatten)]
        params: SizeParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Largest entry of A⁻¹ relative to its Hilbert-Schmidt norm.
    InvEntry {
        #[command(flatten)]
        params: SizeParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Checks every exact identity against direct computation.
    Identities {
        #[command(flatten)]
        params: IdentityParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Singular-value counts in intervals against the quarter-circle law.
    SpectralCount {
        #[command(flatten)]
        params: SpectralParams,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Least common denominator of a vector or of several stacked vectors.
    Lcd {
        #[command(flatten)]
        params: LcdArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Lévy concentration of a random sum.
    Smallball {
        #[command(flatten)]
        params: SmallballParams,
        #[command(flatten)]
        io: IoArgs,
    },
}

fn default_workers_help() -> String {
    format!("Worker threads (default from {WORKERS_ENV}, else 1)")
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistHistParams {
    /// Matrix size N.
    #[arg(long, default_value_t = 1000)]
    size: usize,
    /// Rows n spanning the subspace.
    #[arg(long, default_value_t = 900)]
    rows: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// standard-gaussian | rademacher | goe | custom-subgaussian
    #[arg(long, default_value = "goe")]
    ensemble: EnsembleKind,
    /// Subgaussian parameter of the custom law.
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    bins: usize,
    /// λ for the reported lower tail P(dist ≤ sqrt(m) - λ).
    #[arg(long, default_value_t = 3.0)]
    lambda: f64,
    /// Record the decomposition terms per trial.
    #[arg(long, action = clap::ArgAction::Set, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    decomposition: bool,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistTailParams {
    #[arg(long, default_value_t = 400)]
    size: usize,
    #[arg(long, default_value_t = 360)]
    rows: usize,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value = "standard-gaussian")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated t values.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    t_grid: Vec<f64>,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvTailParams {
    #[arg(long, default_value_t = 200)]
    size: usize,
    /// Rows of the rectangular block (rect mode).
    #[arg(long, default_value_t = 150)]
    rows: usize,
    #[arg(long, default_value_t = 300)]
    trials: usize,
    #[arg(long, default_value = "goe")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// square | rect
    #[arg(long, default_value = "rect")]
    mode: SvMode,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.5,1,2")]
    eps_grid: Vec<f64>,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HwParams {
    /// Dimension M of the fixed matrix.
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value = "standard-gaussian")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// identity | projection | spd | zero
    #[arg(long, default_value = "projection")]
    matrix: HwMatrixKind,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3")]
    t_grid: Vec<f64>,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SizeParams {
    #[arg(long, default_value_t = 400)]
    size: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value = "goe")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentityParams {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    min_size: usize,
    #[arg(long, default_value_t = 60)]
    max_size: usize,
    /// Offset added to one formula path, to check that the suite catches it.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    perturbation: f64,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectralParams {
    #[arg(long, default_value_t = 1000)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value = "standard-gaussian")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    k0: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    lo: f64,
    #[arg(long, default_value_t = 1.1)]
    hi: f64,
    /// Number of equal-width intervals covering [lo, hi].
    #[arg(long, default_value_t = 10)]
    intervals: usize,
    /// raw | by-sqrt-n
    #[arg(long, default_value = "by-sqrt-n")]
    normalization: Normalization,
    /// Relative band used for the reported within-band fraction.
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    #[arg(long, env = WORKERS_ENV, default_value_t = 1, help = default_workers_help())]
    workers: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LcdArgs {
    /// Comma-separated entries, row-major when --stack > 1.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    vector: Vec<f64>,
    /// Number of stacked vectors the entries split into.
    #[arg(long, default_value_t = 1)]
    stack: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Search bound on θ (default 10 sqrt(N)).
    #[arg(long)]
    bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BallMethod {
    Exact,
    MonteCarlo,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmallballParams {
    /// Comma-separated coefficients.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    vector: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    radius: f64,
    #[arg(long, value_enum, default_value = "exact")]
    method: BallMethod,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "rademacher")]
    ensemble: EnsembleKind,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Constant in the one-dimensional small-ball bound.
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Experiment(ExperimentError),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        CliError::Experiment(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Experiment(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => f.write_str(s),
            CliError::Experiment(e) => write!(f, "{e}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// What a command produced: the summary plus how the run should exit.
struct Outcome {
    summary: Value,
    status: i32,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Outcome {
            summary,
            status: EXIT_OK,
        }
    }

    fn with_degenerate(summary: Value, degenerate: usize, trials: usize) -> Self {
        let status = if 2 * degenerate > trials {
            EXIT_DEGENERATE
        } else {
            EXIT_OK
        };
        Outcome { summary, status }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Messages go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    match dispatch(name, sub, cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Argument ids given explicitly on the command line.
fn explicit_ids(sub: &ArgMatches) -> HashSet<String> {
    sub.ids()
        .filter(|id| sub.value_source(id.as_str()) == Some(ValueSource::CommandLine))
        .map(|id| id.as_str().to_string())
        .collect()
}

fn read_config(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("{} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(usage(format!("{} must hold a JSON object", path.display())));
    };
    // a summary file replays through its `params` block
    if let Some(Value::Object(params)) = obj.remove("params") {
        if let Some(Value::String(c)) = obj.get("command") {
            if c != command {
                return Err(usage(format!("config was written by `{c}`, not `{command}`")));
            }
        }
        return Ok(params);
    }
    Ok(obj)
}

/// Overlays config-file values onto the parsed parameters wherever the flag
/// was not given explicitly.
fn merge<P: Serialize + DeserializeOwned>(
    parsed: P,
    io: &IoArgs,
    sub: &ArgMatches,
    command: &str,
) -> Result<P, CliError> {
    let Some(path) = &io.config else {
        return Ok(parsed);
    };
    let config = read_config(path, command)?;
    let explicit = explicit_ids(sub);
    let Value::Object(mut base) = serde_json::to_value(&parsed).map_err(|e| usage(e.to_string()))? else {
        unreachable!("parameter structs serialize to objects")
    };
    for (key, value) in config {
        if !base.contains_key(&key) {
            return Err(usage(format!("unknown parameter `{key}` in {}", path.display())));
        }
        if !explicit.contains(&key) {
            base.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("bad value in {}: {e}", path.display())))
}

fn check_outputs(io: &IoArgs, extra: &[&Option<PathBuf>]) -> Result<(), CliError> {
    let mut seen = HashSet::new();
    for p in [&io.out, &io.summary]
        .into_iter()
        .chain(extra.iter().copied())
        .flatten()
    {
        refuse_existing(p, io.force)?;
        if !seen.insert(p.clone()) {
            return Err(usage(format!("{} is used for two outputs", p.display())));
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_csv<R: CsvRecord>(io: &IoArgs, records: &[R]) -> Result<(), CliError> {
    if let Some(p) = &io.out {
        let mut w = create(p)?;
        write_records_csv(&mut w, records)?;
        w.flush()?;
    }
    Ok(())
}

fn emit_summary(io: &IoArgs, summary: &Value) -> Result<(), CliError> {
    match &io.summary {
        Some(p) => {
            let mut w = create(p)?;
            write_json(&mut w, summary)?;
            w.flush()?;
        }
        None => write_json(io::stdout().lock(), summary)?,
    }
    Ok(())
}

fn envelope<P: Serialize>(command: &str, params: &P, body: Value) -> Value {
    let mut out = json!({ "command": command, "params": params });
    if let (Value::Object(o), Value::Object(b)) = (&mut out, body) {
        o.extend(b);
    }
    out
}

fn experiment_config(
    kind: EnsembleKind,
    k0: f64,
    size: usize,
    rows: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> ExperimentConfig {
    ExperimentConfig::new(EnsembleSpec::wigner(kind, size).with_k0(k0), rows, trials, seed).with_workers(workers)
}

/// Non-finite floats become `null` in JSON; keep them readable as strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

fn dispatch(name: &str, sub: &ArgMatches, command: Command) -> Result<i32, CliError> {
    let (io, outcome) = match command {
        Command::DistHist { params, io, svg } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[&svg])?;
            let cfg =
                experiment_config(p.ensemble, p.k0, p.size, p.rows, p.trials, p.seed, p.workers).with_bins(p.bins);
            let cfg = ExperimentConfig {
                with_decomposition: p.decomposition,
                ..cfg
            };
            let run = run_distance_experiment(&cfg)?;
            write_csv(&io, &run.records)?;
            if let Some(path) = &svg {
                let title = format!("(dist² - m)/sqrt(m), N={}, n={}, {}", p.size, p.rows, run.model);
                std::fs::write(path, histogram_svg(&run.histogram, &title, "(dist² - m)/sqrt(m)"))?;
            }
            let (lt, (lt_lo, lt_hi)) = lower_tail(&run, p.lambda);
            let body = json!({
                "model": run.model,
                "statistics": {
                    "mean": num(run.mean),
                    "variance": num(run.variance),
                    "unimodal": run.unimodal,
                    "lower_tail": { "lambda": p.lambda, "probability": num(lt), "wilson": [lt_lo, lt_hi] },
                },
                "histogram": run.histogram,
                "trials": p.trials,
                "degenerate_count": run.degenerate_count,
            });
            (
                io,
                Outcome::with_degenerate(envelope(name, &p, body), run.degenerate_count, p.trials),
            )
        }
        Command::DistTail { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let spec = EnsembleSpec::iid(p.ensemble).with_k0(p.k0).with_dimension(p.size);
            let cfg = ExperimentConfig::new(spec, p.rows, p.trials, p.seed)
                .with_workers(p.workers)
                .with_t_grid(p.t_grid.clone());
            let run = run_independent_distance_experiment(&cfg)?;
            write_csv(&io, &run.records)?;
            let body = json!({
                "tail": run.curve,
                "fit": run.fit,
                "fitted_constants": { "decay_constant": run.decay_constant },
                "trials": p.trials,
                "degenerate_count": run.degenerate_count,
            });
            (
                io,
                Outcome::with_degenerate(envelope(name, &p, body), run.degenerate_count, p.trials),
            )
        }
        Command::SvTail { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let cfg = experiment_config(p.ensemble, p.k0, p.size, p.rows, p.trials, p.seed, p.workers)
                .with_eps_grid(p.eps_grid.clone());
            let r = run_sv_tail_experiment(&cfg, p.mode)?;
            write_csv(&io, &r.trials)?;
            let body = json!({
                "scale": r.scale,
                "tail": r.curve,
                "statistics": { "median_ratio": num(r.median_ratio) },
                "fitted_constants": { "tail_exponent": r.tail_exponent },
                "trials": p.trials,
                "degenerate_count": r.degenerate_count,
            });
            (
                io,
                Outcome::with_degenerate(envelope(name, &p, body), r.degenerate_count, p.trials),
            )
        }
        Command::HwCheck { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let spec = EnsembleSpec::iid(p.ensemble).with_k0(p.k0).with_dimension(p.size);
            let cfg = ExperimentConfig::new(spec, 0, p.trials, p.seed)
                .with_workers(p.workers)
                .with_t_grid(p.t_grid.clone());
            let r = run_hanson_wright_check(&cfg, p.matrix)?;
            write_csv(&io, &r.trials)?;
            let body = json!({
                "quadratic_tail": r.quadratic,
                "norm_tail": r.norm,
                "fitted_constants": { "c_quadratic": r.c_quadratic, "c_norm": r.c_norm },
                "trials": p.trials,
                "degenerate_count": 0,
            });
            (io, Outcome::ok(envelope(name, &p, body)))
        }
        Command::Deloc { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let cfg = experiment_config(
                p.ensemble,
                p.k0,
                p.size,
                p.size.saturating_sub(1),
                p.trials,
                p.seed,
                p.workers,
            );
            let r = run_delocalization_experiment(&cfg)?;
            write_csv(&io, &r.trials)?;
            let body = json!({
                "statistics": {
                    "max": num(r.max), "median": num(r.median), "q90": num(r.q90), "q99": num(r.q99),
                    "max_unit_defect": num(r.max_unit_defect),
                },
                "trials": p.trials,
                "degenerate_count": r.degenerate_count,
            });
            (
                io,
                Outcome::with_degenerate(envelope(name, &p, body), r.degenerate_count, p.trials),
            )
        }
        Command::InvEntry { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let cfg = experiment_config(
                p.ensemble,
                p.k0,
                p.size,
                p.size.saturating_sub(1),
                p.trials,
                p.seed,
                p.workers,
            );
            let r = run_inverse_entry_experiment(&cfg)?;
            write_csv(&io, &r.trials)?;
            let body = json!({
                "statistics": {
                    "max_ratio": num(r.max_ratio),
                    "median_normalized": num(r.median_normalized),
                    "max_normalized": num(r.max_normalized),
                },
                "trials": p.trials,
                "degenerate_count": r.degenerate_count,
            });
            (
                io,
                Outcome::with_degenerate(envelope(name, &p, body), r.degenerate_count, p.trials),
            )
        }
        Command::Identities { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            if p.min_size < 6 || p.max_size < p.min_size {
                return Err(usage("need 6 <= min-size <= max-size"));
            }
            let mut cfg = IdentitySuiteConfig::new(p.instances, p.seed);
            cfg.min_size = p.min_size;
            cfg.max_size = p.max_size;
            cfg.perturbation = p.perturbation;
            cfg.workers = p.workers.max(1);
            let report = run_identity_suite(&cfg);
            write_csv(&io, &report.violations)?;
            if let Some(v) = report.violations.first() {
                eprintln!(
                    "identity check `{}` failed on instance {} (seed {}, N={}, m={}): error {:e} > {:e}",
                    v.check, v.instance, v.seed, v.size, v.codim, v.error, v.tolerance
                );
            }
            if report.vacuous {
                eprintln!("identity suite ran no instances (vacuous pass)");
            }
            let status = if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED };
            let body = json!({ "report": report, "tolerances": cfg.tolerances });
            (
                io,
                Outcome {
                    summary: envelope(name, &p, body),
                    status,
                },
            )
        }
        Command::SpectralCount { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            spectral_count(name, p, io)?
        }
        Command::Lcd { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let summary = lcd_query(name, &p)?;
            (io, Outcome::ok(summary))
        }
        Command::Smallball { params, io } => {
            let p = merge(params, &io, sub, name)?;
            check_outputs(&io, &[])?;
            let summary = smallball_query(name, &p)?;
            (io, Outcome::ok(summary))
        }
    };
    emit_summary(&io, &outcome.summary)?;
    if outcome.status == EXIT_DEGENERATE {
        eprintln!("more than half of the trials were degenerate");
    }
    Ok(outcome.status)
}

impl CsvRecord for IdentityViolation {
    fn header() -> Vec<&'static str> {
        vec!["instance", "seed", "N", "m", "check", "error", "tolerance"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.instance.to_string(),
            self.seed.to_string(),
            self.size.to_string(),
            self.codim.to_string(),
            self.check.clone(),
            self.error.to_string(),
            self.tolerance.to_string(),
        ]
    }
}

struct CountRow {
    trial_index: u64,
    count: IntervalCount,
}

impl CsvRecord for CountRow {
    fn header() -> Vec<&'static str> {
        vec!["trial_index", "lo", "hi", "observed", "predicted"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.trial_index.to_string(),
            self.count.lo.to_string(),
            self.count.hi.to_string(),
            self.count.observed.to_string(),
            self.count.predicted.to_string(),
        ]
    }
}

fn spectral_count(name: &str, p: SpectralParams, io: IoArgs) -> Result<(IoArgs, Outcome), CliError> {
    if p.intervals == 0 || !(p.lo < p.hi) || p.size == 0 || p.trials == 0 || p.workers == 0 {
        return Err(usage("need size, trials, workers, intervals >= 1 and lo < hi"));
    }
    let spec = EnsembleSpec::wigner(p.ensemble, p.size).with_k0(p.k0);
    spec.scalar_law().map_err(|e| usage(e.to_string()))?;
    let width = (p.hi - p.lo) / p.intervals as f64;
    let edges: Vec<f64> = (0..=p.intervals).map(|i| p.lo + width * i as f64).collect();
    let per_trial = run_trials(p.trials, p.workers, |t| {
        sample_wigner(&spec, p.seed, t)
            .ok()
            .and_then(|s| count_partition(&s.entries, &edges, p.normalization).ok())
    });
    let mut rows = Vec::new();
    let mut within = Vec::new();
    let mut degenerate = 0;
    for (t, counts) in per_trial.into_iter().enumerate() {
        match counts {
            Some(cs) => {
                let ok = cs
                    .iter()
                    .filter(|c| (c.observed as f64 - c.predicted).abs() <= p.tolerance * c.predicted)
                    .count();
                within.push(ok);
                rows.extend(cs.into_iter().map(|count| CountRow {
                    trial_index: t as u64,
                    count,
                }));
            }
            None => degenerate += 1,
        }
    }
    write_csv(&io, &rows)?;
    let body = json!({
        "edges": edges,
        "statistics": {
            "intervals_within_tolerance": within,
            "min_within": within.iter().min(),
        },
        "trials": p.trials,
        "degenerate_count": degenerate,
    });
    let trials = p.trials;
    Ok((
        io,
        Outcome::with_degenerate(envelope(name, &p, body), degenerate, trials),
    ))
}

fn lcd_query(name: &str, p: &LcdArgs) -> Result<Value, CliError> {
    if p.vector.is_empty() {
        return Err(usage("--vector is required"));
    }
    if p.stack == 0 || !p.vector.len().is_multiple_of(p.stack) {
        return Err(usage(format!(
            "{} entries do not split into {} vectors",
            p.vector.len(),
            p.stack
        )));
    }
    let params = LcdParams::new(p.alpha, p.gamma).map_err(|e| usage(e.to_string()))?;
    let dim = p.vector.len() / p.stack;
    let bound = p.bound.unwrap_or_else(|| lcd::default_search_bound(dim));
    let result = if p.stack == 1 {
        lcd::lcd(&p.vector, &params, bound)
    } else {
        let xs = nalgebra::DMatrix::from_row_slice(p.stack, dim, &p.vector);
        lcd::lcd_multi(&xs, &params, bound)
    }
    .map_err(|e| usage(e.to_string()))?;
    Ok(envelope(name, p, json!({ "result": result })))
}

fn smallball_query(name: &str, p: &SmallballParams) -> Result<Value, CliError> {
    if p.vector.is_empty() {
        return Err(usage("--vector is required"));
    }
    let params = LcdParams::new(p.alpha, p.gamma).map_err(|e| usage(e.to_string()))?;
    let mode = match p.method {
        BallMethod::Exact => LevyMode::Exact,
        BallMethod::MonteCarlo => LevyMode::MonteCarlo {
            samples: p.samples,
            seed: p.seed,
        },
    };
    let est = lcd::levy_concentration(&p.vector, p.ensemble, p.radius, mode).map_err(|e| usage(e.to_string()))?;
    let norm = p.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    let unit: Vec<f64> = p.vector.iter().map(|v| v / norm).collect();
    let lcd_result = lcd::lcd(&unit, &params, lcd::default_search_bound(unit.len())).ok();
    // the bound is stated for unit vectors and ε ≥ 1/LCD
    let eps = p.radius / norm;
    let applies = lcd_result.as_ref().map(|r| eps >= 1.0 / r.value_or_inf());
    let bound = lcd::small_ball_bound_one_dim(eps, &params, p.c0);
    let body = json!({
        "estimate": est.with_theory_bound(bound),
        "normalized_radius": eps,
        "lcd": lcd_result,
        "bound_applies": applies,
    });
    Ok(envelope(name, p, body))
}
