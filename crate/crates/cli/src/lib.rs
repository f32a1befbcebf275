//! The `emodel` command-line tool.
//!
//! [`run`] parses arguments, executes one subcommand against the supplied
//! streams and returns the process exit code:
//! 0 success, 1 usage, 2 domain or rank problem, 3 data or configuration
//! problem, 4 reproduction mismatch.

mod commands;
mod render;
mod reproduce;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emodel_core::dataio::{builtin_profiles, load_codec_profiles, PROFILE_PATH_ENV};
use emodel_core::eval::EvalMode;
use emodel_core::{CodecProfile, Estimator, ModelKind, SubjectiveSurface};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "emodel",
    version,
    about = "VoIP conversational quality estimation with a bias-corrected E-model"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Codec profile name.
    #[arg(long, global = true, default_value = "g729")]
    pub codec: String,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Allow loss above 10 % or delay above 400 ms; results are flagged.
    #[arg(long, global = true)]
    pub extrapolate: bool,
    /// TOML file with extra codec profiles.
    #[arg(long, global = true, env = PROFILE_PATH_ENV)]
    pub profiles: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate quality at one loss/delay condition.
    Predict {
        #[arg(long)]
        loss: f64,
        #[arg(long)]
        delay: f64,
        #[arg(long, default_value = "enhanced", value_parser = parse_model)]
        model: ModelKind,
    },
    /// Evaluate every model over a loss range and a list of delays.
    Sweep {
        /// Loss range START:END:STEP in percent.
        #[arg(long, default_value = "0:10:1")]
        loss: RangeArg,
        /// Comma-separated one-way delays in ms.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,50,100,150,200,250,300,350,400"
        )]
        delays: Vec<f64>,
        /// Comma-separated models to report.
        #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "simplified,enhanced,subjective")]
        models: Vec<ModelKind>,
    },
    /// Re-derive the bias polynomial from the subjective surface.
    DeriveBias {
        #[command(flatten)]
        grid: GridArgs,
        /// Term set to fit.
        #[arg(long, default_value = "poly23")]
        termset: String,
        /// RMSE denominator.
        #[arg(long, value_enum, default_value_t = Denominator::Dof)]
        rmse_denominator: Denominator,
        /// Write a profile fragment carrying the derived bias here.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Profile name used in the written fragment.
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit and rank polynomial term sets on `x,y,value` samples.
    Fit {
        /// CSV file with columns x, y, value.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated candidate term sets.
        #[arg(long, value_delimiter = ',', default_value = "poly32,poly23,poly33")]
        termsets: Vec<String>,
        #[arg(long, value_enum, default_value_t = Denominator::Dof)]
        rmse_denominator: Denominator,
    },
    /// Score models against subjective test data with MAPE.
    Evaluate {
        /// Use the shipped held-out test sets.
        #[arg(long, conflicts_with = "records", required_unless_present = "records")]
        embedded: bool,
        /// CSV of individual votes.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = parse_model, default_value = "simplified,enhanced")]
        models: Vec<ModelKind>,
        #[arg(long, value_parser = parse_mode, default_value = "scenario-mean")]
        mode: EvalMode,
    },
    /// Window a line-delimited metric stream and score each window.
    Monitor {
        /// Input file; standard input when absent or `-`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Close a window after this many records.
        #[arg(long, conflicts_with = "window_seconds")]
        window_records: Option<usize>,
        /// Close windows on this duration of stream time.
        #[arg(long)]
        window_seconds: Option<f64>,
        /// Stop at the first malformed line instead of skipping it.
        #[arg(long)]
        abort_on_error: bool,
    },
    /// Recompute a published artifact and compare it with the shipped values.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
    },
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Loss grid START:END:STEP in percent.
    #[arg(long, default_value = "0:10:1")]
    pub grid_loss: RangeArg,
    /// Delay grid START:END:STEP in ms.
    #[arg(long, default_value = "0:400:50")]
    pub grid_delay: RangeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Denominator {
    /// n − p
    Dof,
    /// n
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Table3,
    Table4,
    Table6,
    Table7,
    Fig6,
}

/// `START:END:STEP`, or a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeArg {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl RangeArg {
    pub fn values(&self) -> Vec<f64> {
        emodel_core::sweep::inclusive_range(self.start, self.end, self.step).unwrap_or_default()
    }
}

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("'{t}' is not a number"))
        };
        let r = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                RangeArg {
                    start: v,
                    end: v,
                    step: 1.0,
                }
            }
            [a, b, c] => RangeArg {
                start: num(a)?,
                end: num(b)?,
                step: num(c)?,
            },
            _ => return Err(format!("expected START:END:STEP, got '{s}'")),
        };
        if r.step <= 0.0 {
            return Err(format!("step must be positive, got {}", r.step));
        }
        Ok(r)
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
        .map_err(|_| format!("unknown model '{s}' (simplified, enhanced, subjective)"))
}

fn parse_mode(s: &str) -> Result<EvalMode, String> {
    s.parse()
        .map_err(|_| format!("unknown mode '{s}' (scenario-mean, per-record, per-record-bounds)"))
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<emodel_core::Error> for CliError {
    fn from(e: emodel_core::Error) -> Self {
        use emodel_core::Error as E;
        let code = match e {
            E::Domain(_) | E::RankDeficient { .. } | E::TooFewSamples { .. } => EXIT_DOMAIN,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            // The reader went away; nothing left to report.
            return CliError {
                code: EXIT_OK,
                message: String::new(),
            };
        }
        CliError::data(format!("i/o error: {e}"))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Streams a command runs against.
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(io.stdout, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(io.stderr, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let stderr = &mut *io.stderr;
    let result = execute(&cli, io.stdin, io.stdout, stderr);
    match result {
        Ok(code) => code,
        Err(e) => {
            if !e.message.is_empty() {
                let _ = writeln!(stderr, "error: {e}");
            }
            e.code
        }
    }
}

fn execute(
    cli: &Cli,
    stdin: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CliResult<i32> {
    let ctx = Context::new(&cli.global)?;
    match &cli.command {
        Command::Predict { loss, delay, model } => {
            commands::predict(&ctx, out, *loss, *delay, *model)
        }
        Command::Sweep {
            loss,
            delays,
            models,
        } => commands::sweep(&ctx, out, loss, delays, models),
        Command::DeriveBias {
            grid,
            termset,
            rmse_denominator,
            output,
            name,
        } => commands::derive_bias(
            &ctx,
            out,
            grid,
            termset,
            *rmse_denominator,
            output.as_deref(),
            name.as_deref(),
        ),
        Command::Fit {
            input,
            termsets,
            rmse_denominator,
        } => commands::fit(&ctx, out, input, termsets, *rmse_denominator),
        Command::Evaluate {
            embedded,
            records,
            models,
            mode,
        } => commands::evaluate(&ctx, out, *embedded, records.as_deref(), models, *mode),
        Command::Monitor {
            input,
            window_records,
            window_seconds,
            abort_on_error,
        } => commands::monitor(
            &ctx,
            stdin,
            out,
            err,
            input.as_deref(),
            *window_records,
            *window_seconds,
            *abort_on_error,
        ),
        Command::Reproduce { target } => reproduce::run(&ctx, out, *target),
    }
    .inspect(|_code| {
        let _ = out.flush();
    })
}

/// Resolved global options.
pub(crate) struct Context {
    pub format: Format,
    pub extrapolate: bool,
    pub profile: CodecProfile,
}

impl Context {
    fn new(g: &GlobalOpts) -> CliResult<Self> {
        let profiles = match &g.profiles {
            Some(path) => load_profile_file(path)?,
            None => builtin_profiles(),
        };
        let profile = profiles.get(&g.codec).cloned().ok_or_else(|| {
            let known: Vec<&str> = profiles.keys().map(String::as_str).collect();
            CliError::data(format!(
                "unknown codec '{}' (available: {})",
                g.codec,
                known.join(", ")
            ))
        })?;
        Ok(Self {
            format: g.format,
            extrapolate: g.extrapolate,
            profile,
        })
    }

    pub fn estimator(&self) -> Estimator {
        Estimator::new(self.profile.clone(), SubjectiveSurface::THAI_G729)
    }

    /// Fails early when a model needs a bias the profile does not carry.
    pub fn require_models(&self, models: &[ModelKind]) -> CliResult {
        if models.contains(&ModelKind::Enhanced) && self.profile.bias.is_none() {
            return Err(CliError::data(format!(
                "profile '{}' has no bias polynomial; the enhanced model is unavailable",
                self.profile.name
            )));
        }
        Ok(())
    }
}

fn load_profile_file(path: &Path) -> CliResult<BTreeMap<String, CodecProfile>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read profiles '{}': {e}", path.display())))?;
    Ok(load_codec_profiles(&text)?)
}

pub(crate) fn read_file(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::open(path)
        .map_err(|e| CliError::data(format!("cannot open '{}': {e}", path.display())))
}
