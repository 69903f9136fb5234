mod commands;
mod config;
mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gaplab_core::GaplabError;
use serde::Serialize;

use manifest::{sha256_hex, OutputDigest, RunManifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("[{stage}] {msg}")]
    Compute { stage: String, msg: String },
}

impl CliError {
    pub fn from_core(e: GaplabError, default_stage: &str) -> Self {
        match e {
            GaplabError::Stage { stage, source } => CliError::Compute { stage: stage.to_string(), msg: source.to_string() },
            other => CliError::Compute { stage: default_stage.to_string(), msg: other.to_string() },
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute { .. } => 1,
        }
    }
}

#[derive(Parser, Debug, Serialize)]
#[command(name = "gaplab", version, about = "Spectral and reducibility experiments for the almost Mathieu operator")]
pub struct Cli {
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true, alias = "emit")]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json` when `--out` is set.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Flat key=value file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Args, Debug, Serialize)]
pub struct EnergyGrid {
    /// Comma-separated energies.
    #[arg(long, alias = "E", value_delimiter = ',', allow_negative_numbers = true)]
    pub energy: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub emin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub emax: Option<f64>,
    /// Grid points between `emin` and `emax`, inclusive.
    #[arg(long, default_value_t = 21)]
    pub n: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum IdsMethod {
    Sturm,
    Rotation,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Cmd {
    /// Continued-fraction data of a frequency.
    #[command(args_override_self = true)]
    Freq {
        /// `p/q`, `golden:N`, `silver:N`, `synth:BETA:N[:SEED]` or a digit list.
        #[arg(long, required_unless_present = "digits")]
        alpha: Option<String>,
        /// Digit list such as `1,2,2` or `1x30`.
        #[arg(long, conflicts_with = "alpha")]
        digits: Option<String>,
    },
    /// Bands and labeled gaps for a rational frequency.
    #[command(args_override_self = true)]
    Spectrum {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Cross-check gap IDS values by Sturm counts.
        #[arg(long)]
        check_ids: bool,
    },
    /// Spectra for every `p/q` with `q ≤ qmax`, as CSV intervals.
    #[command(args_override_self = true)]
    Butterfly {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        qmax: i64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Integrated density of states on an energy grid.
    #[command(args_override_self = true)]
    Ids {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[command(flatten)]
        grid: EnergyGrid,
        #[arg(long, value_enum, default_value_t = IdsMethod::Sturm)]
        method: IdsMethod,
        /// Truncation half-width for Sturm counts.
        #[arg(long, default_value_t = 500)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        thetas: usize,
        /// Iterates per start for the rotation method.
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
    },
    /// Lyapunov exponents on an energy grid.
    #[command(args_override_self = true)]
    Lyap {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[command(flatten)]
        grid: EnergyGrid,
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        #[arg(long, default_value_t = 8)]
        phases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Imaginary phase offset.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        im: f64,
    },
    /// Fibered rotation numbers on an energy grid.
    #[command(args_override_self = true)]
    Rot {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[command(flatten)]
        grid: EnergyGrid,
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        /// Equispaced starting phases averaged over.
        #[arg(long, default_value_t = 8)]
        starts: usize,
    },
    /// ε₀-resonances of a phase.
    #[command(args_override_self = true)]
    Resonances {
        #[arg(long)]
        alpha: String,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long)]
        eps0: f64,
        #[arg(long, default_value_t = 1000)]
        k: u64,
    },
    /// Dual eigenvector nearest an energy, with its localization bound (CSV).
    #[command(args_override_self = true)]
    Localize {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[arg(long, alias = "E", allow_negative_numbers = true)]
        energy: f64,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 500)]
        m: usize,
        /// Energy half-width searched around `energy`.
        #[arg(long, default_value_t = 0.1)]
        window: f64,
    },
    /// Reduce the cocycle at one energy; emits the conjugacy and stage ledger.
    #[command(args_override_self = true)]
    Reduce {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        alpha: String,
        #[arg(long, alias = "E", allow_negative_numbers = true)]
        energy: f64,
        /// Bloch window half-width.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 200)]
        m: usize,
        #[arg(long, default_value_t = 256)]
        theta_grid: usize,
        #[arg(long, default_value_t = 12)]
        k_max: i64,
    },
    /// One KAM step on a conjugacy produced by `reduce`.
    #[command(args_override_self = true)]
    Kamstep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        /// Homological truncation; defaults to twice the conjugacy's.
        #[arg(long)]
        n_trunc: Option<usize>,
    },
    /// Hölder fit of spectra over consecutive golden fractions.
    #[command(args_override_self = true)]
    Holder {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 55)]
        qmax: i64,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// Run the acceptance suite and print a pass/fail table.
    #[command(args_override_self = true)]
    Verify {
        #[arg(long, default_value = "core")]
        suite: String,
        /// Comma-separated criterion numbers; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Cmd {
    pub fn name(&self) -> &'static str {
        match self {
            Cmd::Freq { .. } => "freq",
            Cmd::Spectrum { .. } => "spectrum",
            Cmd::Butterfly { .. } => "butterfly",
            Cmd::Ids { .. } => "ids",
            Cmd::Lyap { .. } => "lyap",
            Cmd::Rot { .. } => "rot",
            Cmd::Resonances { .. } => "resonances",
            Cmd::Localize { .. } => "localize",
            Cmd::Reduce { .. } => "reduce",
            Cmd::Kamstep { .. } => "kamstep",
            Cmd::Holder { .. } => "holder",
            Cmd::Verify { .. } => "verify",
        }
    }
}

const SUBCOMMANDS: [&str; 12] =
    ["freq", "spectrum", "butterfly", "ids", "lyap", "rot", "resonances", "localize", "reduce", "kamstep", "holder", "verify"];

/// What a command produced.
pub struct Artifact {
    /// Primary output, written to `--out` or stdout.
    pub body: String,
    /// Printed to stdout even when `--out` is set.
    pub console: Option<String>,
    pub frequency_digits: Vec<String>,
    pub seeds: Vec<u64>,
    /// Set when the run completed but its checks failed.
    pub failure: Option<CliError>,
}

fn configure_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("GAPLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("GAPLAB_THREADS must be a positive integer, got {v}")))?;
        if n == 0 {
            return Err(CliError::Usage("GAPLAB_THREADS must be at least 1".into()));
        }
        // A second call in the same process fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let start = Instant::now();
    let merged = config::merge(argv.clone(), &SUBCOMMANDS)?;
    let cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) => {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Usage(e.render().to_string()));
        }
    };
    let threads = configure_threads()?;
    let art = commands::dispatch(&cli.cmd)?;

    let mut outputs = Vec::new();
    match &cli.out {
        Some(path) => {
            std::fs::write(path, &art.body)
                .map_err(|e| CliError::Compute { stage: "output".into(), msg: format!("{}: {e}", path.display()) })?;
            outputs.push(OutputDigest { path: path.display().to_string(), sha256: sha256_hex(art.body.as_bytes()) });
        }
        None if art.console.is_none() => print!("{}", art.body),
        None => {}
    }
    if let Some(c) = &art.console {
        print!("{c}");
    }
    let manifest_path = cli.manifest.clone().or_else(|| cli.out.as_ref().map(|p| PathBuf::from(format!("{}.manifest.json", p.display()))));
    if let Some(mp) = manifest_path {
        let m = RunManifest {
            command_line: argv,
            config: serde_json::to_value(&cli).unwrap_or(serde_json::Value::Null),
            frequency_digits: art.frequency_digits.clone(),
            seeds: art.seeds.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads,
            wall_time_s: start.elapsed().as_secs_f64(),
            outputs,
        };
        let text = output::to_json_string(&serde_json::to_value(&m).unwrap_or(serde_json::Value::Null));
        std::fs::write(&mp, text)
            .map_err(|e| CliError::Compute { stage: "output".into(), msg: format!("{}: {e}", mp.display()) })?;
    }
    match art.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(msg) => eprint!("{}", if msg.ends_with('\n') { msg.clone() } else { format!("{msg}\n") }),
                CliError::Compute { .. } => eprintln!("gaplab: error {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
