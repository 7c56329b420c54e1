//! Batch command-line front end.
//!
//! Values resolve as command-line flag, then `--config` file key, then the
//! built-in default. Config keys are the long flag names (`-` or `_`).

mod commands;
mod settings;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
pub use settings::Settings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError::new(EXIT_VALIDATION, message)
    }

    /// Like `From<Error>`, but size and count disagreements are evaluation
    /// mismatches.
    pub fn evaluation(e: Error) -> Self {
        match e {
            Error::LengthMismatch(_) | Error::FrameMismatch(_) => {
                CliError::new(EXIT_MISMATCH, e.to_string())
            }
            other => other.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } => EXIT_IO,
            Error::NonFiniteLoss { .. } => EXIT_TRAINING,
            _ => EXIT_VALIDATION,
        };
        CliError::new(code, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(
    name = "synthstab",
    version,
    about = "Synthetic-data video stabilization toolkit"
)]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `key=value` file supplying defaults for any long flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    pub force: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render shaky synthetic videos with mark-point ground truth.
    Generate(GenerateArgs),
    /// Train the translation and rotation/scale regressors.
    Train(TrainArgs),
    /// Estimate motion, smooth the trajectory, warp and crop.
    Stabilize(StabilizeArgs),
    /// Score stabilized videos against their originals.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub videos: Option<usize>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub fps: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// checker, noise, blobs or mixed.
    #[arg(long)]
    pub texture: Option<String>,
    /// Mark points sampled per sampling period.
    #[arg(long)]
    pub marks: Option<usize>,
    /// Attach mark points to every layer instead of the base layer.
    #[arg(long)]
    pub scatter_marks: bool,
    #[arg(long)]
    pub sinusoids: Option<usize>,
    #[arg(long)]
    pub amp_min: Option<f64>,
    #[arg(long)]
    pub amp_max: Option<f64>,
    #[arg(long)]
    pub freq_min: Option<f64>,
    #[arg(long)]
    pub freq_max: Option<f64>,
    #[arg(long)]
    pub rot_amp_min: Option<f64>,
    #[arg(long)]
    pub rot_amp_max: Option<f64>,
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub rot_jitter: Option<f64>,
    #[arg(long)]
    pub zoom_amp: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset root or single video written by `generate`. Without it a
    /// synthetic pair set is drawn.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Size of the synthetic pair set.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub pair_side: Option<usize>,
    #[arg(long)]
    pub max_translation: Option<f64>,
    #[arg(long)]
    pub max_rotation: Option<f64>,
    #[arg(long)]
    pub max_scale_dev: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs_tr: Option<usize>,
    #[arg(long)]
    pub epochs_rs: Option<usize>,
    #[arg(long)]
    pub lr_drop_epoch: Option<usize>,
    #[arg(long)]
    pub lr_after_drop: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub input_side: Option<usize>,
    /// Grayscale pair only (2 input channels).
    #[arg(long)]
    pub no_flow_channel: bool,
    /// Disable the random square-symmetry augmentation.
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Debug, Args)]
pub struct StabilizeArgs {
    /// Video directory, or dataset root with `manifest.txt`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// oracle, blockmatch or learned.
    #[arg(long)]
    pub backend: Option<String>,
    /// Directory holding `f_tr.bin` and `f_rs.bin`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub polyorder: Option<usize>,
    #[arg(long)]
    pub crop: Option<f64>,
    /// Require grayscale-only learned weights.
    #[arg(long)]
    pub no_flow_channel: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Original video directory or dataset root.
    #[arg(long)]
    pub original: Option<PathBuf>,
    /// Stabilized video directory, or root with one directory per video.
    #[arg(long)]
    pub stabilized: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score t_x and t_y separately instead of the translation magnitude.
    #[arg(long)]
    pub separate_axes: bool,
}

/// Parses and runs one command.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.value("seed", cli.seed, 0u64)?;
    let threads = settings.value("threads", cli.threads, 0usize)?;
    let force = settings.switch("force", cli.force, false)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    println!("seed: {seed}");
    pool.install(|| match &cli.command {
        Command::Generate(a) => commands::generate(a, &settings, seed, force),
        Command::Train(a) => commands::train(a, &settings, seed, force),
        Command::Stabilize(a) => commands::stabilize(a, &settings, force),
        Command::Evaluate(a) => commands::evaluate(a, &settings, force),
    })
}

/// Full entry point: parses `args`, runs, prints errors and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
