//! `aps` command-line tool.
//!
//! Exit codes: 0 success, 1 when some examples failed (the rest are still
//! written), 2 for configuration, usage or I/O errors.

use std::ffi::OsString;
use std::path::PathBuf;

use aps_core::entailment::BackendKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod config;

use config::{Overrides, ToolConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "aps", version, about = "Proposition segmentation data and evaluation tools")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub scorer: Option<ScorerArg>,
    /// Entailment service base URL (overrides APS_SCORER_ENDPOINT)
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// -v info, -vv debug
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Suppress result summaries on standard output
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScorerArg {
    Remote,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Grouped,
    Ungrouped,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against a dataset
    Evaluate {
        #[arg(long, alias = "dataset")]
        input: Option<PathBuf>,
        #[arg(long)]
        predictions: PathBuf,
        /// Corpus report (JSON)
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-example scores (JSONL)
        #[arg(long)]
        per_example: Option<PathBuf>,
    },
    /// Render a dataset as training records
    Render {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "grouped")]
        mode: ModeArg,
    },
    /// Parse raw model outputs into prediction records
    ParseOutput {
        /// JSONL of {"id", "output", "text"?}
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Supplies passage text for rows without it
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "grouped")]
        mode: ModeArg,
        /// Rows that failed to parse (JSONL)
        #[arg(long)]
        quarantine: Option<PathBuf>,
    },
    /// Clean and align raw examples, keeping only fully supported ones
    Align {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        discards: Option<PathBuf>,
    },
    /// Seeded train/dev split
    Split {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        dev_fraction: f64,
    },
    /// Synthetic data generation
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
        /// Generation service base URL (overrides APS_GEN_ENDPOINT)
        #[arg(long, global = true)]
        gen_endpoint: Option<String>,
    },
    /// Pearson correlation between metric values and human judgments
    Correlate {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Emit one proposition per sentence as predictions
    Baseline {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Ask the generator for new domain names
    Domains {
        #[arg(long)]
        seeds: PathBuf,
        /// JSON array of discovered domains
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        calls: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Generate texts for selected domains
    Texts {
        #[arg(long)]
        seeds: PathBuf,
        /// JSON array of domain names
        #[arg(long)]
        domains: PathBuf,
        /// One domain per line; only these are used
        #[arg(long)]
        allowlist: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        per_pair: usize,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Drop texts sharing an n-gram with any seed
    Filter {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        dropped: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        ngram: usize,
    },
    /// Label texts with a teacher and emit training records
    Distill {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        training: Option<PathBuf>,
        #[arg(long)]
        quarantine: Option<PathBuf>,
        #[arg(long, default_value = "teacher")]
        teacher_id: String,
    },
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            scorer: self.scorer.map(|s| match s {
                ScorerArg::Remote => BackendKind::Remote,
                ScorerArg::Oracle => BackendKind::Oracle,
            }),
            endpoint: self.endpoint.clone(),
            tau: self.tau,
            seed: self.seed,
            concurrency: self.concurrency,
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    init_logging(cli.global.verbose);
    let cfg = match ToolConfig::resolve(cli.global.config.as_deref(), &cli.global.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_FATAL;
        }
    };
    let mut out: Box<dyn std::io::Write> =
        if cli.global.quiet { Box::new(std::io::sink()) } else { Box::new(std::io::stdout().lock()) };
    match commands::dispatch(&cli.command, &cfg, &mut out) {
        Ok(0) => EXIT_OK,
        Ok(failed) => {
            eprintln!("{failed} item(s) failed");
            EXIT_PARTIAL
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}
