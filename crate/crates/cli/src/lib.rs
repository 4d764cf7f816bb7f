//! The `jsblock` pipeline CLI.
//!
//! Stages communicate through on-disk artifacts under `--out`, each
//! stamped with the run manifest id: `label` writes the labeled corpus,
//! `localize` the unit classification, `plan` the blocked-unit sets,
//! `simulate` per-config removal results and diffs, `report` the corpus
//! summaries. `rewrite` works on a single JS file; `selftest` runs the
//! embedded verification suite.

pub mod commands;
pub mod corpus;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jsblock_core::localize::Thresholds;
use jsblock_core::sim::BlockingConfig;
use jsblock_core::trace::Attribution;

/// Exit codes: 0 success, 2 usage, 3 no-op rewrite, 4 data error.
#[derive(Debug)]
pub enum CmdError {
    Usage(String),
    /// `rewrite` found nothing to rename.
    NothingRenamed,
    Data(anyhow::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 2,
            CmdError::NothingRenamed => 3,
            CmdError::Data(_) => 4,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CmdError {
    fn from(e: E) -> Self {
        CmdError::Data(e.into())
    }
}

pub type CmdResult = Result<(), CmdError>;

#[derive(Debug, Parser)]
#[command(name = "jsblock", version, about = "Trace-driven JS blocking analysis pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub globals: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttributionArg {
    #[value(name = "full-stack")]
    FullStack,
    #[value(name = "top-frame")]
    TopFrame,
}

impl From<AttributionArg> for Attribution {
    fn from(a: AttributionArg) -> Attribution {
        match a {
            AttributionArg::FullStack => Attribution::FullStack,
            AttributionArg::TopFrame => Attribution::TopFrame,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodMatchArg {
    #[value(name = "any-frame")]
    AnyFrame,
    #[value(name = "top-frame")]
    TopFrame,
}

impl From<MethodMatchArg> for jsblock_core::sim::MethodMatchMode {
    fn from(m: MethodMatchArg) -> Self {
        match m {
            MethodMatchArg::AnyFrame => jsblock_core::sim::MethodMatchMode::AnyFrame,
            MethodMatchArg::TopFrame => jsblock_core::sim::MethodMatchMode::TopFrameOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Directory of trace files (.json per page, or .jsonl streams).
    #[arg(long, global = true, value_name = "DIR")]
    pub traces: Option<PathBuf>,

    /// Filter list files, in precedence order.
    #[arg(long, global = true, value_name = "FILE", num_args = 1..)]
    pub filters: Vec<PathBuf>,

    /// Output directory for pipeline artifacts (a file path for `rewrite`).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Stack attribution for localization.
    #[arg(long, global = true, value_enum, default_value = "full-stack")]
    pub attribution: AttributionArg,

    /// Classification thresholds; `0 0` selects the no-threshold mode.
    #[arg(long, global = true, num_args = 2, value_names = ["L", "U"], allow_negative_numbers = true)]
    pub thresholds: Option<Vec<f64>>,

    /// Blocking configurations to run (comma-separated).
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    pub configs: Option<Vec<String>>,

    /// Worker threads for per-trace work (0 = all cores).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Seed for randomized fixture generation (selftest).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

impl GlobalOpts {
    pub fn thresholds(&self) -> Result<Thresholds, CmdError> {
        match &self.thresholds {
            None => Ok(Thresholds::DEFAULT),
            Some(pair) => Thresholds::new(pair[0], pair[1]).ok_or_else(|| {
                CmdError::Usage(format!(
                    "--thresholds must satisfy L < U (or be `0 0`), got {} {}",
                    pair[0], pair[1]
                ))
            }),
        }
    }

    pub fn configs(&self) -> Result<Vec<BlockingConfig>, CmdError> {
        match &self.configs {
            None => Ok(BlockingConfig::ALL_CONFIGS.to_vec()),
            Some(names) => {
                let mut configs = Vec::new();
                for name in names {
                    let c: BlockingConfig =
                        name.parse().map_err(CmdError::Usage)?;
                    if !configs.contains(&c) {
                        configs.push(c);
                    }
                }
                if configs.is_empty() {
                    return Err(CmdError::Usage("--configs is empty".into()));
                }
                Ok(configs)
            }
        }
    }

    pub fn out_dir(&self) -> Result<&PathBuf, CmdError> {
        self.out.as_ref().ok_or_else(|| CmdError::Usage("--out DIR is required".into()))
    }

    pub fn traces_dir(&self) -> Result<&PathBuf, CmdError> {
        self.traces.as_ref().ok_or_else(|| CmdError::Usage("--traces DIR is required".into()))
    }

    /// Bounded worker pool; stages run per-trace work inside it.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool, CmdError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CmdError::Data(e.into()))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse traces and label every request with the filter lists.
    Label {
        /// Strip ?query from script identities (collapse bundle variants).
        #[arg(long)]
        normalize_query: bool,
    },
    /// Accumulate participation counts and classify code units.
    Localize,
    /// Resolve blocking configurations into concrete plans.
    Plan,
    /// Replay the labeled corpus under each plan and diff against control.
    Simulate {
        /// How blocked methods match stacks: anywhere in the stack, or
        /// the initiator frame only (sensitivity mode).
        #[arg(long, value_enum, default_value = "any-frame")]
        method_match: MethodMatchArg,
    },
    /// Aggregate corpus summaries, deciles, top units, annotations.
    Report {
        /// Manual-inspection annotation CSV to aggregate.
        #[arg(long, value_name = "FILE")]
        annotations: Option<PathBuf>,
    },
    /// Rename a method definition in a JS file so its calls fail.
    Rewrite {
        /// JS source file to rewrite.
        #[arg(long, value_name = "FILE")]
        script: PathBuf,
        /// Method name whose definitions get renamed.
        #[arg(long, value_name = "NAME")]
        method: String,
        /// Replacement identifier.
        #[arg(long, value_name = "ID", default_value = jsblock_core::rewrite::DEFAULT_REPLACEMENT)]
        replacement: String,
        /// Rewrite the file in place.
        #[arg(long, conflicts_with = "out")]
        in_place: bool,
        /// Print a machine-readable JSON summary to stdout.
        #[arg(long)]
        json: bool,
    },
    /// Run the embedded verification suite.
    Selftest,
}

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Label { normalize_query } => commands::label::run(&cli.globals, normalize_query),
        Command::Localize => commands::localize::run(&cli.globals),
        Command::Plan => commands::plan::run(&cli.globals),
        Command::Simulate { method_match } => {
            commands::simulate::run(&cli.globals, method_match.into())
        }
        Command::Report { ref annotations } => {
            commands::report::run(&cli.globals, annotations.as_deref())
        }
        Command::Rewrite { ref script, ref method, ref replacement, in_place, json } => {
            commands::rewrite::run(&cli.globals, script, method, replacement, in_place, json)
        }
        Command::Selftest => commands::selftest::run(&cli.globals),
    }
}
