//! `codeshift` command-line driver.
//!
//! Every subcommand reads one JSON run config (published training defaults when
//! absent), applies flag overrides, and writes into
//! `<work_dir>/<config hash>/`. Exit codes: 0 success, 1 usage,
//! 2 validation or missing artifact, 3 runtime failure.

pub mod config;
pub mod layout;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use codeshift::corpus::ShiftKind;
use codeshift::corpus::VALIDATION;
use codeshift::synth;
use codeshift::tasks::Task;
use codeshift::uncertainty::Method;

use config::{Effective, RunConfig};
use layout::Layout;
use pipeline::{Cc, Cs, FilterArgs, Selection};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<codeshift::Error> for CliError {
    fn from(e: codeshift::Error) -> Self {
        match &e {
            codeshift::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                CliError::Validation(e.to_string())
            }
            _ if e.is_validation() => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "codeshift", version, about = "Uncertainty estimation for code models under distribution shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's work directory.
    #[arg(long)]
    work_dir: Option<PathBuf>,
    /// Shift kind; every configured one when omitted.
    #[arg(long)]
    shift: Option<ShiftKind>,
}

#[derive(Debug, Args)]
struct TaskArg {
    /// Task; both when omitted.
    #[arg(long)]
    task: Option<Task>,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// vanilla, temp, mcdropout, mmutant, dissector or all.
    #[arg(long, default_value = "all")]
    method: String,
    /// Restricts mmutant (GF, WS, NS, NAI) or dissector (linear, log, exp).
    #[arg(long)]
    variant: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assign corpus files to train, validation and test splits.
    MakeSplits {
        #[command(flatten)]
        common: Common,
    },
    /// Extract path contexts (cs) and CBOW windows (cc) for every split.
    Extract {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
    },
    /// Train the task model on the train split.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
    },
    /// Score validation and test splits with the uncertainty estimators.
    Score {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
        #[command(flatten)]
        method: MethodArgs,
    },
    /// Error/success and OOD metrics from the persisted scores.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
    },
    /// Threshold sweep (count and AUC over retained samples).
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
        #[command(flatten)]
        method: MethodArgs,
        /// Only this split.
        #[arg(long)]
        split: Option<String>,
    },
    /// Accept or reject inputs by confidence.
    Filter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value = VALIDATION)]
        split: String,
        #[arg(long)]
        threshold: f64,
    },
    /// Merge every evaluated (shift, task) into one report.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        task: TaskArg,
    },
    /// Generate the synthetic two-style corpus, its manifests and a config.
    SynthCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn effective(common: &Common) -> Result<Effective, CliError> {
    let (mut cfg, base) = RunConfig::load(common.config.as_deref())?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = &common.work_dir {
        let cwd = std::env::current_dir().map_err(|e| CliError::Runtime(format!("no working directory: {e}")))?;
        cfg.work_dir = cwd.join(w);
    }
    cfg.finalize(base)
}

fn shifts(eff: &Effective, common: &Common) -> Result<Vec<ShiftKind>, CliError> {
    match common.shift {
        Some(s) => Ok(vec![s]),
        None if eff.config.manifests.is_empty() => {
            Err(CliError::Validation("no manifests configured; set `manifests` in the config".into()))
        }
        None => Ok(eff.config.manifests.keys().copied().collect()),
    }
}

fn tasks(t: &TaskArg) -> Vec<Task> {
    t.task.map(|t| vec![t]).unwrap_or_else(|| Task::ALL.to_vec())
}

macro_rules! per_task {
    ($task:expr, $f:ident($($arg:expr),*)) => {
        match $task {
            Task::Cs => pipeline::$f::<Cs>($($arg),*),
            Task::Cc => pipeline::$f::<Cc>($($arg),*),
        }
    };
}

fn setup(common: &Common) -> Result<(Effective, Layout, Vec<ShiftKind>), CliError> {
    let eff = effective(common)?;
    let layout = Layout::new(eff.run_dir());
    let shifts = shifts(&eff, common)?;
    log::info!("config {} -> {}", eff.hash, layout.root().display());
    Ok((eff, layout, shifts))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::MakeSplits { common } => {
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                pipeline::make_splits(&eff, &layout, s)?;
            }
        }
        Command::Extract { common, task } => {
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                for t in tasks(&task) {
                    per_task!(t, extract(&eff, &layout, s))?;
                }
            }
        }
        Command::Train { common, task } => {
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                for t in tasks(&task) {
                    per_task!(t, train_model(&eff, &layout, s))?;
                }
            }
        }
        Command::Score { common, task, method } => {
            let sel = Selection::parse(&method.method, method.variant)?;
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                for t in tasks(&task) {
                    per_task!(t, score(&eff, &layout, s, &sel))?;
                }
            }
        }
        Command::Eval { common, task } => {
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                for t in tasks(&task) {
                    pipeline::eval(&eff, &layout, s, t)?;
                }
            }
        }
        Command::Sweep { common, task, method, split } => {
            let sel = Selection::parse(&method.method, method.variant)?;
            let (eff, layout, shifts) = setup(&common)?;
            for s in shifts {
                for t in tasks(&task) {
                    pipeline::sweep(&eff, &layout, s, t, &sel, split.as_deref())?;
                }
            }
        }
        Command::Filter { common, task, method, variant, split, threshold } => {
            let (eff, layout, shifts) = setup(&common)?;
            let args = FilterArgs { method, variant: variant.as_deref(), split: &split, threshold };
            for s in shifts {
                per_task!(task, filter(&eff, &layout, s, &args))?;
            }
        }
        Command::Report { common, task } => {
            let (eff, layout, shifts) = setup(&common)?;
            pipeline::report(&eff, &layout, &shifts, &tasks(&task))?;
        }
        Command::SynthCorpus { out, seed } => synth_corpus(&out, seed)?,
    }
    Ok(())
}

fn synth_corpus(out: &Path, seed: u64) -> Result<(), CliError> {
    let summary = synth::generate_corpus(out, seed)?;
    let mut cfg = RunConfig { seed, ..RunConfig::default() };
    for (kind, path) in &summary.manifests {
        let rel = path.strip_prefix(out).unwrap_or(path).to_path_buf();
        cfg.manifests.insert(*kind, rel);
    }
    let mut text = serde_json::to_string_pretty(&cfg).expect("config serializes");
    text.push('\n');
    layout::write(&out.join("config.json"), text)?;
    println!("{} files, {} manifests, config {}", summary.files, summary.manifests.len(), out.join("config.json").display());
    Ok(())
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
