//! Command-line frontend: `check`, `counterexample`, `random`, `serve`.
//!
//! Machine-readable results go to stdout as `key=value` lines (or JSON with
//! `--json`); diagnostics go to stderr. Exit codes are listed in [`exit`].

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

use crate::ingest::{self, IndexBase, ParseError, RandomModelSpec, Report, Timing};
use crate::model::{Comparison, Dtmc, ReachabilityProperty};
use crate::scc::decompose_sccs;
use crate::search::{Budget, SearchConfig, SearchMethod, DEFAULT_MAX_STEPS};
use crate::service::{self, ServiceConfig};
use crate::session::{RefinePolicy, RefinementSession, SessionError, SessionStatus};
use crate::subsystem::EdgeMode;
use crate::{fmt_prob, reachability};

pub mod exit {
    /// `check`: the property holds. Other subcommands: success.
    pub const HOLDS: i32 = 0;
    pub const SUCCESS: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const VIOLATED: i32 = 2;
    pub const NO_COUNTEREXAMPLE: i32 = 3;
    pub const BUDGET_EXHAUSTED: i32 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "cexforge", version, about = "Critical-subsystem counterexamples for DTMCs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the reachability probability and the verdict.
    Check(CheckArgs),
    /// Generate a critical subsystem for a violated property.
    Counterexample(CexArgs),
    /// Write a seeded random benchmark model.
    Random(RandomArgs),
    /// Run the local HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Transition file.
    #[arg(long)]
    pub tra: Option<PathBuf>,
    /// Label file.
    #[arg(long)]
    pub lab: Option<PathBuf>,
    /// Target label.
    #[arg(long)]
    pub target: Option<String>,
    /// Bound for P<=λ.
    #[arg(long, conflicts_with = "lt")]
    pub le: Option<f64>,
    /// Bound for P<λ.
    #[arg(long)]
    pub lt: Option<f64>,
    /// State indices in the files start at 1.
    #[arg(long)]
    pub one_based: bool,
    /// Emit the JSON report instead of key=value lines.
    #[arg(long)]
    pub json: bool,
    /// TOML file with defaults; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refine {
    None,
    Auto,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct CexArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub method: Option<CliMethod>,
    #[arg(long, value_enum)]
    pub refine: Option<Refine>,
    /// Search steps per search run.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Wall-clock limit per search run, in milliseconds.
    #[arg(long)]
    pub max_time_ms: Option<u64>,
    /// Add every view edge between subsystem vertices, not only walked edges.
    #[arg(long)]
    pub closure: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the subsystem as a `.tra` file.
    #[arg(long)]
    pub subsystem_out: Option<PathBuf>,
    /// Write the exported session JSON.
    #[arg(long)]
    pub session_out: Option<PathBuf>,
    /// Report wall time as 0 for reproducible output.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CliMethod {
    Global,
    Local,
}

impl From<CliMethod> for SearchMethod {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::Global => SearchMethod::Global,
            CliMethod::Local => SearchMethod::Local,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RandomArgs {
    #[arg(long)]
    pub states: usize,
    #[arg(long, default_value_t = 3)]
    pub out_degree: usize,
    #[arg(long, default_value_t = 0.3)]
    pub scc_bias: f64,
    #[arg(long, default_value_t = 0.05)]
    pub target_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix; writes `<prefix>.tra` and `<prefix>.lab`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: SocketAddr,
    /// Directory with `<name>.tra`/`<name>.lab` pairs sessions may refer to.
    #[arg(long)]
    pub model_dir: Option<PathBuf>,
    /// Idle seconds before a session is evicted.
    #[arg(long, default_value_t = 3600)]
    pub session_ttl_secs: u64,
}

/// Optional TOML defaults for `check` and `counterexample`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub tra: Option<PathBuf>,
    pub lab: Option<PathBuf>,
    pub target: Option<String>,
    pub le: Option<f64>,
    pub lt: Option<f64>,
    pub one_based: Option<bool>,
    pub method: Option<CliMethod>,
    pub refine: Option<Refine>,
    pub max_steps: Option<usize>,
    pub max_time_ms: Option<u64>,
    pub closure: Option<bool>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required option --{0}")]
    Missing(&'static str),
    #[error("give exactly one of --le and --lt")]
    Bound,
    #[error("threshold must lie in [0, 1] (got {0})")]
    Threshold(f64),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Check(#[from] reachability::CheckError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Random(#[from] ingest::RandomSpecError),
    #[error("write failed: {0}")]
    Output(#[from] std::io::Error),
}

/// Settings after merging the config file under the flags.
#[derive(Debug, Clone)]
struct Resolved {
    tra: PathBuf,
    lab: PathBuf,
    base: IndexBase,
    prop: ReachabilityProperty,
}

fn load_config(path: &Path) -> Result<CliConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn resolve(args: &ModelArgs, file: &CliConfig) -> Result<Resolved, CliError> {
    let tra = args.tra.clone().or_else(|| file.tra.clone()).ok_or(CliError::Missing("tra"))?;
    let lab = args.lab.clone().or_else(|| file.lab.clone()).ok_or(CliError::Missing("lab"))?;
    let target = args.target.clone().or_else(|| file.target.clone()).ok_or(CliError::Missing("target"))?;
    let (comparison, threshold) = match (args.le, args.lt) {
        (Some(x), None) => (Comparison::LessEq, x),
        (None, Some(x)) => (Comparison::Less, x),
        (Some(_), Some(_)) => return Err(CliError::Bound),
        (None, None) => match (file.le, file.lt) {
            (Some(x), None) => (Comparison::LessEq, x),
            (None, Some(x)) => (Comparison::Less, x),
            (None, None) => return Err(CliError::Missing("le")),
            _ => return Err(CliError::Bound),
        },
    };
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Threshold(threshold));
    }
    let one_based = args.one_based || file.one_based.unwrap_or(false);
    Ok(Resolved {
        tra,
        lab,
        base: if one_based { IndexBase::One } else { IndexBase::Zero },
        prop: ReachabilityProperty::new(comparison, threshold, target),
    })
}

fn read_model(r: &Resolved) -> Result<Dtmc, CliError> {
    let open = |path: &Path| {
        std::fs::File::open(path)
            .map(std::io::BufReader::new)
            .map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })
    };
    let model = ingest::parse_tra(open(&r.tra)?, r.base).map_err(|source| CliError::Parse {
        path: r.tra.clone(),
        source,
    })?;
    ingest::parse_lab(open(&r.lab)?, model, r.base).map_err(|source| CliError::Parse {
        path: r.lab.clone(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = args.model.config.as_deref().map(load_config).transpose()?.unwrap_or_default();
    let r = resolve(&args.model, &file)?;
    let model = read_model(&r)?;
    let verdict = reachability::check_property(&model, &r.prop)?;
    let word = if verdict.is_violated() { "VIOLATED" } else { "HOLDS" };
    if args.model.json {
        let body = serde_json::json!({
            "property": r.prop.to_string(),
            "prob": verdict.prob(),
            "verdict": word.to_lowercase(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&body).expect("json"))?;
    } else {
        writeln!(out, "prob={} verdict={}", fmt_prob(verdict.prob()), word)?;
    }
    Ok(if verdict.is_violated() { exit::VIOLATED } else { exit::HOLDS })
}

fn cmd_counterexample(args: &CexArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let file = args.model.config.as_deref().map(load_config).transpose()?.unwrap_or_default();
    let r = resolve(&args.model, &file)?;
    let model = read_model(&r)?;
    let config = SearchConfig {
        method: args.method.or(file.method).map_or(SearchMethod::Global, SearchMethod::from),
        budget: Budget {
            max_steps: args.max_steps.or(file.max_steps).unwrap_or(DEFAULT_MAX_STEPS),
            max_time: args.max_time_ms.or(file.max_time_ms).map(Duration::from_millis),
        },
        edge_mode: if args.closure || file.closure.unwrap_or(false) {
            EdgeMode::StateClosure
        } else {
            EdgeMode::Tracked
        },
    };
    let refine = args.refine.or(file.refine).unwrap_or(Refine::None);

    let mut session = RefinementSession::create(Arc::new(model), r.prop.clone(), config)?;
    if session.status() != SessionStatus::Satisfied {
        session.run_search()?;
        if session.status() == SessionStatus::Critical {
            match refine {
                Refine::None => {}
                Refine::Auto => {
                    session.auto_refine(RefinePolicy::MassGreedy)?;
                }
                Refine::Full => {
                    session.auto_refine(RefinePolicy::ExpandAll)?;
                }
            }
        }
    }

    let timing = if args.deterministic { Timing::Fixed } else { Timing::Measured };
    let report = Report::from_session(&session, timing);
    let text = if args.model.json { report.to_json() } else { report.to_text() };
    match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            writeln!(out, "prob={} verdict={}", fmt_prob(report.model_prob), report.verdict_word())?;
            if let Some(s) = &report.subsystem {
                writeln!(out, "states={} transitions={} prob={}", s.concrete_states, s.transitions, fmt_prob(s.prob))?;
            }
        }
        None => out.write_all(text.as_bytes())?,
    }
    if let Some(path) = &args.subsystem_out {
        write_file(path, &session.subsystem_tra())?;
    }
    if let Some(path) = &args.session_out {
        write_file(path, &session.export().to_json())?;
    }

    Ok(match session.status() {
        SessionStatus::Satisfied => {
            writeln!(err, "no counterexample: property holds")?;
            exit::NO_COUNTEREXAMPLE
        }
        SessionStatus::BudgetExhausted => {
            writeln!(err, "search budget exhausted before the subsystem became critical")?;
            exit::BUDGET_EXHAUSTED
        }
        SessionStatus::Critical | SessionStatus::Searching => exit::SUCCESS,
    })
}

fn cmd_random(args: &RandomArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let spec = RandomModelSpec {
        num_states: args.states,
        out_degree: args.out_degree,
        scc_bias: args.scc_bias,
        target_fraction: args.target_fraction,
        seed: args.seed,
    };
    let model = ingest::generate_random_dtmc(&spec)?;
    let prefix = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("random-n{}-s{}", args.states, args.seed)));
    let with_ext = |ext: &str| {
        let mut p = prefix.clone().into_os_string();
        p.push(ext);
        PathBuf::from(p)
    };
    let (tra_path, lab_path) = (with_ext(".tra"), with_ext(".lab"));
    write_file(&tra_path, &ingest::tra_string(&model, IndexBase::Zero))?;
    write_file(&lab_path, &ingest::lab_string(&model, IndexBase::Zero))?;
    let nontrivial = decompose_sccs(&model).iter().filter(|c| c.nontrivial).count();
    writeln!(
        out,
        "states={} transitions={} nontrivial_sccs={} tra={} lab={}",
        model.num_states(),
        model.num_transitions(),
        nontrivial,
        tra_path.display(),
        lab_path.display()
    )?;
    Ok(exit::SUCCESS)
}

fn cmd_serve(args: &ServeArgs) -> Result<i32, CliError> {
    let config = ServiceConfig {
        session_ttl: Duration::from_secs(args.session_ttl_secs),
        model_dir: args.model_dir.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(service::serve(args.bind, config))?;
    Ok(exit::SUCCESS)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = err.flush();
                    exit::SUCCESS
                }
                _ => exit::ERROR,
            };
        }
    };
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Counterexample(a) => cmd_counterexample(a, out, err),
        Command::Random(a) => cmd_random(a, out),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit::ERROR
        }
    }
}
