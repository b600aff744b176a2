//! The `vcflow` command line.
//!
//! Exit codes: 0 correct, 1 task failure without a violated constraint,
//! 2 hard static violation or no feasible placement, 3 hard dynamic
//! violation, 4 usage, parse or I/O error. Soft violations never change the
//! exit code.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::constraint::catalog::{render_entry, render_table, CatalogName};
use crate::constraint::{CheckPoint, Verdict, ViolationReport};
use crate::daw::ClusterSpec;
use crate::engine::{self, cluster_from_toml, local_cluster, ArtifactStore, EngineConfig, Mode, RunOutcome, RunStatus};
use crate::lang::{self, Desugared};
use crate::sim::{self, FaultScript};

/// Exit code for usage, parse and I/O errors.
pub const USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "vcflow", version, about = "Run data analysis workflows under validity constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
}

#[derive(Debug, Args)]
struct Common {
    /// Workflow file (.vcw).
    workflow: PathBuf,
    /// Cluster description (TOML); defaults to this host.
    #[arg(long)]
    cluster: Option<PathBuf>,
    /// Engine configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    format: Format,
    /// Directory holding the workflow inputs; defaults to the workflow's directory.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Execution {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip static checks and planning admission.
    #[arg(long)]
    no_static_checks: bool,
    /// Keep attempt sandboxes for posthoc rechecks.
    #[arg(long)]
    keep_sandbox: bool,
    /// Sandbox root directory.
    #[arg(long)]
    sandbox: Option<PathBuf>,
    /// Where final outputs are copied.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Write the full run report (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the event log (JSON lines) here.
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check structure, static constraints and placement without running anything.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Take evidence from the cluster description instead of the local disk.
        #[arg(long)]
        simulated: bool,
    },
    /// Execute the workflow with real processes.
    Run(Execution),
    /// Execute the workflow on the simulated cluster.
    Simulate {
        #[command(flatten)]
        exec: Execution,
        /// Fault script (TOML).
        #[arg(long)]
        faults: Option<PathBuf>,
    },
    /// Show catalog classifications.
    Classify {
        /// Entry name such as `task/ends-within-limits`.
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        all: bool,
    },
    /// Describe the violations in a stored report.
    Explain { report: PathBuf },
    /// Flag suspicious contracts.
    Lint {
        workflow: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Re-evaluate a finished run's checks against its preserved artifacts.
    Recheck {
        workflow: PathBuf,
        report: PathBuf,
        /// Artifact directory; defaults to the sandbox recorded in the report.
        #[arg(long)]
        sandbox: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
}

/// A failure that ends the command with [`USAGE`].
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { USAGE } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(Usage(msg)) => {
            let _ = out.flush();
            eprintln!("error: {msg}");
            USAGE
        }
    }
}

fn dispatch(cmd: Command, out: &mut impl std::io::Write) -> Result<i32, Usage> {
    match cmd {
        Command::Validate { common, simulated } => {
            let (wf, cluster, mut config, dir) = load(&common)?;
            if simulated {
                config.mode = Mode::Simulated;
            }
            let o = engine::validate(&wf, &cluster, &config, &dir)?;
            emit(out, common.format, &o, false)?;
            Ok(o.exit_code)
        }
        Command::Run(exec) => {
            let (wf, cluster, config, dir) = prepare(&exec, Mode::Real)?;
            let o = engine::execute(&wf, &cluster, &config, &dir)?;
            finish(out, &exec, &o)
        }
        Command::Simulate { exec, faults } => {
            if exec.common.cluster.is_none() {
                return Err(Usage("simulate needs --cluster".into()));
            }
            let (wf, cluster, config, _) = prepare(&exec, Mode::Simulated)?;
            let faults = match faults {
                Some(p) => FaultScript::from_toml(&read(&p)?)?,
                None => FaultScript::default(),
            };
            let o = sim::simulate(&wf, &cluster, &config, &faults)?;
            finish(out, &exec, &o)
        }
        Command::Classify { name, all } => {
            let text = match (name, all) {
                (_, true) | (None, false) => render_table(),
                (Some(n), false) => render_entry(n.parse::<CatalogName>()?.entry()),
            };
            out.write_all(text.as_bytes())?;
            Ok(0)
        }
        Command::Explain { report } => {
            let reports = load_reports(&report)?;
            writeln!(out, "{}", engine::explain(&reports).trim_end())?;
            Ok(0)
        }
        Command::Lint { workflow, format } => {
            let doc = parse_file(&workflow)?;
            let warnings = lang::lint(&doc);
            match format {
                Format::Json => {
                    let items: Vec<_> = warnings
                        .iter()
                        .map(|w| serde_json::json!({"task": w.task, "line": w.span.line, "col": w.span.col, "message": w.message}))
                        .collect();
                    writeln!(out, "{}", serde_json::to_string_pretty(&items)?)?;
                }
                Format::Human if warnings.is_empty() => writeln!(out, "no warnings")?,
                Format::Human => {
                    for w in &warnings {
                        writeln!(out, "{}: {w}", workflow.display())?;
                    }
                }
            }
            Ok(0)
        }
        Command::Recheck { workflow, report, sandbox, format } => {
            let wf = lang::desugar(&parse_file(&workflow)?)?;
            let run: RunOutcome = serde_json::from_str(&read(&report)?)
                .map_err(|e| Usage(format!("{}: not a run report: {e}", report.display())))?;
            let root = sandbox
                .or_else(|| run.sandbox.clone())
                .ok_or_else(|| Usage("the report records no sandbox; pass --sandbox".into()))?;
            let store = ArtifactStore::open(&root)?;
            let r = engine::recheck(&run, &wf, &store);
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?,
                Format::Human => {
                    writeln!(out, "{} checks replayed, {} disagree", r.outcomes.len(), r.disagreements().count())?;
                    for d in r.disagreements() {
                        let task = d.task.as_ref().map(|t| t.to_string()).unwrap_or_else(|| "setup".into());
                        let attempt = d.attempt.map(|a| format!(", attempt {a}")).unwrap_or_default();
                        writeln!(out, "  {} ({task}{attempt}): live {:?}, posthoc {:?}", d.constraint, d.live, d.posthoc)?;
                    }
                    if !r.reports.is_empty() {
                        writeln!(out, "\n{}", engine::explain(&r.reports).trim_end())?;
                    }
                }
            }
            Ok(if r.agrees() { 0 } else { 3 })
        }
    }
}

fn read(p: &Path) -> Result<String, Usage> {
    std::fs::read_to_string(p).map_err(|e| Usage(format!("{}: {e}", p.display())))
}

fn parse_file(p: &Path) -> Result<lang::WorkflowDocument, Usage> {
    let text = read(p)?;
    lang::parse(&text).map_err(|e| Usage(e.render(&p.display().to_string())))
}

fn load(c: &Common) -> Result<(Desugared, ClusterSpec, EngineConfig, PathBuf), Usage> {
    let doc = parse_file(&c.workflow)?;
    let wf = lang::desugar(&doc).map_err(|e| Usage(format!("{}: {e}", c.workflow.display())))?;
    let cluster = match &c.cluster {
        Some(p) => cluster_from_toml(&read(p)?).map_err(|e| Usage(format!("{}: {e}", p.display())))?,
        None => local_cluster(),
    };
    let mut config = match &c.config {
        Some(p) => EngineConfig::from_toml(&read(p)?).map_err(|e| Usage(format!("{}: {e}", p.display())))?,
        None => EngineConfig::default(),
    };
    if let Some(d) = &c.data_dir {
        config.data_dir = Some(d.clone());
    }
    let dir = c.workflow.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = if dir.as_os_str().is_empty() { PathBuf::from(".") } else { dir };
    Ok((wf, cluster, config, dir))
}

fn prepare(e: &Execution, mode: Mode) -> Result<(Desugared, ClusterSpec, EngineConfig, PathBuf), Usage> {
    let (wf, cluster, mut config, dir) = load(&e.common)?;
    if mode == Mode::Simulated && e.common.config.is_none() {
        config = EngineConfig {
            data_dir: config.data_dir,
            ..EngineConfig::simulated()
        };
    }
    config.mode = mode;
    if let Some(s) = e.seed {
        config.seed = s;
    }
    if e.no_static_checks {
        config.static_checks = false;
    }
    if e.keep_sandbox {
        config.keep_sandbox = true;
    }
    if let Some(s) = &e.sandbox {
        config.sandbox_root = Some(s.clone());
    }
    if let Some(o) = &e.output_dir {
        config.output_dir = Some(o.clone());
    }
    if let Some(ev) = &e.events {
        config.event_log = Some(ev.clone());
    }
    Ok((wf, cluster, config, dir))
}

fn finish(out: &mut impl std::io::Write, e: &Execution, o: &RunOutcome) -> Result<i32, Usage> {
    if let Some(p) = &e.report {
        std::fs::write(p, serde_json::to_string_pretty(o)?).map_err(|err| Usage(format!("{}: {err}", p.display())))?;
    }
    emit(out, e.common.format, o, true)?;
    Ok(o.exit_code)
}

fn emit(out: &mut impl std::io::Write, format: Format, o: &RunOutcome, ran: bool) -> Result<(), Usage> {
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(o)?)?,
        Format::Human => out.write_all(human(o, ran).as_bytes())?,
    }
    Ok(())
}

/// The human summary of a run: status, the first erroneous step, then every report.
pub fn human(o: &RunOutcome, ran: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "workflow {}: {}", o.workflow, o.status);
    if let RunStatus::Failed { first_erroneous_step } = o.status {
        let at: Vec<&ViolationReport> = o
            .reports
            .iter()
            .filter(|r| r.at == CheckPoint::Step(first_erroneous_step) && r.is_fatal())
            .collect();
        let _ = writeln!(s, "\n>>> FIRST ERRONEOUS STEP {first_erroneous_step} <<<");
        for r in at {
            let file = r.file.as_deref().map(|f| format!(" file {f}")).unwrap_or_default();
            let task = r.task.as_ref().map(|t| format!(" task {t}")).unwrap_or_default();
            let what = r.detail.as_deref().unwrap_or(&r.formula);
            let _ = writeln!(s, "    {}{task}{file}: {what}", r.constraint);
        }
    }
    if ran {
        let attempts = o.records.attempt_count();
        let _ = writeln!(s, "{attempts} attempts, {:.3} compute-seconds", o.records.spend());
    }
    if let Some(sv) = &o.savings {
        let _ = writeln!(
            s,
            "savings {:.3} s (counterfactual without static checks: {})",
            sv.savings_s,
            sv.counterfactual.as_ref().map(|c| c.to_string()).unwrap_or_else(|| "not run".into())
        );
    }
    if let Some(p) = &o.sandbox {
        let _ = writeln!(s, "sandbox kept at {}", p.display());
    }
    let warned = o.reports.iter().filter(|r| r.verdict == Verdict::Warned).count();
    if !o.reports.is_empty() {
        let _ = writeln!(s, "\n{} reports ({warned} warnings):\n", o.reports.len());
        let _ = writeln!(s, "{}", engine::explain(&o.reports).trim_end());
    }
    s
}

/// Reads a stored report: a full run report, a bare list of violations, or a single violation.
fn load_reports(p: &Path) -> Result<Vec<ViolationReport>, Usage> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Stored {
        Run(Box<RunOutcome>),
        List(Vec<ViolationReport>),
        One(Box<ViolationReport>),
    }
    let text = read(p)?;
    match serde_json::from_str::<Stored>(&text) {
        Ok(Stored::Run(r)) => Ok(r.reports),
        Ok(Stored::List(l)) => Ok(l),
        Ok(Stored::One(r)) => Ok(vec![*r]),
        Err(_) => Err(Usage(format!("{}: not a report file", p.display()))),
    }
}
