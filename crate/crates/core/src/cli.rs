//! The `agsr` command-line driver.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage or config
//! error, 3 backend failure. Errors go to stderr as one JSON object per
//! line; results go to stdout or files.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::corpus::{check_manifest, load_dataset, CorpusError};
use crate::metrics::{read_ratings_jsonl, MetricsError, TverskyParams};
use crate::pipeline::{execute, load_run, ConfigError, RunConfig, RunError, RunOptions};
use crate::report::{
    agreement_report, compare_runs, render_agreement_markdown, render_comparison_markdown, render_csv,
    render_markdown, score_run, write_report_files, EvaluationReport, ReportError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "agsr", version, about = "Attribute-grounded artwork emotion evaluation harness")]
pub struct Cli {
    /// Overrides the run seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset manifest and list every problem found.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Execute (or resume) a configured run.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue a partial run in `--out`, skipping completed records.
        #[arg(long)]
        resume: bool,
        /// Render and audit all prompts without querying any backend.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        concurrency: Option<usize>,
        /// Run only the first N artworks.
        #[arg(long)]
        limit: Option<usize>,
        /// Stop after writing N records, leaving the run resumable.
        #[arg(long)]
        max_records: Option<usize>,
    },
    /// Score a completed run against gold data.
    Score {
        #[arg(long)]
        run: PathBuf,
        /// Gold dataset manifest.
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        /// Defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render several scored reports as one set of tables.
    Report {
        /// `report.json` files or directories holding one.
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-metric deltas B - A between two scored reports.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Directory for comparison.md; stdout only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inter-annotator agreement table from a JSON-lines ratings file.
    Agreement {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure reported on stderr as a single JSON line.
#[derive(Debug, Serialize)]
pub struct CliError {
    #[serde(skip)]
    pub code: i32,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item_id: Option<String>,
}

impl CliError {
    fn new(code: i32, error: &'static str, message: impl ToString) -> Self {
        Self {
            code,
            error,
            message: message.to_string(),
            key: None,
            item_id: None,
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(EXIT_DATA, "io", format!("{}: {e}", path.display()))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Key { ref key, .. } => CliError {
                key: Some(key.clone()),
                ..Self::new(EXIT_USAGE, "config", &e)
            },
            ConfigError::Io { .. } => Self::new(EXIT_DATA, "io", e),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::new(EXIT_DATA, "dataset", e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        let item_id = match &e {
            MetricsError::InsufficientRaters { item_id, .. } | MetricsError::DuplicateRating { item_id, .. } => {
                Some(item_id.clone())
            }
            _ => None,
        };
        CliError {
            item_id,
            ..Self::new(EXIT_DATA, "metrics", e)
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::Corpus(c) => c.into(),
            RunError::Backend { .. } | RunError::BackendSetup { .. } => Self::new(EXIT_BACKEND, "backend", e),
            RunError::Template(_) => Self::new(EXIT_DATA, "template", e),
            _ => Self::new(EXIT_DATA, "run", e),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Run(r) => r.into(),
            ReportError::Metrics(m) => m.into(),
            _ => Self::new(EXIT_DATA, "report", e),
        }
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("output serializes"));
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn read_report(path: &Path) -> Result<EvaluationReport, CliError> {
    let path = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(EXIT_DATA, "report", format!("{}: {e}", path.display())))
}

fn cmd_validate(manifest: &Path) -> Result<i32, CliError> {
    let issues = check_manifest(manifest)?;
    #[derive(Serialize)]
    struct Out {
        valid: bool,
        violations: Vec<String>,
    }
    print_json(&Out {
        valid: issues.is_empty(),
        violations: issues.iter().map(ToString::to_string).collect(),
    });
    Ok(if issues.is_empty() { EXIT_OK } else { EXIT_DATA })
}

fn cmd_run(
    config: &Path,
    opts: RunOptions,
    seed: Option<u64>,
    concurrency: Option<usize>,
    limit: Option<usize>,
) -> Result<i32, CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(c) = concurrency {
        cfg.limits.concurrency = c;
    }
    if limit.is_some() {
        cfg.dataset.limit = limit;
    }
    cfg.validate()?;
    let dry_run = opts.dry_run;
    let summary = execute(&cfg, &opts)?;
    print_json(&summary);
    Ok(if dry_run && summary.dry_run_violations > 0 { EXIT_DATA } else { EXIT_OK })
}

fn cmd_score(run: &Path, gold: &Path, alpha: f64, beta: f64, out: Option<&Path>) -> Result<i32, CliError> {
    let params = TverskyParams::new(alpha, beta).map_err(|e| CliError::new(EXIT_USAGE, "usage", e))?;
    let artifact = load_run(run)?;
    let dataset = load_dataset(gold)?;
    let report = score_run(&artifact, &dataset, params)?;
    write_report_files(&report, out.unwrap_or(run))?;
    print!("{}", render_markdown(std::slice::from_ref(&report))?);
    Ok(EXIT_OK)
}

fn cmd_report(paths: &[PathBuf], out: Option<&Path>) -> Result<i32, CliError> {
    let reports = paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>, _>>()?;
    let md = render_markdown(&reports)?;
    if let Some(dir) = out {
        write(&dir.join("report.md"), &md)?;
        write(&dir.join("report.csv"), &render_csv(&reports)?)?;
    }
    print!("{md}");
    Ok(EXIT_OK)
}

fn cmd_compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<i32, CliError> {
    let cmp = compare_runs(&read_report(a)?, &read_report(b)?)?;
    let md = render_comparison_markdown(&cmp);
    if let Some(dir) = out {
        write(&dir.join("comparison.md"), &md)?;
    }
    print!("{md}");
    Ok(EXIT_OK)
}

fn cmd_agreement(ratings: &Path, out: Option<&Path>) -> Result<i32, CliError> {
    let file = File::open(ratings).map_err(|e| CliError::io(ratings, e))?;
    let sections = read_ratings_jsonl(BufReader::new(file))?;
    let rows = agreement_report(&sections)?;
    let md = render_agreement_markdown(&rows);
    if let Some(dir) = out {
        write(&dir.join("agreement.md"), &md)?;
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
        write(&dir.join("agreement.json"), &json)?;
    }
    print!("{md}");
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { manifest } => cmd_validate(&manifest),
        Command::Run {
            config,
            out,
            resume,
            dry_run,
            concurrency,
            limit,
            max_records,
        } => {
            let opts = RunOptions {
                out_dir: out,
                resume,
                dry_run,
                max_records,
            };
            cmd_run(&config, opts, cli.seed, concurrency, limit)
        }
        Command::Score {
            run,
            gold,
            alpha,
            beta,
            out,
        } => cmd_score(&run, &gold, alpha, beta, out.as_deref()),
        Command::Report { reports, out } => cmd_report(&reports, out.as_deref()),
        Command::Compare { a, b, out } => cmd_compare(&a, &b, out.as_deref()),
        Command::Agreement { ratings, out } => cmd_agreement(&ratings, out.as_deref()),
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return EXIT_OK;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::to_string(&CliError::new(EXIT_USAGE, "usage", first)).expect("error serializes"));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", serde_json::to_string(&e).expect("error serializes"));
            e.code
        }
    }
}
