//! `carbondef` command-line front end.
//!
//! Exit codes: 0 on success, 2 on invalid input or arguments, 3 on IO or
//! network failures. Output is written only once the whole run succeeded.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use carbondef::exec::Execution;
use carbondef::ingest::config::sha256_hex;
use carbondef::ingest::fetch::{cache_dir_from_env, DEFAULT_CACHE_DIR};
use carbondef::ingest::{
    load_config, parse_ledger, parse_usage_trace, IngestError, OutputFormat, RunConfig,
    TraceFormat, Window,
};
use carbondef::pipeline::{
    resolve_intensity, run_embodied, run_emissions, run_estimate, run_full, Overrides,
};
use carbondef::report::{Metadata, Report, ReportKind};
use carbondef::{Ledger, UsageTrace};

#[derive(Parser)]
#[command(
    name = "carbondef",
    version,
    about = "Operational and embodied carbon estimates for software workloads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Energy per interval from a usage trace.
    Estimate(TraceArgs),
    /// Operational emissions: energy x PUE x grid intensity.
    Emissions(TraceArgs),
    /// Embodied emissions attributed from a ledger.
    Embodied(EmbodiedArgs),
    /// Operational + embodied emissions and the per-unit score.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Overrides the config's `output`.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV, or JSON when the file ends in `.json`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    strict_coverage: bool,
    #[arg(long)]
    clamp_usage: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EmbodiedArgs {
    #[arg(long)]
    ledger: PathBuf,
    #[arg(long)]
    consumer: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    ledger: PathBuf,
    /// Only this consumer's embodied share counts; default is every consumer.
    #[arg(long)]
    consumer: Option<String>,
    #[arg(long)]
    strict_coverage: bool,
    #[arg(long)]
    clamp_usage: bool,
    #[command(flatten)]
    output: OutputArgs,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<carbondef::Error> for Failure {
    fn from(e: carbondef::Error) -> Self {
        Failure {
            code: if e.is_io() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        carbondef::Error::from(e).into()
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| io_failure(path, e))
}

fn load_trace(path: &Path) -> Result<(UsageTrace, String), Failure> {
    let bytes = read(path)?;
    let trace = parse_usage_trace(bytes.as_slice(), TraceFormat::from_path(path))
        .map_err(|e| prefix(e.into(), path))?;
    Ok((trace, sha256_hex(&bytes)))
}

fn load_ledger(path: &Path) -> Result<(Ledger, String), Failure> {
    let bytes = read(path)?;
    let ledger = parse_ledger(bytes.as_slice()).map_err(|e| prefix(e.into(), path))?;
    Ok((ledger, sha256_hex(&bytes)))
}

fn load_run_config(path: &Path) -> Result<RunConfig, Failure> {
    load_config(path).map_err(|e| prefix(e.into(), path))
}

fn prefix(mut f: Failure, path: &Path) -> Failure {
    if f.code == 2 {
        f.message = format!("{}: {}", path.display(), f.message);
    }
    f
}

fn metadata(
    kind: ReportKind,
    config: Option<&RunConfig>,
    trace: Option<(&UsageTrace, &str)>,
    ledger_digest: Option<&str>,
) -> Metadata {
    let mut m = Metadata::new(kind);
    m.config_digest = config.map(|c| c.digest.clone());
    if let Some((t, digest)) = trace {
        m.trace_digest = Some(digest.to_string());
        m.trace_window = t.window().map(|(start, end)| Window { start, end });
    }
    m.ledger_digest = ledger_digest.map(str::to_string);
    m
}

fn format_of(output: &OutputArgs, config: Option<&RunConfig>) -> OutputFormat {
    match (output.format, config) {
        (Some(Format::Json), _) => OutputFormat::Json,
        (Some(Format::Csv), _) => OutputFormat::Csv,
        (None, Some(c)) => c.output,
        (None, None) => OutputFormat::Json,
    }
}

/// Writes to a sibling temp file and renames it into place.
fn write_output(report: &Report, format: OutputFormat, out: Option<&Path>) -> Result<(), Failure> {
    let text = match format {
        OutputFormat::Json => report.to_json(),
        OutputFormat::Csv => report.to_csv(),
    };
    match out {
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
            std::fs::write(&tmp, text).map_err(|e| io_failure(&tmp, e))?;
            std::fs::rename(&tmp, path).map_err(|e| {
                let _ = std::fs::remove_file(&tmp);
                io_failure(path, e)
            })
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let exec = Execution::default();
    let cache_dir = cache_dir_from_env(DEFAULT_CACHE_DIR);
    let (report, format, out) = match cli.command {
        Command::Estimate(a) => {
            let config = load_run_config(&a.config)?;
            let (trace, digest) = load_trace(&a.trace)?;
            let meta = metadata(
                ReportKind::Estimate,
                Some(&config),
                Some((&trace, &digest)),
                None,
            );
            let overrides = Overrides {
                strict_coverage: a.strict_coverage,
                clamp_usage: a.clamp_usage,
            };
            let report = run_estimate(&config, &trace, meta, overrides, exec)?;
            (report, format_of(&a.output, Some(&config)), a.output.out)
        }
        Command::Emissions(a) => {
            let config = load_run_config(&a.config)?;
            let (trace, digest) = load_trace(&a.trace)?;
            let intensity = resolve_intensity(&config, &trace, &cache_dir)?;
            let meta = metadata(
                ReportKind::Emissions,
                Some(&config),
                Some((&trace, &digest)),
                None,
            );
            let overrides = Overrides {
                strict_coverage: a.strict_coverage,
                clamp_usage: a.clamp_usage,
            };
            let report = run_emissions(&config, &trace, &intensity, meta, overrides, exec)?;
            (report, format_of(&a.output, Some(&config)), a.output.out)
        }
        Command::Embodied(a) => {
            let (ledger, digest) = load_ledger(&a.ledger)?;
            let meta = metadata(ReportKind::Embodied, None, None, Some(&digest));
            let report = run_embodied(&ledger, a.consumer.as_deref(), meta, exec);
            (report, format_of(&a.output, None), a.output.out)
        }
        Command::Report(a) => {
            let config = load_run_config(&a.config)?;
            let (trace, trace_digest) = load_trace(&a.trace)?;
            let (ledger, ledger_digest) = load_ledger(&a.ledger)?;
            let intensity = resolve_intensity(&config, &trace, &cache_dir)?;
            let meta = metadata(
                ReportKind::Report,
                Some(&config),
                Some((&trace, &trace_digest)),
                Some(&ledger_digest),
            );
            let overrides = Overrides {
                strict_coverage: a.strict_coverage,
                clamp_usage: a.clamp_usage,
            };
            let report = run_full(
                &config,
                &trace,
                &intensity,
                &ledger,
                a.consumer.as_deref(),
                meta,
                overrides,
                exec,
            )?;
            (report, format_of(&a.output, Some(&config)), a.output.out)
        }
    };
    for w in &report.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    for gap in &report.diagnostics.coverage_gaps {
        eprintln!(
            "warning: no intensity for [{}, {}), {} kWh excluded",
            gap.start,
            gap.start + gap.duration_s,
            gap.kwh
        );
    }
    write_output(&report, format, out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
