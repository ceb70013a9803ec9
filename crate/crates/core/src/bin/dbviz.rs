//! Command-line entry point: ingestion → validation → compile → check →
//! render. Exit codes: 0 success/faithful, 1 diagnostics or unfaithful,
//! 2 I/O or structural error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dbviz::pipeline::{self, PipelineError, PipelineOptions};

#[derive(Parser)]
#[command(name = "dbviz", version, about = "Compile, check, and render multi-table database visualizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the spec, load and validate the data, and plan compilation.
    Check(CommonArgs),
    /// Compile through the faithfulness report.
    Compile(CommonArgs),
    /// Compile and render all artifacts (SVG plus report).
    Render(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Visualization spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Directory holding one data file per table.
    #[arg(long)]
    data: PathBuf,
    /// SVG output path (render mode).
    #[arg(long, default_value = "out.svg")]
    out: PathBuf,
    /// Faithfulness report path (compile and render modes).
    #[arg(long, default_value = "report.json")]
    report: PathBuf,
    /// Treat consistency lint findings and warnings as failures.
    #[arg(long)]
    strict: bool,
    /// Jitter magnitude in pixels applied to overplotted views.
    #[arg(long)]
    jitter: Option<f64>,
    /// Seed for the jitter generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated artifact list to emit: marks, report, svg.
    #[arg(long)]
    emit: Option<String>,
}

fn options(args: &CommonArgs) -> PipelineOptions {
    let proximity_px = std::env::var("DBVIZ_PROXIMITY_PX")
        .ok()
        .and_then(|v| v.parse::<f64>().ok());
    PipelineOptions {
        jitter: args
            .jitter
            .map(|mag| (mag, args.seed.unwrap_or_default())),
        proximity_px,
        epsilon: None,
    }
}

const EXIT_DIAGNOSTIC: u8 = 1;
const EXIT_STRUCTURAL: u8 = 2;

fn report_error(spec: &PathBuf, err: &PipelineError) -> u8 {
    match err {
        PipelineError::Spec(diags) => {
            for d in diags {
                eprintln!("{}:{d}", spec.display());
            }
            EXIT_DIAGNOSTIC
        }
        PipelineError::Violations(violations) => {
            for v in violations {
                eprintln!("violation: {v}");
            }
            EXIT_DIAGNOSTIC
        }
        PipelineError::Compile(e) => {
            eprintln!("error: {e}");
            EXIT_DIAGNOSTIC
        }
        PipelineError::Load(e) => {
            eprintln!("error: {e}");
            EXIT_STRUCTURAL
        }
        PipelineError::Io { .. } => {
            eprintln!("error: {err}");
            EXIT_STRUCTURAL
        }
    }
}

fn run(args: &CommonArgs, mode: &str) -> Result<u8, PipelineError> {
    let opts = options(args);
    let (doc, db) = pipeline::load(&args.spec, &args.data)?;
    pipeline::validate(&db)?;

    if mode == "check" {
        // Planning catches cyclic or unresolvable references without
        // materializing anything.
        dbviz::compile::plan(&doc, &db)?;
        return Ok(0);
    }

    let compiled = pipeline::compile(doc, db, &opts)?;

    let emit: Vec<&str> = match &args.emit {
        Some(list) => list.split(',').map(str::trim).collect(),
        None => match mode {
            "compile" => vec!["report"],
            _ => vec!["report", "svg"],
        },
    };

    if emit.contains(&"marks") {
        use std::io::Write;
        std::io::stdout()
            .write_all(&compiled.marks_json())
            .map_err(|source| PipelineError::Io {
                path: "<stdout>".into(),
                source,
            })?;
    }
    if emit.contains(&"report") {
        pipeline::write_atomic(&args.report, &compiled.report_json())?;
    }
    if emit.contains(&"svg") && mode == "render" {
        let svg = compiled.render_svg()?;
        pipeline::write_atomic(&args.out, &svg)?;
    }

    for finding in &compiled.report.lints {
        eprintln!("lint: {}: {}", finding.rule, finding.message);
    }
    for warning in &compiled.report.warnings {
        eprintln!("warning: {warning}");
    }

    let strict_clean = !args.strict
        || (compiled.report.lints.is_empty() && compiled.report.warnings.is_empty());
    if compiled.report.faithful && strict_clean {
        Ok(0)
    } else {
        if !compiled.report.faithful {
            eprintln!("unfaithful: see report for failing clauses");
        }
        Ok(EXIT_DIAGNOSTIC)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, mode) = match &cli.command {
        Command::Check(a) => (a, "check"),
        Command::Compile(a) => (a, "compile"),
        Command::Render(a) => (a, "render"),
    };
    match run(args, mode) {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(report_error(&args.spec, &e)),
    }
}
