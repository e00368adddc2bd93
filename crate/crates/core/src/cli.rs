//! The `diraccbd` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{compare_traces, finite_difference_table, max_magnitude, CompareError};
use crate::blocks::Mode;
use crate::dsl::{self, ModelError, SourceModel, Span};
use crate::graph::{flatten, simulate_flat, SimConfig, SimError, StepError, Trace};
use crate::io::{self, Format};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MODEL: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_UNREADABLE: i32 = 2;
pub const EXIT_GRID: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "diraccbd",
    version,
    about = "Causal block diagram simulator with Dirac impulses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a model and write its trace.
    Run(RunArgs),
    /// Print the difference table of a unit step.
    Table(TableArgs),
    /// Compare two trace files.
    Compare(CompareArgs),
    /// Turn a trace into polylines and impulse arrows.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    file: PathBuf,
    #[arg(long)]
    top: String,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    step: f64,
    #[arg(long)]
    end: f64,
    #[arg(long, default_value_t = 1e-9)]
    zc_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    min_step: f64,
    /// Comma separated signal names; defaults to the top definition's outputs.
    #[arg(long, value_delimiter = ',')]
    watch: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    impulses: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TableArgs {
    #[arg(long)]
    order: u32,
    #[arg(long)]
    step: f64,
    /// Jump size used for the magnitude figures.
    #[arg(long, default_value_t = 1.0)]
    jump: f64,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
    #[arg(long)]
    impulses_a: Option<PathBuf>,
    #[arg(long)]
    impulses_b: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    trace: PathBuf,
    #[arg(long)]
    impulses: Option<PathBuf>,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(&a, stdout, stderr),
        Command::Table(a) => cmd_table(&a, stdout, stderr),
        Command::Compare(a) => cmd_compare(&a, stdout, stderr),
        Command::Plotdata(a) => cmd_plotdata(&a, stdout, stderr),
    }
}

#[derive(Debug, Serialize)]
struct RunManifest {
    status: &'static str,
    file: String,
    source_sha256: Option<String>,
    top: String,
    mode: Mode,
    h: f64,
    t_end: f64,
    zc_tol: f64,
    h_min: f64,
    watch: Vec<String>,
    format: Format,
    out: String,
    impulses: Option<String>,
    steps: usize,
    impulse_events: usize,
    final_time: Option<f64>,
    warnings: Vec<String>,
    error: Option<String>,
}

fn cmd_run(a: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let mut manifest = RunManifest {
        status: "ok",
        file: a.file.display().to_string(),
        source_sha256: None,
        top: a.top.clone(),
        mode: a.mode,
        h: a.step,
        t_end: a.end,
        zc_tol: a.zc_tol,
        h_min: a.min_step,
        watch: a.watch.clone(),
        format: a.format,
        out: a.out.display().to_string(),
        impulses: a.impulses.as_ref().map(|p| p.display().to_string()),
        steps: 0,
        impulse_events: 0,
        final_time: None,
        warnings: Vec::new(),
        error: None,
    };
    let code = match run_inner(a, &mut manifest) {
        Ok(()) => EXIT_OK,
        Err((code, msg)) => {
            let _ = writeln!(stderr, "{msg}");
            manifest.status = if code == EXIT_MODEL {
                "model_error"
            } else {
                "runtime_error"
            };
            manifest.error = Some(msg);
            code
        }
    };
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string(&manifest).expect("plain data")
    );
    code
}

fn run_inner(a: &RunArgs, manifest: &mut RunManifest) -> Result<(), (i32, String)> {
    let origin = a.file.display().to_string();
    let model_err = |m: String| (EXIT_MODEL, m);
    let bytes = std::fs::read(&a.file).map_err(|e| model_err(format!("{origin}: {e}")))?;
    manifest.source_sha256 = Some(hex::encode(Sha256::digest(&bytes)));
    let text =
        String::from_utf8(bytes).map_err(|_| model_err(format!("{origin}: not valid UTF-8")))?;
    let source = dsl::parse(&text).map_err(|e| model_err(ModelError::Syntax(e).render(&origin)))?;
    let model =
        dsl::validate(&source).map_err(|d| model_err(ModelError::Invalid(d).render(&origin)))?;
    let flat = flatten(&model, &a.top).map_err(|e| model_err(format!("{origin}: {e}")))?;

    let mut config = SimConfig::new(a.mode, a.step, a.end);
    config.zc_tol = a.zc_tol;
    config.h_min = a.min_step;
    config.watch = a.watch.clone();
    if manifest.watch.is_empty() {
        manifest.watch = flat.default_watch();
    }
    let trace = simulate_flat(&flat, &config).map_err(|e| {
        let code = match e {
            SimError::Step { .. } | SimError::ZenoSuspected { .. } => EXIT_RUNTIME,
            _ => EXIT_MODEL,
        };
        (code, describe_sim_error(&e, &source, &a.top, &origin))
    })?;

    manifest.steps = trace.len();
    manifest.impulse_events = trace.impulses.len();
    manifest.final_time = trace.times.last().copied();
    manifest.warnings = trace.warnings.clone();
    manifest.warnings.extend(overflow_warnings(&trace, a.step));

    let write_err = |p: &Path, e: io::IoError| (EXIT_RUNTIME, format!("{}: {e}", p.display()));
    let create = |p: &Path| {
        File::create(p)
            .map(BufWriter::new)
            .map_err(|e| write_err(p, e.into()))
    };
    io::write_trace(&trace, a.format, create(&a.out)?).map_err(|e| write_err(&a.out, e))?;
    if let Some(p) = &a.impulses {
        io::write_impulses(&trace.impulses, a.format, create(p)?).map_err(|e| write_err(p, e))?;
    }
    Ok(())
}

// An order-n impulse stands for the (n+1)-th derivative of a jump; a
// numerical run of the same model would need values of that size.
fn overflow_warnings(trace: &Trace, h: f64) -> Vec<String> {
    trace
        .impulses
        .iter()
        .filter(|e| max_magnitude(e.order + 1, h, e.coefficient.abs()).overflow_risk)
        .map(|e| {
            format!(
                "overflow risk: impulse of order {} on `{}` at t={} exceeds 1e300 when approximated numerically",
                e.order, e.signal, e.time
            )
        })
        .collect()
}

fn describe_sim_error(e: &SimError, source: &SourceModel, top: &str, origin: &str) -> String {
    let path = match e {
        SimError::Step {
            source: StepError::Block { path, .. } | StepError::MaxOrderExceeded { path, .. },
            ..
        } => Some(path.as_str()),
        _ => None,
    };
    match path.and_then(|p| span_of_path(source, top, p)) {
        Some(span) => format!("{origin}:{span}: {e}"),
        None => format!("{origin}: {e}"),
    }
}

/// Source position of the block declaration a flattened path refers to,
/// e.g. `ball/Integrator_v` in definition `Main`.
pub fn span_of_path(source: &SourceModel, top: &str, path: &str) -> Option<Span> {
    let mut def = source.definition(top)?;
    let mut parts = path.split('/').peekable();
    while let Some(name) = parts.next() {
        let decl = def.blocks().find(|b| b.name.name == name)?;
        if parts.peek().is_none() {
            return Some(decl.span);
        }
        def = source.definition(&decl.kind.name)?;
    }
    None
}

fn cmd_table(a: &TableArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if !(a.step > 0.0 && a.step.is_finite())
        || a.order > 1000
        || !(a.jump >= 0.0 && a.jump.is_finite())
    {
        let _ = writeln!(
            stderr,
            "table: need 0 <= order <= 1000, step > 0 and jump >= 0"
        );
        return EXIT_MODEL;
    }
    let table = finite_difference_table(a.order, a.step);
    let m = max_magnitude(a.order, a.step, a.jump);
    let cascade = a.jump * table.max_abs_top();
    let mut out = table.to_csv();
    out.push_str(&format!("# max_magnitude_cascade,{}\n", io::real(cascade)));
    out.push_str(&format!(
        "# max_magnitude_closed_form,{}\n",
        io::real(m.value)
    ));
    out.push_str(&format!(
        "# max_magnitude_printed_formula,{}\n",
        io::real(m.printed_formula)
    ));
    out.push_str(&format!("# overflow_risk,{}\n", m.overflow_risk));
    match stdout.write_all(out.as_bytes()) {
        Ok(()) => EXIT_OK,
        Err(_) => EXIT_RUNTIME,
    }
}

fn load_trace(trace: &Path, impulses: Option<&Path>) -> Result<Trace, String> {
    let open = |p: &Path| File::open(p).map_err(|e| format!("{}: {e}", p.display()));
    let events = match impulses {
        Some(p) => io::read_impulses(open(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => Vec::new(),
    };
    io::read_trace(open(trace)?, events).map_err(|e| format!("{}: {e}", trace.display()))
}

fn cmd_compare(a: &CompareArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let traces = load_trace(&a.a, a.impulses_a.as_deref())
        .and_then(|x| Ok((x, load_trace(&a.b, a.impulses_b.as_deref())?)));
    let (ta, tb) = match traces {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(stderr, "{msg}");
            return EXIT_UNREADABLE;
        }
    };
    match compare_traces(&ta, &tb, a.rel_tol) {
        Ok(report) => {
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::to_string(&report).expect("plain data")
            );
            if report.passed {
                EXIT_OK
            } else {
                EXIT_TOLERANCE
            }
        }
        Err(e) => {
            let _ = writeln!(
                stdout,
                "{}",
                serde_json::json!({ "passed": false, "error": e.to_string() })
            );
            let _ = writeln!(stderr, "{e}");
            match e {
                CompareError::TimeGridMismatch { .. } => EXIT_GRID,
                CompareError::SignalMismatch { .. } => EXIT_UNREADABLE,
            }
        }
    }
}

fn cmd_plotdata(a: &PlotArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let trace = match load_trace(&a.trace, a.impulses.as_deref()) {
        Ok(t) => t,
        Err(msg) => {
            let _ = writeln!(stderr, "{msg}");
            return EXIT_UNREADABLE;
        }
    };
    let json = serde_json::to_string(&io::plot_data(&trace)).expect("plain data");
    let written = match &a.out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| format!("{}: {e}", p.display())),
        None => writeln!(stdout, "{json}").map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(msg) => {
            let _ = writeln!(stderr, "{msg}");
            EXIT_RUNTIME
        }
    }
}
