//! The `simstream` command line: `run`, `resume` and `inspect`.
//!
//! Machine output (assignment records and the optional summary) is JSONL on
//! `--output`. Diagnostics and the `--trace` tables go to stderr.
//!
//! Exit codes: 0 success, 1 data or snapshot error, 2 usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::engine::should_match_features;
use crate::ingest::{Format, IngestError, OnError, PointStream};
use crate::model::{AssignmentOutcome, ClusterState, Config, DataPoint};
use crate::similarity::similarity_row;
use crate::snapshot::{load_snapshot, save_snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Points beyond this many are not traced.
pub const TRACE_LIMIT: u64 = 1000;

#[derive(Parser, Debug)]
#[command(
    name = "simstream",
    version,
    about = "Single-pass clustering of point streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cluster a stream from scratch.
    Run(RunArgs),
    /// Continue clustering from a snapshot.
    Resume(ResumeArgs),
    /// Print the contents of a snapshot.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Minimum per-feature similarity percentage, in (0, 100].
    #[arg(long)]
    pub strictness: f64,
    /// Feature count; inferred from the first valid record when omitted.
    #[arg(long)]
    pub n_features: Option<usize>,
    #[command(flatten)]
    pub stream: StreamArgs,
}

#[derive(Args, Debug)]
pub struct ResumeArgs {
    #[arg(long)]
    pub snapshot_in: PathBuf,
    #[command(flatten)]
    pub stream: StreamArgs,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub snapshot_in: PathBuf,
    #[arg(long, default_value = "-")]
    pub output: String,
}

#[derive(Args, Debug)]
pub struct StreamArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Input path, or `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Output path, or `-` for stdout.
    #[arg(long, default_value = "-")]
    pub output: String,
    #[arg(long)]
    pub snapshot_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OnErrorArg::Halt)]
    pub on_error: OnErrorArg,
    /// Print per-point similarity tables to stderr.
    #[arg(long)]
    pub trace: bool,
    /// Append a summary record after the assignments.
    #[arg(long)]
    pub summary: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum OnErrorArg {
    Halt,
    Skip,
}

impl From<OnErrorArg> for OnError {
    fn from(o: OnErrorArg) -> Self {
        match o {
            OnErrorArg::Halt => OnError::Halt,
            OnErrorArg::Skip => OnError::Skip,
        }
    }
}

/// One line of assignment output.
#[derive(Serialize)]
pub struct AssignmentRecord<'a> {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub seq: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<&'a str>,
    pub cluster_id: u32,
    pub created_new: bool,
    pub matched_count: Option<usize>,
    pub decision_path: &'static str,
}

impl<'a> AssignmentRecord<'a> {
    pub fn new(point: &'a DataPoint, outcome: &AssignmentOutcome) -> Self {
        Self {
            kind: "assignment",
            seq: outcome.point_seq,
            id: point.label(),
            cluster_id: outcome.assigned_cluster_id,
            created_new: outcome.created_new,
            matched_count: outcome.winner_profile().map(|p| p.matched_count),
            decision_path: outcome.decision_path.as_str(),
        }
    }
}

#[derive(Serialize)]
pub struct SummaryRecord {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub clusters: usize,
    pub points_seen: u64,
    pub sizes: Vec<u64>,
    pub centroids: Vec<Vec<f64>>,
}

impl SummaryRecord {
    pub fn new(state: Option<&ClusterState>) -> Self {
        let clusters = state.map(|s| s.clusters()).unwrap_or_default();
        Self {
            kind: "summary",
            clusters: clusters.len(),
            points_seen: state.map_or(0, |s| s.points_seen()),
            sizes: clusters.iter().map(|c| c.member_count()).collect(),
            centroids: clusters.iter().map(|c| c.centroid()).collect(),
        }
    }
}

/// Two-decimal display with trailing zeros dropped (`9.5`, `233.33`, `45`).
pub fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt2).collect::<Vec<_>>().join(" ")
}

/// Parses `args` and runs the selected command.
pub fn run<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args, stdin, stdout, stderr),
        Command::Resume(args) => cmd_resume(args, stdin, stdout, stderr),
        Command::Inspect(args) => cmd_inspect(args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

/// A command failure: exit code plus the message printed on stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn data(message: impl ToString) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }

    fn usage(message: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::data(e)
    }
}

fn open_input<'a>(
    path: &str,
    stdin: &'a mut dyn BufRead,
) -> Result<Box<dyn BufRead + 'a>, Failure> {
    if path == "-" {
        Ok(Box::new(stdin))
    } else {
        let file = File::open(path).map_err(|e| Failure::data(format!("{path}: {e}")))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn open_output<'a>(path: &str, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, Failure> {
    if path == "-" {
        Ok(Box::new(stdout))
    } else {
        let file = File::create(path).map_err(|e| Failure::data(format!("{path}: {e}")))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

pub fn cmd_run(
    args: RunArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    // Reject a bad strictness before reading anything.
    Config::new(args.strictness, args.n_features.unwrap_or(1)).map_err(Failure::usage)?;
    let state = args
        .n_features
        .map(|n| ClusterState::new(Config::new(args.strictness, n).expect("checked above")));
    drive(args.strictness, state, args.stream, stdin, stdout, stderr)
}

pub fn cmd_resume(
    args: ResumeArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let state = load_snapshot(&args.snapshot_in)
        .map_err(|e| Failure::data(format!("{}: {e}", args.snapshot_in.display())))?;
    let strictness = state.config().strictness();
    drive(strictness, Some(state), args.stream, stdin, stdout, stderr)
}

fn drive(
    strictness: f64,
    mut state: Option<ClusterState>,
    opts: StreamArgs,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let input = open_input(&opts.input, stdin)?;
    let mut out = open_output(&opts.output, stdout)?;

    let n_features = state.as_ref().map(|s| s.config().n_features());
    let start = state.as_ref().map_or(0, |s| s.points_seen());
    let mut points = PointStream::new(input, opts.format.into(), n_features, opts.on_error.into())
        .starting_at(start);
    let mut traced = 0u64;

    loop {
        let item = points.next();
        for skipped in points.take_skipped() {
            writeln!(stderr, "warning: skipped {skipped}")?;
        }
        let point = match item {
            None => break,
            Some(Ok(p)) => p,
            Some(Err(e)) => {
                out.flush()?;
                return Err(Failure::data(describe_ingest(&e)));
            }
        };

        let state = match &mut state {
            Some(s) => s,
            slot @ None => {
                let config =
                    Config::new(strictness, point.features().len()).map_err(Failure::usage)?;
                slot.insert(ClusterState::new(config))
            }
        };

        if opts.trace && traced < TRACE_LIMIT {
            trace_before(stderr, state, &point)?;
        }
        let outcome = state
            .assign(&point)
            .map_err(|e| Failure::data(format!("point {}: {e}", point.seq())))?;
        if opts.trace && traced < TRACE_LIMIT {
            trace_after(stderr, state, &outcome)?;
            traced += 1;
            if traced == TRACE_LIMIT {
                writeln!(stderr, "trace stopped after {TRACE_LIMIT} points")?;
            }
        }

        serde_json::to_writer(&mut out, &AssignmentRecord::new(&point, &outcome))
            .map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }

    if opts.summary {
        serde_json::to_writer(&mut out, &SummaryRecord::new(state.as_ref()))
            .map_err(io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;

    if let Some(path) = &opts.snapshot_out {
        let state = state.ok_or_else(|| {
            Failure::data("cannot snapshot: no points read and --n-features not given")
        })?;
        save_snapshot(&state, path)
            .map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn describe_ingest(e: &IngestError) -> String {
    match e {
        IngestError::Io(err) => format!("input: {err}"),
        other => other.to_string(),
    }
}

fn trace_before(w: &mut dyn Write, state: &ClusterState, point: &DataPoint) -> io::Result<()> {
    writeln!(
        w,
        "Data-point {} (seq {}): {}",
        point.seq() + 1,
        point.seq(),
        fmt_row(point.features().iter().copied())
    )?;
    if state.clusters().is_empty() {
        return Ok(());
    }
    for cluster in state.clusters() {
        let row = similarity_row(point, cluster)
            .into_iter()
            .map(|s| s.map_or_else(|| "undef".to_owned(), fmt2))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(w, "  S(C{},Fj): {row}", cluster.id())?;
    }
    Ok(())
}

fn trace_after(
    w: &mut dyn Write,
    state: &ClusterState,
    outcome: &AssignmentOutcome,
) -> io::Result<()> {
    let need = should_match_features(state.config());
    for p in &outcome.profiles {
        let avg = p.qualifying_avg.map_or_else(|| "-".to_owned(), fmt2);
        let mark = if p.matched_count >= need {
            "qualified"
        } else {
            ""
        };
        writeln!(
            w,
            "  C{}: matched {}/{} avg {} {}",
            p.cluster_id, p.matched_count, need, avg, mark
        )?;
    }
    let cluster = state
        .cluster(outcome.assigned_cluster_id)
        .expect("assigned cluster exists");
    let verb = if outcome.created_new {
        "new cluster"
    } else {
        "joined"
    };
    writeln!(
        w,
        "  -> {} C{} [{}]; C{}: {}",
        verb,
        cluster.id(),
        outcome.decision_path.as_str(),
        cluster.id(),
        fmt_row(cluster.centroid())
    )
}

pub fn cmd_inspect(args: InspectArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let state = load_snapshot(&args.snapshot_in)
        .map_err(|e| Failure::data(format!("{}: {e}", args.snapshot_in.display())))?;
    let mut out = open_output(&args.output, stdout)?;
    write_inspection(&mut out, &state)?;
    out.flush()?;
    Ok(())
}

pub fn write_inspection(w: &mut dyn Write, state: &ClusterState) -> io::Result<()> {
    let cfg = state.config();
    writeln!(w, "strictness: {}", cfg.strictness())?;
    writeln!(w, "n_features: {}", cfg.n_features())?;
    writeln!(w, "points_seen: {}", state.points_seen())?;
    let n = state.clusters().len();
    writeln!(w, "{n} cluster{}", if n == 1 { "" } else { "s" })?;
    for c in state.clusters() {
        writeln!(
            w,
            "C{} size {}: {}",
            c.id(),
            c.member_count(),
            fmt_row(c.centroid())
        )?;
    }
    Ok(())
}

/// Entry point for the binary.
pub fn main_with_std() -> i32 {
    let stdin = io::stdin();
    let mut stdin = stdin.lock();
    let stdout = io::stdout();
    let mut stdout = stdout.lock();
    let stderr = io::stderr();
    let mut stderr = stderr.lock();
    run(std::env::args_os(), &mut stdin, &mut stdout, &mut stderr)
}
