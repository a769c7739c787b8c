//! `lift`: simulate TPF clients, shuffle their logs, deduce BGPs from a log
//! and score them against the queries that produced it.
//!
//! Exit status: 0 on success, 1 for invalid arguments or input, 2 when a
//! file cannot be read or written.

use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lift_core::client::{execute_query, ClientConfig, Clock};
use lift_core::ctp::format_ctp_table;
use lift_core::dtp::format_dtp_graph;
use lift_core::metrics::{evaluate, format_report};
use lift_core::output::{BgpDocument, DocumentMeta};
use lift_core::pipeline::{format_sweep, lift_traced, sweep, GapSpec, LiftConfig, LiftTrace};
use lift_core::syntax::parse_query;
use lift_core::{
    bgp, parse_log, shuffle_logs, write_log, Bgp, Exec, Gap, ParseError, ShuffleMode, ShufflePolicy, Store, TpfLog,
};

#[derive(Parser, Debug)]
#[command(name = "lift", version, about = "Deduce BGPs from TPF server logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run queries against a triple file with a simulated client and
    /// write the resulting server log.
    Generate(GenerateArgs),
    /// Interleave several logs into one.
    Shuffle(ShuffleArgs),
    /// Deduce BGPs from a log.
    Lift(LiftArgs),
    /// Score a BGP document against truth queries.
    Eval(EvalArgs),
    /// Lift and score a log once per gap.
    Sweep(SweepArgs),
    /// Join types and predicate frequencies of a BGP document.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
struct OutArg {
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Triple file the simulated server answers from.
    #[arg(long)]
    store: PathBuf,
    /// Query files, executed one after the other.
    #[arg(required = true)]
    queries: Vec<PathBuf>,
    #[arg(long, default_value = "10.0.0.1")]
    ip: String,
    /// Request the first page of every pattern before joining.
    #[arg(long)]
    probe_first: bool,
    #[arg(long, default_value_t = lift_core::store::DEFAULT_PAGE_SIZE)]
    page_size: usize,
    /// Timestamp of the first request.
    #[arg(long, default_value_t = 1)]
    start: i64,
    /// Time between two requests.
    #[arg(long, default_value_t = 1)]
    step: i64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    RoundRobin,
    Random,
    Offset,
}

#[derive(Args, Debug)]
struct ShuffleArgs {
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "random")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-log start delays for `--mode offset`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delays: Vec<i64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug, Clone)]
struct PipelineArgs {
    /// Maximal distance between related requests: ticks, `N%` of the log
    /// duration, or `unbounded`.
    #[arg(long, default_value = "unbounded")]
    gap: String,
    /// Process the log in disjoint slices of this length.
    #[arg(long)]
    slice: Option<String>,
    /// Drop joins between identically shaped patterns.
    #[arg(long)]
    filter_self_joins: bool,
    /// Analyse each client ip separately.
    #[arg(long)]
    per_ip: bool,
    /// Disable parallel processing of slices.
    #[arg(long)]
    sequential: bool,
}

impl PipelineArgs {
    fn config(&self) -> anyhow::Result<LiftConfig> {
        Ok(LiftConfig {
            gap: self.gap.parse().with_context(|| format!("--gap {}", self.gap))?,
            slice: self
                .slice
                .as_deref()
                .map(|s| s.parse::<GapSpec>().with_context(|| format!("--slice {s}")))
                .transpose()?,
            filter_self_joins: self.filter_self_joins,
            per_ip: self.per_ip,
            exec: if self.sequential {
                Exec::Sequential
            } else {
                Exec::Parallel
            },
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DocFormat {
    Canonical,
    Xml,
}

#[derive(Args, Debug)]
struct LiftArgs {
    /// Log file, `-` for standard input.
    log: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value = "canonical")]
    format: DocFormat,
    /// Write the candidate table here (`-` for standard error).
    #[arg(long)]
    dump_ctps: Option<PathBuf>,
    /// Write the deduced pattern graph here (`-` for standard error).
    #[arg(long)]
    dump_dtps: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Canonical BGP document.
    document: PathBuf,
    /// Truth query files.
    #[arg(long, required = true, num_args = 1..)]
    truth: Vec<PathBuf>,
    /// Emit JSON instead of a text table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct SweepArgs {
    log: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    truth: Vec<PathBuf>,
    /// Comma-separated gaps.
    #[arg(long, value_delimiter = ',', default_value = "1%,10%,50%,100%")]
    gaps: Vec<String>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug)]
struct StatsArgs {
    document: PathBuf,
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    out: OutArg,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { code: 1, error }
    }
}

fn io_failure(error: impl Into<anyhow::Error>, what: String) -> Failure {
    Failure {
        code: 2,
        error: error.into().context(what),
    }
}

fn parse_failure(e: ParseError, path: &Path) -> Failure {
    let code = if e.is_io() { 2 } else { 1 };
    Failure {
        code,
        error: anyhow::Error::new(e).context(path.display().to_string()),
    }
}

type CliResult<T> = Result<T, Failure>;

fn open(path: &Path) -> CliResult<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        return Ok(Box::new(io::stdin().lock()));
    }
    fs::File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| io_failure(e, format!("cannot open {}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|e| io_failure(e, format!("cannot read {}", path.display())))?;
    Ok(text)
}

fn read_log(path: &Path) -> CliResult<(TpfLog, usize)> {
    let (log, rejects) = parse_log(BufReader::new(open(path)?)).map_err(|e| parse_failure(e, path))?;
    for r in &rejects {
        eprintln!("{}:{}: skipped: {}", path.display(), r.line, r.reason);
    }
    Ok((log, rejects.len()))
}

fn read_queries(paths: &[PathBuf]) -> CliResult<Vec<Bgp>> {
    paths
        .iter()
        .map(|p| parse_query(&read_text(p)?).map_err(|e| parse_failure(e, p)))
        .collect()
}

fn read_document(path: &Path) -> CliResult<Vec<lift_core::DeducedBgp>> {
    let doc = BgpDocument::from_reader(BufReader::new(open(path)?)).map_err(|e| parse_failure(e, path))?;
    doc.deduced().map_err(|e| parse_failure(e, path))
}

fn write_to(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let result = match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush())
        }
        Some(p) if p.as_os_str() == "-" => io::stderr().write_all(bytes),
        Some(p) => fs::write(p, bytes),
    };
    result.map_err(|e| {
        let target = path.map_or("standard output".into(), |p| p.display().to_string());
        io_failure(e, format!("cannot write {target}"))
    })
}

fn generate(args: &GenerateArgs) -> CliResult<Vec<u8>> {
    let store_text = read_text(&args.store)?;
    let store = Store::load(store_text.as_bytes()).map_err(|e| parse_failure(e, &args.store))?;
    let queries = read_queries(&args.queries)?;
    let mut cfg = ClientConfig {
        ip: args.ip.clone(),
        probe_first: args.probe_first,
        page_size: args.page_size,
        clock: Clock {
            start: args.start,
            step: args.step,
        },
    };
    let mut entries = Vec::new();
    for (q, path) in queries.iter().zip(&args.queries) {
        let exec = execute_query(&store, q, &cfg).with_context(|| path.display().to_string())?;
        for w in &exec.warnings {
            eprintln!("{}: warning: {w}", path.display());
        }
        if let Some(last) = exec.log.last() {
            cfg.clock.start = last.ts + args.step;
        }
        entries.extend(exec.log);
    }
    let mut buf = Vec::new();
    write_log(&mut buf, &TpfLog::new(entries)).expect("writing to memory");
    Ok(buf)
}

fn shuffle(args: &ShuffleArgs) -> CliResult<Vec<u8>> {
    let logs = args
        .logs
        .iter()
        .map(|p| read_log(p).map(|(l, _)| l))
        .collect::<CliResult<Vec<_>>>()?;
    let mode = match args.mode {
        Mode::RoundRobin => ShuffleMode::RoundRobin,
        Mode::Random => ShuffleMode::RandomInterleave,
        Mode::Offset => {
            if args.delays.len() > logs.len() {
                return Err(anyhow!("{} delays for {} logs", args.delays.len(), logs.len()).into());
            }
            ShuffleMode::Offset(args.delays.clone())
        }
    };
    let policy = ShufflePolicy { seed: args.seed, mode };
    let mut buf = Vec::new();
    write_log(&mut buf, &shuffle_logs(&logs, &policy)).expect("writing to memory");
    Ok(buf)
}

fn unit_header(trace: &LiftTrace, u: &lift_core::pipeline::UnitTrace) -> String {
    if trace.units.len() < 2 {
        return String::new();
    }
    let mut h = String::from("# unit");
    if let Some(ip) = &u.ip {
        h.push_str(&format!(" ip={ip}"));
    }
    if let Some((a, b)) = u.window {
        h.push_str(&format!(" window=[{a},{b})"));
    }
    h.push('\n');
    h
}

/// The document, and the dumps to write with their destination.
type LiftOutput = (Vec<u8>, Vec<(PathBuf, String)>);

fn lift_cmd(args: &LiftArgs) -> CliResult<LiftOutput> {
    let cfg = args.pipeline.config()?;
    let (log, rejects) = read_log(&args.log)?;
    let trace = lift_traced(&log, &cfg).map_err(anyhow::Error::new)?;
    let mut dumps = Vec::new();
    if let Some(p) = &args.dump_ctps {
        let text: String = trace
            .units
            .iter()
            .map(|u| unit_header(&trace, u) + &format_ctp_table(&u.ctps))
            .collect();
        dumps.push((p.clone(), text));
    }
    if let Some(p) = &args.dump_dtps {
        let text: String = trace
            .units
            .iter()
            .map(|u| unit_header(&trace, u) + &format_dtp_graph(&u.graph))
            .collect();
        dumps.push((p.clone(), text));
    }
    let meta = DocumentMeta {
        input: args.log.display().to_string(),
        gap: cfg.gap.to_string(),
        gap_ticks: match trace.gap {
            Gap::Ticks(t) => Some(t),
            Gap::Unbounded => None,
        },
        slice: cfg.slice.map(|s| s.to_string()),
        entries: log.len(),
        rejects,
        bgps: 0,
        filter_self_joins: cfg.filter_self_joins,
        per_ip: cfg.per_ip,
    };
    let doc = BgpDocument::new(meta, &trace.bgps);
    let text = match args.format {
        DocFormat::Canonical => doc.to_json(),
        DocFormat::Xml => doc.to_xml(),
    };
    Ok((text.into_bytes(), dumps))
}

fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn eval_cmd(args: &EvalArgs) -> CliResult<Vec<u8>> {
    let deduced = read_document(&args.document)?;
    let truth = read_queries(&args.truth)?;
    let report = evaluate(&deduced, &truth);
    Ok(if args.json {
        json_bytes(&report)
    } else {
        format_report(&report).into_bytes()
    })
}

fn sweep_cmd(args: &SweepArgs) -> CliResult<Vec<u8>> {
    let cfg = args.pipeline.config()?;
    let gaps = args
        .gaps
        .iter()
        .map(|g| g.parse::<GapSpec>().with_context(|| format!("--gaps {g}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let (log, _) = read_log(&args.log)?;
    let truth = read_queries(&args.truth)?;
    let rows = sweep(&log, &gaps, &cfg, &truth).map_err(anyhow::Error::new)?;
    Ok(if args.json {
        json_bytes(&rows)
    } else {
        format_sweep(&rows).into_bytes()
    })
}

fn stats_cmd(args: &StatsArgs) -> CliResult<Vec<u8>> {
    let deduced = read_document(&args.document)?;
    let stats = bgp::bgp_stats(&deduced);
    Ok(if args.json {
        json_bytes(&stats)
    } else {
        bgp::format_stats(&stats).into_bytes()
    })
}

fn run(cli: Cli) -> CliResult<()> {
    // every command computes its whole output before writing anything
    match cli.command {
        Command::Generate(a) => write_to(a.out.out.as_deref(), &generate(&a)?),
        Command::Shuffle(a) => write_to(a.out.out.as_deref(), &shuffle(&a)?),
        Command::Lift(a) => {
            let (doc, dumps) = lift_cmd(&a)?;
            for (path, text) in dumps {
                write_to(Some(&path), text.as_bytes())?;
            }
            write_to(a.out.out.as_deref(), &doc)
        }
        Command::Eval(a) => write_to(a.out.out.as_deref(), &eval_cmd(&a)?),
        Command::Sweep(a) => write_to(a.out.out.as_deref(), &sweep_cmd(&a)?),
        Command::Stats(a) => write_to(a.out.out.as_deref(), &stats_cmd(&a)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
