//! `allpairs`: search difference sets, build cyclic quorum systems, schedule
//! block pairs and run all-pairs kernels.
//!
//! Exit status: 0 on success, 1 when a verification fails (or a search runs
//! out of budget), 2 for usage and input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use quorum_allpairs::diffset::{self, fallback_consecutive, minimal_k_lower_bound, DEFAULT_BUDGET};
use quorum_allpairs::engine::{self, bench};
use quorum_allpairs::{
    DiffsetCache, DifferenceSet, ElementTable, Error, Format, Kernel, KernelResult, Partition, Policy,
    QuorumSystem, RunOptions, Schedule,
};

#[derive(Parser)]
#[command(name = "allpairs", version, about = "Cyclic quorum all-pairs toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a minimum relaxed difference set modulo p.
    Search(SearchArgs),
    /// Generate the cyclic quorum system for p (or an explicit base set).
    Gen(GenArgs),
    /// Check quorum properties and the all-pairs property of a system file.
    Verify(VerifyArgs),
    /// Assign block pairs to workers.
    Schedule(ScheduleArgs),
    /// Execute a kernel across the quorum workers.
    Run(RunArgs),
    /// Time `run` across several worker counts.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SetSource {
    /// Number of blocks / workers.
    #[arg(long)]
    p: usize,
    /// Search step limit.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Difference set cache file.
    #[arg(long, env = "ALLPAIRS_CACHE")]
    cache: Option<PathBuf>,
    /// Use {0..p/2} when the search budget runs out.
    #[arg(long)]
    fallback: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    source: SetSource,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    source: SetSource,
    /// Explicit base set, e.g. `0,1,3`; skips the search.
    #[arg(long, value_delimiter = ',')]
    set: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    quorums: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Element data file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SystemArgs {
    /// Quorum system JSON from `gen`; searched from --p when absent.
    #[arg(long)]
    quorums: Option<PathBuf>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long, env = "ALLPAIRS_CACHE")]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[command(flatten)]
    system: SystemArgs,
    /// Element count; alternatively give --input.
    #[arg(long, conflicts_with = "input")]
    n: Option<usize>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long, default_value = "balanced")]
    policy: Policy,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    system: SystemArgs,
    /// Schedule JSON from `schedule`; built with --policy when absent.
    #[arg(long)]
    schedule: Option<PathBuf>,
    #[arg(long, default_value = "handshake")]
    kernel: Kernel,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "balanced")]
    policy: Policy,
    /// Result file: binary matrix, or decimal text for counts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    system: SystemArgs,
    #[arg(long, default_value = "pearson")]
    kernel: Kernel,
    #[arg(long, default_value = "balanced")]
    policy: Policy,
    #[arg(long, default_value = "1,2,4,8", value_delimiter = ',')]
    workers_list: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Verification failed or a search ran out of budget.
    Check(anyhow::Error),
    /// Bad flags, unreadable or malformed input.
    Usage(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Uncovered(..) | Error::BudgetExceeded { .. } => Failure::Check(e.into()),
            _ => Failure::Usage(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(core) => core.into(),
            Err(other) => Failure::Usage(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn write_out(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Searches (through the cache when configured), falling back to the
/// consecutive set on budget exhaustion if allowed. The flag says whether
/// the result is a certified minimum.
fn find_set(source: &SetSource) -> Result<(DifferenceSet, bool), Failure> {
    let found = match &source.cache {
        Some(path) => DiffsetCache::new(path).get_or_search(source.p, Some(source.budget)),
        None => diffset::search_minimal(source.p, Some(source.budget)),
    };
    match found {
        Ok(set) => Ok((set, true)),
        Err(Error::BudgetExceeded { last_k, .. }) if source.fallback => {
            eprintln!(
                "warning: search budget exhausted at k={last_k}; using consecutive fallback, which is NOT minimal"
            );
            Ok((fallback_consecutive(source.p), false))
        }
        Err(e @ Error::BudgetExceeded { .. }) => Err(Failure::Check(
            anyhow::Error::from(e).context("rerun with a larger --budget or with --fallback"),
        )),
        Err(e) => Err(e.into()),
    }
}

fn cmd_search(args: SearchArgs) -> CmdResult {
    let (set, minimal) = find_set(&args.source)?;
    let bound = minimal_k_lower_bound(set.p());
    let optimal = minimal && set.k() == bound;
    match args.out {
        Some(path) => {
            let doc = serde_json::json!({
                "p": set.p(),
                "k": set.k(),
                "elements": set.elements(),
                "lower_bound": bound,
                "minimal": minimal,
                "optimal": optimal,
            });
            write_out(&path, serde_json::to_string_pretty(&doc).expect("json") + "\n")
        }
        None => {
            println!(
                "k={} {} lower_bound={bound} optimal={}",
                set.k(),
                set,
                if optimal { "yes" } else { "no" }
            );
            Ok(())
        }
    }
}

/// `D_1, D_2, ...` labels for 0-based blocks.
fn labels(blocks: &[usize]) -> String {
    blocks.iter().map(|b| format!("D_{}", b + 1)).collect::<Vec<_>>().join(", ")
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let base = match &args.set {
        Some(residues) => DifferenceSet::canonical(args.source.p, residues)?,
        None => find_set(&args.source)?.0,
    };
    let q = QuorumSystem::generate(&base)?;
    match args.out {
        Some(path) => write_out(&path, q.to_json() + "\n"),
        None => {
            println!("p={} k={} base={}", q.p(), q.k(), base);
            for (i, members) in q.quorums().iter().enumerate() {
                println!("S_{} = {{{}}}", i + 1, labels(members));
            }
            Ok(())
        }
    }
}

fn read_quorums(path: &Path) -> Result<QuorumSystem, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    QuorumSystem::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::Usage)
}

fn cmd_verify(args: VerifyArgs) -> CmdResult {
    let q = read_quorums(&args.quorums)?;
    let report = q.verify_quorum_properties();
    if let Some(path) = &args.out {
        write_out(path, serde_json::to_string_pretty(&report).expect("json") + "\n")?;
    } else {
        let flag = |b: bool| if b { "ok" } else { "FAILED" };
        println!("p={} quorums={}", q.p(), q.quorums().len());
        println!("coverage              {}", flag(report.coverage));
        println!("pairwise intersection {}", flag(report.pairwise_intersection));
        println!("equal size            {}", flag(report.equal_size));
        println!("equal responsibility  {}", flag(report.equal_responsibility));
        println!("all-pairs             {}", flag(report.all_pairs));
    }
    if report.all_hold() {
        Ok(())
    } else {
        let detail = match report.counterexample {
            Some((j, k)) => format!("counterexample pair (D_{}, D_{}) is in no quorum", j + 1, k + 1),
            None => "quorum properties violated".to_string(),
        };
        Err(Failure::Check(anyhow!(detail)))
    }
}

fn load_system(args: &SystemArgs) -> Result<QuorumSystem, Failure> {
    match (&args.quorums, args.p) {
        (Some(path), p) => {
            let q = read_quorums(path)?;
            if let Some(p) = p.filter(|&p| p != q.p()) {
                return Err(Failure::Usage(anyhow!("--p {p} disagrees with p={} in {}", q.p(), path.display())));
            }
            Ok(q)
        }
        (None, Some(p)) => {
            let source = SetSource {
                p,
                budget: args.budget,
                cache: args.cache.clone(),
                fallback: false,
            };
            Ok(QuorumSystem::generate(&find_set(&source)?.0)?)
        }
        (None, None) => Err(Failure::Usage(anyhow!("give --quorums or --p"))),
    }
}

fn cmd_schedule(args: ScheduleArgs) -> CmdResult {
    let q = load_system(&args.system)?;
    let n = match (args.n, &args.input) {
        (Some(n), _) => n,
        (None, Some(input)) => ElementTable::ingest(input, args.format)?.n(),
        (None, None) => return Err(Failure::Usage(anyhow!("give --n or --input"))),
    };
    let part = Partition::split(n, q.p())?;
    let s = Schedule::build(&q, &part, args.policy)?;
    match args.out {
        Some(path) => write_out(&path, s.to_json() + "\n"),
        None => {
            let r = s.balance_report();
            println!("p={} n={n} policy={}", s.p(), s.policy());
            println!("worker  block_pairs  element_pairs");
            for (i, (bp, c)) in r.block_pairs.iter().zip(&r.costs).enumerate() {
                println!("{:>6}  {bp:>11}  {c:>13}", i + 1);
            }
            let mm = r.max_over_min.map_or("inf".to_string(), |v| format!("{v:.4}"));
            println!("max/mean={:.4} max/min={mm}", r.max_over_mean);
            Ok(())
        }
    }
}

fn load_schedule(path: Option<&PathBuf>, q: &QuorumSystem, part: &Partition, policy: Policy) -> Result<Schedule, Failure> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Schedule::from_json(&text, q, part)?)
        }
        None => Ok(Schedule::build(q, part, policy)?),
    }
}

fn cmd_run(args: RunArgs) -> CmdResult {
    if args.workers == 0 {
        return Err(Failure::Usage(anyhow!("--workers must be at least 1")));
    }
    let table = ElementTable::ingest(&args.data.input, args.data.format)?;
    let q = load_system(&args.system)?;
    let part = Partition::split(table.n(), q.p())?;
    let schedule = load_schedule(args.schedule.as_ref(), &q, &part, args.policy)?;
    let out = engine::run(
        &table,
        &q,
        &schedule,
        args.kernel,
        RunOptions {
            workers: args.workers,
            instrument: false,
        },
    )?;
    if let Some(path) = &args.report {
        write_out(path, out.report.to_json() + "\n")?;
    }
    match &args.out {
        Some(path) => {
            let mut buf = Vec::new();
            out.result.write_to(&mut buf)?;
            write_out(path, buf)
        }
        None => {
            let r = &out.report;
            println!(
                "kernel={} n={} p={} k={} threads={} replication={:.4}",
                r.kernel, r.n, r.p, r.k, r.threads, r.replication.replication_fraction
            );
            match &out.result {
                KernelResult::Count(c) => println!("pairs={c}"),
                KernelResult::Matrix { n, values, flagged } => {
                    println!("pairs={} flagged={}", r.total_element_pairs, flagged.len());
                    if *n <= 12 {
                        for row in values.chunks(*n) {
                            let cells: Vec<String> = row.iter().map(|v| format!("{v:>8.4}")).collect();
                            println!("{}", cells.join(" "));
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    if args.repeats < 1 {
        return Err(Failure::Usage(anyhow!("--repeats must be at least 1")));
    }
    if args.workers_list.is_empty() || args.workers_list.contains(&0) {
        return Err(Failure::Usage(anyhow!("--workers-list needs positive worker counts")));
    }
    let table = ElementTable::ingest(&args.data.input, args.data.format)?;
    let q = load_system(&args.system)?;
    let part = Partition::split(table.n(), q.p())?;
    let schedule = Schedule::build(&q, &part, args.policy)?;
    let rows = bench(&table, &q, &schedule, args.kernel, &args.workers_list, args.repeats)?;
    match &args.out {
        Some(path) => write_out(path, serde_json::to_string_pretty(&rows).expect("json") + "\n"),
        None => {
            println!("kernel={} n={} p={} k={} repeats={}", args.kernel, table.n(), q.p(), q.k(), args.repeats);
            println!("workers  median_ms    min_ms  replication  max_elements");
            for r in rows {
                println!(
                    "{:>7}  {:>9.2}  {:>8.2}  {:>11.4}  {:>12}",
                    r.workers, r.median_ms, r.min_ms, r.replication_fraction, r.max_elements_per_worker
                );
            }
            Ok(())
        }
    }
}
