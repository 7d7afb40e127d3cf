//! Shared-nothing execution of an all-pairs kernel over a quorum schedule.
//!
//! Logical worker `i` copies the blocks of quorum `i` out of the input table
//! into a private store and evaluates the kernel on every element pair of the
//! block pairs it owns, reading only that store. Workers are multiplexed over
//! `workers` OS threads. Numeric results land at disjoint positions of the
//! global matrix and counts are summed in worker order, so the output does not
//! depend on the thread count or on scheduling.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::partition::{self, ElementTable, Partition};
use crate::quorum::QuorumSystem;
use crate::schedule::Schedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// One per element pair, summed.
    HandshakeCount,
    /// Sample Pearson correlation into an `n x n` symmetric matrix.
    Pearson,
    /// `sum_f |x_f - y_f|` into an `n x n` symmetric matrix.
    SumAbsDiff,
}

impl Kernel {
    pub fn needs_values(self) -> bool {
        !matches!(self, Kernel::HandshakeCount)
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "handshake" | "handshake-count" => Ok(Kernel::HandshakeCount),
            "pearson" | "pearson-correlation" => Ok(Kernel::Pearson),
            "sum-abs-diff" | "sad" => Ok(Kernel::SumAbsDiff),
            other => Err(Error::Config(format!(
                "unknown kernel {other:?} (handshake|pearson|sum-abs-diff)"
            ))),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::HandshakeCount => "handshake-count",
            Kernel::Pearson => "pearson",
            Kernel::SumAbsDiff => "sum-abs-diff",
        })
    }
}

/// Sample Pearson correlation of two equal-length rows.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "row lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least 2 features".into()));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mean_x, b - mean_y);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn sum_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// OS threads the logical workers are spread over.
    pub workers: usize,
    /// Record, per worker, the elements copied, the elements the kernel
    /// read, and every element pair evaluated.
    pub instrument: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            instrument: false,
        }
    }
}

/// Merged kernel output.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelResult {
    Count(u64),
    /// Row-major `n x n` symmetric matrix. `flagged` lists `(x, y)`, `x <= y`,
    /// whose value is undefined (stored as 0.0), in ascending order.
    Matrix {
        n: usize,
        values: Vec<f64>,
        flagged: Vec<(usize, usize)>,
    },
}

impl KernelResult {
    /// Decimal text for counts, `bin` matrix layout for matrices.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        match self {
            KernelResult::Count(c) => {
                writeln!(out, "{c}")?;
                Ok(())
            }
            KernelResult::Matrix { n, values, .. } => partition::write_matrix(out, *n, *n, values),
        }
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        match self {
            KernelResult::Count(_) => None,
            KernelResult::Matrix { n, values, .. } => Some(values[x * n + y]),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WorkerStats {
    pub worker: usize,
    pub blocks_held: Vec<usize>,
    pub elements_held: usize,
    pub block_pairs: usize,
    pub element_pairs: u64,
    pub kernel_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kernel: Kernel,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub threads: usize,
    pub per_worker: Vec<WorkerStats>,
    pub total_element_pairs: u64,
    /// Sum of the handshake kernel, absent for matrix kernels.
    pub count: Option<u64>,
    pub flagged_entries: usize,
    pub replication: ReplicationStats,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// What one worker accessed during an instrumented run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkerTrace {
    /// Elements copied out of the shared table, ascending.
    pub materialized: Vec<usize>,
    /// Elements the kernel read from the private copy, ascending.
    pub touched: Vec<usize>,
    /// Element pairs `(x, y)`, `x < y`, in evaluation order.
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub result: KernelResult,
    pub report: RunReport,
    /// Per-worker traces when [`RunOptions::instrument`] is set.
    pub traces: Option<Vec<WorkerTrace>>,
}

/// Memory footprint of a quorum layout, with the usual baselines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationStats {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub per_worker_elements: Vec<usize>,
    pub max_elements: usize,
    pub mean_elements: f64,
    /// `k / p`, the share of the dataset held per worker.
    pub replication_fraction: f64,
    pub reduction_vs_full: f64,
    /// `n / p`: one block per process, as in atom decomposition.
    pub atom_baseline: f64,
    /// `2 n / sqrt(p)`: two arrays per process, as in force decomposition.
    pub force_baseline: f64,
    /// `max_elements / force_baseline`.
    pub ratio_vs_force: f64,
}

pub fn replication_report(q: &QuorumSystem, part: &Partition) -> Result<ReplicationStats> {
    if part.p() != q.p() {
        return Err(Error::Config(format!(
            "partition has {} blocks, quorum system has p={}",
            part.p(),
            q.p()
        )));
    }
    let (n, p) = (part.n(), q.p());
    let per_worker_elements: Vec<usize> = q
        .quorums()
        .iter()
        .map(|blocks| blocks.iter().map(|&b| part.block_len(b)).sum())
        .collect();
    let max_elements = per_worker_elements.iter().copied().max().unwrap_or(0);
    let mean_elements =
        per_worker_elements.iter().sum::<usize>() as f64 / per_worker_elements.len().max(1) as f64;
    let k = q.k();
    let replication_fraction = k as f64 / p as f64;
    let force_baseline = 2.0 * n as f64 / (p as f64).sqrt();
    Ok(ReplicationStats {
        n,
        p,
        k,
        max_elements,
        mean_elements,
        replication_fraction,
        reduction_vs_full: 1.0 - replication_fraction,
        atom_baseline: n as f64 / p as f64,
        force_baseline,
        ratio_vs_force: max_elements as f64 / force_baseline,
        per_worker_elements,
    })
}

/// Calls `f(x, y)` for every element pair of block pair `(j, k)`, `j <= k`:
/// intra-block pairs `x < y` when `j == k`, the cross product otherwise.
/// Row-major, lower index first.
pub fn for_each_element_pair(part: &Partition, j: usize, k: usize, mut f: impl FnMut(usize, usize)) {
    let (bj, bk) = (part.block(j), part.block(k));
    if j == k {
        for x in bj.clone() {
            for y in x + 1..bj.end {
                f(x, y);
            }
        }
    } else {
        for x in bj {
            for y in bk.clone() {
                f(x, y);
            }
        }
    }
}

/// A worker's private copy of its quorum's blocks.
struct LocalStore<'a> {
    part: &'a Partition,
    dim: usize,
    /// Local row offset per global block, `usize::MAX` if not held.
    offsets: Vec<usize>,
    rows: Vec<f64>,
    touched: Option<Vec<bool>>,
}

impl<'a> LocalStore<'a> {
    fn materialize(
        table: &ElementTable,
        part: &'a Partition,
        blocks: &[usize],
        record: bool,
    ) -> (Self, Option<Vec<usize>>) {
        let dim = table.dim();
        let mut offsets = vec![usize::MAX; part.p()];
        let mut rows = Vec::new();
        let mut materialized = record.then(Vec::new);
        let mut held = 0;
        for &b in blocks {
            offsets[b] = held;
            held += part.block_len(b);
            for x in part.block(b) {
                if table.has_values() {
                    rows.extend_from_slice(table.row(x));
                }
                if let Some(m) = materialized.as_mut() {
                    m.push(x);
                }
            }
        }
        if let Some(m) = materialized.as_mut() {
            m.sort_unstable();
        }
        let touched = record.then(|| vec![false; part.n()]);
        (
            Self {
                part,
                dim,
                offsets,
                rows,
                touched,
            },
            materialized,
        )
    }

    fn row(&mut self, block: usize, x: usize) -> &[f64] {
        let base = self.offsets[block];
        assert!(base != usize::MAX, "block {block} is not held by this worker");
        if let Some(t) = self.touched.as_mut() {
            t[x] = true;
        }
        let local = base + (x - self.part.block(block).start);
        &self.rows[local * self.dim..(local + 1) * self.dim]
    }

    fn mark(&mut self, block: usize, x: usize) {
        assert!(self.offsets[block] != usize::MAX, "block {block} is not held by this worker");
        if let Some(t) = self.touched.as_mut() {
            t[x] = true;
        }
    }
}

struct WorkerOutput {
    element_pairs: u64,
    /// Kernel values in owned-pair iteration order (matrix kernels only).
    values: Vec<f64>,
    flagged: Vec<(usize, usize)>,
    elapsed: Duration,
    trace: Option<WorkerTrace>,
}

fn run_worker(
    table: &ElementTable,
    part: &Partition,
    q: &QuorumSystem,
    owned: &[(usize, usize)],
    kernel: Kernel,
    record: bool,
    worker: usize,
) -> WorkerOutput {
    let (mut store, materialized) = LocalStore::materialize(table, part, q.quorum(worker), record);
    let start = Instant::now();
    let mut element_pairs = 0u64;
    let mut values = Vec::new();
    let mut flagged = Vec::new();
    let mut pairs = record.then(Vec::new);
    for &(j, k) in owned {
        match kernel {
            Kernel::HandshakeCount => {
                for_each_element_pair(part, j, k, |x, y| {
                    store.mark(j, x);
                    store.mark(k, y);
                    if let Some(p) = pairs.as_mut() {
                        p.push((x, y));
                    }
                    element_pairs += 1;
                });
            }
            Kernel::Pearson | Kernel::SumAbsDiff => {
                let mut scratch = Vec::with_capacity(store.dim);
                for_each_element_pair(part, j, k, |x, y| {
                    scratch.clear();
                    scratch.extend_from_slice(store.row(j, x));
                    let b = store.row(k, y);
                    let v = match kernel {
                        Kernel::Pearson => pearson(&scratch, b).unwrap_or_else(|_| {
                            flagged.push((x, y));
                            0.0
                        }),
                        _ => sum_abs_diff(&scratch, b),
                    };
                    values.push(v);
                    if let Some(p) = pairs.as_mut() {
                        p.push((x, y));
                    }
                    element_pairs += 1;
                });
            }
        }
    }
    let elapsed = start.elapsed();
    let trace = materialized.map(|materialized| WorkerTrace {
        materialized,
        pairs: pairs.unwrap_or_default(),
        touched: store
            .touched
            .as_ref()
            .expect("recording")
            .iter()
            .enumerate()
            .filter_map(|(x, &t)| t.then_some(x))
            .collect(),
    });
    WorkerOutput {
        element_pairs,
        values,
        flagged,
        elapsed,
        trace,
    }
}

/// Executes `kernel` over every element pair of `table`.
///
/// The table is split into `q.p()` blocks with [`Partition::split`]; worker
/// `i` holds exactly the blocks of quorum `i` and computes the block pairs
/// that `schedule` assigns to it.
pub fn run(
    table: &ElementTable,
    q: &QuorumSystem,
    schedule: &Schedule,
    kernel: Kernel,
    opts: RunOptions,
) -> Result<RunOutput> {
    let p = q.p();
    if kernel.needs_values() && !table.has_values() {
        return Err(Error::Config(format!("kernel {kernel} needs feature values; input is index-only")));
    }
    if kernel == Kernel::Pearson && table.dim() < 2 {
        return Err(Error::Config("pearson needs at least 2 features per element".into()));
    }
    if schedule.p() != p {
        return Err(Error::Config(format!(
            "schedule is for p={}, quorum system has p={p}",
            schedule.p()
        )));
    }
    if q.quorums().len() != p {
        return Err(Error::Config(format!("need {p} quorums, found {}", q.quorums().len())));
    }
    if table.n() < p {
        return Err(Error::Config(format!("n={} is smaller than p={p}", table.n())));
    }
    if let Some((j, k, i)) = schedule
        .assignments()
        .find(|&(j, k, i)| !(q.contains(i, j) && q.contains(i, k)))
    {
        return Err(Error::Config(format!(
            "schedule gives ({j},{k}) to worker {i}, whose quorum lacks one of the blocks"
        )));
    }
    let part = Partition::split(table.n(), p)?;
    let owned: Vec<Vec<(usize, usize)>> = (0..p).map(|i| schedule.owned_pairs(i)).collect();

    let threads = opts.workers.clamp(1, p);
    let next = AtomicUsize::new(0);
    let mut outputs: Vec<Option<WorkerOutput>> = (0..p).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= p {
                            break done;
                        }
                        let out = run_worker(table, &part, q, &owned[i], kernel, opts.instrument, i);
                        done.push((i, out));
                    }
                })
            })
            .collect();
        for h in handles {
            for (i, out) in h.join().expect("worker thread panicked") {
                outputs[i] = Some(out);
            }
        }
    });
    let outputs: Vec<WorkerOutput> = outputs
        .into_iter()
        .map(|o| o.expect("every worker ran"))
        .collect();

    let n = table.n();
    let result = match kernel {
        Kernel::HandshakeCount => KernelResult::Count(outputs.iter().map(|o| o.element_pairs).sum()),
        Kernel::Pearson | Kernel::SumAbsDiff => {
            let mut values = vec![0.0; n * n];
            let mut flagged: Vec<(usize, usize)> = Vec::new();
            for x in 0..n {
                values[x * n + x] = match kernel {
                    Kernel::Pearson => {
                        if pearson(table.row(x), table.row(x)).is_ok() {
                            1.0
                        } else {
                            flagged.push((x, x));
                            0.0
                        }
                    }
                    _ => 0.0,
                };
            }
            for (i, out) in outputs.iter().enumerate() {
                let mut vals = out.values.iter();
                for &(j, k) in &owned[i] {
                    for_each_element_pair(&part, j, k, |x, y| {
                        let v = *vals.next().expect("one value per element pair");
                        values[x * n + y] = v;
                        values[y * n + x] = v;
                    });
                }
                flagged.extend(out.flagged.iter().map(|&(x, y)| (x.min(y), x.max(y))));
            }
            flagged.sort_unstable();
            KernelResult::Matrix { n, values, flagged }
        }
    };

    let replication = replication_report(q, &part)?;
    let per_worker: Vec<WorkerStats> = outputs
        .iter()
        .enumerate()
        .map(|(i, o)| WorkerStats {
            worker: i,
            blocks_held: q.quorum(i).to_vec(),
            elements_held: replication.per_worker_elements[i],
            block_pairs: owned[i].len(),
            element_pairs: o.element_pairs,
            kernel_ms: o.elapsed.as_secs_f64() * 1e3,
        })
        .collect();
    let total_element_pairs = per_worker.iter().map(|w| w.element_pairs).sum();
    let (count, flagged_entries) = match &result {
        KernelResult::Count(c) => (Some(*c), 0),
        KernelResult::Matrix { flagged, .. } => (None, flagged.len()),
    };
    let traces = opts
        .instrument
        .then(|| outputs.into_iter().map(|o| o.trace.expect("recorded")).collect());

    Ok(RunOutput {
        result,
        report: RunReport {
            kernel,
            n,
            p,
            k: q.k(),
            threads,
            per_worker,
            total_element_pairs,
            count,
            flagged_entries,
            replication,
        },
        traces,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub workers: usize,
    pub repeats: usize,
    pub median_ms: f64,
    pub min_ms: f64,
    pub replication_fraction: f64,
    pub max_elements_per_worker: usize,
}

/// Times [`run`] `repeats` times at each thread count.
pub fn bench(
    table: &ElementTable,
    q: &QuorumSystem,
    schedule: &Schedule,
    kernel: Kernel,
    widths: &[usize],
    repeats: usize,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(widths.len());
    for &workers in widths {
        if workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        let mut times = Vec::with_capacity(repeats);
        let mut last = None;
        for _ in 0..repeats {
            let start = Instant::now();
            let out = run(table, q, schedule, kernel, RunOptions { workers, instrument: false })?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            last = Some(out.report.replication);
        }
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        let median_ms = if times.len() % 2 == 1 {
            times[mid]
        } else {
            (times[mid - 1] + times[mid]) / 2.0
        };
        let replication = last.expect("repeats >= 1");
        rows.push(BenchRow {
            workers,
            repeats,
            median_ms,
            min_ms: times[0],
            replication_fraction: replication.replication_fraction,
            max_elements_per_worker: replication.max_elements,
        });
    }
    Ok(rows)
}
