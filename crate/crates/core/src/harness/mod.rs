//! Scenario files, single runs, seed sweeps and trace replay.
//!
//! Everything here is deterministic: a sweep's summary depends only on the
//! scenario and the seeds, never on thread count or wall-clock time.

pub mod presets;
mod scenario;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use scenario::{parse_seed_range, DelaySpec, OutputSpec, Scenario, ScenarioError, SeedSpec, SCHEMA_VERSION};

use crate::checkers::{check_all, metrics, write_csv, CheckReport, Metrics, Verdict};
use crate::netsim::{self, LoadedTrace, Trace, TraceError};
use crate::types::{Mode, Round};

/// One simulated run with its checker verdicts and metrics.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub seed: u64,
    pub trace: Trace,
    pub digest: String,
    pub reports: Vec<CheckReport>,
    pub metrics: Metrics,
}

impl RunOutcome {
    pub fn violated(&self) -> bool {
        self.reports.iter().any(CheckReport::is_violation)
    }
}

pub fn run_seed(sc: &Scenario, seed: u64) -> Result<RunOutcome, ScenarioError> {
    let trace = netsim::run(&sc.run_spec()?, seed)?;
    let reports = check_all(&trace);
    let metrics = metrics(&trace);
    Ok(RunOutcome { seed, digest: trace.digest(), trace, reports, metrics })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()
}

fn csv_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes `trace.jsonl`, `reports.json`, `metrics.json` and `metrics.csv`.
pub fn write_run(out: &RunOutcome, scenario: &str, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    out.trace.write_jsonl(BufWriter::new(File::create(dir.join("trace.jsonl"))?))?;
    write_json(&dir.join("reports.json"), &out.reports)?;
    write_json(&dir.join("metrics.json"), &out.metrics)?;
    let csv = BufWriter::new(File::create(dir.join("metrics.csv"))?);
    write_csv(csv, out.metrics.csv_rows(scenario, &out.trace.header)).map_err(csv_io)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: u64,
    pub violated: u64,
    pub not_applicable: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub seed: u64,
    pub report: CheckReport,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64>) -> Stats {
        let v: Vec<f64> = values.collect();
        if v.is_empty() {
            return Stats::default();
        }
        Stats {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Per-seed line of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub digest: String,
    pub safety: Verdict,
    pub lemma_sp: Verdict,
    pub lemma_fp: Verdict,
    pub growth: Verdict,
    pub fast_termination: Verdict,
    pub mean_latency_ms: f64,
    pub p50_latency_ms: u64,
    pub p99_latency_ms: u64,
    pub throughput_bytes_per_s: f64,
    pub block_interval_ms: f64,
    pub fast_hit_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub scenario: String,
    pub mode: Mode,
    pub runs: u64,
    pub seeds: Vec<u64>,
    pub verdicts: BTreeMap<String, VerdictCounts>,
    pub violations: Vec<Violation>,
    pub mean_latency_ms: Stats,
    pub throughput_bytes_per_s: Stats,
    pub block_interval_ms: Stats,
    pub fast_hit_rate: Stats,
    /// SHA-256 over the per-seed trace digests, in seed order.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub summary: SweepSummary,
    pub rows: Vec<SeedRow>,
}

fn pool(parallel: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build().expect("thread pool")
}

/// Runs `f` for every seed on `parallel` threads; results keep seed order.
fn map_seeds<T: Send>(
    seeds: &[u64],
    parallel: usize,
    f: impl Fn(u64) -> Result<T, ScenarioError> + Sync,
) -> Result<Vec<T>, ScenarioError> {
    pool(parallel).install(|| seeds.par_iter().map(|s| f(*s)).collect())
}

pub fn sweep(sc: &Scenario, seeds: &[u64], parallel: usize) -> Result<Sweep, ScenarioError> {
    let outcomes = map_seeds(seeds, parallel, |seed| {
        let out = run_seed(sc, seed)?;
        let verdict = |i: usize| out.reports[i].verdict;
        let row = SeedRow {
            seed,
            digest: out.digest.clone(),
            safety: verdict(0),
            lemma_sp: verdict(1),
            lemma_fp: verdict(2),
            growth: verdict(3),
            fast_termination: verdict(4),
            mean_latency_ms: out.metrics.mean_latency_ms,
            p50_latency_ms: out.metrics.p50_latency_ms,
            p99_latency_ms: out.metrics.p99_latency_ms,
            throughput_bytes_per_s: out.metrics.throughput_bytes_per_s,
            block_interval_ms: out.metrics.block_interval_ms,
            fast_hit_rate: out.metrics.fast_hit_rate,
        };
        Ok((row, out.reports))
    })?;

    let mut verdicts: BTreeMap<String, VerdictCounts> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut h = Sha256::new();
    for (row, reports) in &outcomes {
        h.update(row.digest.as_bytes());
        for r in reports {
            let c = verdicts.entry(r.property.clone()).or_default();
            match r.verdict {
                Verdict::Pass => c.pass += 1,
                Verdict::Violated => {
                    c.violated += 1;
                    violations.push(Violation { seed: row.seed, report: r.clone() });
                }
                Verdict::NotApplicable => c.not_applicable += 1,
            }
        }
    }
    let rows: Vec<SeedRow> = outcomes.into_iter().map(|(row, _)| row).collect();
    let summary = SweepSummary {
        scenario: sc.name.clone(),
        mode: sc.protocol.mode,
        runs: rows.len() as u64,
        seeds: seeds.to_vec(),
        verdicts,
        violations,
        mean_latency_ms: Stats::of(rows.iter().map(|r| r.mean_latency_ms)),
        throughput_bytes_per_s: Stats::of(rows.iter().map(|r| r.throughput_bytes_per_s)),
        block_interval_ms: Stats::of(rows.iter().map(|r| r.block_interval_ms)),
        fast_hit_rate: Stats::of(rows.iter().map(|r| r.fast_hit_rate)),
        digest: hex::encode(h.finalize()),
    };
    Ok(Sweep { summary, rows })
}

/// Writes `summary.json` and `sweep.csv`.
pub fn write_sweep(sweep: &Sweep, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("summary.json"), &sweep.summary)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("sweep.csv"))?));
    for row in &sweep.rows {
        w.serialize(row).map_err(csv_io)?;
    }
    w.flush()
}

/// Proposer latency of the same round under both modes, on the same seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedRow {
    pub seed: u64,
    pub round: Round,
    pub banyan_ms: u64,
    pub icc_ms: u64,
    /// `icc_ms - banyan_ms`.
    pub saving_ms: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedSummary {
    pub scenario: String,
    pub rounds: u64,
    pub banyan_faster: u64,
    pub equal: u64,
    pub icc_faster: u64,
    pub mean_saving_ms: f64,
}

/// Runs the scenario in both modes on each seed and pairs latencies by round.
pub fn paired(sc: &Scenario, seeds: &[u64], parallel: usize) -> Result<(PairedSummary, Vec<PairedRow>), ScenarioError> {
    let with_mode = |mode| Scenario { protocol: crate::types::ProtocolConfig { mode, ..sc.protocol }, ..sc.clone() };
    let (banyan, icc) = (with_mode(Mode::Banyan), with_mode(Mode::Icc));
    let per_seed = map_seeds(seeds, parallel, |seed| {
        let b = run_seed(&banyan, seed)?.metrics;
        let i = run_seed(&icc, seed)?.metrics;
        let icc_by_round: BTreeMap<Round, u64> = i.samples.iter().map(|s| (s.round, s.latency())).collect();
        Ok(b.samples
            .iter()
            .filter_map(|s| {
                let icc_ms = *icc_by_round.get(&s.round)?;
                let banyan_ms = s.latency();
                Some(PairedRow { seed, round: s.round, banyan_ms, icc_ms, saving_ms: icc_ms as i64 - banyan_ms as i64 })
            })
            .collect::<Vec<_>>())
    })?;
    let rows: Vec<PairedRow> = per_seed.into_iter().flatten().collect();
    let summary = PairedSummary {
        scenario: sc.name.clone(),
        rounds: rows.len() as u64,
        banyan_faster: rows.iter().filter(|r| r.saving_ms > 0).count() as u64,
        equal: rows.iter().filter(|r| r.saving_ms == 0).count() as u64,
        icc_faster: rows.iter().filter(|r| r.saving_ms < 0).count() as u64,
        mean_saving_ms: Stats::of(rows.iter().map(|r| r.saving_ms as f64)).mean,
    };
    Ok((summary, rows))
}

pub fn write_paired(summary: &PairedSummary, rows: &[PairedRow], dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("paired.json"), summary)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("paired.csv"))?));
    for row in rows {
        w.serialize(row).map_err(csv_io)?;
    }
    w.flush()
}

/// State of a trace file's digest line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Integrity {
    Intact,
    /// No digest line: the file was cut short.
    Incomplete,
    Corrupt {
        stored: String,
        computed: String,
    },
}

#[derive(Clone, Debug)]
pub struct Replay {
    pub loaded: LoadedTrace,
    pub integrity: Integrity,
    pub reports: Vec<CheckReport>,
}

/// Re-runs every checker on a stored trace.
pub fn replay(path: &Path) -> Result<Replay, TraceError> {
    let loaded = Trace::read_jsonl(BufReader::new(File::open(path)?))?;
    let integrity = match &loaded.stored_digest {
        None => Integrity::Incomplete,
        Some(_) if loaded.digest_matches() => Integrity::Intact,
        Some(stored) => Integrity::Corrupt { stored: stored.clone(), computed: loaded.computed_digest.clone() },
    };
    let reports = check_all(&loaded.trace);
    Ok(Replay { loaded, integrity, reports })
}
