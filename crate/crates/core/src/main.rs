use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use banyan_core::checkers::{CheckReport, Verdict};
use banyan_core::harness::{self, presets, Integrity, Scenario};

#[derive(Parser)]
#[command(name = "banyan", version, about = "Deterministic simulator and checkers for the Banyan consensus protocol")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seed of a scenario and check the trace.
    Run {
        /// Scenario file, or the name of a bundled preset.
        #[arg(long)]
        scenario: String,
        /// Defaults to the scenario's first seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario over a range of seeds.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Inclusive range `A..B`; defaults to the scenario's seeds.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also run every seed in both modes and pair latencies by round.
        #[arg(long)]
        paired: bool,
    },
    /// Re-check a stored trace and verify its digest.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// List the bundled scenario presets.
    Presets,
}

/// Exit status for a checker violation; 2 is reserved for config and I/O errors.
const VIOLATION: u8 = 1;

fn print_reports(reports: &[CheckReport]) {
    for r in reports {
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Violated => "VIOLATED",
            Verdict::NotApplicable => "n/a",
        };
        match &r.note {
            Some(note) => println!("  {:<17} {verdict:<8} {note}", r.property),
            None => println!("  {:<17} {verdict:<8} ({} checked)", r.property, r.checked),
        }
    }
}

fn out_dir(flag: Option<PathBuf>, sc: &Scenario) -> Option<PathBuf> {
    flag.or_else(|| sc.output.dir.clone())
}

fn run(scenario: &str, seed: Option<u64>, out: Option<PathBuf>) -> Result<u8> {
    let sc = Scenario::load(scenario)?;
    let seed = seed.or_else(|| sc.seeds().first().copied()).unwrap_or(0);
    let outcome = harness::run_seed(&sc, seed)?;
    let m = &outcome.metrics;
    println!("{} seed {seed}: trace digest {}", sc.name, outcome.digest);
    print_reports(&outcome.reports);
    println!(
        "  latency mean {:.1} ms, p50 {} ms, p99 {} ms; fast-path hit rate {:.3}; throughput {:.0} B/s; block interval {:.1} ms",
        m.mean_latency_ms, m.p50_latency_ms, m.p99_latency_ms, m.fast_hit_rate, m.throughput_bytes_per_s, m.block_interval_ms
    );
    if let Some(dir) = out_dir(out, &sc) {
        harness::write_run(&outcome, &sc.name, &dir).with_context(|| format!("writing {}", dir.display()))?;
        println!("  wrote {}", dir.display());
    }
    Ok(if outcome.violated() { VIOLATION } else { 0 })
}

fn sweep(scenario: &str, seeds: Option<String>, parallel: usize, out: Option<PathBuf>, paired: bool) -> Result<u8> {
    let sc = Scenario::load(scenario)?;
    let seeds = match seeds {
        Some(s) => harness::parse_seed_range(&s).map_err(anyhow::Error::msg).context("--seeds")?,
        None => sc.seeds(),
    };
    if seeds.is_empty() {
        bail!("no seeds to run");
    }
    let sweep = harness::sweep(&sc, &seeds, parallel)?;
    let s = &sweep.summary;
    println!("{}: {} runs, summary digest {}", s.scenario, s.runs, s.digest);
    for (property, c) in &s.verdicts {
        println!("  {property:<17} pass {:>5}  violated {:>5}  n/a {:>5}", c.pass, c.violated, c.not_applicable);
    }
    println!(
        "  latency mean {:.1} ms (min {:.1}, max {:.1}); fast-path hit rate {:.3}",
        s.mean_latency_ms.mean, s.mean_latency_ms.min, s.mean_latency_ms.max, s.fast_hit_rate.mean
    );
    for v in s.violations.iter().take(10) {
        println!("  seed {} violates {}: {}", v.seed, v.report.property, v.report.note.as_deref().unwrap_or(""));
    }
    let dir = out_dir(out, &sc);
    if let Some(dir) = &dir {
        harness::write_sweep(&sweep, dir).with_context(|| format!("writing {}", dir.display()))?;
        // Keep a replayable trace for every violating seed.
        let mut bad: Vec<u64> = s.violations.iter().map(|v| v.seed).collect();
        bad.dedup();
        for seed in bad {
            let outcome = harness::run_seed(&sc, seed)?;
            let d = dir.join("violations").join(seed.to_string());
            harness::write_run(&outcome, &sc.name, &d).with_context(|| format!("writing {}", d.display()))?;
        }
        println!("  wrote {}", dir.display());
    }
    if paired {
        let (summary, rows) = harness::paired(&sc, &seeds, parallel)?;
        println!(
            "  paired over {} rounds: banyan faster {}, equal {}, icc faster {}; mean saving {:.1} ms",
            summary.rounds, summary.banyan_faster, summary.equal, summary.icc_faster, summary.mean_saving_ms
        );
        if let Some(dir) = &dir {
            harness::write_paired(&summary, &rows, dir).with_context(|| format!("writing {}", dir.display()))?;
        }
    }
    Ok(if s.violations.is_empty() { 0 } else { VIOLATION })
}

fn replay(path: &Path) -> Result<u8> {
    let r = harness::replay(path).with_context(|| format!("reading {}", path.display()))?;
    match &r.integrity {
        Integrity::Intact => println!("{}: digest ok ({})", path.display(), r.loaded.computed_digest),
        Integrity::Incomplete => println!("{}: no digest line, trace is incomplete", path.display()),
        Integrity::Corrupt { stored, computed } => {
            bail!("{}: trace is corrupt: stored digest {stored}, computed {computed}", path.display())
        }
    }
    print_reports(&r.reports);
    Ok(if r.reports.iter().any(CheckReport::is_violation) { VIOLATION } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, out } => run(&scenario, seed, out),
        Command::Sweep { scenario, seeds, parallel, out, paired } => sweep(&scenario, seeds, parallel, out, paired),
        Command::Replay { trace } => replay(&trace),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
