use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::honest_events;
use crate::netsim::{RecordKind, Trace, TraceHeader, TraceRecord};
use crate::types::{BlockHash, Millis, Mode, PathTag, Round};

/// Finalization latency of one round's block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencySample {
    pub round: Round,
    pub proposer: u32,
    pub propose_ms: Millis,
    /// At the proposer, or at the first honest replica if the proposer is faulty.
    pub finalize_ms: Millis,
    pub path: PathTag,
    pub bytes: u64,
}

impl LatencySample {
    pub fn latency(&self) -> Millis {
        self.finalize_ms - self.propose_ms
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCounts {
    pub fast: u64,
    pub slow: u64,
    pub implicit: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rounds: Round,
    pub mean_latency_ms: f64,
    pub p50_latency_ms: Millis,
    pub p95_latency_ms: Millis,
    pub p99_latency_ms: Millis,
    /// Committed payload bytes per second, averaged over honest replicas.
    pub throughput_bytes_per_s: f64,
    /// Mean time between round starts, averaged over honest replicas.
    pub block_interval_ms: f64,
    pub fast_hit_rate: f64,
    pub paths: PathCounts,
    pub samples: Vec<LatencySample>,
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[Millis], q: f64) -> Millis {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Latency, throughput and path statistics over rounds `1..=rounds`.
pub fn metrics(trace: &Trace) -> Metrics {
    let h = &trace.header;
    let in_scope = |r: &&TraceRecord| r.round >= 1 && r.round <= h.rounds;

    let mut proposed: BTreeMap<(u32, BlockHash), &TraceRecord> = BTreeMap::new();
    for r in trace.records.iter().filter(|r| r.kind == RecordKind::Propose && r.to.is_none()) {
        if let Some(b) = r.block_hash {
            proposed.entry((r.from, b)).or_insert(r);
        }
    }
    let finals: Vec<&TraceRecord> =
        honest_events(trace).filter(|r| r.kind == RecordKind::Finalized).filter(in_scope).collect();

    // Per round: the proposer's own finalization if it has one, else the earliest.
    let mut chosen: BTreeMap<Round, &TraceRecord> = BTreeMap::new();
    for f in &finals {
        let at_proposer = f.proposer == Some(f.from);
        match chosen.get(&f.round) {
            Some(c) if c.proposer == Some(c.from) || !at_proposer => {}
            _ => {
                chosen.insert(f.round, f);
            }
        }
    }
    let samples: Vec<LatencySample> = chosen
        .values()
        .filter_map(|f| {
            let proposer = f.proposer?;
            let p = proposed.get(&(proposer, f.block_hash?))?;
            Some(LatencySample {
                round: f.round,
                proposer,
                propose_ms: p.time,
                finalize_ms: f.time,
                path: f.path_tag.unwrap_or(PathTag::Implicit),
                bytes: f.bytes.unwrap_or(0),
            })
        })
        .collect();

    let mut paths = PathCounts::default();
    for s in &samples {
        match s.path {
            PathTag::Fast => paths.fast += 1,
            PathTag::Slow => paths.slow += 1,
            PathTag::Implicit => paths.implicit += 1,
        }
    }
    let mut lat: Vec<Millis> = samples.iter().map(LatencySample::latency).collect();
    lat.sort_unstable();

    let throughput = mean(h.honest.iter().filter_map(|u| {
        let mine: Vec<_> = finals.iter().filter(|f| f.from == *u).collect();
        let end = mine.last()?.time;
        let bytes: u64 = mine.iter().filter_map(|f| f.bytes).sum();
        (end > 0).then(|| bytes as f64 * 1000.0 / end as f64)
    }));

    let block_interval = mean(h.honest.iter().filter_map(|u| {
        let entered: Vec<_> = honest_events(trace)
            .filter(|r| r.kind == RecordKind::RoundEntered && r.from == *u && r.round <= h.rounds + 1)
            .collect();
        let (first, last) = (entered.first()?, entered.last()?);
        (last.round > first.round).then(|| (last.time - first.time) as f64 / (last.round - first.round) as f64)
    }));

    Metrics {
        rounds: h.rounds,
        mean_latency_ms: mean(lat.iter().map(|l| *l as f64)),
        p50_latency_ms: percentile(&lat, 0.50),
        p95_latency_ms: percentile(&lat, 0.95),
        p99_latency_ms: percentile(&lat, 0.99),
        throughput_bytes_per_s: throughput,
        block_interval_ms: block_interval,
        fast_hit_rate: if samples.is_empty() { 0.0 } else { paths.fast as f64 / samples.len() as f64 },
        paths,
        samples,
    }
}

/// One line of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub protocol: Mode,
    pub n: u32,
    pub f: u32,
    pub p: u32,
    pub round: Round,
    pub proposer: u32,
    pub propose_ms: Millis,
    pub finalize_ms: Millis,
    pub path: PathTag,
    pub bytes: u64,
}

impl Metrics {
    pub fn csv_rows<'a>(&'a self, scenario: &'a str, header: &'a TraceHeader) -> impl Iterator<Item = CsvRow> + 'a {
        self.samples.iter().map(move |s| CsvRow {
            scenario: scenario.to_string(),
            protocol: header.mode,
            n: header.n,
            f: header.f,
            p: header.p,
            round: s.round,
            proposer: s.proposer,
            propose_ms: s.propose_ms,
            finalize_ms: s.finalize_ms,
            path: s.path,
            bytes: s.bytes,
        })
    }
}

/// Writes rows with a header line, even when there are no rows.
pub fn write_csv<W: Write>(out: W, rows: impl IntoIterator<Item = CsvRow>) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record([
        "scenario",
        "protocol",
        "n",
        "f",
        "p",
        "round",
        "proposer",
        "propose_ms",
        "finalize_ms",
        "path",
        "bytes",
    ])?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<Millis> = (1..=100).collect();
        assert_eq!(percentile(&v, 0.5), 50);
        assert_eq!(percentile(&v, 0.95), 95);
        assert_eq!(percentile(&v, 0.99), 99);
        assert_eq!(percentile(&[7], 0.99), 7);
        assert_eq!(percentile(&[], 0.5), 0);
    }
}
