//! Line-delimited JSON traces.
//!
//! A trace file holds a header line, one line per record, an audit line and
//! finally `{"digest": "<hex>"}`: the SHA-256 of every preceding line
//! (newlines included).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{AsyncWindow, Behavior};
use crate::engine::{Mutations, UnlockCause};
use crate::types::{BlockHash, Millis, Mode, PathTag, Rotation, Round, VoteKind};

pub const TRACE_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    pub replica: u32,
    pub behavior: Behavior,
}

/// Everything a checker needs to know about the run besides its records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: u32,
    pub n: u32,
    pub f: u32,
    pub p: u32,
    pub delta_ms: Millis,
    pub mode: Mode,
    pub rotation: Rotation,
    pub rounds: Round,
    /// Time by which the configured rounds are expected to be done.
    pub deadline: Millis,
    pub seed: u64,
    pub honest: Vec<u32>,
    pub faults: Vec<FaultEntry>,
    pub windows: Vec<AsyncWindow>,
    pub payload_bytes: usize,
    pub mutations: Mutations,
}

impl TraceHeader {
    pub fn is_honest(&self, replica: u32) -> bool {
        self.honest.binary_search(&replica).is_ok()
    }

    /// The rank-0 replica of `round`, using the run's rotation.
    pub fn leader(&self, round: Round) -> u32 {
        self.protocol().leader(round).0
    }

    pub fn protocol(&self) -> crate::types::ProtocolConfig {
        crate::types::ProtocolConfig {
            n: self.n,
            f: self.f,
            p: self.p,
            delta_ms: self.delta_ms,
            mode: self.mode,
            rotation: self.rotation,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Send,
    Deliver,
    /// A message addressed to a crashed replica.
    Drop,
    Propose,
    Notarized,
    Unlocked,
    RoundEntered,
    Finalized,
    Rejected,
    Alarm,
}

/// One trace line. `from` is the acting replica for non-network records.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub time: Millis,
    pub kind: RecordKind,
    pub from: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<u32>,
    pub round: Round,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_hash: Option<BlockHash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote_kind: Option<VoteKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_tag: Option<PathTag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msg: Option<String>,
    /// Send time, on deliveries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<BlockHash>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<UnlockCause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TraceRecord {
    pub fn new(time: Millis, kind: RecordKind, from: u32, round: Round) -> Self {
        TraceRecord {
            time,
            kind,
            from,
            to: None,
            round,
            block_hash: None,
            vote_kind: None,
            path_tag: None,
            msg: None,
            sent: None,
            bytes: None,
            parent: None,
            rank: None,
            proposer: None,
            cause: None,
            detail: None,
        }
    }
}

/// Message accounting, filled in by the simulator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Audit {
    pub sends: u64,
    pub deliveries: u64,
    pub dropped: u64,
    pub in_flight: u64,
    /// Votes sent by one replica in another replica's name.
    pub forged_votes: u64,
    pub end_time: Millis,
}

impl Audit {
    pub fn conserved(&self) -> bool {
        self.sends == self.deliveries + self.dropped + self.in_flight
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    /// Missing when the trace was read from a truncated file.
    pub audit: Option<Audit>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace is empty")]
    Empty,
    #[error("unsupported trace format {0}")]
    Format(u32),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AuditLine {
    audit: Audit,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DigestLine {
    digest: String,
}

/// Result of reading a trace file back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadedTrace {
    pub trace: Trace,
    /// Digest stored in the file, if the file is complete.
    pub stored_digest: Option<String>,
    /// Digest recomputed over the lines actually read.
    pub computed_digest: String,
}

impl LoadedTrace {
    pub fn digest_matches(&self) -> bool {
        self.stored_digest.as_deref() == Some(self.computed_digest.as_str())
    }
}

fn line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("trace types serialize infallibly")
}

impl Trace {
    fn lines(&self) -> impl Iterator<Item = String> + '_ {
        std::iter::once(line(&self.header))
            .chain(self.records.iter().map(line))
            .chain(self.audit.map(|audit| line(&AuditLine { audit })))
    }

    /// Hex SHA-256 over the canonical JSONL body.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for l in self.lines() {
            h.update(l.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<String> {
        let mut h = Sha256::new();
        for l in self.lines() {
            h.update(l.as_bytes());
            h.update(b"\n");
            out.write_all(l.as_bytes())?;
            out.write_all(b"\n")?;
        }
        let digest = hex::encode(h.finalize());
        writeln!(out, "{}", line(&DigestLine { digest: digest.clone() }))?;
        out.flush()?;
        Ok(digest)
    }

    /// Reads a trace written by [`Trace::write_jsonl`]. A missing digest line
    /// is not an error (the file may be truncated); callers decide.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<LoadedTrace, TraceError> {
        let mut h = Sha256::new();
        let mut header: Option<TraceHeader> = None;
        let mut records = Vec::new();
        let mut audit = None;
        let mut stored_digest = None;
        let lines: Vec<String> = input.lines().collect::<Result<_, _>>()?;
        let last = lines.len().saturating_sub(1);
        for (i, l) in lines.into_iter().enumerate() {
            if l.trim().is_empty() {
                continue;
            }
            // A cut-off final line means the file was truncated mid-write.
            if i == last && header.is_some() && serde_json::from_str::<serde_json::Value>(&l).is_err() {
                break;
            }
            let json = |e| TraceError::Json { line: i + 1, source: e };
            if header.is_none() {
                let hd: TraceHeader = serde_json::from_str(&l).map_err(json)?;
                if hd.format != TRACE_FORMAT {
                    return Err(TraceError::Format(hd.format));
                }
                header = Some(hd);
            } else if l.starts_with("{\"digest\"") {
                stored_digest = Some(serde_json::from_str::<DigestLine>(&l).map_err(json)?.digest);
                break;
            } else if l.starts_with("{\"audit\"") {
                audit = Some(serde_json::from_str::<AuditLine>(&l).map_err(json)?.audit);
            } else {
                records.push(serde_json::from_str(&l).map_err(json)?);
            }
            h.update(l.as_bytes());
            h.update(b"\n");
        }
        let header = header.ok_or(TraceError::Empty)?;
        Ok(LoadedTrace {
            trace: Trace { header, records, audit },
            stored_digest,
            computed_digest: hex::encode(h.finalize()),
        })
    }
}
