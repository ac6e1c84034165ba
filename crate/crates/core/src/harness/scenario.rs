use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Mutations;
use crate::netsim::{AsyncWindow, Behavior, DelayModel, FaultEntry, Jitter, RunSpec, SimError};
use crate::types::{Millis, ProtocolConfig, ReplicaId, Round};

pub const SCHEMA_VERSION: u32 = 1;

/// How one-way delays between replicas are given.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    /// Every link takes the same time.
    Uniform { one_way_ms: Millis },
    /// A full `n x n` matrix, `one_way_ms[from][to]`.
    Matrix { one_way_ms: Vec<Vec<Millis>> },
    /// Replicas placed in sites; links take the site-to-site delay, or
    /// `intra_site_ms` inside a site.
    Sites { sites: Vec<String>, one_way_ms: Vec<Vec<Millis>>, placement: Vec<usize>, intra_site_ms: Millis },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    List(Vec<u64>),
    /// Inclusive on both ends.
    Range([u64; 2]),
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range([0, 0])
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

/// A simulation experiment as stored on disk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub protocol: ProtocolConfig,
    pub delays: DelaySpec,
    #[serde(default)]
    pub jitter: Jitter,
    #[serde(default)]
    pub windows: Vec<AsyncWindow>,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    /// Permits more than `f` faulty replicas, to demonstrate what breaks.
    #[serde(default)]
    pub allow_excess_faults: bool,
    #[serde(default)]
    pub payload_bytes: usize,
    pub rounds: Round,
    #[serde(default)]
    pub message_overhead_bytes: u64,
    #[serde(default)]
    pub mutations: Mutations,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_ms: Option<Millis>,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {source}")]
    Parse { origin: String, source: serde_json::Error },
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    SchemaVersion(u32),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("no preset or file named {0:?}")]
    NotFound(String),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field, reason: reason.into() }
}

impl From<SimError> for ScenarioError {
    fn from(e: SimError) -> Self {
        let field = match e {
            SimError::Config(_) => "protocol",
            SimError::MatrixShape { .. } | SimError::SlowLink { .. } => "delays",
            SimError::Jitter { .. } => "jitter",
            SimError::EmptyWindow { .. } => "windows",
            SimError::UnknownReplica(_) => "faults",
            SimError::NoRounds => "rounds",
        };
        invalid(field, e.to_string())
    }
}

impl DelaySpec {
    pub fn matrix(&self, n: u32) -> Result<Vec<Vec<Millis>>, ScenarioError> {
        let n = n as usize;
        match self {
            DelaySpec::Uniform { one_way_ms } => Ok(DelayModel::uniform(n as u32, *one_way_ms).base),
            DelaySpec::Matrix { one_way_ms } => {
                if one_way_ms.len() != n || one_way_ms.iter().any(|row| row.len() != n) {
                    return Err(invalid("delays.one_way_ms", format!("must be {n} x {n}")));
                }
                Ok(one_way_ms.clone())
            }
            DelaySpec::Sites { sites, one_way_ms, placement, intra_site_ms } => {
                let s = sites.len();
                if one_way_ms.len() != s || one_way_ms.iter().any(|row| row.len() != s) {
                    return Err(invalid("delays.one_way_ms", format!("must be {s} x {s}, one row per site")));
                }
                if placement.len() != n {
                    return Err(invalid("delays.placement", format!("must list a site for each of the {n} replicas")));
                }
                if let Some(bad) = placement.iter().find(|p| **p >= s) {
                    return Err(invalid("delays.placement", format!("site index {bad} out of range")));
                }
                Ok((0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| match (i == j, placement[i] == placement[j]) {
                                (true, _) => 0,
                                (false, true) => *intra_site_ms,
                                (false, false) => one_way_ms[placement[i]][placement[j]],
                            })
                            .collect()
                    })
                    .collect())
            }
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario =
            serde_json::from_str(text).map_err(|source| ScenarioError::Parse { origin: origin.to_string(), source })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// A file path, or else the name of a bundled preset.
    pub fn load(name_or_path: &str) -> Result<Self, ScenarioError> {
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::from_file(path);
        }
        match super::presets::get(name_or_path.trim_end_matches(".json")) {
            Some(text) => Self::from_json(text, name_or_path),
            None => Err(ScenarioError::NotFound(name_or_path.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.faults.iter().find(|e| !seen.insert(e.replica)) {
            return Err(invalid("faults", format!("replica {} listed twice", dup.replica)));
        }
        let faulty = self.faults.iter().filter(|e| e.behavior != Behavior::Honest).count();
        if faulty > self.protocol.f as usize && !self.allow_excess_faults {
            return Err(invalid(
                "faults",
                format!(
                    "{faulty} faulty replicas exceed f = {}; set allow_excess_faults to run anyway",
                    self.protocol.f
                ),
            ));
        }
        if let SeedSpec::Range([a, b]) = self.seeds {
            if a > b {
                return Err(invalid("seeds", format!("range [{a}, {b}] is empty")));
            }
        }
        self.run_spec()?.validate()?;
        Ok(())
    }

    pub fn run_spec(&self) -> Result<RunSpec, ScenarioError> {
        let delays = DelayModel {
            base: self.delays.matrix(self.protocol.n)?,
            jitter: self.jitter,
            windows: self.windows.clone(),
        };
        Ok(RunSpec {
            protocol: self.protocol,
            delays,
            faults: self.faults.iter().map(|e| (ReplicaId(e.replica), e.behavior.clone())).collect(),
            payload_bytes: self.payload_bytes,
            rounds: self.rounds,
            message_overhead_bytes: self.message_overhead_bytes,
            mutations: self.mutations,
            deadline: self.deadline_ms,
        })
    }

    pub fn seeds(&self) -> Vec<u64> {
        match &self.seeds {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range([a, b]) => (*a..=*b).collect(),
        }
    }
}

/// Parses `A..B` (inclusive) or a single seed.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("expected A..B or a single seed, got {s:?}");
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if a > b {
                return Err(format!("seed range {a}..{b} is empty"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}
