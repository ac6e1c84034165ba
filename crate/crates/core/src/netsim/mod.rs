//! Deterministic discrete-event network simulation.
//!
//! [`run`] wires `n` engine instances through a [`DelayModel`], applies the
//! configured fault [`Behavior`]s and records everything into a [`Trace`].
//! The result is a pure function of the [`RunSpec`] and the seed.

mod delay;
mod sim;
mod trace;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delay::{AsyncWindow, DelayModel, Jitter};
pub use sim::run;
pub use trace::{
    Audit, FaultEntry, LoadedTrace, RecordKind, Trace, TraceError, TraceHeader, TraceRecord, TRACE_FORMAT,
};

use crate::engine::Mutations;
use crate::types::{ConfigError, Millis, ProtocolConfig, ReplicaId, Round, VoteKind};

/// What a replica does besides (or instead of) following the protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Behavior {
    #[default]
    Honest,
    /// Stops processing and sending at `at`.
    Crash { at: Millis },
    /// Sends nothing for rounds in which it is the leader.
    MuteLeader,
    /// As leader, sends one rank-0 block to half of the replicas and a
    /// conflicting one (with its fast and notarization vote) to the rest.
    EquivocatingLeader,
    /// Sends a fast vote for every block it receives.
    PromiscuousFastVoter,
    /// Drops its own votes of the listed kinds.
    WithholdVotes { kinds: Vec<VoteKind> },
}

impl Behavior {
    pub fn name(&self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::Crash { .. } => "crash",
            Behavior::MuteLeader => "mute_leader",
            Behavior::EquivocatingLeader => "equivocating_leader",
            Behavior::PromiscuousFastVoter => "promiscuous_fast_voter",
            Behavior::WithholdVotes { .. } => "withhold_votes",
        }
    }
}

/// A fully specified simulation, minus the seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub protocol: ProtocolConfig,
    pub delays: DelayModel,
    /// Replicas not listed are honest.
    pub faults: BTreeMap<ReplicaId, Behavior>,
    pub payload_bytes: usize,
    /// Rounds every honest replica must complete.
    pub rounds: Round,
    /// Added to every message's size in byte accounting.
    pub message_overhead_bytes: u64,
    pub mutations: Mutations,
    /// Overrides the default completion deadline.
    pub deadline: Option<Millis>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("delay matrix must be {n} x {n}")]
    MatrixShape { n: u32 },
    #[error("jitter range [{lo}, {hi}] is empty")]
    Jitter { lo: Millis, hi: Millis },
    #[error("link {from} -> {to} can take {delay} ms, above delta = {delta} ms")]
    SlowLink { from: u32, to: u32, delay: Millis, delta: Millis },
    #[error("asynchrony window [{start}, {end}) is empty")]
    EmptyWindow { start: Millis, end: Millis },
    #[error("fault assigned to replica {0}, which does not exist")]
    UnknownReplica(u32),
    #[error("rounds must be positive")]
    NoRounds,
}

impl RunSpec {
    /// A fault-free run over uniform delays.
    pub fn uniform(protocol: ProtocolConfig, delay: Millis, rounds: Round) -> Self {
        RunSpec {
            delays: DelayModel::uniform(protocol.n, delay),
            protocol,
            faults: BTreeMap::new(),
            payload_bytes: 0,
            rounds,
            message_overhead_bytes: 0,
            mutations: Mutations::default(),
            deadline: None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.protocol.validate()?;
        self.delays.validate(self.protocol.n, self.protocol.delta_ms)?;
        if let Some(r) = self.faults.keys().find(|r| r.0 >= self.protocol.n) {
            return Err(SimError::UnknownReplica(r.0));
        }
        if self.rounds == 0 {
            return Err(SimError::NoRounds);
        }
        Ok(())
    }

    pub fn behavior(&self, replica: ReplicaId) -> &Behavior {
        static HONEST: Behavior = Behavior::Honest;
        self.faults.get(&replica).unwrap_or(&HONEST)
    }

    /// Replicas with no fault assigned, ascending.
    pub fn honest(&self) -> Vec<ReplicaId> {
        self.protocol.replicas().filter(|r| *self.behavior(*r) == Behavior::Honest).collect()
    }

    /// Non-honest replicas, crash faults included.
    pub fn faulty_count(&self) -> usize {
        self.faults.values().filter(|b| **b != Behavior::Honest).count()
    }

    /// Time by which every honest replica should be done: each round may
    /// skip up to `f` silent ranks, and each window may stall progress for
    /// its length plus `Δ`.
    pub fn deadline(&self) -> Millis {
        if let Some(d) = self.deadline {
            return d;
        }
        let delta = self.protocol.delta_ms;
        let per_round = 2 * delta * (Millis::from(self.protocol.f) + 1) + 4 * delta;
        let windows: Millis = self.delays.windows.iter().map(|w| w.end - w.start + delta).sum();
        self.rounds * per_round + windows
    }

    /// Where the simulation stops at the latest: the deadline plus `10Δ` grace.
    pub fn horizon(&self) -> Millis {
        self.deadline() + 10 * self.protocol.delta_ms
    }
}
