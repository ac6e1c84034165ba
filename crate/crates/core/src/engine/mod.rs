//! A single replica as a deterministic state machine.
//!
//! The replica never reads a clock or a socket. It is fed [`EngineInput`]s in
//! non-decreasing time order and answers each with a list of [`Output`]s.
//! [`Replica::next_timer`] says when it next wants a tick.

mod replica;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use replica::Replica;

use crate::types::{
    Aggregate, AggregateKind, Block, BlockHash, Millis, PathTag, Payload, ReplicaId, Round, Vote, VoteKind,
};

/// A block together with the evidence that its parent may be extended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockMsg {
    pub block: Block,
    pub parent_notarization: Arc<Aggregate>,
    /// Absent in ICC mode, where every notarized block is extendable.
    pub parent_unlock: Option<Arc<Aggregate>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Block(Arc<BlockMsg>),
    Vote(Vote),
    Aggregate(Arc<Aggregate>),
}

/// Rough canonical sizes, used for bandwidth accounting only.
pub const HEADER_BYTES: usize = 80;
pub const SIGNATURE_BYTES: usize = 36;
pub const VOTE_BYTES: usize = 1 + 4 + 8 + 32 + SIGNATURE_BYTES;

fn aggregate_bytes(a: &Aggregate) -> usize {
    1 + HEADER_BYTES + a.votes().len() * VOTE_BYTES + a.headers().len() * HEADER_BYTES
}

impl Message {
    /// The round the message belongs to.
    pub fn round(&self) -> Round {
        match self {
            Message::Block(m) => m.block.round(),
            Message::Vote(v) => v.round(),
            Message::Aggregate(a) => a.round(),
        }
    }

    /// The block the message is about.
    pub fn subject(&self) -> BlockHash {
        match self {
            Message::Block(m) => m.block.hash(),
            Message::Vote(v) => v.block(),
            Message::Aggregate(a) => a.subject(),
        }
    }

    pub fn wire_bytes(&self) -> usize {
        match self {
            Message::Vote(_) => VOTE_BYTES,
            Message::Aggregate(a) => aggregate_bytes(a),
            Message::Block(m) => {
                HEADER_BYTES
                    + SIGNATURE_BYTES
                    + m.block.payload().len()
                    + m.block.embedded_fast_vote().map_or(0, |_| VOTE_BYTES)
                    + aggregate_bytes(&m.parent_notarization)
                    + m.parent_unlock.as_deref().map_or(0, aggregate_bytes)
            }
        }
    }

    /// Short label for traces.
    pub fn label(&self) -> &'static str {
        match self {
            Message::Block(_) => "block",
            Message::Vote(v) => match v.kind() {
                VoteKind::Notarization => "notarization_vote",
                VoteKind::Fast => "fast_vote",
                VoteKind::Finalization => "finalization_vote",
            },
            Message::Aggregate(a) => match a.kind() {
                AggregateKind::Notarization => "notarization",
                AggregateKind::Finalization => "finalization",
                AggregateKind::FastFinalization => "fast_finalization",
                AggregateKind::UnlockProof => "unlock_proof",
            },
        }
    }
}

#[derive(Clone, Debug)]
pub enum EngineInput {
    Timer { now: Millis },
    Deliver { from: ReplicaId, message: Message, now: Millis },
}

impl EngineInput {
    pub fn now(&self) -> Millis {
        match self {
            EngineInput::Timer { now } | EngineInput::Deliver { now, .. } => *now,
        }
    }
}

/// Blocks committed by one finalization, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalizedOutput {
    pub blocks: Vec<FinalizedBlock>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalizedBlock {
    pub round: Round,
    pub hash: BlockHash,
    pub proposer: ReplicaId,
    pub path: PathTag,
    pub payload: Payload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlockCause {
    /// The block's own support plus non-leader support exceeds `f + p`.
    Condition1,
    /// Support outside the best-supported leader block exceeds `f + p`.
    Condition2,
    /// A verified unlock proof was received.
    Proof,
    Finalized,
}

impl UnlockCause {
    pub fn as_str(self) -> &'static str {
        match self {
            UnlockCause::Condition1 => "condition1",
            UnlockCause::Condition2 => "condition2",
            UnlockCause::Proof => "proof",
            UnlockCause::Finalized => "finalized",
        }
    }
}

/// Observable state changes, recorded in traces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineEvent {
    Proposed {
        round: Round,
        block: BlockHash,
        parent: BlockHash,
        rank: u32,
    },
    Notarized {
        round: Round,
        block: BlockHash,
    },
    /// `block` is `None` when the whole round was unlocked.
    Unlocked {
        round: Round,
        block: Option<BlockHash>,
        cause: UnlockCause,
    },
    RoundEntered {
        round: Round,
        parent: BlockHash,
    },
    Rejected {
        round: Round,
        reason: String,
    },
    /// Local evidence contradicts itself, e.g. two finalized blocks in a round.
    SafetyAlarm {
        round: Round,
        detail: String,
    },
}

#[derive(Clone, Debug)]
pub enum Output {
    Broadcast(Message),
    Finalized(FinalizedOutput),
    Event(EngineEvent),
}

/// Deliberate protocol bugs, used to show the checkers catch them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Mutations {
    pub quorum_minus_one: bool,
    pub fast_quorum_minus_one: bool,
    pub inclusive_unlock_threshold: bool,
    pub double_fast_vote: bool,
}

impl Mutations {
    pub fn any(&self) -> bool {
        self.quorum_minus_one || self.fast_quorum_minus_one || self.inclusive_unlock_threshold || self.double_fast_vote
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineParams {
    pub payload_bytes: usize,
    pub payload_seed: u64,
    pub mutations: Mutations,
}
