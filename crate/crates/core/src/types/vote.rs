use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Block, BlockHash, BlockHeader, ReplicaId, Round};
use crate::crypto::{Signature, SignatureVerifier, Signer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteKind {
    Notarization,
    Fast,
    Finalization,
}

impl VoteKind {
    fn tag(self) -> u8 {
        match self {
            VoteKind::Notarization => 0,
            VoteKind::Fast => 1,
            VoteKind::Finalization => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vote {
    kind: VoteKind,
    voter: ReplicaId,
    round: Round,
    block: BlockHash,
    signature: Signature,
}

impl Vote {
    fn message(kind: VoteKind, round: Round, block: &BlockHash) -> [u8; 45] {
        let mut m = [0u8; 45];
        m[..4].copy_from_slice(b"vote");
        m[4] = kind.tag();
        m[5..13].copy_from_slice(&round.to_le_bytes());
        m[13..].copy_from_slice(&block.0);
        m
    }

    pub fn new(signer: &Signer, kind: VoteKind, round: Round, block: BlockHash) -> Vote {
        let signature = signer.sign(&Self::message(kind, round, &block));
        Vote { kind, voter: signer.id(), round, block, signature }
    }

    pub fn kind(&self) -> VoteKind {
        self.kind
    }

    pub fn voter(&self) -> ReplicaId {
        self.voter
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn block(&self) -> BlockHash {
        self.block
    }

    pub fn verify(&self, verifier: &dyn SignatureVerifier) -> bool {
        verifier.verify(self.voter, &Self::message(self.kind, self.round, &self.block), &self.signature)
    }

    #[cfg(test)]
    pub(crate) fn forge_for_tests(voter: ReplicaId, mut v: Vote) -> Vote {
        v.voter = voter;
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateKind {
    Notarization,
    Finalization,
    FastFinalization,
    UnlockProof,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("voter {0} appears twice")]
    DuplicateVoter(ReplicaId),
    #[error("vote for round {vote} in a round-{expected} aggregate")]
    MixedRounds { expected: Round, vote: Round },
    #[error("{0:?} vote does not fit this aggregate")]
    WrongVote(VoteKind),
}

/// Combined votes plus enough context to verify them on their own.
///
/// Voters are kept explicitly (sorted), standing in for a multi-signature and
/// its signer bitmap. Unlock proofs additionally carry the headers of every
/// block their fast votes attest, so a receiver can recompute ranks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate {
    kind: AggregateKind,
    subject: BlockHeader,
    subject_hash: BlockHash,
    votes: Vec<Vote>,
    headers: Vec<BlockHeader>,
}

impl Aggregate {
    /// Builds an aggregate for `subject`. Vote order does not matter.
    pub fn combine(
        kind: AggregateKind,
        subject: &BlockHeader,
        votes: impl IntoIterator<Item = Vote>,
        headers: impl IntoIterator<Item = BlockHeader>,
    ) -> Result<Aggregate, AggregateError> {
        let subject_hash = subject.hash();
        let round = subject.round;
        let mut votes: Vec<Vote> = votes.into_iter().collect();
        votes.sort_by_key(|v| (v.voter, v.kind, v.block));
        let mut seen = BTreeSet::new();
        for v in &votes {
            if v.round != round {
                return Err(AggregateError::MixedRounds { expected: round, vote: v.round });
            }
            let fits = match kind {
                AggregateKind::Notarization => v.kind == VoteKind::Notarization && v.block == subject_hash,
                AggregateKind::Finalization => v.kind == VoteKind::Finalization && v.block == subject_hash,
                AggregateKind::FastFinalization => v.kind == VoteKind::Fast && v.block == subject_hash,
                AggregateKind::UnlockProof => {
                    v.kind == VoteKind::Fast || (v.kind == VoteKind::Finalization && v.block == subject_hash)
                }
            };
            if !fits {
                return Err(AggregateError::WrongVote(v.kind));
            }
            // Unlock proofs may hold one fast vote per (voter, block): a
            // Byzantine voter's equivocation is part of the evidence.
            let key = if kind == AggregateKind::UnlockProof {
                (v.voter, v.kind, v.block)
            } else {
                (v.voter, v.kind, BlockHash::default())
            };
            if !seen.insert(key) {
                return Err(AggregateError::DuplicateVoter(v.voter));
            }
        }
        let mut headers: Vec<BlockHeader> = headers.into_iter().collect();
        if kind == AggregateKind::UnlockProof && !headers.contains(subject) {
            headers.push(*subject);
        }
        headers.sort_by_key(|h| h.hash());
        headers.dedup();
        Ok(Aggregate { kind, subject: *subject, subject_hash, votes, headers })
    }

    /// Empty evidence for genesis, which is notarized and unlocked by definition.
    pub fn genesis(kind: AggregateKind) -> Aggregate {
        let g = Block::genesis();
        Aggregate { kind, subject: *g.header(), subject_hash: g.hash(), votes: vec![], headers: vec![] }
    }

    pub fn kind(&self) -> AggregateKind {
        self.kind
    }

    pub fn round(&self) -> Round {
        self.subject.round
    }

    pub fn subject(&self) -> BlockHash {
        self.subject_hash
    }

    pub fn subject_header(&self) -> Option<&BlockHeader> {
        Some(&self.subject)
    }

    pub fn votes(&self) -> &[Vote] {
        &self.votes
    }

    pub fn headers(&self) -> &[BlockHeader] {
        &self.headers
    }

    pub fn voters(&self) -> BTreeSet<ReplicaId> {
        self.votes.iter().map(|v| v.voter).collect()
    }

    pub fn is_genesis_evidence(&self) -> bool {
        self.subject.round == 0 && self.subject_hash == Block::genesis().hash()
    }
}
