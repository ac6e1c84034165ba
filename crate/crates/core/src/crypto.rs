//! Simulated signatures and aggregate verification.
//!
//! A signature is the signer id plus a keyed digest of the message. Keys are
//! derived by a [`KeyRegistry`] that acts as the PKI: every replica receives a
//! [`Signer`] for its own identity only, and everybody shares a [`Verifier`].
//! Byzantine replicas therefore can equivocate but cannot sign on behalf of
//! anybody else.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{evaluate_unlock, Aggregate, AggregateKind, ProtocolConfig, ReplicaId, Thresholds, VoteKind};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    signer: ReplicaId,
    #[serde(with = "hex::serde")]
    tag: [u8; 32],
}

impl Signature {
    pub fn signer(&self) -> ReplicaId {
        self.signer
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}, {})", self.signer, hex::encode(&self.tag[..4]))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("replica {0} is not registered")]
    UnknownReplica(ReplicaId),
}

type Secret = [u8; 32];

fn tag(secret: &Secret, message: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"banyan-sim-sig");
    h.update(secret);
    h.update(message);
    h.finalize().into()
}

/// Trusted dealer for the simulated PKI.
#[derive(Clone)]
pub struct KeyRegistry {
    secrets: Arc<Vec<Secret>>,
}

impl KeyRegistry {
    pub fn new(n: u32, seed: u64) -> Self {
        let secrets = (0..n)
            .map(|i| {
                let mut h = Sha256::new();
                h.update(b"banyan-sim-key");
                h.update(seed.to_le_bytes());
                h.update(i.to_le_bytes());
                h.finalize().into()
            })
            .collect();
        Self { secrets: Arc::new(secrets) }
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    pub fn signer(&self, replica: ReplicaId) -> Result<Signer, CryptoError> {
        let secret = *self.secrets.get(replica.index()).ok_or(CryptoError::UnknownReplica(replica))?;
        Ok(Signer { id: replica, secret })
    }

    pub fn sign(&self, replica: ReplicaId, message: &[u8]) -> Result<Signature, CryptoError> {
        Ok(self.signer(replica)?.sign(message))
    }

    pub fn verify(&self, replica: ReplicaId, message: &[u8], signature: &Signature) -> bool {
        self.verifier().verify(replica, message, signature)
    }

    pub fn verifier(&self) -> Verifier {
        Verifier { secrets: Arc::clone(&self.secrets) }
    }
}

/// Signing capability for exactly one replica.
#[derive(Clone)]
pub struct Signer {
    id: ReplicaId,
    secret: Secret,
}

impl Signer {
    pub fn id(&self) -> ReplicaId {
        self.id
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature { signer: self.id, tag: tag(&self.secret, message) }
    }
}

impl fmt::Debug for Signer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Signer").field("id", &self.id).finish_non_exhaustive()
    }
}

/// Slot for a real signature scheme; the engine only ever verifies through it.
pub trait SignatureVerifier: Send + Sync {
    fn verify(&self, signer: ReplicaId, message: &[u8], signature: &Signature) -> bool;
}

#[derive(Clone)]
pub struct Verifier {
    secrets: Arc<Vec<Secret>>,
}

impl SignatureVerifier for Verifier {
    fn verify(&self, signer: ReplicaId, message: &[u8], signature: &Signature) -> bool {
        signature.signer == signer
            && self.secrets.get(signer.index()).is_some_and(|secret| tag(secret, message) == signature.tag)
    }
}

/// Checks an aggregate against the protocol's standard thresholds.
pub fn verify_aggregate(agg: &Aggregate, cfg: &ProtocolConfig, verifier: &dyn SignatureVerifier) -> bool {
    verify_aggregate_with(agg, cfg, &Thresholds::standard(cfg), verifier)
}

/// Like [`verify_aggregate`] with explicit thresholds (the engine's mutation
/// knobs feed through here).
pub fn verify_aggregate_with(
    agg: &Aggregate,
    cfg: &ProtocolConfig,
    thresholds: &Thresholds,
    verifier: &dyn SignatureVerifier,
) -> bool {
    if agg.is_genesis_evidence() {
        return agg.votes().is_empty();
    }
    let n = cfg.n;
    let well_signed = agg.votes().iter().all(|v| v.voter().0 < n && v.round() == agg.round() && v.verify(verifier));
    if !well_signed {
        return false;
    }
    match agg.kind() {
        AggregateKind::Notarization => quorum_for(agg, VoteKind::Notarization, thresholds.notarization),
        AggregateKind::Finalization => quorum_for(agg, VoteKind::Finalization, thresholds.notarization),
        AggregateKind::FastFinalization => {
            cfg.mode == crate::types::Mode::Banyan
                && agg.subject_header().is_some_and(|h| h.rank == 0 && h.round == agg.round() && h.verify_rank(cfg))
                && quorum_for(agg, VoteKind::Fast, thresholds.fast)
        }
        AggregateKind::UnlockProof => verify_unlock_proof(agg, cfg, thresholds),
    }
}

/// All votes are of `kind`, for the subject, from distinct voters, and there are enough.
fn quorum_for(agg: &Aggregate, kind: VoteKind, quorum: usize) -> bool {
    let mut voters = BTreeSet::new();
    for v in agg.votes() {
        if v.kind() != kind || v.block() != agg.subject() || !voters.insert(v.voter()) {
            return false;
        }
    }
    voters.len() >= quorum
}

fn verify_unlock_proof(agg: &Aggregate, cfg: &ProtocolConfig, thresholds: &Thresholds) -> bool {
    if cfg.mode == crate::types::Mode::Icc {
        return true;
    }
    let Some(subject) = agg.subject_header() else {
        return false;
    };
    if subject.round != agg.round() {
        return false;
    }
    // Every header must be a well-formed block of this round.
    if !agg.headers().iter().all(|h| h.round == agg.round() && h.verify_rank(cfg)) {
        return false;
    }
    // Finalized blocks are unlocked: a finalization quorum for the subject suffices.
    let finalization_voters: BTreeSet<ReplicaId> = agg
        .votes()
        .iter()
        .filter(|v| v.kind() == VoteKind::Finalization && v.block() == agg.subject())
        .map(|v| v.voter())
        .collect();
    if finalization_voters.len() >= thresholds.notarization {
        return true;
    }
    let blocks: Vec<_> = agg.headers().iter().map(|h| (h.hash(), h.rank)).collect();
    let fast_votes = agg.votes().iter().filter(|v| v.kind() == VoteKind::Fast).map(|v| (v.block(), v.voter()));
    let verdict = evaluate_unlock(&blocks, fast_votes, thresholds);
    verdict.all_unlocked || verdict.unlocked.contains(&agg.subject())
}
