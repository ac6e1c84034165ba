use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::{ProtocolConfig, ReplicaId, Round, Vote, VoteKind};
use crate::crypto::{Signature, SignatureVerifier, Signer};

/// SHA-256 of a block's canonical header encoding.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.short())
    }
}

impl fmt::Display for BlockHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl Serialize for BlockHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for BlockHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(BlockHash(out))
    }
}

/// Opaque block payload; cheap to clone.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Payload(Arc<[u8]>);

impl Payload {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(&self.0).into()
    }
}

impl From<Vec<u8>> for Payload {
    fn from(v: Vec<u8>) -> Self {
        Payload(v.into())
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload({} bytes)", self.0.len())
    }
}

/// Everything a block hash commits to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub round: Round,
    pub proposer: ReplicaId,
    pub rank: u32,
    pub parent: BlockHash,
    pub payload_digest: [u8; 32],
}

impl BlockHeader {
    /// Little-endian fixed-width fields followed by the payload digest.
    pub fn canonical_bytes(&self) -> [u8; 80] {
        let mut out = [0u8; 80];
        out[0..8].copy_from_slice(&self.round.to_le_bytes());
        out[8..12].copy_from_slice(&self.proposer.0.to_le_bytes());
        out[12..16].copy_from_slice(&self.rank.to_le_bytes());
        out[16..48].copy_from_slice(&self.parent.0);
        out[48..80].copy_from_slice(&self.payload_digest);
        out
    }

    pub fn hash(&self) -> BlockHash {
        BlockHash(Sha256::digest(self.canonical_bytes()).into())
    }

    /// The rank field agrees with the rotation rule (genesis is exempt).
    pub fn verify_rank(&self, cfg: &ProtocolConfig) -> bool {
        self.round > 0 && self.proposer.0 < cfg.n && cfg.rank_of(self.proposer, self.round) == self.rank
    }
}

fn proposal_message(hash: &BlockHash) -> [u8; 40] {
    let mut m = [0u8; 40];
    m[..8].copy_from_slice(b"proposal");
    m[8..].copy_from_slice(&hash.0);
    m
}

/// A proposed block. Fields are only settable through [`Block::propose`], so
/// the cached hash always matches the header.
#[derive(Clone, PartialEq, Eq)]
pub struct Block {
    header: BlockHeader,
    hash: BlockHash,
    payload: Payload,
    signature: Option<Signature>,
    embedded_fast_vote: Option<Vote>,
}

static GENESIS: OnceLock<Block> = OnceLock::new();

impl Block {
    pub fn genesis() -> Block {
        GENESIS
            .get_or_init(|| {
                let payload = Payload::default();
                let header = BlockHeader {
                    round: 0,
                    proposer: ReplicaId(0),
                    rank: 0,
                    parent: BlockHash::default(),
                    payload_digest: payload.digest(),
                };
                Block { hash: header.hash(), header, payload, signature: None, embedded_fast_vote: None }
            })
            .clone()
    }

    /// Builds and signs a block; `fast_vote` embeds the proposer's fast vote.
    pub fn propose(
        signer: &Signer,
        cfg: &ProtocolConfig,
        round: Round,
        parent: BlockHash,
        payload: Payload,
        fast_vote: bool,
    ) -> Block {
        let header = BlockHeader {
            round,
            proposer: signer.id(),
            rank: cfg.rank_of(signer.id(), round),
            parent,
            payload_digest: payload.digest(),
        };
        let hash = header.hash();
        let signature = Some(signer.sign(&proposal_message(&hash)));
        let embedded_fast_vote = fast_vote.then(|| Vote::new(signer, VoteKind::Fast, round, hash));
        Block { header, hash, payload, signature, embedded_fast_vote }
    }

    pub fn header(&self) -> &BlockHeader {
        &self.header
    }

    pub fn hash(&self) -> BlockHash {
        self.hash
    }

    pub fn round(&self) -> Round {
        self.header.round
    }

    pub fn proposer(&self) -> ReplicaId {
        self.header.proposer
    }

    pub fn rank(&self) -> u32 {
        self.header.rank
    }

    pub fn parent(&self) -> BlockHash {
        self.header.parent
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn embedded_fast_vote(&self) -> Option<&Vote> {
        self.embedded_fast_vote.as_ref()
    }

    pub fn is_genesis(&self) -> bool {
        self.header.round == 0
    }

    /// Structural checks independent of the block tree: correct rank, proposer
    /// signature, and an embedded proposer fast vote exactly when rank 0 (in
    /// Banyan mode).
    pub fn check_well_formed(
        &self,
        cfg: &ProtocolConfig,
        verifier: &dyn SignatureVerifier,
    ) -> Result<(), &'static str> {
        if self.is_genesis() {
            return Err("non-genesis block claims round 0");
        }
        if !self.header.verify_rank(cfg) {
            return Err("rank does not match rotation");
        }
        let signed =
            self.signature.as_ref().is_some_and(|s| verifier.verify(self.proposer(), &proposal_message(&self.hash), s));
        if !signed {
            return Err("bad proposer signature");
        }
        let wants_vote = cfg.mode == super::Mode::Banyan && self.rank() == 0;
        match (&self.embedded_fast_vote, wants_vote) {
            (None, false) => Ok(()),
            (None, true) => Err("rank-0 block lacks the proposer's fast vote"),
            (Some(_), false) => Err("unexpected embedded fast vote"),
            (Some(v), true) => {
                if v.kind() == VoteKind::Fast
                    && v.voter() == self.proposer()
                    && v.round() == self.round()
                    && v.block() == self.hash
                    && v.verify(verifier)
                {
                    Ok(())
                } else {
                    Err("embedded fast vote does not match the block")
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn without_fast_vote(mut self) -> Block {
        self.embedded_fast_vote = None;
        self
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Block")
            .field("round", &self.header.round)
            .field("proposer", &self.header.proposer)
            .field("rank", &self.header.rank)
            .field("hash", &self.hash)
            .field("parent", &self.header.parent)
            .field("payload", &self.payload)
            .finish()
    }
}

/// Deterministic payload bytes for `(seed, proposer, round)`.
pub fn seeded_payload(seed: u64, proposer: ReplicaId, round: Round, size: usize) -> Payload {
    use rand::{RngCore, SeedableRng};
    let mut h = Sha256::new();
    h.update(b"banyan-payload");
    h.update(seed.to_le_bytes());
    h.update(proposer.0.to_le_bytes());
    h.update(round.to_le_bytes());
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(h.finalize().into());
    let mut bytes = vec![0u8; size];
    rng.fill_bytes(&mut bytes);
    Payload::from(bytes)
}
