//! Protocol configuration, quorum arithmetic and the leader rotation.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Round (block-tree height). Genesis lives in round 0.
pub type Round = u64;

/// Simulated time in milliseconds.
pub type Millis = u64;

/// Index of a replica in `[0, n)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplicaId(pub u32);

impl ReplicaId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Which protocol the replicas run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Slow path plus the fast-vote additions.
    Banyan,
    /// Slow path only.
    Icc,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Banyan => f.write_str("banyan"),
            Mode::Icc => f.write_str("icc"),
        }
    }
}

/// How ranks are assigned to replicas in each round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Rotation {
    /// `rank(u, k) = (u - k) mod n`; the leader of round `k` is replica `k mod n`.
    #[default]
    RoundRobin,
    /// A fresh permutation per round, derived from `(seed, round)`.
    SeededPermutation { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: u32,
    pub f: u32,
    pub p: u32,
    /// Assumed one-way message delay bound Δ.
    pub delta_ms: Millis,
    pub mode: Mode,
    #[serde(default)]
    pub rotation: Rotation,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("n must be at least 1")]
    NoReplicas,
    #[error("p = {p} must lie in [0, f = {f}]")]
    SlackOutOfRange { f: u32, p: u32 },
    #[error("n = {n} violates n >= 3f + 2p - 1 = {required} (f = {f}, p = {p})")]
    FastPathResilience { n: u32, f: u32, p: u32, required: i64 },
    #[error("n = {n} violates n >= 3f + 1 = {required} (f = {f})")]
    ByzantineResilience { n: u32, f: u32, required: i64 },
    #[error("delta_ms must be positive")]
    ZeroDelta,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigWarning {
    /// `p = 0` costs as many replicas as `p = 1` and only slows the fast path.
    ZeroSlack,
}

impl fmt::Display for ConfigWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigWarning::ZeroSlack => f.write_str("p = 0 needs as many replicas as p = 1 and has a slower fast path"),
        }
    }
}

impl ProtocolConfig {
    pub fn new(n: u32, f: u32, p: u32, delta_ms: Millis, mode: Mode) -> Self {
        Self { n, f, p, delta_ms, mode, rotation: Rotation::RoundRobin }
    }

    /// Accepts iff `n >= max(3f + 2p - 1, 3f + 1)`, `0 <= p <= f` and `Δ > 0`.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>, ConfigError> {
        if self.n == 0 {
            return Err(ConfigError::NoReplicas);
        }
        if self.p > self.f {
            return Err(ConfigError::SlackOutOfRange { f: self.f, p: self.p });
        }
        let (n, f, p) = (i64::from(self.n), i64::from(self.f), i64::from(self.p));
        let fast = 3 * f + 2 * p - 1;
        if n < fast {
            return Err(ConfigError::FastPathResilience { n: self.n, f: self.f, p: self.p, required: fast });
        }
        let byzantine = 3 * f + 1;
        if n < byzantine {
            return Err(ConfigError::ByzantineResilience { n: self.n, f: self.f, required: byzantine });
        }
        if self.delta_ms == 0 {
            return Err(ConfigError::ZeroDelta);
        }
        let mut warnings = Vec::new();
        if self.p == 0 {
            warnings.push(ConfigWarning::ZeroSlack);
        }
        Ok(warnings)
    }

    /// `⌈(n + f + 1) / 2⌉`, shared by notarization and finalization.
    pub fn notarization_quorum(&self) -> usize {
        (self.n as usize + self.f as usize + 2) / 2
    }

    /// `n - p` fast votes finalize a rank-0 block.
    pub fn fast_quorum(&self) -> usize {
        (self.n - self.p) as usize
    }

    /// Support must strictly exceed `f + p` to unlock.
    pub fn unlock_threshold(&self) -> usize {
        (self.f + self.p) as usize
    }

    pub fn replicas(&self) -> impl Iterator<Item = ReplicaId> {
        (0..self.n).map(ReplicaId)
    }

    /// Replicas ordered by rank for `round`: element `r` holds the rank-`r` replica.
    pub fn permutation(&self, round: Round) -> Vec<ReplicaId> {
        let n = u64::from(self.n);
        match self.rotation {
            Rotation::RoundRobin => (0..n).map(|r| ReplicaId(((r + round) % n) as u32)).collect(),
            Rotation::SeededPermutation { seed } => {
                let mut hasher = Sha256::new();
                hasher.update(b"banyan-rotation");
                hasher.update(seed.to_le_bytes());
                hasher.update(round.to_le_bytes());
                let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
                let mut order: Vec<ReplicaId> = self.replicas().collect();
                order.shuffle(&mut rng);
                order
            }
        }
    }

    pub fn rank_of(&self, replica: ReplicaId, round: Round) -> u32 {
        match self.rotation {
            Rotation::RoundRobin => {
                let n = u64::from(self.n);
                ((u64::from(replica.0) + n - round % n) % n) as u32
            }
            Rotation::SeededPermutation { .. } => {
                self.permutation(round).iter().position(|&r| r == replica).expect("replica outside [0, n)") as u32
            }
        }
    }

    pub fn leader(&self, round: Round) -> ReplicaId {
        match self.rotation {
            Rotation::RoundRobin => ReplicaId((round % u64::from(self.n)) as u32),
            Rotation::SeededPermutation { .. } => self.permutation(round)[0],
        }
    }

    /// `Δ_prop(r) = 2Δ·r`, measured from the round start.
    pub fn proposal_delay(&self, rank: u32) -> Millis {
        2 * self.delta_ms * Millis::from(rank)
    }

    /// `Δ_notary(r) = 2Δ·r`, measured from the round start.
    pub fn notarization_delay(&self, rank: u32) -> Millis {
        2 * self.delta_ms * Millis::from(rank)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: u32, f: u32, p: u32) -> ProtocolConfig {
        ProtocolConfig::new(n, f, p, 100, Mode::Banyan)
    }

    #[test]
    fn accepts_evaluation_settings() {
        assert_eq!(cfg(19, 6, 1).validate(), Ok(vec![]));
        assert_eq!(cfg(19, 4, 4).validate(), Ok(vec![]));
        assert_eq!(cfg(4, 1, 1).validate(), Ok(vec![]));
    }

    #[test]
    fn rejects_fast_path_bound() {
        let err = cfg(6, 2, 1).validate().unwrap_err();
        assert_eq!(err, ConfigError::FastPathResilience { n: 6, f: 2, p: 1, required: 7 });
        assert!(err.to_string().contains("3f + 2p - 1 = 7"));
    }

    #[test]
    fn rejects_byzantine_bound_and_bad_slack() {
        assert!(matches!(cfg(3, 1, 0).validate(), Err(ConfigError::ByzantineResilience { required: 4, .. })));
        assert!(matches!(cfg(10, 1, 2).validate(), Err(ConfigError::SlackOutOfRange { .. })));
        let mut zero = cfg(4, 1, 1);
        zero.delta_ms = 0;
        assert_eq!(zero.validate(), Err(ConfigError::ZeroDelta));
    }

    #[test]
    fn zero_slack_warns_without_rejecting() {
        assert_eq!(cfg(4, 1, 0).validate(), Ok(vec![ConfigWarning::ZeroSlack]));
        assert_eq!(cfg(1, 0, 0).validate(), Ok(vec![ConfigWarning::ZeroSlack]));
    }

    #[test]
    fn quorums() {
        assert_eq!(cfg(4, 1, 1).notarization_quorum(), 3);
        assert_eq!(cfg(19, 6, 1).notarization_quorum(), 13);
        assert_eq!(cfg(19, 4, 4).notarization_quorum(), 12);
        assert_eq!(cfg(4, 1, 1).fast_quorum(), 3);
        assert_eq!(cfg(19, 6, 1).fast_quorum(), 18);
        assert_eq!(cfg(19, 4, 4).fast_quorum(), 15);
    }

    #[test]
    fn round_robin_ranks() {
        let c = cfg(4, 1, 1);
        assert_eq!(c.leader(1), ReplicaId(1));
        assert_eq!(c.rank_of(ReplicaId(1), 1), 0);
        let ranks: Vec<u32> = c.replicas().map(|r| c.rank_of(r, 0)).collect();
        assert_eq!(ranks, vec![0, 1, 2, 3]);
        assert_eq!(c.rank_of(ReplicaId(0), 1), 3);
    }

    #[test]
    fn seeded_permutation_is_deterministic() {
        let mut c = cfg(4, 1, 1);
        c.rotation = Rotation::SeededPermutation { seed: 7 };
        assert_eq!(c.permutation(3), c.permutation(3));
        let leader = c.leader(3);
        assert_eq!(c.rank_of(leader, 3), 0);
    }

    #[test]
    fn delays() {
        let c = cfg(4, 1, 1);
        assert_eq!(c.proposal_delay(0), 0);
        assert_eq!(c.proposal_delay(2), 400);
        assert_eq!(c.notarization_delay(2), 400);
        let mut fifty = c;
        fifty.delta_ms = 50;
        assert_eq!(fifty.notarization_delay(1), 100);
        // liveness needs Δ_notary(1) >= 2δ; holds for δ <= 50
        assert!(fifty.notarization_delay(1) >= 2 * 50);
    }
}
