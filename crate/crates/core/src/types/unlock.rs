//! Fast-vote support sets and the two unlock conditions.
//!
//! Evaluated from one replica's point of view over the blocks it received in a
//! round and the fast votes it holds for them:
//!
//! 1. `b` is unlocked if `|supp(b) ∪ supp(nonLeaderBlocks)| > f + p`;
//! 2. every current and future block of the round is unlocked if
//!    `|supp(nonMaxBlocks)| > f + p`, where `max` is a rank-0 block of largest
//!    support (ties go to the smallest hash).

use std::collections::{BTreeMap, BTreeSet};

use super::{BlockHash, ProtocolConfig, ReplicaId};

/// Vote-count thresholds used for combining and verifying evidence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Thresholds {
    /// Notarization and finalization quorum.
    pub notarization: usize,
    pub fast: usize,
    /// Support must exceed this (or reach it, when `unlock_inclusive`).
    pub unlock: usize,
    pub unlock_inclusive: bool,
}

impl Thresholds {
    pub fn standard(cfg: &ProtocolConfig) -> Self {
        Thresholds {
            notarization: cfg.notarization_quorum(),
            fast: cfg.fast_quorum(),
            unlock: cfg.unlock_threshold(),
            unlock_inclusive: false,
        }
    }

    pub fn unlocks(&self, support: usize) -> bool {
        if self.unlock_inclusive {
            support >= self.unlock
        } else {
            support > self.unlock
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnlockVerdict {
    /// Blocks meeting condition 1.
    pub unlocked: BTreeSet<BlockHash>,
    /// Condition 2 holds.
    pub all_unlocked: bool,
    pub max: Option<BlockHash>,
    pub non_leader_support: BTreeSet<ReplicaId>,
    pub non_max_support: BTreeSet<ReplicaId>,
}

/// `blocks` lists `(hash, rank)` of the received round blocks; fast votes for
/// hashes outside that list are ignored.
pub fn evaluate_unlock(
    blocks: &[(BlockHash, u32)],
    fast_votes: impl IntoIterator<Item = (BlockHash, ReplicaId)>,
    thresholds: &Thresholds,
) -> UnlockVerdict {
    let ranks: BTreeMap<BlockHash, u32> = blocks.iter().copied().collect();
    let mut supp: BTreeMap<BlockHash, BTreeSet<ReplicaId>> = ranks.keys().map(|h| (*h, BTreeSet::new())).collect();
    for (block, voter) in fast_votes {
        if let Some(s) = supp.get_mut(&block) {
            s.insert(voter);
        }
    }

    let non_leader_support: BTreeSet<ReplicaId> =
        supp.iter().filter(|(h, _)| ranks[*h] != 0).flat_map(|(_, s)| s.iter().copied()).collect();

    // Iteration is in hash order, so keeping the first strict maximum breaks
    // ties towards the smallest hash.
    let mut max: Option<(BlockHash, usize)> = None;
    for (h, s) in supp.iter().filter(|(h, _)| ranks[*h] == 0) {
        if max.is_none_or(|(_, best)| s.len() > best) {
            max = Some((*h, s.len()));
        }
    }
    let max = max.map(|(h, _)| h);

    let non_max_support: BTreeSet<ReplicaId> =
        supp.iter().filter(|(h, _)| Some(**h) != max).flat_map(|(_, s)| s.iter().copied()).collect();

    let unlocked = supp
        .iter()
        .filter(|(_, s)| thresholds.unlocks(s.union(&non_leader_support).count()))
        .map(|(h, _)| *h)
        .collect();

    UnlockVerdict {
        unlocked,
        all_unlocked: thresholds.unlocks(non_max_support.len()),
        max,
        non_leader_support,
        non_max_support,
    }
}
