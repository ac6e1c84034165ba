use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Block, BlockHash, Round};

/// How a block became finalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathTag {
    /// `n - p` fast votes on a rank-0 block.
    Fast,
    /// A finalization-vote quorum.
    Slow,
    /// Ancestor of an explicitly finalized block.
    Implicit,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub block: Block,
    /// Extends a notarized and unlocked block of the previous round.
    pub valid: bool,
    pub notarized: bool,
    pub unlocked: bool,
    pub finalized: Option<PathTag>,
}

impl Node {
    /// Notarized, unlocked and valid: safe to build on.
    pub fn extendable(&self) -> bool {
        self.valid && self.notarized && self.unlocked
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("round {round} already has finalized block {existing:?}, refusing {attempted:?}")]
    ConflictingFinalization { round: Round, existing: BlockHash, attempted: BlockHash },
    #[error("block {0:?} is not in the tree")]
    Missing(BlockHash),
}

/// All well-formed blocks a replica has received, with their local status.
#[derive(Clone, Debug)]
pub struct BlockTree {
    nodes: BTreeMap<BlockHash, Node>,
    by_round: BTreeMap<Round, BTreeSet<BlockHash>>,
    children: BTreeMap<BlockHash, BTreeSet<BlockHash>>,
    finalized_by_round: BTreeMap<Round, BlockHash>,
    /// Rounds where unlock condition 2 fired.
    round_all_unlocked: BTreeSet<Round>,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    pub fn new() -> Self {
        let genesis = Block::genesis();
        let hash = genesis.hash();
        let node =
            Node { block: genesis, valid: true, notarized: true, unlocked: true, finalized: Some(PathTag::Implicit) };
        BlockTree {
            nodes: BTreeMap::from([(hash, node)]),
            by_round: BTreeMap::from([(0, BTreeSet::from([hash]))]),
            children: BTreeMap::new(),
            finalized_by_round: BTreeMap::from([(0, hash)]),
            round_all_unlocked: BTreeSet::new(),
        }
    }

    pub fn genesis_hash(&self) -> BlockHash {
        self.finalized_by_round[&0]
    }

    /// Returns false when the block was already present.
    pub fn insert(&mut self, block: Block) -> bool {
        let hash = block.hash();
        if self.nodes.contains_key(&hash) {
            return false;
        }
        self.by_round.entry(block.round()).or_default().insert(hash);
        self.children.entry(block.parent()).or_default().insert(hash);
        self.nodes.insert(hash, Node { block, valid: false, notarized: false, unlocked: false, finalized: None });
        true
    }

    pub fn contains(&self, hash: &BlockHash) -> bool {
        self.nodes.contains_key(hash)
    }

    pub fn get(&self, hash: &BlockHash) -> Option<&Node> {
        self.nodes.get(hash)
    }

    pub(crate) fn get_mut(&mut self, hash: &BlockHash) -> Option<&mut Node> {
        self.nodes.get_mut(hash)
    }

    pub fn round_blocks(&self, round: Round) -> impl Iterator<Item = &Node> + '_ {
        self.by_round.get(&round).into_iter().flatten().map(|h| &self.nodes[h])
    }

    pub fn children(&self, hash: &BlockHash) -> impl Iterator<Item = BlockHash> + '_ {
        self.children.get(hash).into_iter().flatten().copied()
    }

    pub fn is_extendable(&self, hash: &BlockHash) -> bool {
        self.nodes.get(hash).is_some_and(Node::extendable)
    }

    pub fn set_round_all_unlocked(&mut self, round: Round) -> bool {
        self.round_all_unlocked.insert(round)
    }

    pub fn round_all_unlocked(&self, round: Round) -> bool {
        self.round_all_unlocked.contains(&round)
    }

    pub fn finalized_in(&self, round: Round) -> Option<BlockHash> {
        self.finalized_by_round.get(&round).copied()
    }

    /// Marks `hash` finalized. Refuses a second finalized block in one round.
    pub fn mark_finalized(&mut self, hash: BlockHash, tag: PathTag) -> Result<bool, TreeError> {
        let round = self.nodes.get(&hash).ok_or(TreeError::Missing(hash))?.block.round();
        match self.finalized_by_round.get(&round) {
            Some(existing) if *existing != hash => {
                return Err(TreeError::ConflictingFinalization { round, existing: *existing, attempted: hash })
            }
            Some(_) => return Ok(false),
            None => {}
        }
        self.finalized_by_round.insert(round, hash);
        let node = self.nodes.get_mut(&hash).expect("checked above");
        node.finalized = Some(tag);
        node.unlocked = true;
        Ok(true)
    }

    /// Blocks from `hash` back to (excluding) the first block at or below
    /// `stop_round`, newest first.
    pub fn chain_above(&self, hash: BlockHash, stop_round: Round) -> Result<Vec<&Block>, TreeError> {
        let mut out = Vec::new();
        let mut cursor = hash;
        loop {
            let node = self.nodes.get(&cursor).ok_or(TreeError::Missing(cursor))?;
            if node.block.round() <= stop_round {
                return Ok(out);
            }
            out.push(&node.block);
            cursor = node.block.parent();
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
