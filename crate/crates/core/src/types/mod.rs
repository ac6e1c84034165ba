//! Domain types shared by the engine, simulator and checkers.

mod block;
mod config;
mod tree;
mod unlock;
mod vote;

pub use block::{seeded_payload, Block, BlockHash, BlockHeader, Payload};
pub use config::{ConfigError, ConfigWarning, Millis, Mode, ProtocolConfig, ReplicaId, Rotation, Round};
pub use tree::{BlockTree, Node, PathTag, TreeError};
pub use unlock::{evaluate_unlock, Thresholds, UnlockVerdict};
pub use vote::{Aggregate, AggregateError, AggregateKind, Vote, VoteKind};
