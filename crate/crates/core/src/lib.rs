//! Banyan and ICC rotating-leader BFT replicas as pure event-driven state
//! machines, together with a deterministic discrete-event network simulator,
//! post-hoc trace checkers, and the scenario harness behind the `banyan` CLI.
//!
//! Layout:
//!
//! - [`types`]: configuration, blocks, votes, aggregates, the block tree;
//! - [`crypto`]: simulated signatures behind a verifier interface;
//! - [`engine`]: one replica, driven by deliveries and timer ticks;
//! - [`netsim`]: delay models, fault behaviours and the event loop;
//! - [`checkers`]: safety, lemma, growth and latency checks plus metrics;
//! - [`harness`]: scenario files, single runs, seed sweeps, replay.

pub mod checkers;
pub mod crypto;
pub mod engine;
pub mod harness;
pub mod netsim;
pub mod types;
