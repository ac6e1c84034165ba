use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use banyan_core::checkers::{check_all, Verdict};
use banyan_core::crypto::KeyRegistry;
use banyan_core::engine::{EngineInput, EngineParams, Message, Replica};
use banyan_core::netsim::{run, AsyncWindow, Behavior, DelayModel, Jitter, RunSpec, Trace};
use banyan_core::types::{
    seeded_payload, Aggregate, AggregateKind, Block, Mode, ProtocolConfig, ReplicaId, Rotation, Vote, VoteKind,
};

/// Valid `(n, f, p)` with `n` up to `max_n`.
fn valid_config(max_n: u32) -> impl Strategy<Value = (u32, u32, u32)> {
    (1..=max_n, 0..=max_n / 3, 0..=max_n / 3).prop_filter_map("invalid config", |(n, f, p)| {
        let cfg = ProtocolConfig::new(n, f, p, 100, Mode::Banyan);
        cfg.validate().ok().map(|_| (n, f, p))
    })
}

fn rotation() -> impl Strategy<Value = Rotation> {
    prop_oneof![Just(Rotation::RoundRobin), any::<u64>().prop_map(|seed| Rotation::SeededPermutation { seed })]
}

fn behavior() -> impl Strategy<Value = Behavior> {
    prop_oneof![
        (0u64..3000).prop_map(|at| Behavior::Crash { at }),
        Just(Behavior::MuteLeader),
        Just(Behavior::EquivocatingLeader),
        Just(Behavior::PromiscuousFastVoter),
        prop::sample::subsequence(vec![VoteKind::Notarization, VoteKind::Fast, VoteKind::Finalization], 1..=3)
            .prop_map(|kinds| Behavior::WithholdVotes { kinds }),
    ]
}

/// A run with at most `f` faulty replicas and an arbitrary synchronous or
/// partially synchronous schedule.
fn adversarial_spec() -> impl Strategy<Value = (RunSpec, u64)> {
    (valid_config(10).prop_filter("need n >= 4", |(n, _, _)| *n >= 4), prop::bool::ANY, rotation())
        .prop_flat_map(|((n, f, p), banyan, rotation)| {
            let mode = if banyan { Mode::Banyan } else { Mode::Icc };
            let protocol = ProtocolConfig { rotation, ..ProtocolConfig::new(n, f, p, 100, mode) };
            let faults = prop::collection::btree_map((0..n).prop_map(ReplicaId), behavior(), 0..=f as usize);
            let base = prop::collection::vec(prop::collection::vec(1u64..=60, n as usize), n as usize);
            let window = prop::option::of((0u64..2000, 1u64..1500, prop::option::of(0u64..400)));
            (Just(protocol), faults, base, 0u64..=40, window, any::<u64>())
        })
        .prop_map(|(protocol, faults, base, jitter_hi, window, seed)| {
            let mut delays = DelayModel { base, jitter: Jitter::Uniform { lo: 0, hi: jitter_hi }, windows: vec![] };
            if let Some((start, len, cap)) = window {
                delays.windows.push(AsyncWindow { start, end: start + len, cap });
            }
            let mut spec = RunSpec::uniform(protocol, 1, 12);
            spec.delays = delays;
            spec.faults = faults;
            spec.payload_bytes = 16;
            (spec, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_form_a_permutation((n, f, p) in valid_config(40), rotation in rotation(), round in 1u64..10_000) {
        let cfg = ProtocolConfig { rotation, ..ProtocolConfig::new(n, f, p, 100, Mode::Banyan) };
        let ranks: BTreeSet<u32> = cfg.replicas().map(|u| cfg.rank_of(u, round)).collect();
        prop_assert_eq!(ranks, (0..n).collect::<BTreeSet<_>>());
        prop_assert_eq!(cfg.rank_of(cfg.leader(round), round), 0);
        for (rank, u) in cfg.permutation(round).into_iter().enumerate() {
            prop_assert_eq!(cfg.rank_of(u, round), rank as u32);
        }
        if rotation == Rotation::RoundRobin {
            for u in cfg.replicas() {
                prop_assert_eq!(cfg.rank_of(u, round) as u64, (u.0 as u64 + n as u64 - round % n as u64) % n as u64);
            }
        }
    }

    #[test]
    fn aggregates_ignore_vote_order(n in 4u32..20, seed in any::<u64>(), order in any::<u64>()) {
        let keys = KeyRegistry::new(n, seed);
        let cfg = ProtocolConfig::new(n, (n - 1) / 3, 1.min((n - 1) / 3), 100, Mode::Banyan);
        let leader = keys.signer(cfg.leader(1)).unwrap();
        let block = Block::propose(&leader, &cfg, 1, Block::genesis().hash(), seeded_payload(seed, leader.id(), 1, 8), true);
        let mut votes: Vec<Vote> =
            cfg.replicas().map(|r| Vote::new(&keys.signer(r).unwrap(), VoteKind::Notarization, 1, block.hash())).collect();
        let a = Aggregate::combine(AggregateKind::Notarization, block.header(), votes.clone(), []).unwrap();
        // Deterministic shuffle driven by `order`.
        let mut state = order;
        for i in (1..votes.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            votes.swap(i, (state >> 33) as usize % (i + 1));
        }
        let b = Aggregate::combine(AggregateKind::Notarization, block.header(), votes, []).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn duplicate_votes_change_nothing(votes in prop::collection::vec((0u32..4, prop::bool::ANY), 1..12)) {
        let cfg = ProtocolConfig::new(4, 1, 1, 100, Mode::Banyan);
        let keys = KeyRegistry::new(4, 3);
        let verifier = Arc::new(keys.verifier());
        let new_replica = || Replica::new(cfg, keys.signer(ReplicaId(2)).unwrap(), verifier.clone(), EngineParams::default());
        let leader = keys.signer(ReplicaId(1)).unwrap();
        let block = Block::propose(&leader, &cfg, 1, Block::genesis().hash(), seeded_payload(0, leader.id(), 1, 0), true);
        let genesis = Arc::new(Aggregate::genesis(AggregateKind::Notarization));
        let block_msg = Message::Block(Arc::new(banyan_core::engine::BlockMsg {
            block: block.clone(),
            parent_notarization: genesis,
            parent_unlock: Some(Arc::new(Aggregate::genesis(AggregateKind::UnlockProof))),
        }));

        let feed = |with_dups: bool| {
            let mut r = new_replica();
            let mut log = Vec::new();
            log.extend(r.handle(EngineInput::Timer { now: 0 }));
            log.extend(r.handle(EngineInput::Deliver { from: ReplicaId(1), message: block_msg.clone(), now: 10 }));
            for (i, (voter, fast)) in votes.iter().enumerate() {
                let kind = if *fast { VoteKind::Fast } else { VoteKind::Notarization };
                let v = Message::Vote(Vote::new(&keys.signer(ReplicaId(*voter)).unwrap(), kind, 1, block.hash()));
                let now = 20 + i as u64;
                log.extend(r.handle(EngineInput::Deliver { from: ReplicaId(*voter), message: v.clone(), now }));
                if with_dups {
                    log.extend(r.handle(EngineInput::Deliver { from: ReplicaId(*voter), message: v, now }));
                }
            }
            (format!("{log:?}"), r.round(), r.finalized_round(), r.tree().len())
        };
        prop_assert_eq!(feed(false), feed(true));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn safety_holds_within_the_fault_bound((spec, seed) in adversarial_spec()) {
        let trace = run(&spec, seed).unwrap();
        for r in check_all(&trace).iter().filter(|r| ["safety", "lemma_sp", "lemma_fp", "growth"].contains(&r.property.as_str())) {
            prop_assert_eq!(r.verdict, Verdict::Pass, "{:?}", r);
        }
        prop_assert!(trace.audit.unwrap().conserved());
    }

    #[test]
    fn simulation_is_a_function_of_spec_and_seed((spec, seed) in adversarial_spec()) {
        let a = run(&spec, seed).unwrap();
        let b = run(&spec, seed).unwrap();
        prop_assert_eq!(a.digest(), b.digest());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn traces_survive_a_round_trip((spec, seed) in adversarial_spec()) {
        let trace = run(&spec, seed).unwrap();
        let mut buf = Vec::new();
        let digest = trace.write_jsonl(&mut buf).unwrap();
        let loaded = Trace::read_jsonl(buf.as_slice()).unwrap();
        prop_assert!(loaded.digest_matches());
        prop_assert_eq!(loaded.computed_digest, digest);
        prop_assert_eq!(check_all(&loaded.trace), check_all(&trace));
        prop_assert_eq!(loaded.trace, trace);
    }
}
