use super::*;
use crate::crypto::KeyRegistry;
use crate::engine::Mutations;
use crate::types::Payload;

const SEED: u64 = 7;

struct Fixture {
    cfg: ProtocolConfig,
    keys: KeyRegistry,
}

impl Fixture {
    fn new(mode: Mode) -> Self {
        Fixture { cfg: ProtocolConfig::new(4, 1, 1, 100, mode), keys: KeyRegistry::new(4, SEED) }
    }

    fn replica(&self, id: u32) -> Replica {
        self.replica_with(id, Mutations::default())
    }

    fn replica_with(&self, id: u32, mutations: Mutations) -> Replica {
        let params = EngineParams { payload_bytes: 0, payload_seed: 0, mutations };
        Replica::new(self.cfg, self.signer(id), Arc::new(self.keys.verifier()), params)
    }

    fn signer(&self, id: u32) -> Signer {
        self.keys.signer(ReplicaId(id)).unwrap()
    }

    /// The block replica `by` proposes in `round` on top of `parent`, with an
    /// empty payload (matching what the engine itself would build).
    fn block(&self, by: u32, round: Round, parent: BlockHash) -> Block {
        self.block_with(by, round, parent, Payload::default())
    }

    fn block_with(&self, by: u32, round: Round, parent: BlockHash, payload: Payload) -> Block {
        let rank0 = self.cfg.rank_of(ReplicaId(by), round) == 0 && self.cfg.mode == Mode::Banyan;
        Block::propose(&self.signer(by), &self.cfg, round, parent, payload, rank0)
    }

    fn vote(&self, by: u32, kind: VoteKind, b: &Block) -> Vote {
        Vote::new(&self.signer(by), kind, b.round(), b.hash())
    }

    fn aggregate(&self, kind: AggregateKind, b: &Block, voters: &[u32]) -> Arc<Aggregate> {
        let vk = match kind {
            AggregateKind::Notarization => VoteKind::Notarization,
            AggregateKind::Finalization => VoteKind::Finalization,
            AggregateKind::FastFinalization | AggregateKind::UnlockProof => VoteKind::Fast,
        };
        let votes: Vec<Vote> = voters.iter().map(|&v| self.vote(v, vk, b)).collect();
        Arc::new(Aggregate::combine(kind, b.header(), votes, []).unwrap())
    }

    /// Block message with notarization and (Banyan) unlock evidence for `parent`.
    fn msg(&self, b: &Block, parent: Option<&Block>) -> Message {
        let (notarization, unlock) = match parent {
            None => (
                Arc::new(Aggregate::genesis(AggregateKind::Notarization)),
                Arc::new(Aggregate::genesis(AggregateKind::UnlockProof)),
            ),
            Some(p) => (
                self.aggregate(AggregateKind::Notarization, p, &[0, 1, 2]),
                self.aggregate(AggregateKind::UnlockProof, p, &[0, 1, 2]),
            ),
        };
        let parent_unlock = (self.cfg.mode == Mode::Banyan).then_some(unlock);
        Message::Block(Arc::new(BlockMsg { block: b.clone(), parent_notarization: notarization, parent_unlock }))
    }
}

fn deliver(r: &mut Replica, from: u32, message: Message, now: Millis) -> Vec<Output> {
    r.handle(EngineInput::Deliver { from: ReplicaId(from), message, now })
}

fn tick(r: &mut Replica, now: Millis) -> Vec<Output> {
    r.handle(EngineInput::Timer { now })
}

fn sent_votes(out: &[Output]) -> Vec<(VoteKind, BlockHash)> {
    out.iter()
        .filter_map(|o| match o {
            Output::Broadcast(Message::Vote(v)) => Some((v.kind(), v.block())),
            _ => None,
        })
        .collect()
}

fn proposals(out: &[Output]) -> Vec<Block> {
    out.iter()
        .filter_map(|o| match o {
            Output::Broadcast(Message::Block(m)) => Some(m.block.clone()),
            _ => None,
        })
        .collect()
}

fn finalized(out: &[Output]) -> Vec<&FinalizedOutput> {
    out.iter()
        .filter_map(|o| match o {
            Output::Finalized(f) => Some(f),
            _ => None,
        })
        .collect()
}

fn genesis() -> BlockHash {
    Block::genesis().hash()
}

#[test]
fn leader_proposes_at_round_start_with_fast_vote() {
    let fx = Fixture::new(Mode::Banyan);
    // round 1 leader under round-robin rotation
    let mut r = fx.replica(1);
    let out = tick(&mut r, 0);
    let blocks = proposals(&out);
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0].round(), 1);
    assert_eq!(blocks[0].rank(), 0);
    assert!(blocks[0].embedded_fast_vote().is_some());
    assert!(r.proposed() && r.fast_vote_sent());
    // The leader also votes for its own block, notarization only.
    assert_eq!(sent_votes(&out), vec![(VoteKind::Notarization, blocks[0].hash())]);
}

#[test]
fn proposal_waits_for_rank_delay() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(3);
    assert_eq!(fx.cfg.rank_of(ReplicaId(3), 1), 2);
    assert!(proposals(&tick(&mut r, 0)).is_empty());
    assert_eq!(r.next_timer(), Some(400));
    assert!(proposals(&tick(&mut r, 399)).is_empty());
    let out = tick(&mut r, 400);
    let blocks = proposals(&out);
    assert_eq!(blocks.len(), 1);
    assert_eq!(blocks[0].rank(), 2);
    assert!(blocks[0].embedded_fast_vote().is_none());
    // Its own block is now the lowest-rank valid block, voted on normally.
    let h = blocks[0].hash();
    assert_eq!(sent_votes(&out), vec![(VoteKind::Fast, h), (VoteKind::Notarization, h)]);
}

#[test]
fn first_vote_carries_a_fast_vote_second_does_not() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    let out = deliver(&mut r, 1, fx.msg(&b, None), 10);
    assert_eq!(sent_votes(&out), vec![(VoteKind::Fast, b.hash()), (VoteKind::Notarization, b.hash())]);
    // The vote is accompanied by a relay of the block.
    assert_eq!(proposals(&out), vec![b.clone()]);

    // An equivocating leader's second rank-0 block.
    let b2 = fx.block_with(1, 1, genesis(), Payload::from(vec![9]));
    let out = deliver(&mut r, 1, fx.msg(&b2, None), 20);
    assert_eq!(sent_votes(&out), vec![(VoteKind::Notarization, b2.hash())]);
    assert_eq!(r.notarization_votes_sent().len(), 2);
}

#[test]
fn no_vote_for_higher_rank_while_lower_rank_is_valid() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let leader = fx.block(1, 1, genesis());
    let rank1 = fx.block(2, 1, genesis());
    deliver(&mut r, 1, fx.msg(&leader, None), 10);
    let out = deliver(&mut r, 2, fx.msg(&rank1, None), 250);
    assert!(sent_votes(&out).is_empty());
    assert!(!r.notarization_votes_sent().contains(&rank1.hash()));
}

#[test]
fn rank_one_block_gets_votes_after_its_delay() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let rank1 = fx.block(2, 1, genesis());
    assert!(sent_votes(&deliver(&mut r, 2, fx.msg(&rank1, None), 50)).is_empty());
    assert_eq!(r.next_timer(), Some(200));
    let out = tick(&mut r, 200);
    assert_eq!(sent_votes(&out), vec![(VoteKind::Fast, rank1.hash()), (VoteKind::Notarization, rank1.hash())]);
}

#[test]
fn notarization_needs_distinct_quorum() {
    let fx = Fixture::new(Mode::Icc);
    // Replica 3's own vote counts towards the quorum of three.
    let mut r = fx.replica(3);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    // own vote from replica 3 plus one from 0: two votes
    deliver(&mut r, 0, Message::Vote(fx.vote(0, VoteKind::Notarization, &b)), 2);
    assert!(!r.tree().get(&b.hash()).unwrap().notarized);
    let out = deliver(&mut r, 0, Message::Vote(fx.vote(0, VoteKind::Notarization, &b)), 3);
    assert!(out.is_empty(), "duplicate vote must not change anything: {out:?}");
    assert!(!r.tree().get(&b.hash()).unwrap().notarized);
    deliver(&mut r, 2, Message::Vote(fx.vote(2, VoteKind::Notarization, &b)), 4);
    assert!(r.tree().get(&b.hash()).unwrap().notarized);
}

#[test]
fn leader_block_unlocks_with_three_fast_votes() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    // supp(b) = {1 (embedded), 0 (own)}
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    assert!(!r.tree().get(&b.hash()).unwrap().unlocked);
    deliver(&mut r, 2, Message::Vote(fx.vote(2, VoteKind::Fast, &b)), 2);
    assert!(r.tree().get(&b.hash()).unwrap().unlocked);
}

#[test]
fn condition_two_unlocks_later_blocks_too() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let a = fx.block_with(1, 1, genesis(), Payload::from(vec![1]));
    let b = fx.block_with(1, 1, genesis(), Payload::from(vec![2]));
    let c = fx.block(2, 1, genesis());
    // max has support {1, x}; the rest carries three distinct voters.
    deliver(&mut r, 1, fx.msg(&a, None), 1); // supp(a) = {1, 0}
    deliver(&mut r, 1, fx.msg(&b, None), 2); // supp(b) = {1}
    deliver(&mut r, 2, fx.msg(&c, None), 3);
    deliver(&mut r, 2, Message::Vote(fx.vote(2, VoteKind::Fast, &b)), 4);
    assert!(!r.tree().round_all_unlocked(1));
    deliver(&mut r, 3, Message::Vote(fx.vote(3, VoteKind::Fast, &c)), 5);
    // max is whichever of a, b sorts first with two supporters; the others
    // hold {1, 2, 3} or {0, 1, 3}: both exceed f + p = 2.
    assert!(r.tree().round_all_unlocked(1));
    let late = fx.block(3, 1, genesis());
    deliver(&mut r, 3, fx.msg(&late, None), 6);
    assert!(r.tree().get(&late.hash()).unwrap().unlocked);
}

#[test]
fn advance_sends_finalization_vote_only_for_sole_vote() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::UnlockProof, &b, &[1, 2, 3])), 2);
    let out = deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::Notarization, &b, &[1, 2, 3])), 3);
    assert_eq!(r.round(), 2);
    assert_eq!(r.parent(), b.hash());
    assert!(sent_votes(&out).contains(&(VoteKind::Finalization, b.hash())));

    // Same, but the replica also voted for a second leader block first.
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b2 = fx.block_with(1, 1, genesis(), Payload::from(vec![5]));
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    deliver(&mut r, 1, fx.msg(&b2, None), 1);
    deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::UnlockProof, &b, &[1, 2, 3])), 2);
    let out = deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::Notarization, &b, &[1, 2, 3])), 3);
    assert_eq!(r.round(), 2);
    assert!(!sent_votes(&out).iter().any(|(k, _)| *k == VoteKind::Finalization));
}

#[test]
fn notarized_but_locked_block_blocks_advance() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::Notarization, &b, &[1, 2, 3])), 3);
    assert!(r.tree().get(&b.hash()).unwrap().notarized);
    assert_eq!(r.round(), 1);
    // The same situation in ICC advances immediately.
    let fx = Fixture::new(Mode::Icc);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    deliver(&mut r, 2, Message::Aggregate(fx.aggregate(AggregateKind::Notarization, &b, &[1, 2, 3])), 3);
    assert_eq!(r.round(), 2);
}

#[test]
fn fast_finalization_from_three_fast_votes() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    let out = deliver(&mut r, 2, Message::Vote(fx.vote(2, VoteKind::Fast, &b)), 2);
    let f = finalized(&out);
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].blocks.len(), 1);
    assert_eq!(f[0].blocks[0].path, PathTag::Fast);
    assert_eq!(r.finalized_round(), 1);
    assert!(out
        .iter()
        .any(|o| matches!(o, Output::Broadcast(Message::Aggregate(a)) if a.kind() == AggregateKind::FastFinalization)));
}

#[test]
fn slow_finalization_from_three_finalization_votes() {
    let fx = Fixture::new(Mode::Icc);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    deliver(&mut r, 1, fx.msg(&b, None), 1);
    for v in [1, 2] {
        assert!(finalized(&deliver(&mut r, v, Message::Vote(fx.vote(v, VoteKind::Finalization, &b)), 2)).is_empty());
    }
    let out = deliver(&mut r, 3, Message::Vote(fx.vote(3, VoteKind::Finalization, &b)), 3);
    assert_eq!(finalized(&out)[0].blocks[0].path, PathTag::Slow);
}

#[test]
fn rank_zero_block_without_fast_vote_is_rejected() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis()).without_fast_vote();
    let out = deliver(&mut r, 1, fx.msg(&b, None), 1);
    assert!(out.iter().any(|o| matches!(o, Output::Event(EngineEvent::Rejected { .. }))));
    assert!(!r.tree().contains(&b.hash()));
}

#[test]
fn block_on_locked_parent_is_invalid() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b1 = fx.block(1, 1, genesis());
    let b2 = fx.block(2, 2, b1.hash());
    // parent notarized, but no unlock proof is attached
    let m = BlockMsg {
        block: b2.clone(),
        parent_notarization: fx.aggregate(AggregateKind::Notarization, &b1, &[1, 2, 3]),
        parent_unlock: None,
    };
    deliver(&mut r, 1, fx.msg(&b1, None), 1);
    deliver(&mut r, 2, Message::Block(Arc::new(m)), 2);
    assert!(r.tree().get(&b1.hash()).unwrap().notarized);
    assert!(!r.tree().get(&b1.hash()).unwrap().unlocked);
    assert_eq!(r.round(), 1);
    // A well-formed block extending genesis is valid.
    assert!(r.tree().get(&b1.hash()).unwrap().valid);
}

#[test]
fn received_finalization_outputs_every_unfinalized_round() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let mut chain: Vec<Block> = Vec::new();
    let mut now = 0;
    let mut outputs = Vec::new();
    for round in 1..=9 {
        let parent = chain.last().map_or(genesis(), Block::hash);
        let b = fx.block(fx.cfg.leader(round).0, round, parent);
        now += 10;
        outputs.extend(deliver(&mut r, b.proposer().0, fx.msg(&b, chain.last()), now));
        outputs.extend(deliver(
            &mut r,
            1,
            Message::Aggregate(fx.aggregate(AggregateKind::UnlockProof, &b, &[1, 2, 3])),
            now,
        ));
        outputs.extend(deliver(
            &mut r,
            1,
            Message::Aggregate(fx.aggregate(AggregateKind::Notarization, &b, &[1, 2, 3])),
            now,
        ));
        assert_eq!(r.round(), round + 1, "stuck in round {round}");
        chain.push(b);
        if round == 5 {
            let out = deliver(
                &mut r,
                1,
                Message::Aggregate(fx.aggregate(AggregateKind::Finalization, &chain[4], &[1, 2, 3])),
                now,
            );
            assert_eq!(finalized(&out)[0].blocks.len(), 5);
            assert_eq!(r.finalized_round(), 5);
        }
    }
    assert!(finalized(&outputs).iter().all(|f| f.blocks.len() == 5), "no other finalization expected");
    let out =
        deliver(&mut r, 1, Message::Aggregate(fx.aggregate(AggregateKind::Finalization, &chain[8], &[1, 2, 3])), now);
    let f = finalized(&out);
    assert_eq!(f.len(), 1);
    let rounds: Vec<Round> = f[0].blocks.iter().map(|b| b.round).collect();
    assert_eq!(rounds, vec![6, 7, 8, 9]);
    let tags: Vec<PathTag> = f[0].blocks.iter().map(|b| b.path).collect();
    assert_eq!(tags, vec![PathTag::Implicit, PathTag::Implicit, PathTag::Implicit, PathTag::Slow]);
    assert_eq!(r.finalized_round(), 9);
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let fx = Fixture::new(Mode::Banyan);
    let b = fx.block(1, 1, genesis());
    let inputs = [
        EngineInput::Timer { now: 0 },
        EngineInput::Deliver { from: ReplicaId(1), message: fx.msg(&b, None), now: 5 },
        EngineInput::Deliver { from: ReplicaId(2), message: Message::Vote(fx.vote(2, VoteKind::Fast, &b)), now: 6 },
        EngineInput::Timer { now: 400 },
    ];
    let run = || {
        let mut r = fx.replica(0);
        inputs.iter().cloned().map(|i| format!("{:?}", r.handle(i))).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn forged_and_future_messages() {
    let fx = Fixture::new(Mode::Banyan);
    let mut r = fx.replica(0);
    tick(&mut r, 0);
    let b = fx.block(1, 1, genesis());
    let forged = Vote::forge_for_tests(ReplicaId(3), fx.vote(2, VoteKind::Fast, &b));
    let out = deliver(&mut r, 2, Message::Vote(forged), 1);
    assert!(matches!(out[..], [Output::Event(EngineEvent::Rejected { .. })]));

    // A round-2 block arrives before round 1 ends: buffered, then used.
    let b2 = fx.block(2, 2, b.hash());
    deliver(&mut r, 2, fx.msg(&b2, Some(&b)), 2);
    assert!(!r.tree().contains(&b2.hash()));
    deliver(&mut r, 1, fx.msg(&b, None), 3);
    assert_eq!(r.round(), 2);
    assert!(r.tree().get(&b2.hash()).unwrap().valid);
}

#[test]
fn mutations_shift_thresholds() {
    let fx = Fixture::new(Mode::Banyan);
    let m = Mutations {
        quorum_minus_one: true,
        fast_quorum_minus_one: true,
        inclusive_unlock_threshold: true,
        ..Default::default()
    };
    let r = fx.replica_with(0, m);
    assert_eq!(r.thresholds().notarization, 2);
    assert_eq!(r.thresholds().fast, 2);
    assert!(r.thresholds().unlocks(2));
}
