use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    Audit, Behavior, FaultEntry, RecordKind, RunSpec, SimError, Trace, TraceHeader, TraceRecord, TRACE_FORMAT,
};
use crate::crypto::KeyRegistry;
use crate::engine::{BlockMsg, EngineEvent, EngineInput, EngineParams, Message, Output, Replica};
use crate::types::{Block, BlockHash, Millis, Mode, Payload, ReplicaId, Vote, VoteKind};

/// Runs `spec` with `seed` to completion or to its horizon.
pub fn run(spec: &RunSpec, seed: u64) -> Result<Trace, SimError> {
    spec.validate()?;
    let mut sim = Sim::new(spec, seed);
    sim.run();
    Ok(sim.finish())
}

enum EventKind {
    Timer,
    Deliver { from: ReplicaId, to: ReplicaId, sent: Millis, message: Message },
}

/// Ordered by `(time, origin, seq)`: the origin is the sender of a delivery
/// or the owner of a timer, `seq` counts per origin.
struct Event {
    time: Millis,
    origin: u32,
    seq: u64,
    kind: EventKind,
}

impl Event {
    fn key(&self) -> (Millis, u32, u64) {
        (self.time, self.origin, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct Sim<'a> {
    spec: &'a RunSpec,
    seed: u64,
    keys: KeyRegistry,
    replicas: Vec<Replica>,
    behaviors: Vec<Behavior>,
    honest: Vec<ReplicaId>,
    queue: BinaryHeap<Reverse<Event>>,
    seq: Vec<u64>,
    timers: Vec<BTreeSet<Millis>>,
    /// Blocks each promiscuous voter already fast-voted for.
    fast_voted: Vec<BTreeSet<BlockHash>>,
    records: Vec<TraceRecord>,
    audit: Audit,
    now: Millis,
}

impl<'a> Sim<'a> {
    fn new(spec: &'a RunSpec, seed: u64) -> Self {
        let cfg = spec.protocol;
        let keys = KeyRegistry::new(cfg.n, seed);
        let verifier = Arc::new(keys.verifier());
        let params = EngineParams { payload_bytes: spec.payload_bytes, payload_seed: seed, mutations: spec.mutations };
        let replicas = cfg
            .replicas()
            .map(|r| Replica::new(cfg, keys.signer(r).expect("replica in range"), verifier.clone(), params))
            .collect();
        let n = cfg.n as usize;
        Sim {
            spec,
            seed,
            keys,
            replicas,
            behaviors: cfg.replicas().map(|r| spec.behavior(r).clone()).collect(),
            honest: spec.honest(),
            queue: BinaryHeap::new(),
            seq: vec![0; n],
            timers: vec![BTreeSet::new(); n],
            fast_voted: vec![BTreeSet::new(); n],
            records: Vec::new(),
            audit: Audit::default(),
            now: 0,
        }
    }

    fn push(&mut self, time: Millis, origin: ReplicaId, kind: EventKind) {
        let seq = &mut self.seq[origin.index()];
        *seq += 1;
        self.queue.push(Reverse(Event { time, origin: origin.0, seq: *seq, kind }));
    }

    fn crashed(&self, r: ReplicaId, t: Millis) -> bool {
        matches!(self.behaviors[r.index()], Behavior::Crash { at } if t >= at)
    }

    fn done(&self) -> bool {
        let rounds = self.spec.rounds;
        !self.honest.is_empty()
            && self.honest.iter().all(|r| {
                let e = &self.replicas[r.index()];
                e.round() > rounds && e.finalized_round() >= rounds
            })
    }

    fn run(&mut self) {
        for r in self.spec.protocol.replicas() {
            self.timers[r.index()].insert(0);
            self.push(0, r, EventKind::Timer);
        }
        let horizon = self.spec.horizon();
        while let Some(Reverse(ev)) = self.queue.pop() {
            if ev.time > horizon {
                self.queue.push(Reverse(ev));
                break;
            }
            self.now = ev.time;
            match ev.kind {
                EventKind::Timer => {
                    let r = ReplicaId(ev.origin);
                    self.timers[r.index()].remove(&ev.time);
                    if self.crashed(r, ev.time) {
                        continue;
                    }
                    let out = self.replicas[r.index()].handle(EngineInput::Timer { now: ev.time });
                    self.after(r, out);
                }
                EventKind::Deliver { from, to, sent, message } => self.deliver(from, to, sent, message),
            }
            if self.done() {
                break;
            }
        }
        self.audit.in_flight =
            self.queue.iter().filter(|Reverse(e)| matches!(e.kind, EventKind::Deliver { .. })).count() as u64;
        self.audit.end_time = self.now;
    }

    fn deliver(&mut self, from: ReplicaId, to: ReplicaId, sent: Millis, message: Message) {
        let mut rec = network_record(self.now, RecordKind::Deliver, from, to, &message);
        rec.sent = Some(sent);
        if self.crashed(to, self.now) {
            self.audit.dropped += 1;
            rec.kind = RecordKind::Drop;
            self.records.push(rec);
            return;
        }
        self.audit.deliveries += 1;
        self.records.push(rec);
        let block = match &message {
            Message::Block(m) => Some(m.block.clone()),
            _ => None,
        };
        let out = self.replicas[to.index()].handle(EngineInput::Deliver { from, message, now: self.now });
        self.after(to, out);
        if let Some(b) = block {
            if self.behaviors[to.index()] == Behavior::PromiscuousFastVoter && self.spec.protocol.mode == Mode::Banyan {
                self.promiscuous_vote(to, &b);
            }
        }
    }

    fn after(&mut self, r: ReplicaId, outputs: Vec<Output>) {
        for o in outputs {
            match o {
                Output::Broadcast(m) => self.dispatch(r, m),
                Output::Finalized(f) => {
                    for b in f.blocks {
                        let mut rec = TraceRecord::new(self.now, RecordKind::Finalized, r.0, b.round);
                        rec.block_hash = Some(b.hash);
                        rec.path_tag = Some(b.path);
                        rec.bytes = Some(b.payload.len() as u64);
                        rec.proposer = Some(b.proposer.0);
                        self.records.push(rec);
                    }
                }
                Output::Event(e) => self.records.push(event_record(self.now, r, e)),
            }
        }
        if let Some(t) = self.replicas[r.index()].next_timer() {
            if self.timers[r.index()].insert(t) {
                self.push(t, r, EventKind::Timer);
            }
        }
    }

    fn dispatch(&mut self, r: ReplicaId, message: Message) {
        let cfg = &self.spec.protocol;
        match (&self.behaviors[r.index()], &message) {
            (Behavior::MuteLeader, m) if cfg.leader(m.round()) == r => return,
            (Behavior::WithholdVotes { kinds }, Message::Vote(v)) if kinds.contains(&v.kind()) => return,
            (Behavior::EquivocatingLeader, Message::Block(m)) if m.block.proposer() == r && m.block.rank() == 0 => {
                let m = m.clone();
                self.equivocate(r, &m);
                return;
            }
            _ => {}
        }
        for to in cfg.replicas().filter(|to| *to != r) {
            self.send(r, to, message.clone());
        }
    }

    fn send(&mut self, from: ReplicaId, to: ReplicaId, message: Message) {
        let cfg = &self.spec.protocol;
        let at = self.spec.delays.delivery_time(self.seed, cfg.delta_ms, self.now, from, to, &message);
        self.audit.sends += 1;
        if matches!(&message, Message::Vote(v) if v.voter() != from) {
            self.audit.forged_votes += 1;
        }
        let mut rec = network_record(self.now, RecordKind::Send, from, to, &message);
        rec.bytes = Some(message.wire_bytes() as u64 + self.spec.message_overhead_bytes);
        self.records.push(rec);
        self.push(at, from, EventKind::Deliver { from, to, sent: self.now, message });
    }

    /// Sends the honest proposal to one half of the other replicas and a
    /// conflicting rank-0 block, plus a notarization vote for it, to the rest.
    fn equivocate(&mut self, r: ReplicaId, original: &Arc<BlockMsg>) {
        let cfg = self.spec.protocol;
        let round = original.block.round();
        let signer = self.keys.signer(r).expect("replica in range");
        let mut payload = original.block.payload().bytes().to_vec();
        payload.push(0xee);
        let alt = Block::propose(
            &signer,
            &cfg,
            round,
            original.block.parent(),
            Payload::from(payload),
            cfg.mode == Mode::Banyan,
        );
        let alt_msg = Message::Block(Arc::new(BlockMsg {
            block: alt.clone(),
            parent_notarization: original.parent_notarization.clone(),
            parent_unlock: original.parent_unlock.clone(),
        }));

        let mut h = Sha256::new();
        h.update(b"equivocate");
        h.update(self.seed.to_le_bytes());
        h.update(round.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(h.finalize().into());
        let mut others: Vec<ReplicaId> = cfg.replicas().filter(|o| *o != r).collect();
        others.shuffle(&mut rng);
        let split = others.len().div_ceil(2);

        let mut rec = TraceRecord::new(self.now, RecordKind::Propose, r.0, round);
        rec.block_hash = Some(alt.hash());
        rec.parent = Some(alt.parent());
        rec.rank = Some(alt.rank());
        rec.detail = Some("equivocation".into());
        self.records.push(rec);

        let nv = Message::Vote(Vote::new(&signer, VoteKind::Notarization, round, alt.hash()));
        for to in &others[..split] {
            self.send(r, *to, Message::Block(original.clone()));
        }
        for to in &others[split..] {
            self.send(r, *to, alt_msg.clone());
            self.send(r, *to, nv.clone());
        }
    }

    fn promiscuous_vote(&mut self, r: ReplicaId, block: &Block) {
        if !self.fast_voted[r.index()].insert(block.hash()) {
            return;
        }
        let signer = self.keys.signer(r).expect("replica in range");
        let v = Message::Vote(Vote::new(&signer, VoteKind::Fast, block.round(), block.hash()));
        for to in self.spec.protocol.replicas().filter(|to| *to != r) {
            self.send(r, to, v.clone());
        }
    }

    fn finish(self) -> Trace {
        let spec = self.spec;
        let cfg = spec.protocol;
        let header = TraceHeader {
            format: TRACE_FORMAT,
            n: cfg.n,
            f: cfg.f,
            p: cfg.p,
            delta_ms: cfg.delta_ms,
            mode: cfg.mode,
            rotation: cfg.rotation,
            rounds: spec.rounds,
            deadline: spec.deadline(),
            seed: self.seed,
            honest: self.honest.iter().map(|r| r.0).collect(),
            faults: spec
                .faults
                .iter()
                .filter(|(_, b)| **b != Behavior::Honest)
                .map(|(r, b)| FaultEntry { replica: r.0, behavior: b.clone() })
                .collect(),
            windows: spec.delays.windows.clone(),
            payload_bytes: spec.payload_bytes,
            mutations: spec.mutations,
        };
        Trace { header, records: self.records, audit: Some(self.audit) }
    }
}

fn network_record(time: Millis, kind: RecordKind, from: ReplicaId, to: ReplicaId, m: &Message) -> TraceRecord {
    let mut rec = TraceRecord::new(time, kind, from.0, m.round());
    rec.to = Some(to.0);
    rec.block_hash = Some(m.subject());
    rec.msg = Some(m.label().to_string());
    if let Message::Vote(v) = m {
        rec.vote_kind = Some(v.kind());
    }
    rec
}

fn event_record(time: Millis, r: ReplicaId, e: EngineEvent) -> TraceRecord {
    match e {
        EngineEvent::Proposed { round, block, parent, rank } => {
            let mut rec = TraceRecord::new(time, RecordKind::Propose, r.0, round);
            rec.block_hash = Some(block);
            rec.parent = Some(parent);
            rec.rank = Some(rank);
            rec
        }
        EngineEvent::Notarized { round, block } => {
            let mut rec = TraceRecord::new(time, RecordKind::Notarized, r.0, round);
            rec.block_hash = Some(block);
            rec
        }
        EngineEvent::Unlocked { round, block, cause } => {
            let mut rec = TraceRecord::new(time, RecordKind::Unlocked, r.0, round);
            rec.block_hash = block;
            rec.cause = Some(cause);
            rec
        }
        EngineEvent::RoundEntered { round, parent } => {
            let mut rec = TraceRecord::new(time, RecordKind::RoundEntered, r.0, round);
            rec.parent = Some(parent);
            rec
        }
        EngineEvent::Rejected { round, reason } => {
            let mut rec = TraceRecord::new(time, RecordKind::Rejected, r.0, round);
            rec.detail = Some(reason);
            rec
        }
        EngineEvent::SafetyAlarm { round, detail } => {
            let mut rec = TraceRecord::new(time, RecordKind::Alarm, r.0, round);
            rec.detail = Some(detail);
            rec
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{PathTag, ProtocolConfig};

    fn spec(mode: Mode) -> RunSpec {
        RunSpec::uniform(ProtocolConfig::new(4, 1, 1, 100, mode), 50, 10)
    }

    fn finalized_at_proposer(t: &Trace) -> Vec<(u64, Millis, Option<PathTag>)> {
        let mut out = Vec::new();
        for p in t.records.iter().filter(|r| r.kind == RecordKind::Propose && r.round <= t.header.rounds) {
            let fin = t
                .records
                .iter()
                .find(|r| r.kind == RecordKind::Finalized && r.from == p.from && r.block_hash == p.block_hash)
                .expect("every proposal finalizes in the good case");
            out.push((p.round, fin.time - p.time, fin.path_tag));
        }
        out
    }

    #[test]
    fn good_case_banyan_finalizes_in_two_hops() {
        let t = run(&spec(Mode::Banyan), 1).unwrap();
        let lat = finalized_at_proposer(&t);
        assert_eq!(lat.len(), 10);
        assert!(lat.iter().all(|(_, l, p)| *l == 100 && *p == Some(PathTag::Fast)), "{lat:?}");
        let audit = t.audit.unwrap();
        assert!(audit.conserved());
        assert_eq!(audit.forged_votes, 0);
    }

    #[test]
    fn good_case_icc_finalizes_in_three_hops() {
        let t = run(&spec(Mode::Icc), 1).unwrap();
        let lat = finalized_at_proposer(&t);
        assert!(lat.iter().all(|(_, l, p)| *l == 150 && *p == Some(PathTag::Slow)), "{lat:?}");
    }

    #[test]
    fn same_seed_same_trace() {
        let mut s = spec(Mode::Banyan);
        s.delays = s.delays.with_jitter(super::super::Jitter::Uniform { lo: 0, hi: 40 });
        assert_eq!(run(&s, 5).unwrap().digest(), run(&s, 5).unwrap().digest());
        assert_ne!(run(&s, 5).unwrap().digest(), run(&s, 6).unwrap().digest());
    }

    #[test]
    fn crashed_leader_is_replaced_by_rank_one() {
        let mut s = spec(Mode::Banyan);
        // Leader of round 5 under round-robin rotation.
        s.faults.insert(ReplicaId(1), Behavior::Crash { at: 0 });
        let t = run(&s, 3).unwrap();
        let entered =
            t.records.iter().find(|r| r.kind == RecordKind::RoundEntered && r.round == 5 && r.from == 2).unwrap().time;
        let p = t.records.iter().find(|r| r.kind == RecordKind::Propose && r.round == 5).unwrap();
        assert_eq!(p.rank, Some(1));
        assert_eq!(p.from, 2);
        assert_eq!(p.time, entered + 200);
    }
}
