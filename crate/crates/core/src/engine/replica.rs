use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{
    BlockMsg, EngineEvent, EngineInput, EngineParams, FinalizedBlock, FinalizedOutput, Message, Output, UnlockCause,
};
use crate::crypto::{verify_aggregate_with, SignatureVerifier, Signer};
use crate::types::{
    evaluate_unlock, seeded_payload, Aggregate, AggregateKind, Block, BlockHash, BlockHeader, BlockTree, Millis, Mode,
    PathTag, ProtocolConfig, ReplicaId, Round, Thresholds, Vote, VoteKind,
};

type VoteKey = (Round, VoteKind, BlockHash);

/// One honest replica.
pub struct Replica {
    id: ReplicaId,
    cfg: ProtocolConfig,
    signer: Signer,
    verifier: Arc<dyn SignatureVerifier>,
    params: EngineParams,
    thresholds: Thresholds,

    started: bool,
    now: Millis,
    k: Round,
    k_max: Round,
    t0: Millis,
    rank: u32,
    proposed: bool,
    fast_votes_sent: u32,
    /// `N`: blocks this replica sent a notarization vote for in round `k`.
    voted: BTreeSet<BlockHash>,
    /// `b_p`: the notarized and unlocked block round `k` builds on.
    parent: BlockHash,

    tree: BlockTree,
    votes: BTreeMap<VoteKey, BTreeMap<ReplicaId, Vote>>,
    notarizations: BTreeMap<BlockHash, Arc<Aggregate>>,
    unlock_proofs: BTreeMap<BlockHash, Arc<Aggregate>>,
    finalizations: BTreeMap<BlockHash, Arc<Aggregate>>,
    /// Fast votes and headers that satisfied unlock condition 2, per round.
    round_unlock_evidence: BTreeMap<Round, (Vec<Vote>, Vec<BlockHeader>)>,
    unlock_dirty: BTreeSet<Round>,
    pending: BTreeMap<Round, Vec<(ReplicaId, Message, bool)>>,

    outputs: Vec<Output>,
}

impl Replica {
    pub fn new(
        cfg: ProtocolConfig,
        signer: Signer,
        verifier: Arc<dyn SignatureVerifier>,
        params: EngineParams,
    ) -> Self {
        let m = params.mutations;
        let standard = Thresholds::standard(&cfg);
        let thresholds = Thresholds {
            notarization: standard.notarization - usize::from(m.quorum_minus_one),
            fast: standard.fast - usize::from(m.fast_quorum_minus_one),
            unlock: standard.unlock,
            unlock_inclusive: m.inclusive_unlock_threshold,
        };
        let tree = BlockTree::new();
        let genesis = tree.genesis_hash();
        Replica {
            id: signer.id(),
            rank: cfg.rank_of(signer.id(), 1),
            cfg,
            signer,
            verifier,
            params,
            thresholds,
            started: false,
            now: 0,
            k: 1,
            k_max: 0,
            t0: 0,
            proposed: false,
            fast_votes_sent: 0,
            voted: BTreeSet::new(),
            parent: genesis,
            tree,
            votes: BTreeMap::new(),
            notarizations: BTreeMap::from([(genesis, Arc::new(Aggregate::genesis(AggregateKind::Notarization)))]),
            unlock_proofs: BTreeMap::from([(genesis, Arc::new(Aggregate::genesis(AggregateKind::UnlockProof)))]),
            finalizations: BTreeMap::new(),
            round_unlock_evidence: BTreeMap::new(),
            unlock_dirty: BTreeSet::new(),
            pending: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn id(&self) -> ReplicaId {
        self.id
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    /// Current round `k`.
    pub fn round(&self) -> Round {
        self.k
    }

    /// `kMax`, the highest finalized round.
    pub fn finalized_round(&self) -> Round {
        self.k_max
    }

    pub fn round_start(&self) -> Millis {
        self.t0
    }

    pub fn proposed(&self) -> bool {
        self.proposed
    }

    pub fn fast_vote_sent(&self) -> bool {
        self.fast_votes_sent > 0
    }

    pub fn notarization_votes_sent(&self) -> &BTreeSet<BlockHash> {
        &self.voted
    }

    pub fn parent(&self) -> BlockHash {
        self.parent
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.thresholds
    }

    /// Earliest future time at which a timer guard can fire, if any.
    pub fn next_timer(&self) -> Option<Millis> {
        let mut next = (!self.proposed).then(|| self.t0 + self.cfg.proposal_delay(self.rank));
        for node in self.tree.round_blocks(self.k) {
            if node.valid && !self.voted.contains(&node.block.hash()) {
                let t = self.t0 + self.cfg.notarization_delay(node.block.rank());
                next = Some(next.map_or(t, |n: Millis| n.min(t)));
            }
        }
        next.filter(|t| *t > self.now || !self.started)
    }

    /// Processes one input and runs every enabled handler to completion.
    pub fn handle(&mut self, input: EngineInput) -> Vec<Output> {
        debug_assert!(input.now() >= self.now, "time went backwards");
        self.now = self.now.max(input.now());
        if !self.started {
            self.started = true;
            self.t0 = self.now;
            self.emit(EngineEvent::RoundEntered { round: 1, parent: self.parent });
        }
        if let EngineInput::Deliver { from, message, .. } = input {
            self.ingest(from, message, false);
        }
        self.run_to_completion();
        std::mem::take(&mut self.outputs)
    }

    fn emit(&mut self, event: EngineEvent) {
        self.outputs.push(Output::Event(event));
    }

    fn reject(&mut self, round: Round, reason: impl Into<String>) {
        self.emit(EngineEvent::Rejected { round, reason: reason.into() });
    }

    fn broadcast(&mut self, message: Message) {
        self.outputs.push(Output::Broadcast(message.clone()));
        self.ingest(self.id, message, true);
    }

    // ---- ingestion -------------------------------------------------------

    fn ingest(&mut self, from: ReplicaId, message: Message, trusted: bool) {
        let round = message.round();
        if round > self.k {
            if let Message::Block(m) = &message {
                // Parent evidence is usable right away.
                self.on_aggregate(m.parent_notarization.clone(), trusted);
                if let Some(u) = &m.parent_unlock {
                    self.on_aggregate(u.clone(), trusted);
                }
            }
            self.pending.entry(round).or_default().push((from, message, trusted));
            return;
        }
        match message {
            Message::Block(m) => self.on_block(m, trusted),
            Message::Vote(v) => self.on_vote(v, trusted),
            Message::Aggregate(a) => self.on_aggregate(a, trusted),
        }
    }

    fn on_block(&mut self, m: Arc<BlockMsg>, trusted: bool) {
        self.on_aggregate(m.parent_notarization.clone(), trusted);
        if let Some(u) = &m.parent_unlock {
            self.on_aggregate(u.clone(), trusted);
        }
        let block = &m.block;
        let hash = block.hash();
        if self.tree.contains(&hash) {
            return;
        }
        if !trusted {
            if let Err(reason) = block.check_well_formed(&self.cfg, self.verifier.as_ref()) {
                self.reject(block.round(), reason);
                return;
            }
        }
        if let Some(v) = block.embedded_fast_vote() {
            self.store_vote(*v);
        }
        let round = block.round();
        let parent_ok = self.tree.get(&block.parent()).is_some_and(|p| p.extendable() && p.block.round() + 1 == round);
        let unlocked = self.cfg.mode == Mode::Icc
            || self.unlock_proofs.contains_key(&hash)
            || self.finalizations.contains_key(&hash);
        self.tree.insert(block.clone());
        let node = self.tree.get_mut(&hash).expect("just inserted");
        node.valid = parent_ok;
        node.notarized = self.notarizations.contains_key(&hash);
        node.unlocked = unlocked;
        if !unlocked && self.tree.round_all_unlocked(round) {
            self.unlock_via_round_evidence(hash);
        }
        self.unlock_dirty.insert(round);
        self.refresh(hash);
    }

    fn store_vote(&mut self, v: Vote) -> bool {
        let per_block = self.votes.entry((v.round(), v.kind(), v.block())).or_default();
        if per_block.contains_key(&v.voter()) {
            return false;
        }
        per_block.insert(v.voter(), v);
        if v.kind() == VoteKind::Fast {
            self.unlock_dirty.insert(v.round());
        }
        true
    }

    fn on_vote(&mut self, v: Vote, trusted: bool) {
        if self.votes.get(&(v.round(), v.kind(), v.block())).is_some_and(|s| s.contains_key(&v.voter())) {
            return;
        }
        // Past-round notarization votes no longer matter.
        if v.kind() == VoteKind::Notarization && v.round() < self.k {
            return;
        }
        if !trusted {
            if v.voter().0 >= self.cfg.n || !v.verify(self.verifier.as_ref()) {
                self.reject(v.round(), "bad vote signature");
                return;
            }
            if v.kind() == VoteKind::Fast && self.cfg.mode == Mode::Icc {
                self.reject(v.round(), "fast vote in ICC mode");
                return;
            }
        }
        self.store_vote(v);
    }

    fn on_aggregate(&mut self, a: Arc<Aggregate>, trusted: bool) {
        let subject = a.subject();
        let round = a.round();
        if round > self.k {
            self.pending.entry(round).or_default().push((self.id, Message::Aggregate(a), trusted));
            return;
        }
        let known = match a.kind() {
            AggregateKind::Notarization => self.notarizations.contains_key(&subject),
            AggregateKind::UnlockProof => self.cfg.mode == Mode::Icc || self.unlock_proofs.contains_key(&subject),
            AggregateKind::Finalization | AggregateKind::FastFinalization => {
                self.finalizations.contains_key(&subject) || self.tree.finalized_in(round) == Some(subject)
            }
        };
        if known || a.is_genesis_evidence() {
            return;
        }
        if !trusted && !verify_aggregate_with(&a, &self.cfg, &self.thresholds, self.verifier.as_ref()) {
            self.reject(round, format!("invalid {:?} aggregate", a.kind()));
            return;
        }
        match a.kind() {
            AggregateKind::Notarization => {
                self.notarizations.insert(subject, a);
                self.set_notarized(round, subject);
            }
            AggregateKind::UnlockProof => {
                self.unlock_proofs.insert(subject, a);
                if self.tree.get(&subject).is_some_and(|n| !n.unlocked) || !self.tree.contains(&subject) {
                    self.emit(EngineEvent::Unlocked { round, block: Some(subject), cause: UnlockCause::Proof });
                }
                self.set_unlocked(subject);
            }
            AggregateKind::Finalization | AggregateKind::FastFinalization => {
                if let Some(existing) = self.tree.finalized_in(round) {
                    self.emit(EngineEvent::SafetyAlarm {
                        round,
                        detail: format!("finalization for {subject:?} but {existing:?} is already finalized"),
                    });
                }
                self.finalizations.insert(subject, a);
            }
        }
    }

    // ---- status bookkeeping ------------------------------------------------

    fn set_notarized(&mut self, round: Round, hash: BlockHash) {
        self.emit(EngineEvent::Notarized { round, block: hash });
        if let Some(node) = self.tree.get_mut(&hash) {
            node.notarized = true;
            self.refresh(hash);
        }
    }

    fn set_unlocked(&mut self, hash: BlockHash) {
        if let Some(node) = self.tree.get_mut(&hash) {
            if !node.unlocked {
                node.unlocked = true;
                self.refresh(hash);
            }
        }
    }

    /// Marks children of newly extendable blocks valid, transitively.
    fn refresh(&mut self, start: BlockHash) {
        let mut work = vec![start];
        while let Some(h) = work.pop() {
            let Some(node) = self.tree.get(&h) else { continue };
            if !node.extendable() {
                continue;
            }
            let round = node.block.round();
            let children: Vec<BlockHash> = self.tree.children(&h).collect();
            for c in children {
                let child = self.tree.get_mut(&c).expect("child is in the tree");
                if child.valid || child.block.round() != round + 1 {
                    continue;
                }
                child.valid = true;
                if child.extendable() {
                    work.push(c);
                }
            }
        }
    }

    fn votes_for(&self, round: Round, kind: VoteKind, block: BlockHash) -> Option<&BTreeMap<ReplicaId, Vote>> {
        self.votes.get(&(round, kind, block))
    }

    fn vote_count(&self, round: Round, kind: VoteKind, block: BlockHash) -> usize {
        self.votes_for(round, kind, block).map_or(0, BTreeMap::len)
    }

    /// Fast votes for the round's known blocks, and those blocks' headers.
    fn round_fast_evidence(&self, round: Round) -> (Vec<Vote>, Vec<BlockHeader>) {
        let mut votes = Vec::new();
        let mut headers = Vec::new();
        for node in self.tree.round_blocks(round) {
            headers.push(*node.block.header());
            if let Some(vs) = self.votes_for(round, VoteKind::Fast, node.block.hash()) {
                votes.extend(vs.values().copied());
            }
        }
        (votes, headers)
    }

    fn unlock_via_round_evidence(&mut self, hash: BlockHash) {
        let header = *self.tree.get(&hash).expect("block in tree").block.header();
        let (votes, headers) = self.round_unlock_evidence[&header.round].clone();
        let proof = Aggregate::combine(AggregateKind::UnlockProof, &header, votes, headers)
            .expect("fast votes from the vote store are distinct per block");
        self.unlock_proofs.insert(hash, Arc::new(proof));
        self.tree.get_mut(&hash).expect("block in tree").unlocked = true;
    }

    // ---- handlers ----------------------------------------------------------

    fn run_to_completion(&mut self) {
        loop {
            let mut progressed = self.check_unlocks();
            progressed |= self.check_notarizations();
            progressed |= self.try_finalize();
            progressed |= self.try_propose();
            progressed |= self.try_notarize_votes();
            progressed |= self.try_advance();
            if !progressed {
                break;
            }
        }
    }

    fn check_unlocks(&mut self) -> bool {
        if self.cfg.mode == Mode::Icc || self.unlock_dirty.is_empty() {
            self.unlock_dirty.clear();
            return false;
        }
        let mut changed = false;
        for round in std::mem::take(&mut self.unlock_dirty) {
            if round > self.k || self.tree.round_all_unlocked(round) {
                continue;
            }
            let blocks: Vec<(BlockHash, u32)> =
                self.tree.round_blocks(round).map(|n| (n.block.hash(), n.block.rank())).collect();
            if blocks.is_empty() {
                continue;
            }
            let mut fast = Vec::new();
            for (h, _) in &blocks {
                if let Some(vs) = self.votes_for(round, VoteKind::Fast, *h) {
                    fast.extend(vs.keys().map(|v| (*h, *v)));
                }
            }
            let verdict = evaluate_unlock(&blocks, fast, &self.thresholds);
            if verdict.all_unlocked {
                self.tree.set_round_all_unlocked(round);
                self.round_unlock_evidence.insert(round, self.round_fast_evidence(round));
                self.emit(EngineEvent::Unlocked { round, block: None, cause: UnlockCause::Condition2 });
                for (h, _) in &blocks {
                    if !self.tree.get(h).expect("listed above").unlocked {
                        self.unlock_via_round_evidence(*h);
                        self.refresh(*h);
                    }
                }
                changed = true;
                continue;
            }
            for h in verdict.unlocked {
                if self.tree.get(&h).expect("listed above").unlocked {
                    continue;
                }
                let header = *self.tree.get(&h).expect("listed above").block.header();
                let (votes, headers) = self.round_fast_evidence(round);
                let proof = Aggregate::combine(AggregateKind::UnlockProof, &header, votes, headers)
                    .expect("fast votes from the vote store are distinct per block");
                self.unlock_proofs.insert(h, Arc::new(proof));
                self.emit(EngineEvent::Unlocked { round, block: Some(h), cause: UnlockCause::Condition1 });
                self.set_unlocked(h);
                changed = true;
            }
        }
        changed
    }

    fn check_notarizations(&mut self) -> bool {
        let ready: Vec<BlockHeader> = self
            .tree
            .round_blocks(self.k)
            .filter(|n| n.valid && !n.notarized)
            .filter(|n| self.vote_count(self.k, VoteKind::Notarization, n.block.hash()) >= self.thresholds.notarization)
            .map(|n| *n.block.header())
            .collect();
        for header in &ready {
            let hash = header.hash();
            let votes = self.votes_for(self.k, VoteKind::Notarization, hash).expect("counted above").values().copied();
            let agg = Aggregate::combine(AggregateKind::Notarization, header, votes.collect::<Vec<_>>(), [])
                .expect("votes from the store are distinct and well-typed");
            self.notarizations.insert(hash, Arc::new(agg));
            self.set_notarized(self.k, hash);
        }
        !ready.is_empty()
    }

    /// Finds the lowest-round block above `kMax` with a finalization trigger.
    fn finalization_candidate(&self) -> Option<(BlockHeader, Arc<Aggregate>, PathTag)> {
        for round in self.k_max + 1..=self.k {
            for node in self.tree.round_blocks(round) {
                if !node.valid || node.finalized.is_some() {
                    continue;
                }
                let hash = node.block.hash();
                let header = *node.block.header();
                if let Some(a) = self.finalizations.get(&hash) {
                    let path = if a.kind() == AggregateKind::FastFinalization { PathTag::Fast } else { PathTag::Slow };
                    return Some((header, a.clone(), path));
                }
                if self.cfg.mode == Mode::Banyan
                    && header.rank == 0
                    && self.vote_count(round, VoteKind::Fast, hash) >= self.thresholds.fast
                {
                    let votes: Vec<Vote> = self.votes_for(round, VoteKind::Fast, hash)?.values().copied().collect();
                    let agg = Aggregate::combine(AggregateKind::FastFinalization, &header, votes, []).ok()?;
                    return Some((header, Arc::new(agg), PathTag::Fast));
                }
                if self.vote_count(round, VoteKind::Finalization, hash) >= self.thresholds.notarization {
                    let votes: Vec<Vote> =
                        self.votes_for(round, VoteKind::Finalization, hash)?.values().copied().collect();
                    let agg = Aggregate::combine(AggregateKind::Finalization, &header, votes, []).ok()?;
                    return Some((header, Arc::new(agg), PathTag::Slow));
                }
            }
        }
        None
    }

    fn try_finalize(&mut self) -> bool {
        let mut changed = false;
        while let Some((header, agg, path)) = self.finalization_candidate() {
            changed = true;
            self.finalize(header, agg, path);
        }
        changed
    }

    fn finalize(&mut self, header: BlockHeader, agg: Arc<Aggregate>, path: PathTag) {
        let hash = header.hash();
        let round = header.round;
        self.finalizations.insert(hash, agg.clone());
        self.broadcast(Message::Aggregate(agg.clone()));

        let chain: Vec<Block> = match self.tree.chain_above(hash, self.k_max) {
            Ok(c) => c.into_iter().rev().cloned().collect(),
            Err(e) => {
                self.emit(EngineEvent::SafetyAlarm { round, detail: e.to_string() });
                return;
            }
        };
        let anchor = chain.first().map(Block::parent).expect("chain holds at least the block itself");
        if self.tree.finalized_in(self.k_max) != Some(anchor) {
            self.emit(EngineEvent::SafetyAlarm {
                round,
                detail: format!("chain of {hash:?} does not extend the block finalized in round {}", self.k_max),
            });
        }

        let was_unlocked = self.tree.get(&hash).is_some_and(|n| n.unlocked);
        let mut blocks = Vec::with_capacity(chain.len());
        for b in &chain {
            let tag = if b.hash() == hash { path } else { PathTag::Implicit };
            match self.tree.mark_finalized(b.hash(), tag) {
                Ok(_) => {}
                Err(e) => self.emit(EngineEvent::SafetyAlarm { round: b.round(), detail: e.to_string() }),
            }
            blocks.push(FinalizedBlock {
                round: b.round(),
                hash: b.hash(),
                proposer: b.proposer(),
                path: tag,
                payload: b.payload().clone(),
            });
        }
        self.outputs.push(Output::Finalized(FinalizedOutput { blocks }));
        self.k_max = round;

        if self.cfg.mode == Mode::Banyan && !self.unlock_proofs.contains_key(&hash) {
            // Finalized blocks are unlocked; the finalizing votes prove it.
            let votes = agg.votes().iter().copied().filter(|v| {
                v.kind() == VoteKind::Finalization || (v.kind() == VoteKind::Fast && path == PathTag::Fast)
            });
            if let Ok(proof) = Aggregate::combine(AggregateKind::UnlockProof, &header, votes.collect::<Vec<_>>(), []) {
                self.unlock_proofs.insert(hash, Arc::new(proof));
            }
        }
        if !was_unlocked && self.cfg.mode == Mode::Banyan {
            self.emit(EngineEvent::Unlocked { round, block: Some(hash), cause: UnlockCause::Finalized });
        }
        self.refresh(hash);
    }

    fn block_msg(&self, block: Block) -> Option<BlockMsg> {
        let parent = block.parent();
        let parent_notarization = self.notarizations.get(&parent)?.clone();
        let parent_unlock = match self.cfg.mode {
            Mode::Banyan => Some(self.unlock_proofs.get(&parent)?.clone()),
            Mode::Icc => None,
        };
        Some(BlockMsg { block, parent_notarization, parent_unlock })
    }

    fn try_propose(&mut self) -> bool {
        if self.proposed || self.now < self.t0 + self.cfg.proposal_delay(self.rank) {
            return false;
        }
        self.proposed = true;
        let payload = seeded_payload(self.params.payload_seed, self.id, self.k, self.params.payload_bytes);
        let with_fast_vote = self.cfg.mode == Mode::Banyan && self.rank == 0;
        let block = Block::propose(&self.signer, &self.cfg, self.k, self.parent, payload, with_fast_vote);
        if with_fast_vote {
            self.fast_votes_sent += 1;
        }
        self.emit(EngineEvent::Proposed { round: self.k, block: block.hash(), parent: self.parent, rank: self.rank });
        match self.block_msg(block) {
            Some(m) => self.broadcast(Message::Block(Arc::new(m))),
            None => {
                self.emit(EngineEvent::SafetyAlarm { round: self.k, detail: "missing evidence for own parent".into() })
            }
        }
        true
    }

    fn fast_vote_budget(&self) -> u32 {
        if self.params.mutations.double_fast_vote {
            2
        } else {
            1
        }
    }

    fn try_notarize_votes(&mut self) -> bool {
        let valid: Vec<(u32, BlockHash)> =
            self.tree.round_blocks(self.k).filter(|n| n.valid).map(|n| (n.block.rank(), n.block.hash())).collect();
        let Some(min_rank) = valid.iter().map(|(r, _)| *r).min() else {
            return false;
        };
        if self.now < self.t0 + self.cfg.notarization_delay(min_rank) {
            return false;
        }
        let mut changed = false;
        for (rank, hash) in valid {
            if rank != min_rank || self.voted.contains(&hash) {
                continue;
            }
            changed = true;
            let block = self.tree.get(&hash).expect("listed above").block.clone();
            if block.proposer() != self.id {
                if let Some(m) = self.block_msg(block) {
                    self.outputs.push(Output::Broadcast(Message::Block(Arc::new(m))));
                }
            }
            self.voted.insert(hash);
            if self.cfg.mode == Mode::Banyan && self.fast_votes_sent < self.fast_vote_budget() {
                self.fast_votes_sent += 1;
                let v = Vote::new(&self.signer, VoteKind::Fast, self.k, hash);
                self.broadcast(Message::Vote(v));
            }
            let v = Vote::new(&self.signer, VoteKind::Notarization, self.k, hash);
            self.broadcast(Message::Vote(v));
        }
        changed
    }

    fn try_advance(&mut self) -> bool {
        if self.cfg.mode == Mode::Banyan && self.fast_votes_sent == 0 {
            return false;
        }
        let Some((_, hash)) =
            self.tree.round_blocks(self.k).filter(|n| n.extendable()).map(|n| (n.block.rank(), n.block.hash())).min()
        else {
            return false;
        };
        let notarization = self.notarizations[&hash].clone();
        self.outputs.push(Output::Broadcast(Message::Aggregate(notarization)));
        if self.cfg.mode == Mode::Banyan {
            if let Some(proof) = self.unlock_proofs.get(&hash).cloned() {
                self.outputs.push(Output::Broadcast(Message::Aggregate(proof)));
            }
        }
        if self.voted.iter().all(|h| *h == hash) {
            let v = Vote::new(&self.signer, VoteKind::Finalization, self.k, hash);
            self.broadcast(Message::Vote(v));
        }
        self.enter_round(self.k + 1, hash);
        true
    }

    fn enter_round(&mut self, round: Round, parent: BlockHash) {
        self.k = round;
        self.t0 = self.now;
        self.rank = self.cfg.rank_of(self.id, round);
        self.proposed = false;
        self.fast_votes_sent = 0;
        self.voted.clear();
        self.parent = parent;
        self.emit(EngineEvent::RoundEntered { round, parent });
        let later = self.pending.split_off(&(round + 1));
        let ready = std::mem::replace(&mut self.pending, later);
        for (from, message, trusted) in ready.into_values().flatten() {
            self.ingest(from, message, trusted);
        }
    }
}

impl std::fmt::Debug for Replica {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Replica")
            .field("id", &self.id)
            .field("k", &self.k)
            .field("k_max", &self.k_max)
            .field("t0", &self.t0)
            .field("blocks", &self.tree.len())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests;
