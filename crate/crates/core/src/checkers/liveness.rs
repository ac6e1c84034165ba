use std::collections::BTreeMap;

use super::{honest_events, CheckReport};
use crate::netsim::{RecordKind, Trace, TraceRecord};
use crate::types::{BlockHash, Millis, Mode, PathTag, Round};

/// Every honest replica completes the configured rounds, entering each
/// round in turn, by the deadline plus a `10Δ` grace period.
pub fn check_growth(trace: &Trace) -> CheckReport {
    const NAME: &str = "growth";
    let h = &trace.header;
    if h.honest.is_empty() {
        return CheckReport::not_applicable(NAME, "no honest replicas");
    }
    let limit = h.deadline + 10 * h.delta_ms;
    let target = h.rounds + 1;
    let mut last: BTreeMap<u32, Round> = BTreeMap::new();
    let mut reached: BTreeMap<u32, &TraceRecord> = BTreeMap::new();
    for r in honest_events(trace).filter(|r| r.kind == RecordKind::RoundEntered) {
        let expected = last.get(&r.from).map_or(1, |k| k + 1);
        if r.round != expected {
            let note = format!("replica {} entered round {} instead of {}", r.from, r.round, expected);
            return CheckReport::violated(NAME, 0, note, vec![r]);
        }
        last.insert(r.from, r.round);
        if r.round <= target && r.time <= limit {
            reached.insert(r.from, r);
        }
    }
    for (i, u) in h.honest.iter().enumerate() {
        match reached.get(u) {
            Some(r) if r.round == target => {}
            last => {
                let got = last.map_or(0, |r| r.round);
                let note = format!("replica {u} reached round {got} of {target} by {limit} ms");
                return CheckReport::violated(NAME, i as u64, note, last.into_iter().copied().collect());
            }
        }
    }
    CheckReport::pass(NAME, h.honest.len() as u64)
}

/// In qualifying rounds, the honest leader's block is finalized at the
/// leader within twice the largest one-way delay among the `n - p` quickest
/// responders (the leader included, at zero delay). Which path finalizes it
/// does not matter: under skewed delays the slow path occasionally wins.
///
/// A round qualifies when the run is in Banyan mode with at most `p` faulty
/// replicas, the leader is honest, no asynchrony window overlaps
/// `[t - Δ, t + 4Δ]` around the proposal time `t`, every honest replica
/// was already in the round when the block reached it, and no fast vote for
/// the block was still in flight to the leader when the trace ends.
pub fn check_fast_termination(trace: &Trace) -> CheckReport {
    const NAME: &str = "fast_termination";
    let h = &trace.header;
    if h.mode != Mode::Banyan {
        return CheckReport::not_applicable(NAME, "icc mode has no fast path");
    }
    let faulty = h.n as usize - h.honest.len();
    if faulty > h.p as usize {
        return CheckReport::not_applicable(NAME, format!("{faulty} faulty replicas exceed p = {}", h.p));
    }

    let mut entered: BTreeMap<(u32, Round), Millis> = BTreeMap::new();
    let mut finalized: BTreeMap<(u32, BlockHash), &TraceRecord> = BTreeMap::new();
    for r in honest_events(trace) {
        match (r.kind, r.block_hash) {
            (RecordKind::RoundEntered, _) => {
                entered.insert((r.from, r.round), r.time);
            }
            (RecordKind::Finalized, Some(b)) => {
                finalized.insert((r.from, b), r);
            }
            _ => {}
        }
    }
    let mut delivered: BTreeMap<(&str, u32, u32, BlockHash), &TraceRecord> = BTreeMap::new();
    let mut sent: BTreeMap<(&str, u32, u32, BlockHash), &TraceRecord> = BTreeMap::new();
    for r in &trace.records {
        let map = match r.kind {
            RecordKind::Deliver => &mut delivered,
            RecordKind::Send => &mut sent,
            _ => continue,
        };
        if let (Some(msg), Some(to), Some(b)) = (r.msg.as_deref(), r.to, r.block_hash) {
            map.entry((msg, r.from, to, b)).or_insert(r);
        }
    }
    let latency = |r: &TraceRecord| r.time - r.sent.unwrap_or(r.time);

    let responders = (h.n - h.p) as usize - 1;
    let mut checked = 0;
    'rounds: for p in honest_events(trace) {
        let (RecordKind::Propose, Some(0), Some(block)) = (p.kind, p.rank, p.block_hash) else { continue };
        if p.round > h.rounds
            || h.windows.iter().any(|w| w.overlaps(p.time.saturating_sub(h.delta_ms), p.time + 4 * h.delta_ms))
        {
            continue;
        }
        let leader = p.from;
        let mut delays = Vec::new();
        for &v in h.honest.iter().filter(|v| **v != leader) {
            let Some(bd) = delivered.get(&("block", leader, v, block)) else { continue 'rounds };
            match entered.get(&(v, p.round)) {
                Some(t) if *t <= bd.time => {}
                _ => continue 'rounds,
            }
            let key = ("fast_vote", v, leader, block);
            match (delivered.get(&key), sent.contains_key(&key)) {
                (Some(vd), _) => delays.push(latency(bd).max(latency(vd))),
                (None, true) => continue 'rounds,
                (None, false) => {}
            }
        }
        checked += 1;
        delays.sort_unstable();
        let fin = finalized.get(&(leader, block)).copied();
        if delays.len() < responders {
            let note = format!(
                "round {}: only {} fast votes reached the leader, {} needed",
                p.round,
                delays.len(),
                responders
            );
            return CheckReport::violated(NAME, checked, note, [Some(p), fin].into_iter().flatten().collect());
        }
        let bound = 2 * delays[..responders].last().copied().unwrap_or(0);
        match fin {
            Some(f) if f.time - p.time <= bound => {}
            _ => {
                let note = match fin {
                    Some(f) => format!(
                        "round {}: finalized via {:?} after {} ms, bound {} ms",
                        p.round,
                        f.path_tag.unwrap_or(PathTag::Implicit),
                        f.time - p.time,
                        bound
                    ),
                    None => format!("round {}: leader never finalized its block", p.round),
                };
                return CheckReport::violated(NAME, checked, note, [Some(p), fin].into_iter().flatten().collect());
            }
        }
    }
    if checked == 0 {
        return CheckReport::not_applicable(NAME, "no qualifying rounds");
    }
    CheckReport::pass(NAME, checked)
}
