use std::collections::BTreeMap;

use super::{honest_events, CheckReport};
use crate::netsim::{RecordKind, Trace, TraceRecord};
use crate::types::{BlockHash, PathTag, Round};

/// At most one block finalized per round across honest replicas, each
/// replica's finalized chain is gap-free, and no honest replica raised an
/// alarm. Together these make any two finalized chains prefix-comparable.
pub fn check_safety(trace: &Trace) -> CheckReport {
    const NAME: &str = "safety";
    let mut by_round: BTreeMap<Round, &TraceRecord> = BTreeMap::new();
    let mut last: BTreeMap<u32, &TraceRecord> = BTreeMap::new();
    let mut checked = 0;
    for r in honest_events(trace) {
        match r.kind {
            RecordKind::Alarm => {
                let note = format!("replica {} raised an alarm in round {}", r.from, r.round);
                return CheckReport::violated(NAME, checked, note, vec![r]);
            }
            RecordKind::Finalized => {
                checked += 1;
                if let Some(other) = by_round.get(&r.round) {
                    if other.block_hash != r.block_hash {
                        let note = format!("two blocks finalized in round {}", r.round);
                        return CheckReport::violated(NAME, checked, note, vec![other, r]);
                    }
                } else {
                    by_round.insert(r.round, r);
                }
                let expected = last.get(&r.from).map_or(1, |p| p.round + 1);
                if r.round != expected {
                    let note = format!("replica {} finalized round {} after round {}", r.from, r.round, expected - 1);
                    let mut witness = vec![r];
                    witness.extend(last.get(&r.from).copied());
                    return CheckReport::violated(NAME, checked, note, witness);
                }
                last.insert(r.from, r);
            }
            _ => {}
        }
    }
    CheckReport::pass(NAME, checked)
}

/// Honest explicit finalizations along `path`.
fn finalized_via(trace: &Trace, path: PathTag) -> Vec<&TraceRecord> {
    honest_events(trace).filter(|r| r.kind == RecordKind::Finalized && r.path_tag == Some(path)).collect()
}

/// A slow-path finalized block is the only block of its round that any
/// honest replica ever saw notarized.
pub fn check_lemma_sp(trace: &Trace) -> CheckReport {
    const NAME: &str = "lemma_sp";
    let mut notarized: BTreeMap<Round, BTreeMap<BlockHash, &TraceRecord>> = BTreeMap::new();
    for r in honest_events(trace).filter(|r| r.kind == RecordKind::Notarized) {
        if let Some(h) = r.block_hash {
            notarized.entry(r.round).or_default().entry(h).or_insert(r);
        }
    }
    let finals = finalized_via(trace, PathTag::Slow);
    for (i, fin) in finals.iter().enumerate() {
        let Some(others) = notarized.get(&fin.round) else { continue };
        if let Some((_, rival)) = others.iter().find(|(h, _)| Some(**h) != fin.block_hash) {
            let note = format!("round {} was slow-path finalized but another block was notarized", fin.round);
            return CheckReport::violated(NAME, i as u64 + 1, note, vec![fin, rival]);
        }
    }
    CheckReport::pass(NAME, finals.len() as u64)
}

/// A fast-path finalized block is the only block of its round that any
/// honest replica ever considered unlocked.
pub fn check_lemma_fp(trace: &Trace) -> CheckReport {
    const NAME: &str = "lemma_fp";
    let mut unlocked: BTreeMap<Round, Vec<&TraceRecord>> = BTreeMap::new();
    for r in honest_events(trace).filter(|r| r.kind == RecordKind::Unlocked) {
        unlocked.entry(r.round).or_default().push(r);
    }
    let finals = finalized_via(trace, PathTag::Fast);
    for (i, fin) in finals.iter().enumerate() {
        let Some(rivals) = unlocked.get(&fin.round) else { continue };
        // A round-wide unlock (no block) covers every other block as well.
        if let Some(rival) = rivals.iter().find(|u| u.block_hash != fin.block_hash) {
            let note = format!("round {} was fast-path finalized but another block was unlocked", fin.round);
            return CheckReport::violated(NAME, i as u64 + 1, note, vec![fin, rival]);
        }
    }
    CheckReport::pass(NAME, finals.len() as u64)
}
