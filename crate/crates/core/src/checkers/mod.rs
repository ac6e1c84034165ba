//! Post-hoc verifiers over recorded traces.
//!
//! Every checker is a pure function of a [`Trace`]: it never looks at engine
//! state, only at what the simulator recorded. Records from faulty replicas
//! are ignored unless stated otherwise.

mod liveness;
mod metrics;
mod safety;

use serde::{Deserialize, Serialize};

pub use liveness::{check_fast_termination, check_growth};
pub use metrics::{metrics, write_csv, CsvRow, LatencySample, Metrics, PathCounts};
pub use safety::{check_lemma_fp, check_lemma_sp, check_safety};

use crate::netsim::{Trace, TraceRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Violated,
    /// The property's preconditions do not hold for this trace.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub property: String,
    pub verdict: Verdict,
    /// How many facts (finalizations, rounds, ...) the checker examined.
    pub checked: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// The records that witness a violation, in trace order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexample: Vec<TraceRecord>,
}

impl CheckReport {
    fn pass(property: &str, checked: u64) -> Self {
        CheckReport {
            property: property.into(),
            verdict: Verdict::Pass,
            checked,
            note: None,
            counterexample: Vec::new(),
        }
    }

    fn not_applicable(property: &str, note: impl Into<String>) -> Self {
        CheckReport {
            property: property.into(),
            verdict: Verdict::NotApplicable,
            checked: 0,
            note: Some(note.into()),
            counterexample: Vec::new(),
        }
    }

    fn violated(property: &str, checked: u64, note: impl Into<String>, witness: Vec<&TraceRecord>) -> Self {
        let mut counterexample: Vec<TraceRecord> = witness.into_iter().cloned().collect();
        counterexample.sort_by_key(|r| r.time);
        CheckReport {
            property: property.into(),
            verdict: Verdict::Violated,
            checked,
            note: Some(note.into()),
            counterexample,
        }
    }

    pub fn is_violation(&self) -> bool {
        self.verdict == Verdict::Violated
    }
}

/// Runs every checker, in a fixed order.
pub fn check_all(trace: &Trace) -> Vec<CheckReport> {
    vec![
        check_safety(trace),
        check_lemma_sp(trace),
        check_lemma_fp(trace),
        check_growth(trace),
        check_fast_termination(trace),
    ]
}

/// Records produced by honest replicas themselves (not network records).
fn honest_events<'a>(trace: &'a Trace) -> impl Iterator<Item = &'a TraceRecord> + 'a {
    trace.records.iter().filter(|r| r.to.is_none() && trace.header.is_honest(r.from))
}
