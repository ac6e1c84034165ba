//! Scenario files bundled with the crate, addressable by name.

const PRESETS: &[(&str, &str)] = &[
    ("async-window-n4", include_str!("../../scenarios/async-window-n4.json")),
    ("crash-n19-us", include_str!("../../scenarios/crash-n19-us.json")),
    ("crash-n19-us-icc", include_str!("../../scenarios/crash-n19-us-icc.json")),
    ("crash-n4", include_str!("../../scenarios/crash-n4.json")),
    ("crash-nonleader-n4", include_str!("../../scenarios/crash-nonleader-n4.json")),
    ("equivocate-n4", include_str!("../../scenarios/equivocate-n4.json")),
    ("equivocate-n7", include_str!("../../scenarios/equivocate-n7.json")),
    ("forged-quorum-n4", include_str!("../../scenarios/forged-quorum-n4.json")),
    ("global-n19", include_str!("../../scenarios/global-n19.json")),
    ("global-n19-f4-p4", include_str!("../../scenarios/global-n19-f4-p4.json")),
    ("good-case-n4", include_str!("../../scenarios/good-case-n4.json")),
    ("good-case-n4-icc", include_str!("../../scenarios/good-case-n4-icc.json")),
    ("jittered-n4", include_str!("../../scenarios/jittered-n4.json")),
    ("mutation-double-fast-n4", include_str!("../../scenarios/mutation-double-fast-n4.json")),
    ("mutation-fast-quorum-n4", include_str!("../../scenarios/mutation-fast-quorum-n4.json")),
    ("mutation-quorum-n4", include_str!("../../scenarios/mutation-quorum-n4.json")),
    ("mutation-unlock-n4", include_str!("../../scenarios/mutation-unlock-n4.json")),
    ("mute-leader-n4", include_str!("../../scenarios/mute-leader-n4.json")),
    ("mute-leaders-n7", include_str!("../../scenarios/mute-leaders-n7.json")),
    ("n19-4dc-f4-p4", include_str!("../../scenarios/n19-4dc-f4-p4.json")),
    ("n19-4dc-f6-p1", include_str!("../../scenarios/n19-4dc-f6-p1.json")),
    ("promiscuous-n4", include_str!("../../scenarios/promiscuous-n4.json")),
    ("withhold-n4", include_str!("../../scenarios/withhold-n4.json")),
];

/// Names of all bundled presets, sorted.
pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
