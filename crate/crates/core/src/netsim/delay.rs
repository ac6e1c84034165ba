use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;
use crate::engine::Message;
use crate::types::{Millis, ReplicaId, VoteKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Jitter {
    #[default]
    None,
    /// Extra delay drawn uniformly from `[lo, hi]` per message.
    Uniform { lo: Millis, hi: Millis },
}

impl Jitter {
    pub fn max(&self) -> Millis {
        match *self {
            Jitter::None => 0,
            Jitter::Uniform { hi, .. } => hi,
        }
    }
}

/// A period `[start, end)` in which the adversary controls delivery times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsyncWindow {
    pub start: Millis,
    pub end: Millis,
    /// Longest extra hold. Without a cap, messages may be held until the
    /// window ends plus `Δ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<Millis>,
}

impl AsyncWindow {
    pub fn contains(&self, t: Millis) -> bool {
        self.start <= t && t < self.end
    }

    pub fn overlaps(&self, from: Millis, to: Millis) -> bool {
        self.start <= to && from < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayModel {
    /// One-way delays, `base[from][to]`.
    pub base: Vec<Vec<Millis>>,
    pub jitter: Jitter,
    pub windows: Vec<AsyncWindow>,
}

/// Messages that should travel with identical jitter share a class.
fn class(message: &Message) -> u8 {
    match message {
        Message::Block(_) => 0,
        Message::Vote(v) if v.kind() == VoteKind::Finalization => 2,
        // A fast vote and its notarization vote leave together.
        Message::Vote(_) => 1,
        Message::Aggregate(_) => 3,
    }
}

fn draw(seed: u64, tag: &[u8], from: ReplicaId, to: ReplicaId, message: &Message) -> u64 {
    let mut h = Sha256::new();
    h.update(tag);
    h.update(seed.to_le_bytes());
    h.update(from.0.to_le_bytes());
    h.update(to.0.to_le_bytes());
    h.update([class(message)]);
    h.update(message.round().to_le_bytes());
    h.update(message.subject().0);
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

impl DelayModel {
    pub fn uniform(n: u32, delay: Millis) -> Self {
        let n = n as usize;
        let base = (0..n).map(|i| (0..n).map(|j| if i == j { 0 } else { delay }).collect()).collect();
        DelayModel { base, jitter: Jitter::None, windows: Vec::new() }
    }

    pub fn with_jitter(mut self, jitter: Jitter) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn with_windows(mut self, windows: Vec<AsyncWindow>) -> Self {
        self.windows = windows;
        self
    }

    /// Checks shape and that every synchronous delivery stays within `Δ`.
    pub fn validate(&self, n: u32, delta: Millis) -> Result<(), SimError> {
        if self.base.len() != n as usize || self.base.iter().any(|row| row.len() != n as usize) {
            return Err(SimError::MatrixShape { n });
        }
        if let Jitter::Uniform { lo, hi } = self.jitter {
            if lo > hi {
                return Err(SimError::Jitter { lo, hi });
            }
        }
        for (i, row) in self.base.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if i != j && d + self.jitter.max() > delta {
                    return Err(SimError::SlowLink {
                        from: i as u32,
                        to: j as u32,
                        delay: d + self.jitter.max(),
                        delta,
                    });
                }
            }
        }
        for w in &self.windows {
            if w.start >= w.end {
                return Err(SimError::EmptyWindow { start: w.start, end: w.end });
            }
        }
        Ok(())
    }

    /// Largest one-way delay outside asynchrony windows.
    pub fn max_delay(&self) -> Millis {
        self.base.iter().flatten().max().copied().unwrap_or(0) + self.jitter.max()
    }

    /// Delivery time of `message` sent at `sent`.
    pub fn delivery_time(
        &self,
        seed: u64,
        delta: Millis,
        sent: Millis,
        from: ReplicaId,
        to: ReplicaId,
        message: &Message,
    ) -> Millis {
        let mut delay = self.base[from.index()][to.index()];
        if let Jitter::Uniform { lo, hi } = self.jitter {
            delay += lo + draw(seed, b"jitter", from, to, message) % (hi - lo + 1);
        }
        if let Some(w) = self.windows.iter().find(|w| w.contains(sent)) {
            let limit = w.cap.unwrap_or(w.end - sent + delta);
            delay += draw(seed, b"hold", from, to, message) % (limit + 1);
        }
        sent + delay
    }
}
