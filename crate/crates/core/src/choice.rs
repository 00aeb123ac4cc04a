//! Reproducible random draws.
//!
//! Every caption gets its own stream keyed by its id, so the augmentation of
//! one caption never depends on how many draws another caption consumed or
//! on the order captions are processed in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::fnv1a64;

#[derive(Debug, Clone)]
enum Inner {
    Seeded(Box<ChaCha8Rng>),
    /// Fixed raw values, then zeros once exhausted.
    Scripted {
        values: Vec<u64>,
        pos: usize,
    },
}

/// A deterministic stream of draws that records what it handed out.
#[derive(Debug, Clone)]
pub struct ChoiceSource {
    inner: Inner,
    trace: Vec<u64>,
}

/// Stable per-record key mixed into the run seed.
pub fn fingerprint(id: u64) -> u64 {
    fnv1a64(&id.to_le_bytes())
}

impl ChoiceSource {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: Inner::Seeded(Box::new(ChaCha8Rng::seed_from_u64(seed))),
            trace: Vec::new(),
        }
    }

    /// The stream for one caption: `seed ^ fingerprint(caption_id)`.
    pub fn for_caption(seed: u64, caption_id: u64) -> Self {
        Self::from_seed(seed ^ fingerprint(caption_id))
    }

    /// A stream replaying `values` as raw draws. `index(n)` yields
    /// `value % n`; real-valued draws map `value` onto `[0, 1)` by its top 53
    /// bits, so `0` always selects the first option and accepts every
    /// Bernoulli trial with positive probability.
    pub fn scripted(values: Vec<u64>) -> Self {
        Self {
            inner: Inner::Scripted { values, pos: 0 },
            trace: Vec::new(),
        }
    }

    /// An all-zero stream.
    pub fn zeros() -> Self {
        Self::scripted(Vec::new())
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index draw over an empty range");
        let picked = match &mut self.inner {
            Inner::Seeded(rng) => rng.random_range(0..n),
            Inner::Scripted { values, pos } => (next_scripted(values, pos) % n as u64) as usize,
        };
        self.trace.push(picked as u64);
        picked
    }

    /// `true` with probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        let hit = self.unit() < p;
        self.trace.push(u64::from(hit));
        hit
    }

    /// Index drawn proportionally to `weights` (nonnegative, positive sum).
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let target = self.unit() * total;
        let mut acc = 0.0;
        let mut picked = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if *w > 0.0 && target < acc {
                picked = i;
                break;
            }
        }
        self.trace.push(picked as u64);
        picked
    }

    /// Resolved values of every draw so far, in order.
    pub fn trace(&self) -> &[u64] {
        &self.trace
    }

    fn unit(&mut self) -> f64 {
        match &mut self.inner {
            Inner::Seeded(rng) => rng.random::<f64>(),
            Inner::Scripted { values, pos } => {
                (next_scripted(values, pos) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
            }
        }
    }
}

fn next_scripted(values: &[u64], pos: &mut usize) -> u64 {
    let v = values.get(*pos).copied().unwrap_or(0);
    *pos += 1;
    v
}
