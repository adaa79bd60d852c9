//! Deterministic splittable randomness.
//!
//! Every random component of the solver (walks, sketches, subset sampling)
//! draws from its own stream, keyed by a 64-bit seed and a label naming the
//! module and purpose. Identical (seed, label, draw sequence) yields
//! identical outputs on every platform.

/// SplitMix64-based stream. `derive` produces an independent child stream
/// without advancing the parent, so adding a consumer never perturbs the
/// draws of existing ones.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    key: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a, stable across platforms.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        let key = mix(seed ^ hash_label(label));
        RngStream {
            state: mix(key ^ GOLDEN),
            key,
        }
    }

    /// Independent child stream; the parent's sequence is unaffected.
    pub fn derive(&self, label: &str) -> Self {
        let key = mix(self.key ^ hash_label(label).rotate_left(17));
        RngStream {
            state: mix(key ^ GOLDEN),
            key,
        }
    }

    /// Child stream keyed by an index, for per-item substreams.
    pub fn derive_idx(&self, label: &str, idx: u64) -> Self {
        let key = mix(self.key ^ hash_label(label).rotate_left(17) ^ mix(idx.wrapping_add(GOLDEN)));
        RngStream {
            state: mix(key ^ GOLDEN),
            key,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in 0..n.
    pub fn gen_range(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire-style rejection keeps the distribution exact.
        let n = n as u64;
        loop {
            let x = self.next_u64();
            let hi = ((x as u128 * n as u128) >> 64) as u64;
            let lo = x.wrapping_mul(n);
            if lo >= n || lo >= n.wrapping_neg() % n {
                return hi as usize;
            }
        }
    }

    /// Uniform integer in lo..=hi.
    pub fn gen_range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        lo + self.gen_range((hi - lo + 1) as usize) as i64
    }

    /// Random sign, +1.0 or -1.0.
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.gen_range(i + 1);
            xs.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = RngStream::new(42, "test/walks");
        let mut b = RngStream::new(42, "test/walks");
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn labels_separate_streams() {
        let mut a = RngStream::new(42, "test/walks");
        let mut b = RngStream::new(42, "test/sketch");
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert!(same < 3);
    }

    #[test]
    fn derive_does_not_advance_parent() {
        let mut a = RngStream::new(7, "root");
        let before = a.clone().next_u64();
        let _child = a.derive("child");
        assert_eq!(a.next_u64(), before);
    }

    #[test]
    fn gen_range_is_roughly_uniform() {
        let mut rng = RngStream::new(3, "uniform");
        let mut counts = [0usize; 10];
        for _ in 0..10_000 {
            counts[rng.gen_range(10)] += 1;
        }
        for &c in &counts {
            assert!((700..1300).contains(&c), "count {c}");
        }
    }
}
