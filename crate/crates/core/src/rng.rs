//! Seeded random streams.
//!
//! Every stochastic component draws from a [`RngStream`], a thin wrapper over
//! `ChaCha8Rng`. ChaCha output is specified bit-for-bit, so a given seed
//! replays the same draws on every platform.
//!
//! Split rule: `stream.child(i)` keeps the root seed and selects ChaCha
//! stream id `i + 1`. Stream id 0 is the root itself. Children should be
//! derived from the root; a child of a child shares its parent's seed and
//! therefore its id space.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Seeds from system entropy. Only used when the caller supplied no seed;
    /// the chosen seed is still recorded and can be read back with [`seed`](Self::seed).
    pub fn from_entropy() -> Self {
        Self::new(rand::rng().random())
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    /// Independent stream number `index` derived from this stream's seed.
    pub fn child(&self, index: u64) -> Self {
        Self::with_stream(self.seed, index.wrapping_add(1))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_replays() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn children_differ_from_root_and_each_other() {
        let root = RngStream::new(7);
        let mut r = root.clone();
        let mut c0 = root.child(0);
        let mut c1 = root.child(1);
        let a = r.next_u64();
        let b = c0.next_u64();
        let c = c1.next_u64();
        assert!(a != b && b != c && a != c);
        assert_eq!(c0.stream_id(), 1);
        assert_eq!(c1.seed(), 7);
    }

    #[test]
    fn known_first_output_is_stable() {
        // Pins the generator so a dependency bump that changes the stream is caught.
        let mut a = RngStream::new(0);
        let first = a.next_u64();
        let mut b = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(first, b.next_u64());
        assert_eq!(first, 13_080_132_717_333_068_652);
        assert_eq!(RngStream::new(0).child(0).next_u64(), 13_937_087_304_575_520_531);
    }
}
