use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seedable random stream used by every sampler.
///
/// Identical seed plus identical call sequence yields identical output.
/// [`ChainRng::branch`] derives independent child streams, which is how
/// parallel work units stay reproducible regardless of scheduling.
#[derive(Debug, Clone)]
pub struct ChainRng {
    inner: ChaCha20Rng,
}

impl ChainRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self { inner: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// Child stream `index` keyed off a fresh draw from this stream.
    pub fn branch(&mut self, index: u64) -> ChainRng {
        let key = self.inner.next_u64();
        Self::derived(key, index)
    }

    /// `count` child streams sharing one parent draw.
    pub fn branches(&mut self, count: usize) -> Vec<ChainRng> {
        let key = self.inner.next_u64();
        (0..count as u64).map(|i| Self::derived(key, i)).collect()
    }

    fn derived(key: u64, index: u64) -> ChainRng {
        let mut inner = ChaCha20Rng::seed_from_u64(key);
        inner.set_stream(index);
        ChainRng { inner }
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.inner.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for ChainRng {
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
