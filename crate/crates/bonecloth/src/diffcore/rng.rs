//! Counter-based random generator and the initialization draws.
//!
//! Every stream is a pure function of (seed, counter), so runs are
//! bit-reproducible and draws happen in a documented order: parameters draw
//! in creation order, row-major within each tensor.

/// splitmix64-style counter generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Resume from a stored counter (checkpoint restore).
    pub fn with_counter(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        let mut z = self
            .seed
            .wrapping_add(self.counter.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 / (1u64 << 24) as f32
    }

    /// Uniform in [-bound, bound).
    pub fn uniform_signed(&mut self, bound: f32) -> f32 {
        (self.uniform() * 2.0 - 1.0) * bound
    }

    /// Fan-in scaled uniform init: bound = sqrt(6 / fan_in).
    pub fn kaiming(&mut self, fan_in: usize, count: usize) -> Vec<f32> {
        let bound = (6.0 / fan_in as f32).sqrt();
        (0..count).map(|_| self.uniform_signed(bound)).collect()
    }
}
