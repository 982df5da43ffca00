//! Seeded random streams.
//!
//! Every stochastic step in the toolkit draws from [`Rng`], a
//! xoshiro256++ generator whose 256-bit state is filled from a 64-bit seed by
//! SplitMix64 (the `rand_xoshiro` seeding routine). The derived samplers below
//! are defined here rather than borrowed from `rand`, so the byte stream they
//! consume is fixed:
//!
//! * `uniform()` — `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)` — rejection: draw `x` until `x >= (2^64 - n) mod n`, return `x mod n`.
//! * `normal()` — Box–Muller on `u1 = 1 - uniform()`, `u2 = uniform()`,
//!   returning `sqrt(-2 ln u1) * cos(2 pi u2)`; one normal per two draws.
//! * `shuffle()` — Fisher–Yates from the back, `j = below(i + 1)`.
//! * `sample_indices(n, k)` — the first `k` slots of a partial Fisher–Yates
//!   over `0..n` run from the front, `j = i + below(n - i)`.
//!
//! Independent streams for one seed are obtained with [`Rng::stream`], which
//! applies the generator's `jump()` (2^128 steps) `id` times.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub const STREAM_INIT: u64 = 0;
pub const STREAM_SHUFFLE: u64 = 1;
pub const STREAM_DIAGNOSTIC: u64 = 2;
/// Derives the label-noise seed of a sweep cell from the cell seed.
pub const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone)]
pub struct Rng(Xoshiro256PlusPlus);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn stream(seed: u64, id: u64) -> Self {
        let mut inner = Xoshiro256PlusPlus::seed_from_u64(seed);
        for _ in 0..id {
            inner.jump();
        }
        Self(inner)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics when `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let threshold = n.wrapping_neg() % n;
        loop {
            let x = self.next_u64();
            if x >= threshold {
                return x % n;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
