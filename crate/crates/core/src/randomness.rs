//! Seeded randomness.
//!
//! All base uniforms come from ChaCha8 (`rand_chacha`), seeded through
//! `SeedableRng::seed_from_u64`. The generator is portable and its output is
//! stable across platforms, so fixed-seed runs reproduce bit for bit.
//!
//! Two kinds of coins exist and they are deliberately different types:
//! [`RandomStream::bernoulli`] flips a coin whose probability the caller
//! knows, while [`CoinSource`] hides its probability behind the [`Coin`]
//! trait. Bernoulli factories are generic over [`Coin`], so they cannot read
//! `p`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Result, SimError};

const SAMPLER_STREAM: u64 = 0;
const COIN_STREAM: u64 = 1;

/// 2^-53, the spacing of the uniforms produced by [`RandomStream::uniform01`].
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

/// A reproducible source of uniforms on `[0, 1)` with a draw counter.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    seed: u64,
    draws: u64,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self::with_stream_id(seed, SAMPLER_STREAM)
    }

    /// The stream for sample `index` of a run seeded with `seed`.
    pub fn derived(seed: u64, index: u64) -> Self {
        Self::from_seed(seed.wrapping_add(index))
    }

    /// The backing stream of the hidden coin for sample `index`. It lives on
    /// a separate ChaCha stream id, so it never overlaps the sampler stream
    /// with the same seed.
    pub fn derived_for_coin(seed: u64, index: u64) -> Self {
        Self::with_stream_id(seed.wrapping_add(index), COIN_STREAM)
    }

    fn with_stream_id(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            draws: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of base uniforms emitted so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// One base uniform on `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * UNIT
    }

    /// Materialize `n` base uniforms.
    pub fn uniforms(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform01()).collect()
    }

    /// Uniform index in `0..n` from one base uniform.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        let k = (self.uniform01() * n as f64) as usize;
        k.min(n - 1)
    }

    /// A coin with known success probability `q`: returns true iff the base
    /// uniform is below `q`.
    pub fn bernoulli(&mut self, q: f64) -> Result<bool> {
        if !(0.0..=1.0).contains(&q) {
            return Err(SimError::domain("q", q, "0 <= q <= 1"));
        }
        Ok(self.uniform01() < q)
    }

    /// Exponential variate by inversion: `-ln(1 - u) / rate`.
    pub fn exponential(&mut self, rate: f64) -> Result<f64> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(SimError::domain("rate", rate, "rate > 0"));
        }
        Ok(exponential_from_uniform(self.uniform01(), rate))
    }
}

pub(crate) fn exponential_from_uniform(u: f64, rate: f64) -> f64 {
    -(-u).ln_1p() / rate
}

/// The only view of an unknown-`p` coin available to a Bernoulli factory.
pub trait Coin {
    fn flip(&mut self) -> bool;

    /// Flips served so far.
    fn flips_used(&self) -> u64;
}

impl<C: Coin + ?Sized> Coin for &mut C {
    fn flip(&mut self) -> bool {
        (**self).flip()
    }

    fn flips_used(&self) -> u64 {
        (**self).flips_used()
    }
}

/// Bernoulli(p) coin with a hidden `p`, backed by its own stream.
#[derive(Clone)]
pub struct CoinSource {
    p: f64,
    stream: RandomStream,
    flips: u64,
}

impl CoinSource {
    pub fn new(p: f64, stream: RandomStream) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(SimError::domain("p", p, "0 <= p <= 1"));
        }
        Ok(Self {
            p,
            stream,
            flips: 0,
        })
    }
}

impl Coin for CoinSource {
    fn flip(&mut self) -> bool {
        self.flips += 1;
        self.stream.uniform01() < self.p
    }

    fn flips_used(&self) -> u64 {
        self.flips
    }
}

// Keep `p` out of debug output as well.
impl std::fmt::Debug for CoinSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoinSource")
            .field("flips", &self.flips)
            .finish_non_exhaustive()
    }
}

/// Replays a fixed sequence of flips, then repeats `fill` forever.
///
/// Used to replay recorded coin sequences and to extend them arbitrarily.
#[derive(Clone, Debug)]
pub struct ScriptedCoin {
    script: Vec<bool>,
    fill: bool,
    flips: u64,
}

impl ScriptedCoin {
    pub fn new(script: Vec<bool>, fill: bool) -> Self {
        Self {
            script,
            fill,
            flips: 0,
        }
    }
}

impl Coin for ScriptedCoin {
    fn flip(&mut self) -> bool {
        let bit = self
            .script
            .get(self.flips as usize)
            .copied()
            .unwrap_or(self.fill);
        self.flips += 1;
        bit
    }

    fn flips_used(&self) -> u64 {
        self.flips
    }
}

/// Wraps a coin and records every flip it serves.
#[derive(Debug)]
pub struct RecordingCoin<C> {
    inner: C,
    log: Vec<bool>,
}

impl<C: Coin> RecordingCoin<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            log: Vec::new(),
        }
    }

    pub fn log(&self) -> &[bool] {
        &self.log
    }

    pub fn into_log(self) -> Vec<bool> {
        self.log
    }
}

impl<C: Coin> Coin for RecordingCoin<C> {
    fn flip(&mut self) -> bool {
        let bit = self.inner.flip();
        self.log.push(bit);
        bit
    }

    fn flips_used(&self) -> u64 {
        self.inner.flips_used()
    }
}
