//! Bernoulli factories.
//!
//! Each factory turns flips of a coin with unknown `p` (seen only through
//! [`Coin`]) plus external uniforms into one flip of an `f(p)` coin. They
//! are written as engine kernels whose post-processors are all the
//! identity: a level either halts with a bit or hands the whole problem to
//! a child.

mod linear;

pub use linear::{
    lf_piece1, lf_piece2, lf_piece3, linear_factory, LinearFactoryState, PieceThree,
    LINEAR_THRESHOLD,
};

use crate::engine::{self, ProblemSpec, RecursionOutcome, RunLimits, SampleRecord, StepKernel};
use crate::error::{Result, SimError};
use crate::randomness::{Coin, RandomStream};

struct VonNeumannKernel<C> {
    coin: C,
}

impl<C: Coin> StepKernel for VonNeumannKernel<C> {
    type Problem = ();
    type Value = bool;
    type Deferred = ();

    fn step(
        &mut self,
        _: &ProblemSpec<()>,
        _: &mut RandomStream,
    ) -> Result<RecursionOutcome<(), bool, ()>> {
        let first = self.coin.flip();
        let second = self.coin.flip();
        Ok(match (first, second) {
            (true, false) => RecursionOutcome::Halt(true),
            (false, true) => RecursionOutcome::Halt(false),
            _ => RecursionOutcome::Recurse {
                child: (),
                post: (),
            },
        })
    }

    fn post_process(&self, _: (), bit: bool) -> bool {
        bit
    }

    fn flips_used(&self) -> u64 {
        self.coin.flips_used()
    }
}

/// Fair bit from a `p`-coin, two flips per round. Rounds used is
/// `depth + 1`. Never halts when `p` is 0 or 1.
pub fn von_neumann<C: Coin>(
    coin: C,
    stream: &mut RandomStream,
    limits: RunLimits,
) -> Result<SampleRecord<bool>> {
    engine::run((), &mut VonNeumannKernel { coin }, stream, limits)
}

struct ExpKernel<C> {
    coin: C,
}

impl<C: Coin> StepKernel for ExpKernel<C> {
    /// Current rate `C`: the level's target is `exp(-C p)`.
    type Problem = f64;
    type Value = bool;
    type Deferred = ();

    fn step(
        &mut self,
        p: &ProblemSpec<f64>,
        stream: &mut RandomStream,
    ) -> Result<RecursionOutcome<f64, bool, ()>> {
        let rate = p.params;
        let arrival = stream.exponential(rate)?;
        if arrival >= 1.0 {
            return Ok(RecursionOutcome::Halt(true));
        }
        if self.coin.flip() {
            return Ok(RecursionOutcome::Halt(false));
        }
        Ok(RecursionOutcome::Recurse {
            child: rate * (1.0 - arrival),
            post: (),
        })
    }

    fn post_process(&self, _: (), bit: bool) -> bool {
        bit
    }

    fn flips_used(&self) -> u64 {
        self.coin.flips_used()
    }
}

/// `exp(-C p)` coin. Each level draws `Exp(C)`; at or past 1 it outputs 1,
/// otherwise one flip decides: heads outputs 0, tails continues with rate
/// `C (1 - arrival)`.
pub fn exp_factory<C: Coin>(
    coin: C,
    c: f64,
    stream: &mut RandomStream,
    limits: RunLimits,
) -> Result<SampleRecord<bool>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SimError::domain("C", c, "C > 0"));
    }
    engine::run(c, &mut ExpKernel { coin }, stream, limits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomness::{CoinSource, RecordingCoin, ScriptedCoin};

    fn coin(p: f64, seed: u64) -> CoinSource {
        CoinSource::new(p, RandomStream::derived_for_coin(seed, 0)).unwrap()
    }

    #[test]
    fn von_neumann_fair_coin_mean_and_rounds() {
        let n = 100_000;
        let mut stream = RandomStream::from_seed(0);
        let mut c = coin(0.5, 31);
        let (mut ones, mut rounds) = (0u64, 0u64);
        for _ in 0..n {
            let r = von_neumann(&mut c, &mut stream, RunLimits::default()).unwrap();
            ones += r.value as u64;
            rounds += r.depth + 1;
            assert_eq!(r.flips, 2 * (r.depth + 1));
            assert_eq!(r.randomness_units, 0);
        }
        let mean = ones as f64 / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
        let mean_rounds = rounds as f64 / n as f64;
        assert!((mean_rounds - 2.0).abs() < 0.1);
    }

    #[test]
    fn von_neumann_is_fair_for_biased_coin() {
        let n = 100_000;
        let mut stream = RandomStream::from_seed(0);
        let mut c = coin(0.1, 32);
        let ones: u64 = (0..n)
            .map(|_| {
                von_neumann(&mut c, &mut stream, RunLimits::default())
                    .unwrap()
                    .value as u64
            })
            .sum();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn von_neumann_degenerate_coin_never_halts() {
        let mut stream = RandomStream::from_seed(0);
        let limits = RunLimits::new(1000).unwrap();
        for p in [0.0, 1.0] {
            assert_eq!(
                von_neumann(coin(p, 1), &mut stream, limits),
                Err(SimError::DepthExceeded { max_depth: 1000 })
            );
        }
    }

    #[test]
    fn von_neumann_swapped_rounds_flip_the_output() {
        let mut stream = RandomStream::from_seed(0);
        let mut source = coin(0.3, 77);
        for _ in 0..2000 {
            let mut rec = RecordingCoin::new(&mut source);
            let bit = von_neumann(&mut rec, &mut stream, RunLimits::default())
                .unwrap()
                .value;
            let mut log = rec.into_log();
            for pair in log.chunks_exact_mut(2) {
                pair.swap(0, 1);
            }
            let replay = von_neumann(
                ScriptedCoin::new(log, false),
                &mut stream,
                RunLimits::default(),
            )
            .unwrap();
            assert_eq!(replay.value, !bit);
        }
    }

    #[test]
    fn exp_factory_mean() {
        let n = 100_000;
        let mut stream = RandomStream::from_seed(404);
        let mut c = coin(0.5, 405);
        let ones: u64 = (0..n)
            .map(|_| {
                exp_factory(&mut c, 1.0, &mut stream, RunLimits::default())
                    .unwrap()
                    .value as u64
            })
            .sum();
        let target = (-0.5f64).exp();
        assert!(
            (ones as f64 / n as f64 - target).abs()
                < 4.0 * (target * (1.0 - target) / n as f64).sqrt()
        );
    }

    #[test]
    fn exp_factory_tails_coin_always_one() {
        let mut stream = RandomStream::from_seed(5);
        let mut c = coin(0.0, 6);
        for _ in 0..10_000 {
            assert!(
                exp_factory(&mut c, 2.0, &mut stream, RunLimits::default())
                    .unwrap()
                    .value
            );
        }
    }

    #[test]
    fn exp_factory_early_arrival_uses_no_flips() {
        let mut stream = RandomStream::from_seed(9);
        let mut seen = 0;
        for _ in 0..5000 {
            let mut probe = stream.clone();
            let first_arrival = probe.exponential(0.7).unwrap();
            let r = exp_factory(
                ScriptedCoin::new(vec![], true),
                0.7,
                &mut stream,
                RunLimits::default(),
            )
            .unwrap();
            if first_arrival >= 1.0 {
                seen += 1;
                assert!(r.value);
                assert_eq!(r.flips, 0);
                assert_eq!(r.depth, 0);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn exp_factory_rejects_bad_rate() {
        let mut stream = RandomStream::from_seed(1);
        for c in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                exp_factory(coin(0.5, 1), c, &mut stream, RunLimits::default()),
                Err(SimError::Domain { .. })
            ));
        }
    }
}
