//! Coupling from the past.
//!
//! A stationary update `phi(state, u)` consumes a fixed number of base
//! uniforms per step; `t` steps consume a block of `t * draws_per_step()`
//! uniforms. A [`CoalescenceDetector`] decides whether a block maps the whole
//! state space to a single state. Both protocols run on the generic engine:
//! a level that does not coalesce stores its block as the deferred data and
//! applies it, in full, to the sample returned by the deeper level.

mod chains;
mod detect;
mod ising;

pub use chains::{ReflectingWalk, ResetWalk};
pub use detect::{
    exhaustive_detector, monotone_detector, ExhaustiveDetector, MonotoneDetector,
    MAX_ENUMERATED_STATES,
};
pub use ising::{Graph, IsingConfig, IsingModel, Spins};

use std::fmt::Debug;

use crate::engine::{self, ProblemSpec, RecursionOutcome, RunLimits, SampleRecord, StepKernel};
use crate::error::{Result, SimError};
use crate::randomness::RandomStream;

/// A stationary update function.
pub trait UpdateFunction {
    type State: Clone + PartialEq + Debug;

    /// Base uniforms consumed by one application of the update.
    fn draws_per_step(&self) -> usize;

    /// One step. `u` has exactly `draws_per_step()` entries.
    fn step(&self, state: &Self::State, u: &[f64]) -> Self::State;

    /// Uniforms consumed by `t` steps.
    fn block_size(&self, t: u64) -> Option<usize> {
        usize::try_from(t).ok()?.checked_mul(self.draws_per_step())
    }

    /// The `t`-fold composition, with `t = block.len() / draws_per_step()`.
    fn apply_block(&self, state: &Self::State, block: &[f64]) -> Self::State {
        block
            .chunks_exact(self.draws_per_step())
            .fold(state.clone(), |x, u| self.step(&x, u))
    }
}

/// Updates on a finite, enumerable state space.
pub trait FiniteStateSpace: UpdateFunction {
    fn state_count(&self) -> u128;
    fn states(&self) -> Vec<Self::State>;
}

/// Updates that are monotone for a partial order on states.
pub trait MonotoneUpdate: UpdateFunction {
    /// `a <= b` in the partial order.
    fn precedes(&self, a: &Self::State, b: &Self::State) -> bool;
    fn bottom(&self) -> Self::State;
    fn top(&self) -> Self::State;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Coalescence<S> {
    Coalesced(S),
    NotCoalesced,
}

/// Decides whether a block sends every state to a single state. May miss
/// coalescence, must never report it falsely.
pub trait CoalescenceDetector<U: UpdateFunction> {
    fn detect(&self, update: &U, block: &[f64]) -> Result<Coalescence<U::State>>;
}

struct SingleStepKernel<'a, U, D> {
    update: &'a U,
    detector: &'a D,
}

impl<U, D> StepKernel for SingleStepKernel<'_, U, D>
where
    U: UpdateFunction,
    D: CoalescenceDetector<U>,
{
    type Problem = ();
    type Value = U::State;
    type Deferred = Vec<f64>;

    fn step(
        &mut self,
        _: &ProblemSpec<()>,
        stream: &mut RandomStream,
    ) -> Result<RecursionOutcome<(), U::State, Vec<f64>>> {
        let block = stream.uniforms(self.update.draws_per_step());
        Ok(match self.detector.detect(self.update, &block)? {
            Coalescence::Coalesced(s) => RecursionOutcome::Halt(s),
            Coalescence::NotCoalesced => RecursionOutcome::Recurse {
                child: (),
                post: block,
            },
        })
    }

    fn post_process(&self, block: Vec<f64>, x: U::State) -> U::State {
        self.update.apply_block(&x, &block)
    }
}

/// Single-step CFTP: each level draws one step's worth of uniforms.
pub fn cftp_single<U, D>(
    update: &U,
    detector: &D,
    stream: &mut RandomStream,
    limits: RunLimits,
) -> Result<SampleRecord<U::State>>
where
    U: UpdateFunction,
    D: CoalescenceDetector<U>,
{
    engine::run(
        (),
        &mut SingleStepKernel { update, detector },
        stream,
        limits,
    )
}

struct DoublingKernel<'a, U, D> {
    update: &'a U,
    detector: &'a D,
    t0: u64,
}

impl<U, D> DoublingKernel<'_, U, D>
where
    U: UpdateFunction,
{
    fn block_size(&self, level: u64) -> Result<usize> {
        u32::try_from(level)
            .ok()
            .and_then(|k| self.t0.checked_mul(1u64.checked_shl(k)?))
            .and_then(|t| self.update.block_size(t))
            .ok_or_else(|| {
                SimError::ContractViolation(format!(
                    "block size overflows at doubling level {level}"
                ))
            })
    }
}

impl<U, D> StepKernel for DoublingKernel<'_, U, D>
where
    U: UpdateFunction,
    D: CoalescenceDetector<U>,
{
    /// Doubling level `k`; the level runs `t0 * 2^k` steps.
    type Problem = u64;
    type Value = U::State;
    type Deferred = Vec<f64>;

    fn step(
        &mut self,
        p: &ProblemSpec<u64>,
        stream: &mut RandomStream,
    ) -> Result<RecursionOutcome<u64, U::State, Vec<f64>>> {
        let block = stream.uniforms(self.block_size(p.params)?);
        Ok(match self.detector.detect(self.update, &block)? {
            Coalescence::Coalesced(s) => RecursionOutcome::Halt(s),
            Coalescence::NotCoalesced => RecursionOutcome::Recurse {
                child: p.params + 1,
                post: block,
            },
        })
    }

    fn post_process(&self, block: Vec<f64>, x: U::State) -> U::State {
        self.update.apply_block(&x, &block)
    }
}

/// Doubling CFTP starting from `t0` steps. Level `k` draws a fresh block for
/// `t0 * 2^k` steps; if it does not coalesce, the sample from level `k + 1`
/// is pushed through that same block.
pub fn cftp_doubling<U, D>(
    update: &U,
    detector: &D,
    t0: u64,
    stream: &mut RandomStream,
    max_doublings: u64,
) -> Result<SampleRecord<U::State>>
where
    U: UpdateFunction,
    D: CoalescenceDetector<U>,
{
    if t0 == 0 {
        return Err(SimError::ContractViolation("t0 must be positive".into()));
    }
    let limits = RunLimits::new(max_doublings)?;
    engine::run(
        0,
        &mut DoublingKernel {
            update,
            detector,
            t0,
        },
        stream,
        limits,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One state, one uniform per step.
    struct Singleton;

    impl UpdateFunction for Singleton {
        type State = u8;
        fn draws_per_step(&self) -> usize {
            1
        }
        fn step(&self, s: &u8, _: &[f64]) -> u8 {
            *s
        }
    }

    impl FiniteStateSpace for Singleton {
        fn state_count(&self) -> u128 {
            1
        }
        fn states(&self) -> Vec<u8> {
            vec![7]
        }
    }

    #[test]
    fn singleton_space_halts_immediately() {
        let mut s = RandomStream::from_seed(1);
        let r = cftp_single(
            &Singleton,
            &ExhaustiveDetector,
            &mut s,
            RunLimits::default(),
        )
        .unwrap();
        assert_eq!((r.value, r.depth), (7, 0));
        let r = cftp_doubling(&Singleton, &ExhaustiveDetector, 2, &mut s, 64).unwrap();
        assert_eq!((r.value, r.depth, r.randomness_units), (7, 0, 2));
    }

    #[test]
    fn reset_walk_depth_is_geometric() {
        let n = 100_000;
        let mut s = RandomStream::from_seed(5150);
        let zero = (0..n)
            .filter(|_| {
                cftp_single(
                    &ResetWalk,
                    &ExhaustiveDetector,
                    &mut s,
                    RunLimits::default(),
                )
                .unwrap()
                .depth
                    == 0
            })
            .count();
        let q = 0.2;
        assert!((zero as f64 / n as f64 - q).abs() < 4.0 * (q * (1.0 - q) / n as f64).sqrt());
    }

    #[test]
    fn doubling_draws_exactly_the_stored_blocks() {
        // Draws = sum over levels 0..=T of t0 * 2^k * draws_per_step: no
        // uniforms are drawn when the blocks are replayed.
        let mut s = RandomStream::from_seed(77);
        let model = IsingModel::new(Graph::grid(2, 2), 0.3).unwrap();
        let det = MonotoneDetector::for_update(&model);
        for _ in 0..500 {
            let t0 = 3u64;
            let r = cftp_doubling(&model, &det, t0, &mut s, 64).unwrap();
            let expected: u64 = (0..=r.depth).map(|k| t0 * (1 << k) * 2).sum();
            assert_eq!(r.randomness_units, expected);
        }
    }

    #[test]
    fn identity_update_hits_depth_cap() {
        struct Identity;
        impl UpdateFunction for Identity {
            type State = u8;
            fn draws_per_step(&self) -> usize {
                1
            }
            fn step(&self, s: &u8, _: &[f64]) -> u8 {
                *s
            }
        }
        impl FiniteStateSpace for Identity {
            fn state_count(&self) -> u128 {
                2
            }
            fn states(&self) -> Vec<u8> {
                vec![0, 1]
            }
        }
        let mut s = RandomStream::from_seed(1);
        let limits = RunLimits::new(100).unwrap();
        assert_eq!(
            cftp_single(&Identity, &ExhaustiveDetector, &mut s, limits),
            Err(SimError::DepthExceeded { max_depth: 100 })
        );
        assert_eq!(
            cftp_doubling(&Identity, &ExhaustiveDetector, 1, &mut s, 10),
            Err(SimError::DepthExceeded { max_depth: 10 })
        );
    }

    #[test]
    fn zero_t0_rejected() {
        let mut s = RandomStream::from_seed(1);
        assert!(cftp_doubling(&ReflectingWalk, &ExhaustiveDetector, 0, &mut s, 8).is_err());
    }
}
