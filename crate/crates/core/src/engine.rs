//! The generic perfect-simulation recursion.
//!
//! A [`StepKernel`] describes one level: given the current problem and a
//! random stream it either halts with a value, or defers to a child problem
//! and returns the data needed to map the child's sample back to this level.
//! [`run`] executes the recursion with an explicit stack of deferred maps
//! instead of call recursion, so depth is bounded by memory rather than the
//! machine stack. On halt the deferred maps are folded innermost first.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::randomness::RandomStream;

/// Default recursion cap for rejection samplers and Bernoulli factories.
pub const DEFAULT_MAX_DEPTH: u64 = 1_000_000;
/// Default number of doublings for doubling CFTP.
pub const DEFAULT_MAX_DOUBLINGS: u64 = 64;

/// The problem handed to one level of the recursion.
///
/// `params` is opaque to the engine. `depth` is assigned by the engine and
/// grows by exactly one on every descent.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<P> {
    pub params: P,
    pub depth: u64,
}

/// Result of one step of a kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum RecursionOutcome<P, V, D> {
    /// Stop with a value of the current level's target.
    Halt(V),
    /// Solve `child` one level down, then apply `post` to its sample.
    Recurse { child: P, post: D },
}

/// One level of a perfect simulation algorithm.
pub trait StepKernel {
    /// Per-level parameters identifying the current target.
    type Problem;
    /// Sample values.
    type Value;
    /// Deferred post-processing data, closed over the randomness drawn at
    /// the level that produced it.
    type Deferred;

    /// Draw this level's randomness from `stream` and decide.
    fn step(
        &mut self,
        problem: &ProblemSpec<Self::Problem>,
        stream: &mut RandomStream,
    ) -> Result<RecursionOutcome<Self::Problem, Self::Value, Self::Deferred>>;

    /// Map a child sample to a sample of the level that deferred `post`.
    /// Must be deterministic and must not draw randomness.
    fn post_process(&self, post: Self::Deferred, child: Self::Value) -> Self::Value;

    /// Coin flips consumed so far, for kernels that read a [`crate::Coin`].
    fn flips_used(&self) -> u64 {
        0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunLimits {
    max_depth: u64,
}

impl RunLimits {
    pub fn new(max_depth: u64) -> Result<Self> {
        if max_depth == 0 {
            return Err(SimError::ContractViolation(
                "max_depth must be at least 1".into(),
            ));
        }
        Ok(Self { max_depth })
    }

    pub fn max_depth(&self) -> u64 {
        self.max_depth
    }
}

impl Default for RunLimits {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// One perfect sample plus instrumentation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleRecord<V> {
    pub value: V,
    /// Largest recursion level reached (0 if the root level halted).
    pub depth: u64,
    /// Base uniforms drawn from the sampler stream.
    pub randomness_units: u64,
    /// Coin flips drawn from a hidden coin (0 for coin-free samplers).
    pub flips: u64,
}

impl<V> SampleRecord<V> {
    pub fn map<W>(self, f: impl FnOnce(V) -> W) -> SampleRecord<W> {
        SampleRecord {
            value: f(self.value),
            depth: self.depth,
            randomness_units: self.randomness_units,
            flips: self.flips,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Truncated<V> {
    Completed(SampleRecord<V>),
    /// The run needed a level deeper than the cap.
    Censored,
}

impl<V> Truncated<V> {
    pub fn completed(self) -> Option<SampleRecord<V>> {
        match self {
            Truncated::Completed(r) => Some(r),
            Truncated::Censored => None,
        }
    }
}

/// Run the recursion from `root` until a level halts.
///
/// Fails with [`SimError::DepthExceeded`] if a level at depth
/// `limits.max_depth()` still asks to recurse.
pub fn run<K: StepKernel>(
    root: K::Problem,
    kernel: &mut K,
    stream: &mut RandomStream,
    limits: RunLimits,
) -> Result<SampleRecord<K::Value>> {
    drive(root, kernel, stream, limits.max_depth)?.ok_or(SimError::DepthExceeded {
        max_depth: limits.max_depth,
    })
}

/// Like [`run`], but a run that needs to go deeper than `depth_cap` is
/// reported as [`Truncated::Censored`]. A run completes exactly when its
/// final depth is at most `depth_cap`.
pub fn run_truncated<K: StepKernel>(
    root: K::Problem,
    kernel: &mut K,
    stream: &mut RandomStream,
    depth_cap: u64,
) -> Result<Truncated<K::Value>> {
    Ok(match drive(root, kernel, stream, depth_cap)? {
        Some(r) => Truncated::Completed(r),
        None => Truncated::Censored,
    })
}

fn drive<K: StepKernel>(
    root: K::Problem,
    kernel: &mut K,
    stream: &mut RandomStream,
    cap: u64,
) -> Result<Option<SampleRecord<K::Value>>> {
    let draws_before = stream.draws();
    let flips_before = kernel.flips_used();
    let mut pending: Vec<K::Deferred> = Vec::new();
    let mut problem = ProblemSpec {
        params: root,
        depth: 0,
    };

    loop {
        match kernel.step(&problem, stream)? {
            RecursionOutcome::Halt(value) => {
                let depth = problem.depth;
                let value = pending
                    .into_iter()
                    .rev()
                    .fold(value, |x, post| kernel.post_process(post, x));
                return Ok(Some(SampleRecord {
                    value,
                    depth,
                    randomness_units: stream.draws() - draws_before,
                    flips: kernel.flips_used() - flips_before,
                }));
            }
            RecursionOutcome::Recurse { child, post } => {
                if problem.depth >= cap {
                    return Ok(None);
                }
                pending.push(post);
                problem = ProblemSpec {
                    params: child,
                    depth: problem.depth + 1,
                };
            }
        }
    }
}
