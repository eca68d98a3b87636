//! Perfect simulation workbench.
//!
//! A perfect sampler is a randomized recursion: at each level it draws some
//! randomness, and either halts with a value or hands a new problem to a
//! deeper level together with a deterministic post-processing map. When
//! every level is locally correct and the recursion halts with probability
//! one, the output is exactly distributed as the target.
//!
//! * [`engine`] drives that recursion for any [`engine::StepKernel`].
//! * [`randomness`] provides the seedable uniform stream and the hidden-p
//!   coin consumed by Bernoulli factories.
//! * [`ar`], [`cftp`] and [`factory`] are concrete kernels.
//! * [`verify`] holds the independent oracles and statistical checks.
//! * [`cli`] is the `perfect-sim` command-line front end.

pub mod ar;
pub mod cftp;
pub mod cli;
pub mod engine;
pub mod error;
pub mod factory;
pub mod randomness;
pub mod verify;

pub use engine::{
    run, run_truncated, ProblemSpec, RecursionOutcome, RunLimits, SampleRecord, StepKernel,
    Truncated,
};
pub use error::{Result, SimError};
pub use randomness::{Coin, CoinSource, RandomStream};
