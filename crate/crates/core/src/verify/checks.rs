use std::fmt::Display;
use std::str::FromStr;

use super::oracles::exp_factory_rhs;
use super::{CheckRecord, ProbabilityTable, VerificationReport, SIGMA_BAND};
use crate::engine::{run_truncated, StepKernel, Truncated};
use crate::error::{Result, SimError};
use crate::randomness::RandomStream;

const IDENTITY_TOLERANCE: f64 = 1e-12;
const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// Checks `P(X = c, T < i) <= pi(c) <= P(X = c, T < i) + P(T >= i)` for every
/// state `c` of `target` and every `i` in `caps`, each side within four
/// binomial standard errors.
///
/// For cap `i >= 1` the estimate uses `samples` runs truncated at depth
/// `i - 1` from stream `RandomStream::derived(seed, i)`. Cap 0 needs no
/// sampling: `T < 0` never happens, so the lower side is 0 and the upper
/// side is 1.
pub fn truncation_bound_check<K>(
    kernel: &mut K,
    root: K::Problem,
    target: &ProbabilityTable,
    caps: &[u64],
    samples: u64,
    seed: u64,
) -> Result<VerificationReport>
where
    K: StepKernel,
    K::Problem: Clone,
    K::Value: Display,
{
    if samples == 0 {
        return Err(SimError::EmptyInput);
    }
    let mut report = VerificationReport::default();
    for &cap in caps {
        let (completed, censored) = if cap == 0 {
            (vec![0u64; target.len()], samples)
        } else {
            let mut stream = RandomStream::derived(seed, cap);
            let mut labels = Vec::new();
            let mut censored = 0u64;
            for _ in 0..samples {
                match run_truncated(root.clone(), kernel, &mut stream, cap - 1)? {
                    Truncated::Completed(r) => labels.push(r.value.to_string()),
                    Truncated::Censored => censored += 1,
                }
            }
            (target.counts(labels)?, censored)
        };
        let n = samples as f64;
        let tail = censored as f64 / n;
        for ((label, pi), &hits) in target.iter().zip(&completed) {
            let lower = hits as f64 / n;
            let upper = lower + tail;
            report.push(side_check(
                format!("truncation/i={cap}/c={label}/lower"),
                lower - pi,
                lower,
                samples,
                seed,
            ));
            report.push(side_check(
                format!("truncation/i={cap}/c={label}/upper"),
                pi - upper,
                upper,
                samples,
                seed,
            ));
        }
    }
    Ok(report)
}

/// `excess` must not exceed four binomial standard errors of the
/// proportion `estimate`. The statistic is `excess / sigma`.
fn side_check(name: String, excess: f64, estimate: f64, samples: u64, seed: u64) -> CheckRecord {
    let sigma = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    let statistic = if sigma > 0.0 {
        excess / sigma
    } else if excess <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    CheckRecord::at_most(name, statistic, SIGMA_BAND, samples, Some(seed))
}

/// Kernels with a closed-form one-level identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Die,
    VonNeumann,
    ExpFactory,
    LinearPiece1,
    LinearPiece2,
    LinearPiece3,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Die,
        Family::VonNeumann,
        Family::ExpFactory,
        Family::LinearPiece1,
        Family::LinearPiece2,
        Family::LinearPiece3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Die => "die",
            Family::VonNeumann => "von_neumann",
            Family::ExpFactory => "exp_factory",
            Family::LinearPiece1 => "linear_piece1",
            Family::LinearPiece2 => "linear_piece2",
            Family::LinearPiece3 => "linear_piece3",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Family::ExpFactory => QUADRATURE_TOLERANCE,
            _ => IDENTITY_TOLERANCE,
        }
    }
}

impl FromStr for Family {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SimError::ContractViolation(format!("unknown identity family {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityGrid {
    pub ps: Vec<f64>,
    pub cs: Vec<f64>,
    pub exponents: Vec<u64>,
    pub eps: Vec<f64>,
}

impl Default for IdentityGrid {
    /// p in {0.05, 0.10, ..., 0.60}, C in {1.5, 2, 4}, i in 1..=10,
    /// eps in {0.1, 0.2, 0.5}.
    fn default() -> Self {
        Self {
            ps: (1..=12).map(|k| k as f64 * 0.05).collect(),
            cs: vec![1.5, 2.0, 4.0],
            exponents: (1..=10).collect(),
            eps: vec![0.1, 0.2, 0.5],
        }
    }
}

/// Evaluates both sides of the family's one-level identity at every grid
/// point. The statistic is the largest discrepancy, relative to
/// `max(1, |lhs|)`.
pub fn local_correctness_check(family: Family, grid: &IdentityGrid) -> VerificationReport {
    let pairs: Vec<(f64, f64)> = match family {
        // P(X = i) = P(U = i) + P(Y = i) P(U = 6)
        Family::Die => vec![(1.0 / 5.0, 1.0 / 6.0 + (1.0 / 5.0) * (1.0 / 6.0))],
        Family::VonNeumann => grid
            .ps
            .iter()
            .map(|&p| {
                let q = 1.0 - p;
                (0.5, p * q * 1.0 + (p * p + q * q) * 0.5 + q * p * 0.0)
            })
            .collect(),
        Family::ExpFactory => cross(&grid.cs, &grid.ps)
            .map(|(c, p)| ((-c * p).exp(), exp_factory_rhs(c, p)))
            .collect(),
        Family::LinearPiece1 => linear_points(grid)
            .map(|(c, p, i)| {
                let cp = c * p;
                let tail = (c - 1.0) * p / (1.0 - p);
                (
                    cp.powi(i),
                    p * cp.powi(i - 1) + (1.0 - p) * cp.powi(i - 1) * tail,
                )
            })
            .collect(),
        Family::LinearPiece2 => linear_points(grid)
            .map(|(c, p, i)| {
                let cp = c * p;
                let tail = (c - 1.0) * p / (1.0 - p);
                (
                    cp.powi(i) * tail,
                    (c - 1.0) / c * cp.powi(i + 1) + (1.0 / c) * cp.powi(i + 1) * tail,
                )
            })
            .collect(),
        Family::LinearPiece3 => linear_points(grid)
            .flat_map(|(c, p, i)| {
                grid.eps.iter().map(move |&eps| {
                    // The rescaled branch targets ((1 + eps/2) C p)^i.
                    let alpha = (1.0 + eps / 2.0).powi(-i);
                    let rescaled = (c * (1.0 + eps / 2.0) * p).powi(i);
                    ((c * p).powi(i), alpha * rescaled + (1.0 - alpha) * 0.0)
                })
            })
            .collect(),
    };
    let worst = pairs
        .iter()
        .map(|(lhs, rhs)| (lhs - rhs).abs() / lhs.abs().max(1.0))
        .fold(0.0, f64::max);
    std::iter::once(CheckRecord::at_most(
        format!("local_correctness/{}", family.name()),
        worst,
        family.tolerance(),
        pairs.len() as u64,
        None,
    ))
    .collect()
}

fn cross<'a>(a: &'a [f64], b: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
    a.iter().flat_map(move |&x| b.iter().map(move |&y| (x, y)))
}

fn linear_points(grid: &IdentityGrid) -> impl Iterator<Item = (f64, f64, i32)> + '_ {
    cross(&grid.cs, &grid.ps)
        .flat_map(move |(c, p)| grid.exponents.iter().map(move |&i| (c, p, i as i32)))
}
