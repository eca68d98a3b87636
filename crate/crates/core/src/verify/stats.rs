use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{CheckRecord, ProbabilityTable, SIGMA_BAND};
use crate::engine::SampleRecord;
use crate::error::{Result, SimError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Pearson goodness of fit of `observed` counts against `expected`.
///
/// Requires at least five expected observations in the least likely
/// positive cell. Zero-probability cells are dropped when empty; any
/// observation in one makes the statistic infinite.
pub fn chi_square_gof(observed: &[u64], expected: &ProbabilityTable) -> Result<ChiSquare> {
    if observed.len() != expected.len() {
        return Err(SimError::ContractViolation(format!(
            "{} observed cells for a {}-cell table",
            observed.len(),
            expected.len()
        )));
    }
    let total: u64 = observed.iter().sum();
    let min_p = expected
        .probabilities()
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    let required = 5.0 / min_p;
    if (total as f64) < required {
        return Err(SimError::InadequateCounts { total, required });
    }

    let n = total as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(expected.probabilities()) {
        if p == 0.0 {
            if o > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        cells += 1;
        let e = n * p;
        statistic += (o as f64 - e).powi(2) / e;
    }
    let df = cells.saturating_sub(1);
    let p_value = if statistic.is_infinite() {
        0.0
    } else if df == 0 {
        1.0
    } else {
        ChiSquared::new(df as f64).expect("df > 0").sf(statistic)
    };
    Ok(ChiSquare {
        statistic,
        p_value,
        df,
    })
}

/// Upper `alpha` quantile of the chi-square law with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64)
        .expect("df > 0")
        .inverse_cdf(1.0 - alpha)
}

/// Numeric view of a sample value.
pub trait Observable {
    fn observe(&self) -> f64;
}

macro_rules! observable_as {
    ($($t:ty),*) => {$(
        impl Observable for $t {
            fn observe(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}

observable_as!(u8, u16, u32, u64, usize, i8, i16, i32, i64, f32, f64);

impl Observable for bool {
    fn observe(&self) -> f64 {
        if *self {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSummary {
    pub n: u64,
    pub mean: f64,
    /// Unbiased sample variance (0 for a single record).
    pub variance: f64,
    /// `mean -/+ 4 standard errors`.
    pub band: (f64, f64),
    pub depth_histogram: BTreeMap<u64, u64>,
    pub flips_histogram: BTreeMap<u64, u64>,
}

pub fn empirical_report<V: Observable>(records: &[SampleRecord<V>]) -> Result<EmpiricalSummary> {
    if records.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.value.observe()).sum::<f64>() / n;
    let variance = if records.len() > 1 {
        records
            .iter()
            .map(|r| (r.value.observe() - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let half = SIGMA_BAND * (variance / n).sqrt();
    let mut depth_histogram = BTreeMap::new();
    let mut flips_histogram = BTreeMap::new();
    for r in records {
        *depth_histogram.entry(r.depth).or_insert(0) += 1;
        *flips_histogram.entry(r.flips).or_insert(0) += 1;
    }
    Ok(EmpiricalSummary {
        n: records.len() as u64,
        mean,
        variance,
        band: (mean - half, mean + half),
        depth_histogram,
        flips_histogram,
    })
}

/// Two-sided check that a Bernoulli mean is within 4 standard errors of
/// `target`. The statistic is `|mean - target| / sigma` with sigma taken
/// from the target.
pub fn mean_check(
    name: impl Into<String>,
    ones: u64,
    n: u64,
    target: f64,
    seed: u64,
) -> CheckRecord {
    let mean = ones as f64 / n as f64;
    let sigma = (target * (1.0 - target) / n as f64).sqrt();
    let z = if sigma > 0.0 {
        (mean - target).abs() / sigma
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    CheckRecord::at_most(name, z, SIGMA_BAND, n, Some(seed))
}
