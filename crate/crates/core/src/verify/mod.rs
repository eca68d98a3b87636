//! Independent oracles and statistical checks.
//!
//! Oracles here use exact enumeration, linear algebra or quadrature only.
//! They share no sampling logic with the samplers they check.

mod checks;
mod oracles;
mod stats;
pub mod suites;
mod table;

pub use checks::{local_correctness_check, truncation_bound_check, Family, IdentityGrid};
pub use oracles::{
    exact_ising_distribution, exp_factory_rhs, integrate, stationary_of_chain, MAX_CHAIN_STATES,
    MAX_ISING_VERTICES,
};
pub use stats::{
    chi_square_critical, chi_square_gof, empirical_report, mean_check, ChiSquare, EmpiricalSummary,
    Observable,
};
pub use table::ProbabilityTable;

use serde::{Deserialize, Serialize};

/// Significance level of every chi-square gate.
pub const CHI_SQUARE_ALPHA: f64 = 1e-4;
/// Width, in standard errors, of every mean band.
pub const SIGMA_BAND: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: u64,
    /// Seed of the randomized check; `None` for deterministic checks.
    pub seed: Option<u64>,
}

impl CheckRecord {
    /// Passes when `statistic <= threshold`.
    pub fn at_most(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        n: u64,
        seed: Option<u64>,
    ) -> Self {
        Self {
            name: name.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            n,
            seed,
        }
    }
}

/// Fixed six decimals, or scientific notation for small nonzero values.
struct Num(f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 != 0.0 && self.0.abs() < 1e-3 {
            write!(f, "{:.3e}", self.0)
        } else {
            write!(f, "{:.6}", self.0)
        }
    }
}

impl std::fmt::Display for CheckRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: statistic {} threshold {} (n = {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            Num(self.statistic),
            Num(self.threshold),
            self.n
        )?;
        match self.seed {
            Some(s) => write!(f, ", seed = {s})"),
            None => write!(f, ")"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl FromIterator<CheckRecord> for VerificationReport {
    fn from_iter<I: IntoIterator<Item = CheckRecord>>(iter: I) -> Self {
        Self {
            checks: iter.into_iter().collect(),
        }
    }
}
