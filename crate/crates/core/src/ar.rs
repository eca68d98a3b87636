//! Acceptance/rejection as a perfect simulation kernel.
//!
//! Every level draws a proposal from `nu`; if it lands in the acceptance set
//! the level halts with it, otherwise the child problem is the same problem
//! and the post-processor is the identity.

use std::collections::HashSet;
use std::io::Read;

use serde::Deserialize;

use crate::engine::{self, ProblemSpec, RecursionOutcome, RunLimits, SampleRecord, StepKernel};
use crate::error::{Result, SimError};
use crate::randomness::RandomStream;

/// A proposal generator plus an acceptance predicate.
pub struct ArProblem<P, A> {
    proposal: P,
    accept: A,
    acceptance_mass: Option<f64>,
}

impl<V, P, A> ArProblem<P, A>
where
    P: FnMut(&mut RandomStream) -> V,
    A: Fn(&V) -> bool,
{
    pub fn new(proposal: P, accept: A) -> Self {
        Self {
            proposal,
            accept,
            acceptance_mass: None,
        }
    }

    /// Attach the known mass of the acceptance set, for test oracles.
    pub fn with_acceptance_mass(mut self, mass: f64) -> Self {
        self.acceptance_mass = Some(mass);
        self
    }

    pub fn acceptance_mass(&self) -> Option<f64> {
        self.acceptance_mass
    }
}

impl<V, P, A> StepKernel for ArProblem<P, A>
where
    P: FnMut(&mut RandomStream) -> V,
    A: Fn(&V) -> bool,
{
    type Problem = ();
    type Value = V;
    type Deferred = ();

    fn step(
        &mut self,
        _: &ProblemSpec<()>,
        stream: &mut RandomStream,
    ) -> Result<RecursionOutcome<(), V, ()>> {
        let x = (self.proposal)(stream);
        if (self.accept)(&x) {
            Ok(RecursionOutcome::Halt(x))
        } else {
            Ok(RecursionOutcome::Recurse {
                child: (),
                post: (),
            })
        }
    }

    fn post_process(&self, _: (), child: V) -> V {
        child
    }
}

/// Draw one sample of `nu` conditioned on the acceptance set.
pub fn ar_sample<V, P, A>(
    prob: &mut ArProblem<P, A>,
    stream: &mut RandomStream,
    limits: RunLimits,
) -> Result<SampleRecord<V>>
where
    P: FnMut(&mut RandomStream) -> V,
    A: Fn(&V) -> bool,
{
    engine::run((), prob, stream, limits)
}

pub type DieKernel = ArProblem<fn(&mut RandomStream) -> u8, fn(&u8) -> bool>;

fn roll_six(stream: &mut RandomStream) -> u8 {
    stream.index(6) as u8 + 1
}

fn at_most_five(x: &u8) -> bool {
    *x <= 5
}

/// Fair five-sided die from a fair six-sided one.
pub fn die_kernel() -> DieKernel {
    ArProblem::new(
        roll_six as fn(&mut RandomStream) -> u8,
        at_most_five as fn(&u8) -> bool,
    )
    .with_acceptance_mass(5.0 / 6.0)
}

pub fn die_five_record(stream: &mut RandomStream) -> Result<SampleRecord<u8>> {
    ar_sample(&mut die_kernel(), stream, RunLimits::default())
}

pub fn die_five(stream: &mut RandomStream) -> Result<u8> {
    die_five_record(stream).map(|r| r.value)
}

/// A finite probability table with string labels, sampled by inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    labels: Vec<String>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
struct TableRow {
    value: String,
    probability: f64,
}

impl FiniteMeasure {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SimError::EmptyInput);
        }
        let mut seen = HashSet::new();
        let mut labels = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        for (label, p) in entries {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(SimError::InvalidTable(format!(
                    "probability {p} for {label:?}"
                )));
            }
            if !seen.insert(label.clone()) {
                return Err(SimError::InvalidTable(format!("duplicate value {label:?}")));
            }
            labels.push(label);
            probs.push(p);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidTable(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            labels,
            probs,
            cumulative,
        })
    }

    /// Two-column CSV `value,probability`. A header row is optional.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| SimError::InvalidTable(e.to_string()))?;
            if i == 0 && row.get(1).is_some_and(|p| p.parse::<f64>().is_err()) {
                continue;
            }
            let row: TableRow = row
                .deserialize(None)
                .map_err(|e| SimError::InvalidTable(format!("row {}: {e}", i + 1)))?;
            entries.push((row.value, row.probability));
        }
        Self::new(entries)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Index of a draw, using one base uniform.
    pub fn sample_index(&self, stream: &mut RandomStream) -> usize {
        let u = stream.uniform01();
        let total = *self.cumulative.last().expect("nonempty");
        let k = self.cumulative.partition_point(|&c| c <= u * total);
        // Never return a zero-probability cell, even at rounding boundaries.
        let k = k.min(self.labels.len() - 1);
        if self.probs[k] > 0.0 {
            k
        } else {
            (0..=k)
                .rev()
                .find(|&j| self.probs[j] > 0.0)
                .expect("positive mass")
        }
    }

    /// Total mass of the cells selected by `accept`.
    pub fn mass_of(&self, accept: impl Fn(usize) -> bool) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(i, _)| accept(*i))
            .map(|(_, p)| p)
            .sum()
    }

    /// Rejection kernel over cell indices accepting the cells whose label is
    /// in `accept_set`. Fails if the acceptance set has zero mass, since the
    /// recursion would never halt.
    pub fn conditioned_on<'a>(
        &'a self,
        accept_set: &[String],
    ) -> Result<ArProblem<impl FnMut(&mut RandomStream) -> usize + 'a, impl Fn(&usize) -> bool>>
    {
        let mut mask = vec![false; self.labels.len()];
        for label in accept_set {
            let i = self.labels.iter().position(|l| l == label).ok_or_else(|| {
                SimError::InvalidTable(format!("accept value {label:?} not in table"))
            })?;
            mask[i] = true;
        }
        let mass = self.mass_of(|i| mask[i]);
        if mass <= 0.0 {
            return Err(SimError::ContractViolation(
                "acceptance set has zero mass".into(),
            ));
        }
        Ok(ArProblem::new(
            move |s: &mut RandomStream| self.sample_index(s),
            move |i: &usize| mask[*i],
        )
        .with_acceptance_mass(mass))
    }
}
