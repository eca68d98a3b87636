use std::collections::{HashMap, HashSet};

use crate::error::{Result, SimError};

const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Exact distribution over labelled states.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityTable {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(SimError::EmptyInput);
        }
        let mut seen = HashSet::new();
        for (label, p) in &entries {
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(SimError::InvalidTable(format!(
                    "probability {p} for {label:?}"
                )));
            }
            if !seen.insert(label.as_str()) {
                return Err(SimError::InvalidTable(format!("duplicate state {label:?}")));
            }
        }
        let total: f64 = entries.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(SimError::InvalidTable(format!(
                "probabilities sum to {total:.17}"
            )));
        }
        let (labels, probs) = entries.into_iter().unzip();
        Ok(Self { labels, probs })
    }

    /// Normalize nonnegative weights.
    pub fn from_weights(entries: Vec<(String, f64)>) -> Result<Self> {
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SimError::InvalidTable(format!("total weight {total}")));
        }
        Self::new(entries.into_iter().map(|(l, w)| (l, w / total)).collect())
    }

    pub fn uniform<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::from_weights(labels.into_iter().map(|l| (l.into(), 1.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.probs.iter().copied())
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probs[i])
    }

    /// All mass on one state.
    pub fn is_point_mass(&self) -> bool {
        self.probs
            .iter()
            .any(|&p| (p - 1.0).abs() <= NORMALIZATION_TOLERANCE)
    }

    pub fn min_probability(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Merge states with the same key. Groups keep first-appearance order.
    pub fn coarsen(&self, key: impl Fn(&str) -> String) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut mass: HashMap<String, f64> = HashMap::new();
        for (label, p) in self.iter() {
            let k = key(label);
            if !mass.contains_key(&k) {
                order.push(k.clone());
            }
            *mass.entry(k).or_insert(0.0) += p;
        }
        let probs = order.iter().map(|k| mass[k]).collect();
        Self {
            labels: order,
            probs,
        }
    }

    /// Count observations per state, in table order. Unknown labels fail.
    pub fn counts<S: AsRef<str>>(
        &self,
        observations: impl IntoIterator<Item = S>,
    ) -> Result<Vec<u64>> {
        let index: HashMap<&str, usize> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let mut counts = vec![0u64; self.labels.len()];
        for obs in observations {
            let obs = obs.as_ref();
            let i = index.get(obs).ok_or_else(|| {
                SimError::InvalidTable(format!("observed state {obs:?} is not in the table"))
            })?;
            counts[*i] += 1;
        }
        Ok(counts)
    }
}
