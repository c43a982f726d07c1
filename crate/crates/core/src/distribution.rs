//! Relation distributions: normalized demand proportions per relation.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Raw clause counts keyed by relation index.
pub type RelationCounts = BTreeMap<u32, u64>;

/// Cumulative-mass slack used when comparing against a truncation threshold,
/// so that decimal thresholds like 0.95 are met by sums such as 0.5+0.3+0.15.
const MASS_EPS: f64 = 1e-12;

/// Sparse mapping from relation index to proportion.
///
/// Entries are sorted by relation index and every stored proportion is
/// strictly positive. Untruncated distributions sum to one; truncated ones
/// sum to at least the threshold they were cut at.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationDistribution {
    entries: Vec<(u32, f64)>,
    truncated: bool,
}

impl RelationDistribution {
    /// Normalizes raw counts. Zero counts are omitted; repeated keys are summed.
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let mut merged: BTreeMap<u32, u64> = BTreeMap::new();
        for (r, c) in counts {
            if c > 0 {
                *merged.entry(r).or_default() += c;
            }
        }
        let total: u64 = merged.values().sum();
        if total == 0 {
            return Err(Error::EmptyUsage);
        }
        let total = total as f64;
        Ok(Self {
            entries: merged.into_iter().map(|(r, c)| (r, c as f64 / total)).collect(),
            truncated: false,
        })
    }

    /// Normalizes non-negative real weights. Non-positive weights are dropped.
    pub fn from_weights(weights: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<u32, f64> = BTreeMap::new();
        for (r, w) in weights {
            if !w.is_finite() {
                return Err(Error::Format(format!("non-finite weight for relation {r}")));
            }
            if w > 0.0 {
                *merged.entry(r).or_default() += w;
            }
        }
        let total: f64 = merged.values().sum();
        if total <= 0.0 {
            return Err(Error::EmptyUsage);
        }
        Ok(Self {
            entries: merged.into_iter().map(|(r, w)| (r, w / total)).collect(),
            truncated: false,
        })
    }

    /// Normalizes a dense weight vector indexed by relation.
    pub fn from_dense(weights: &[f64]) -> Result<Self> {
        Self::from_weights(weights.iter().enumerate().map(|(i, &w)| (i as u32, w)))
    }

    /// Wraps already-normalized entries without rescaling. Used when loading
    /// stored distributions.
    pub fn from_proportions(entries: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut entries: Vec<(u32, f64)> = entries.into_iter().filter(|&(_, p)| p > 0.0).collect();
        entries.sort_by_key(|&(r, _)| r);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("duplicate relation in distribution".into()));
        }
        let mass: f64 = entries.iter().map(|&(_, p)| p).sum();
        if entries.is_empty() || (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Format(format!("distribution mass {mass} is not 1")));
        }
        Ok(Self {
            entries,
            truncated: false,
        })
    }

    /// Uniform distribution over `m` relations.
    pub fn uniform(m: usize) -> Self {
        let p = 1.0 / m as f64;
        Self {
            entries: (0..m as u32).map(|r| (r, p)).collect(),
            truncated: false,
        }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn get(&self, relation: u32) -> f64 {
        self.entries
            .binary_search_by_key(&relation, |&(r, _)| r)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, relation: u32) -> bool {
        self.entries.binary_search_by_key(&relation, |&(r, _)| r).is_ok()
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|&(_, p)| p).sum()
    }

    pub fn relations(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(r, _)| r)
    }

    /// Entries sorted by descending proportion, ties by ascending relation
    /// index (which is ascending identifier order within a vocabulary).
    pub fn ranked(&self) -> Vec<(u32, f64)> {
        let mut v = self.entries.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Keeps the shortest prefix of [`ranked`](Self::ranked) relations whose
    /// cumulative proportion reaches `threshold`. Proportions are not
    /// rescaled.
    pub fn truncate_to_mass(&self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!(
                "truncation threshold {threshold} outside (0, 1]"
            )));
        }
        let mut kept = Vec::new();
        let mut cum = 0.0;
        for (r, p) in self.ranked() {
            kept.push((r, p));
            cum += p;
            if cum >= threshold - MASS_EPS {
                break;
            }
        }
        kept.sort_by_key(|&(r, _)| r);
        Ok(Self {
            entries: kept,
            truncated: true,
        })
    }

    /// Dense vector of length `m` (zeros for absent relations).
    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut v = vec![0.0; m];
        for &(r, p) in &self.entries {
            if (r as usize) < m {
                v[r as usize] = p;
            }
        }
        v
    }

    /// Total-variation distance, `0.5 * Σ |p - q|`.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let mut sum = 0.0;
        merge_join(&self.entries, &other.entries, |_, a, b| sum += (a - b).abs());
        0.5 * sum
    }
}

/// Visits the union of two sorted sparse vectors, passing 0.0 for absent keys.
pub(crate) fn merge_join(a: &[(u32, f64)], b: &[(u32, f64)], mut f: impl FnMut(u32, f64, f64)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(ra, pa)), Some(&(rb, pb))) if ra == rb => {
                f(ra, pa, pb);
                i += 1;
                j += 1;
            }
            (Some(&(ra, pa)), Some(&(rb, _))) if ra < rb => {
                f(ra, pa, 0.0);
                i += 1;
            }
            (Some(&(ra, pa)), None) => {
                f(ra, pa, 0.0);
                i += 1;
            }
            (_, Some(&(rb, pb))) => {
                f(rb, 0.0, pb);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
}
