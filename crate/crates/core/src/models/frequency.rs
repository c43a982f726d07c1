use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Prediction, PredictionFlag};
use crate::aggregation::SignatureRow;
use crate::distribution::{RelationCounts, RelationDistribution};
use crate::error::{Error, Result};
use crate::ids::Vocabulary;

/// How per-class counts are combined for a multi-class signature.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombineMode {
    /// Sum raw counts of the member classes, then normalize.
    #[default]
    SumCounts,
    /// Average the normalized per-class distributions.
    MeanNormalized,
}

/// Per-class raw relation counts summed over training signatures.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyModel {
    pub vocabulary: Vocabulary,
    /// Only classes with non-zero usage are stored.
    pub per_class: BTreeMap<u32, RelationCounts>,
    /// Counts over all training rows, used as the fallback prediction.
    pub global: RelationCounts,
    pub mode: CombineMode,
    pub fallback: bool,
}

impl FrequencyModel {
    pub fn fit_rows(
        vocab: &Vocabulary,
        rows: &[&SignatureRow],
        mode: CombineMode,
        fallback: bool,
    ) -> Self {
        let mut per_class: BTreeMap<u32, RelationCounts> = BTreeMap::new();
        let mut global = RelationCounts::new();
        for row in rows {
            for (&r, &c) in &row.counts {
                *global.entry(r).or_default() += c;
            }
            if row.usage_total == 0 {
                continue;
            }
            for &class in row.signature.classes() {
                let counts = per_class.entry(class).or_default();
                for (&r, &c) in &row.counts {
                    *counts.entry(r).or_default() += c;
                }
            }
        }
        Self {
            vocabulary: vocab.clone(),
            per_class,
            global,
            mode,
            fallback,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.per_class.values().map(|c| c.len()).sum()
    }

    pub fn predict_indices(&self, classes: &[u32]) -> Result<Prediction> {
        let known: Vec<&RelationCounts> = classes
            .iter()
            .filter_map(|c| self.per_class.get(c))
            .collect();
        if known.is_empty() {
            if !self.fallback {
                return Err(Error::UnknownSignature);
            }
            return Ok(Prediction {
                distribution: RelationDistribution::from_counts(
                    self.global.iter().map(|(&r, &c)| (r, c)),
                )?,
                flag: PredictionFlag::Fallback,
            });
        }
        let distribution = match self.mode {
            CombineMode::SumCounts => RelationDistribution::from_counts(
                known.iter().flat_map(|c| c.iter().map(|(&r, &n)| (r, n))),
            )?,
            CombineMode::MeanNormalized => {
                let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
                for counts in &known {
                    let total: u64 = counts.values().sum();
                    for (&r, &n) in counts.iter() {
                        *acc.entry(r).or_default() += n as f64 / total as f64;
                    }
                }
                RelationDistribution::from_weights(acc)?
            }
        };
        Ok(Prediction {
            distribution,
            flag: PredictionFlag::Normal,
        })
    }
}
