//! Demand-weighted completeness of entities and KB subsets, and the ranked
//! list of missing relations that would raise it most.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ids::{EntityId, RelationId};
use crate::ingestion::KbSnapshot;
use crate::models::{PredictionFlag, PredictorModel};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntityCompleteness {
    pub entity: EntityId,
    /// Predicted demand (within the truncated prediction) the entity can
    /// already answer.
    pub score: f64,
    /// Mass of the truncated prediction; the best score reachable.
    pub truncated_mass: f64,
    /// Predicted relations the entity lacks, by descending proportion.
    pub missing: Vec<(RelationId, f64)>,
    pub flag: PredictionFlag,
}

/// Scores one entity against the truncated prediction for its classes.
pub fn entity_completeness(
    model: &PredictorModel,
    kb: &KbSnapshot,
    entity: &EntityId,
    threshold: f64,
) -> Result<EntityCompleteness> {
    let facts = kb
        .get(entity)
        .ok_or_else(|| Error::UnknownEntity(entity.to_string()))?;
    let pred = model.predict_classes(&facts.classes)?;
    let truncated = pred.distribution.truncate_to_mass(threshold)?;
    let vocab = model.vocabulary();
    let mut score = 0.0;
    let mut missing = Vec::new();
    for (r, p) in truncated.ranked() {
        let rel = vocab.relation(r);
        if facts.relations.contains(rel) {
            score += p;
        } else {
            missing.push((rel.clone(), p));
        }
    }
    Ok(EntityCompleteness {
        entity: entity.clone(),
        score,
        truncated_mass: truncated.mass(),
        missing,
        flag: pred.flag,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsetOptions {
    pub threshold: f64,
    /// Weight given to entities without usage. Zero excludes them.
    pub zero_usage_weight: f64,
}

impl Default for SubsetOptions {
    fn default() -> Self {
        Self {
            threshold: 0.95,
            zero_usage_weight: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEntry {
    pub relation: RelationId,
    /// Σ over entities lacking the relation of usage weight × proportion.
    pub mass: f64,
    /// Rise in subset completeness if every listed gap were filled.
    pub completeness_delta: f64,
    pub entities: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub threshold: f64,
    pub per_entity: Vec<EntityCompleteness>,
    /// Usage weight per scored entity, aligned with `per_entity`.
    pub weights: Vec<f64>,
    pub total_weight: f64,
    pub subset_score: f64,
    /// Weighted mean of truncated masses: the score with every gap filled.
    pub max_score: f64,
    pub gaps: Vec<GapEntry>,
}

/// Scores a subset of entities, weighting each by its usage.
pub fn completeness_report(
    model: &PredictorModel,
    kb: &KbSnapshot,
    entities: &[EntityId],
    usage: &BTreeMap<EntityId, u64>,
    opts: SubsetOptions,
    top_k: usize,
) -> Result<CompletenessReport> {
    if entities.is_empty() {
        return Err(Error::Config("entity list is empty".into()));
    }
    let mut per_entity = Vec::new();
    let mut weights = Vec::new();
    for e in entities {
        let w = match usage.get(e).copied().unwrap_or(0) {
            0 => opts.zero_usage_weight,
            n => n as f64,
        };
        if w <= 0.0 {
            continue;
        }
        per_entity.push(entity_completeness(model, kb, e, opts.threshold)?);
        weights.push(w);
    }
    let total_weight: f64 = weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::Config("every entity in the subset has zero weight".into()));
    }
    let weighted = |f: fn(&EntityCompleteness) -> f64| {
        per_entity.iter().zip(&weights).map(|(e, w)| w * f(e)).sum::<f64>() / total_weight
    };
    let subset_score = weighted(|e| e.score);
    let max_score = weighted(|e| e.truncated_mass);

    let mut acc: BTreeMap<&RelationId, (f64, usize)> = BTreeMap::new();
    for (e, &w) in per_entity.iter().zip(&weights) {
        for (r, p) in &e.missing {
            let slot = acc.entry(r).or_default();
            slot.0 += w * p;
            slot.1 += 1;
        }
    }
    let mut gaps: Vec<GapEntry> = acc
        .into_iter()
        .map(|(r, (mass, n))| GapEntry {
            relation: r.clone(),
            mass,
            completeness_delta: mass / total_weight,
            entities: n,
        })
        .collect();
    gaps.sort_by(|a, b| b.mass.total_cmp(&a.mass).then_with(|| a.relation.cmp(&b.relation)));
    gaps.truncate(top_k);

    Ok(CompletenessReport {
        threshold: opts.threshold,
        per_entity,
        weights,
        total_weight,
        subset_score,
        max_score,
        gaps,
    })
}

/// Usage-weighted mean completeness of `entities`.
pub fn subset_completeness(
    model: &PredictorModel,
    kb: &KbSnapshot,
    entities: &[EntityId],
    usage: &BTreeMap<EntityId, u64>,
    opts: SubsetOptions,
) -> Result<f64> {
    Ok(completeness_report(model, kb, entities, usage, opts, 0)?.subset_score)
}

/// The `top_k` relations whose absence costs the subset the most demand.
pub fn gap_report(
    model: &PredictorModel,
    kb: &KbSnapshot,
    entities: &[EntityId],
    usage: &BTreeMap<EntityId, u64>,
    opts: SubsetOptions,
    top_k: usize,
) -> Result<Vec<GapEntry>> {
    Ok(completeness_report(model, kb, entities, usage, opts, top_k)?.gaps)
}
