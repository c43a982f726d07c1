//! Grouping of attributed usage into per-signature relation distributions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::{RelationCounts, RelationDistribution};
use crate::error::{Error, Result};
use crate::ids::{ClassId, ClassSignature, EntityId, RelationId, Vocabulary};
use crate::ingestion::{write_lines, KbSnapshot, UsageRecord};

/// Raw counts keyed by relation id, plus their total.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsageCounts {
    pub counts: BTreeMap<RelationId, u64>,
    pub total: u64,
}

impl UsageCounts {
    pub fn add(&mut self, relation: &RelationId, count: u64) {
        *self.counts.entry(relation.clone()).or_default() += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: &UsageCounts) {
        for (r, &c) in &other.counts {
            self.add(r, c);
        }
    }
}

/// Clause counts per class signature (and optionally per entity) in id
/// space, before interning. Partial aggregates over shards of a log can be
/// combined with [`merge`](Self::merge), which is associative and
/// commutative.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsageAggregate {
    pub per_signature: BTreeMap<BTreeSet<ClassId>, UsageCounts>,
    pub per_entity: Option<BTreeMap<EntityId, UsageCounts>>,
    /// Records whose entity is missing from the snapshot.
    pub skipped_records: u64,
    pub skipped_count: u64,
}

impl UsageAggregate {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a UsageRecord>,
        kb: &KbSnapshot,
        keep_entities: bool,
    ) -> Self {
        let mut agg = UsageAggregate {
            per_entity: keep_entities.then(BTreeMap::new),
            ..Default::default()
        };
        // entity -> its snapshot classes, resolved once
        let mut resolved: HashMap<&EntityId, Option<&BTreeSet<ClassId>>> = HashMap::new();
        for rec in records {
            let classes = *resolved
                .entry(&rec.entity)
                .or_insert_with(|| kb.get(&rec.entity).map(|f| &f.classes));
            let Some(classes) = classes else {
                agg.skipped_records += 1;
                agg.skipped_count += rec.count;
                continue;
            };
            match agg.per_signature.get_mut(classes) {
                Some(c) => c.add(&rec.relation, rec.count),
                None => {
                    let mut c = UsageCounts::default();
                    c.add(&rec.relation, rec.count);
                    agg.per_signature.insert(classes.clone(), c);
                }
            }
            if let Some(pe) = agg.per_entity.as_mut() {
                pe.entry(rec.entity.clone())
                    .or_default()
                    .add(&rec.relation, rec.count);
            }
        }
        agg
    }

    pub fn merge(&mut self, other: &UsageAggregate) {
        for (sig, c) in &other.per_signature {
            self.per_signature.entry(sig.clone()).or_default().merge(c);
        }
        match (self.per_entity.as_mut(), other.per_entity.as_ref()) {
            (Some(mine), Some(theirs)) => {
                for (e, c) in theirs {
                    mine.entry(e.clone()).or_default().merge(c);
                }
            }
            _ => self.per_entity = None,
        }
        self.skipped_records += other.skipped_records;
        self.skipped_count += other.skipped_count;
    }

    /// Interns surviving signatures into a dataset whose vocabulary holds
    /// exactly the classes and relations that occur in them.
    pub fn into_dataset(&self, min_support: u64) -> Result<SignatureDataset> {
        let survivors: Vec<(&BTreeSet<ClassId>, &UsageCounts)> = self
            .per_signature
            .iter()
            .filter(|(_, c)| c.total >= min_support.max(1))
            .collect();
        if survivors.is_empty() {
            return Err(Error::EmptyDataset { min_support });
        }
        let vocab = Vocabulary::from_ids(
            survivors.iter().flat_map(|(s, _)| s.iter().cloned()),
            survivors.iter().flat_map(|(_, c)| c.counts.keys().cloned()),
        )?;
        let rows = survivors
            .into_iter()
            .map(|(sig, c)| {
                let signature =
                    ClassSignature::new(sig.iter().map(|id| vocab.class_index(id.as_str()).unwrap()))?;
                let counts: RelationCounts = c
                    .counts
                    .iter()
                    .map(|(r, &n)| (vocab.relation_index(r.as_str()).unwrap(), n))
                    .collect();
                SignatureRow::new(signature, counts)
            })
            .collect::<Result<Vec<_>>>()?;
        SignatureDataset::new(vocab, rows)
    }
}

/// One class signature with its aggregated usage.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureRow {
    pub signature: ClassSignature,
    pub counts: RelationCounts,
    pub observed: RelationDistribution,
    pub usage_total: u64,
}

impl SignatureRow {
    pub fn new(signature: ClassSignature, counts: RelationCounts) -> Result<Self> {
        let observed = RelationDistribution::from_counts(counts.iter().map(|(&r, &c)| (r, c)))?;
        let usage_total = counts.values().sum();
        Ok(Self {
            signature,
            counts,
            observed,
            usage_total,
        })
    }
}

/// Per-signature training data over a shared vocabulary. Signatures are
/// unique and rows are sorted by signature.
#[derive(Clone, Debug, PartialEq)]
pub struct SignatureDataset {
    pub vocabulary: Vocabulary,
    pub rows: Vec<SignatureRow>,
}

#[derive(Serialize, Deserialize)]
struct DatasetLine {
    classes: Vec<ClassId>,
    total: u64,
    relations: BTreeMap<RelationId, u64>,
}

/// What was lost when moving a dataset onto another vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ReindexStats {
    pub dropped_classes: usize,
    pub dropped_relations: usize,
    pub dropped_rows: usize,
    pub merged_rows: usize,
    pub dropped_count: u64,
}

impl SignatureDataset {
    pub fn new(vocabulary: Vocabulary, mut rows: Vec<SignatureRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.signature.cmp(&b.signature));
        if rows.windows(2).any(|w| w[0].signature == w[1].signature) {
            return Err(Error::Schema("duplicate signature in dataset".into()));
        }
        let n = vocabulary.n_classes() as u32;
        let m = vocabulary.n_relations() as u32;
        for row in &rows {
            if row.signature.classes().iter().any(|&c| c >= n)
                || row.counts.keys().any(|&r| r >= m)
            {
                return Err(Error::Schema("dataset row outside vocabulary".into()));
            }
        }
        Ok(Self { vocabulary, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_usage(&self) -> u64 {
        self.rows.iter().map(|r| r.usage_total).sum()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let v = &self.vocabulary;
        write_lines(
            path.as_ref(),
            self.rows.iter().map(|row| DatasetLine {
                classes: row.signature.class_ids(v).cloned().collect(),
                total: row.usage_total,
                relations: row
                    .counts
                    .iter()
                    .map(|(&r, &c)| (v.relation(r).clone(), c))
                    .collect(),
            }),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut agg = UsageAggregate::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetLine = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("{}: line {}: {e}", path.display(), i + 1)))?;
            let sum: u64 = rec.relations.values().sum();
            if sum != rec.total {
                return Err(Error::Format(format!(
                    "{}: line {}: total {} != sum of counts {sum}",
                    path.display(),
                    i + 1,
                    rec.total
                )));
            }
            if rec.classes.is_empty() {
                return Err(Error::Schema(format!("line {}: empty class list", i + 1)));
            }
            let key: BTreeSet<ClassId> = rec.classes.into_iter().collect();
            if agg.per_signature.contains_key(&key) {
                return Err(Error::Format(format!("line {}: duplicate signature", i + 1)));
            }
            agg.per_signature.insert(
                key,
                UsageCounts {
                    counts: rec.relations,
                    total: rec.total,
                },
            );
        }
        agg.into_dataset(1)
    }

    /// Rows at the given positions, over the same vocabulary.
    pub fn subset(&self, indices: impl IntoIterator<Item = usize>) -> SignatureDataset {
        SignatureDataset {
            vocabulary: self.vocabulary.clone(),
            rows: indices.into_iter().map(|i| self.rows[i].clone()).collect(),
        }
    }

    /// Re-expresses this dataset over `vocab`. Unknown classes are removed
    /// from signatures (rows left empty are dropped, rows that collapse onto
    /// the same signature are merged) and unknown relations are dropped.
    pub fn reindex(&self, vocab: &Vocabulary) -> (SignatureDataset, ReindexStats) {
        let mut stats = ReindexStats::default();
        let class_map: Vec<Option<u32>> = self
            .vocabulary
            .classes()
            .iter()
            .map(|c| vocab.class_index(c.as_str()))
            .collect();
        let rel_map: Vec<Option<u32>> = self
            .vocabulary
            .relations()
            .iter()
            .map(|r| vocab.relation_index(r.as_str()))
            .collect();
        stats.dropped_classes = class_map.iter().filter(|c| c.is_none()).count();
        stats.dropped_relations = rel_map.iter().filter(|r| r.is_none()).count();

        let mut merged: BTreeMap<ClassSignature, RelationCounts> = BTreeMap::new();
        for row in &self.rows {
            let Ok(sig) = ClassSignature::new(
                row.signature
                    .classes()
                    .iter()
                    .filter_map(|&c| class_map[c as usize]),
            ) else {
                stats.dropped_rows += 1;
                stats.dropped_count += row.usage_total;
                continue;
            };
            let mut counts = RelationCounts::new();
            for (&r, &c) in &row.counts {
                match rel_map[r as usize] {
                    Some(nr) => *counts.entry(nr).or_default() += c,
                    None => stats.dropped_count += c,
                }
            }
            if counts.is_empty() {
                stats.dropped_rows += 1;
                continue;
            }
            match merged.get_mut(&sig) {
                Some(existing) => {
                    stats.merged_rows += 1;
                    for (r, c) in counts {
                        *existing.entry(r).or_default() += c;
                    }
                }
                None => {
                    merged.insert(sig, counts);
                }
            }
        }
        let rows = merged
            .into_iter()
            .map(|(sig, counts)| SignatureRow::new(sig, counts).expect("non-empty counts"))
            .collect();
        (
            SignatureDataset {
                vocabulary: vocab.clone(),
                rows,
            },
            stats,
        )
    }
}

pub fn aggregate(
    records: &[UsageRecord],
    kb: &KbSnapshot,
    min_support: u64,
) -> Result<(SignatureDataset, UsageAggregate)> {
    let agg = UsageAggregate::from_records(records, kb, false);
    if agg.skipped_records > 0 {
        log::warn!(
            "{} usage records ({} clauses) name entities missing from the snapshot",
            agg.skipped_records,
            agg.skipped_count
        );
    }
    let ds = agg.into_dataset(min_support)?;
    Ok((ds, agg))
}

/// Fold index per dataset row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded hash of a signature's canonical string.
pub fn signature_hash(canonical: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(canonical.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Grouped folds: a signature's fold depends only on its class names and the
/// seed, so no signature is ever on both sides of a split.
pub fn assign_folds(ds: &SignatureDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if ds.len() < k {
        return Err(Error::Config(format!(
            "{} signatures cannot fill {k} folds",
            ds.len()
        )));
    }
    let fold_of = ds
        .rows
        .iter()
        .map(|row| {
            (signature_hash(&row.signature.canonical_string(&ds.vocabulary), seed) % k as u64)
                as usize
        })
        .collect();
    Ok(FoldAssignment { k, fold_of })
}

/// Raw relation counts per class; an entity contributes to every class it
/// belongs to.
pub fn class_marginals<'a>(
    records: impl IntoIterator<Item = &'a UsageRecord>,
    kb: &KbSnapshot,
) -> BTreeMap<ClassId, BTreeMap<RelationId, u64>> {
    let mut out: BTreeMap<ClassId, BTreeMap<RelationId, u64>> = BTreeMap::new();
    for rec in records {
        let Some(facts) = kb.get(&rec.entity) else {
            continue;
        };
        for class in &facts.classes {
            *out.entry(class.clone())
                .or_default()
                .entry(rec.relation.clone())
                .or_default() += rec.count;
        }
    }
    out
}

/// Total clause count per entity.
pub fn entity_usage<'a>(
    records: impl IntoIterator<Item = &'a UsageRecord>,
) -> BTreeMap<EntityId, u64> {
    let mut out = BTreeMap::new();
    for rec in records {
        *out.entry(rec.entity.clone()).or_default() += rec.count;
    }
    out
}
