//! Seeded synthetic KBs and usage logs.
//!
//! Each class has a latent vector `u_c`; relations have latent vectors and a
//! skewed base popularity. The true relation distribution of a class set `S`
//! is
//!
//! ```text
//! softmax( base + Σ_{c∈S} a_c + λ · Σ_{c<d ∈ S} i_cd )
//! ```
//!
//! where `a_c = u_c · V` is the class affinity and `i_cd = z_cd · V` a
//! pairwise interaction with `z_cd` drawn from a hash of the pair. Period
//! `p` adds `δ · p · ε_c` to every class affinity, with a fixed Gaussian
//! direction `ε_c` per class. Clauses are sampled from the true
//! distribution; entity facts are sampled from the required (truncated)
//! relations with a fraction withheld as known gaps.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::aggregation::signature_hash;
use crate::distribution::RelationDistribution;
use crate::error::{Error, Result};
use crate::ids::{ClassId, ClassSignature, EntityId, RelationId, Vocabulary};
use crate::ingestion::{write_kb_snapshot, write_lines, write_usage_log, EntityFacts, KbSnapshot, UsageRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub n_classes: usize,
    pub n_relations: usize,
    pub n_entities: usize,
    /// Inclusive range of classes per entity.
    pub classes_per_entity: (usize, usize),
    /// Inclusive range of clauses per entity and period.
    pub clauses_per_entity: (u64, u64),
    /// Scale of pairwise class interactions, in `[0, 1]`.
    pub interaction_strength: f64,
    /// Affinity drift per period.
    pub drift_rate: f64,
    pub n_periods: usize,
    pub latent_dim: usize,
    /// Standard deviation of class latent entries.
    pub affinity_scale: f64,
    /// Base relation logit is `-relation_skew · ln(rank + 1)`.
    pub relation_skew: f64,
    /// Zipf exponent of class popularity when drawing entity classes.
    pub class_zipf: f64,
    /// Zipf exponent of entity popularity. With `0` clause counts are drawn
    /// uniformly from `clauses_per_entity`; otherwise an entity of
    /// popularity rank `k` gets `max / (k + 1)^usage_zipf` clauses, clamped
    /// to the range.
    pub usage_zipf: f64,
    /// Probability that a required relation is withheld from an entity.
    pub gap_rate: f64,
    /// Truncation mass of the required set used to plant facts.
    pub required_mass: f64,
    /// Truth distributions are truncated to this mass when kept; `1.0`
    /// keeps everything.
    pub truth_mass: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_classes: 300,
            n_relations: 150,
            n_entities: 5000,
            classes_per_entity: (1, 4),
            clauses_per_entity: (5, 200),
            interaction_strength: 0.5,
            drift_rate: 0.0,
            n_periods: 1,
            latent_dim: 6,
            affinity_scale: 1.0,
            relation_skew: 1.0,
            class_zipf: 1.0,
            usage_zipf: 0.0,
            gap_rate: 0.2,
            required_mass: 0.95,
            truth_mass: 1.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_owned()));
        if self.n_classes == 0 || self.n_relations == 0 || self.n_entities == 0 {
            return err("class, relation and entity counts must be >= 1");
        }
        if self.n_periods == 0 || self.latent_dim == 0 {
            return err("n_periods and latent_dim must be >= 1");
        }
        let (lo, hi) = self.classes_per_entity;
        if lo == 0 || lo > hi || hi > self.n_classes {
            return err("classes_per_entity must satisfy 1 <= min <= max <= n_classes");
        }
        let (lo, hi) = self.clauses_per_entity;
        if lo == 0 || lo > hi {
            return err("clauses_per_entity must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.interaction_strength) {
            return err("interaction_strength must be in [0, 1]");
        }
        if !(self.drift_rate >= 0.0 && self.drift_rate.is_finite()) {
            return err("drift_rate must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.gap_rate) {
            return err("gap_rate must be in [0, 1]");
        }
        for (name, v) in [("required_mass", self.required_mass), ("truth_mass", self.truth_mass)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1]")));
            }
        }
        for (name, v) in [
            ("affinity_scale", self.affinity_scale),
            ("relation_skew", self.relation_skew),
            ("class_zipf", self.class_zipf),
            ("usage_zipf", self.usage_zipf),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }

    /// Reads a flat `key = value` document; missing keys keep their
    /// defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: GenConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// The cross-validation benchmark: ~300 classes, ~150 relations,
    /// ~2,000 signatures, λ = 0.5, Zipf-distributed entity usage.
    pub fn benchmark() -> Self {
        Self {
            seed: 2018,
            n_classes: 300,
            n_relations: 150,
            n_entities: 2300,
            classes_per_entity: (1, 4),
            clauses_per_entity: (2, 2000),
            interaction_strength: 0.5,
            relation_skew: 2.0,
            class_zipf: 0.7,
            usage_zipf: 1.0,
            ..Default::default()
        }
    }
}

pub fn class_id(i: usize) -> ClassId {
    ClassId::new(format!("c{i:05}")).unwrap()
}

pub fn relation_id(i: usize) -> RelationId {
    RelationId::new(format!("r{i:05}")).unwrap()
}

pub fn entity_id(i: usize) -> EntityId {
    EntityId::new(format!("e{i:07}")).unwrap()
}

/// Ground-truth distribution of one signature in one period, keyed by the
/// generator's relation indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRow {
    pub period: usize,
    pub classes: Vec<usize>,
    pub distribution: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub config: GenConfig,
    pub kb: KbSnapshot,
    /// Usage records per period.
    pub periods: Vec<Vec<UsageRecord>>,
    /// Clauses drawn per period.
    pub clauses_drawn: Vec<u64>,
    pub truth: Vec<TruthRow>,
    /// Required relations withheld from each entity.
    pub gaps: BTreeMap<EntityId, Vec<RelationId>>,
}

impl SynthOutput {
    pub fn period_label(p: usize) -> String {
        format!("T{p}")
    }

    /// Truth distributions of one period over a dataset vocabulary.
    /// Signatures or relations outside the vocabulary are skipped and the
    /// remainder renormalized.
    pub fn truth_over(&self, period: usize, vocab: &Vocabulary) -> BTreeMap<ClassSignature, RelationDistribution> {
        let mut out = BTreeMap::new();
        for row in self.truth.iter().filter(|t| t.period == period) {
            let idx: Option<Vec<u32>> = row
                .classes
                .iter()
                .map(|&c| vocab.class_index(class_id(c).as_str()))
                .collect();
            let Some(idx) = idx else { continue };
            let Ok(sig) = ClassSignature::new(idx) else { continue };
            let entries = row
                .distribution
                .iter()
                .filter_map(|&(r, p)| vocab.relation_index(relation_id(r).as_str()).map(|i| (i, p)));
            if let Ok(d) = RelationDistribution::from_weights(entries) {
                out.insert(sig, d);
            }
        }
        out
    }

    /// Writes `kb.ndjson`, `usage_T{p}.ndjson`, `truth.ndjson` and
    /// `gaps.ndjson` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_kb_snapshot(dir.join("kb.ndjson"), &self.kb)?;
        for (p, records) in self.periods.iter().enumerate() {
            write_usage_log(dir.join(format!("usage_{}.ndjson", Self::period_label(p))), records)?;
        }
        #[derive(Serialize)]
        struct TruthLine {
            period: String,
            classes: Vec<ClassId>,
            relations: BTreeMap<RelationId, f64>,
        }
        write_lines(
            &dir.join("truth.ndjson"),
            self.truth.iter().map(|t| TruthLine {
                period: Self::period_label(t.period),
                classes: t.classes.iter().map(|&c| class_id(c)).collect(),
                relations: t.distribution.iter().map(|&(r, p)| (relation_id(r), p)).collect(),
            }),
        )?;
        #[derive(Serialize)]
        struct GapLine<'a> {
            entity: &'a EntityId,
            missing: &'a [RelationId],
        }
        write_lines(
            &dir.join("gaps.ndjson"),
            self.gaps.iter().map(|(e, m)| GapLine { entity: e, missing: m }),
        )
    }
}

struct Latents {
    base: Vec<f64>,
    /// `d × m`
    rel: Vec<f64>,
    /// `n × d`
    class: Vec<f64>,
    /// `n × m` drift directions, only when drift is enabled.
    drift: Option<Vec<f64>>,
    d: usize,
    m: usize,
}

fn gaussians(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

impl Latents {
    fn new(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Self {
        let (n, m, d) = (cfg.n_classes, cfg.n_relations, cfg.latent_dim);
        let mut ranks: Vec<usize> = (0..m).collect();
        ranks.shuffle(rng);
        let base = ranks
            .iter()
            .map(|&k| -cfg.relation_skew * ((k + 1) as f64).ln())
            .collect();
        let rel = gaussians(rng, d * m);
        let class = gaussians(rng, n * d)
            .into_iter()
            .map(|x| x * cfg.affinity_scale)
            .collect();
        let drift = (cfg.drift_rate > 0.0 && cfg.n_periods > 1).then(|| gaussians(rng, n * m));
        Self {
            base,
            rel,
            class,
            drift,
            d,
            m,
        }
    }

    fn pair_latent(&self, seed: u64, a: usize, b: usize) -> Vec<f64> {
        let key = format!("pair:{a}:{b}");
        let mut rng = ChaCha8Rng::seed_from_u64(signature_hash(&key, seed));
        gaussians(&mut rng, self.d)
    }

    /// True relation probabilities of a class set in a period.
    fn distribution(&self, cfg: &GenConfig, classes: &[usize], period: usize) -> Vec<f64> {
        let (d, m) = (self.d, self.m);
        let mut z = vec![0.0; d];
        for &c in classes {
            for (zk, &u) in z.iter_mut().zip(&self.class[c * d..(c + 1) * d]) {
                *zk += u;
            }
        }
        if cfg.interaction_strength > 0.0 {
            for (i, &a) in classes.iter().enumerate() {
                for &b in &classes[i + 1..] {
                    let pz = self.pair_latent(cfg.seed, a, b);
                    for (zk, &v) in z.iter_mut().zip(&pz) {
                        *zk += cfg.interaction_strength * cfg.affinity_scale * v;
                    }
                }
            }
        }
        let mut logits = self.base.clone();
        for (k, &zk) in z.iter().enumerate() {
            if zk == 0.0 {
                continue;
            }
            for (l, &v) in logits.iter_mut().zip(&self.rel[k * m..(k + 1) * m]) {
                *l += zk * v;
            }
        }
        if let (Some(drift), true) = (&self.drift, period > 0) {
            let shift = cfg.drift_rate * period as f64;
            for &c in classes {
                for (l, &e) in logits.iter_mut().zip(&drift[c * m..(c + 1) * m]) {
                    *l += shift * e;
                }
            }
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in logits.iter_mut() {
            *l = (*l - max).exp();
            sum += *l;
        }
        for l in logits.iter_mut() {
            *l /= sum;
        }
        logits
    }
}

/// Picks an index by binary search on a cumulative table.
fn sample_cumulative(cum: &[f64], rng: &mut impl Rng) -> usize {
    let u = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// Relations of a dense distribution kept by truncation to `mass`, with
/// the same ordering rules as [`RelationDistribution::truncate_to_mass`].
fn required_set(probs: &[f64], mass: f64) -> Vec<(usize, f64)> {
    let d = RelationDistribution::from_dense(probs).expect("softmax is positive");
    d.truncate_to_mass(mass)
        .expect("mass validated")
        .entries()
        .iter()
        .map(|&(r, p)| (r as usize, p))
        .collect()
}

pub fn generate(cfg: &GenConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let latents = Latents::new(cfg, &mut rng);

    // Class popularity.
    let mut class_rank: Vec<usize> = (0..cfg.n_classes).collect();
    class_rank.shuffle(&mut rng);
    let class_weights: Vec<f64> = class_rank
        .iter()
        .map(|&k| ((k + 1) as f64).powf(-cfg.class_zipf))
        .collect();
    let class_cum = cumulative(&class_weights);

    // Entities and their class sets.
    let (kmin, kmax) = cfg.classes_per_entity;
    let mut entity_classes: Vec<Vec<usize>> = Vec::with_capacity(cfg.n_entities);
    for _ in 0..cfg.n_entities {
        let k = rng.random_range(kmin..=kmax);
        let mut set = BTreeSet::new();
        while set.len() < k {
            set.insert(sample_cumulative(&class_cum, &mut rng));
        }
        entity_classes.push(set.into_iter().collect());
    }

    // Entity popularity (fixed across periods).
    let (cmin, cmax) = cfg.clauses_per_entity;
    let zipf_clauses: Option<Vec<u64>> = (cfg.usage_zipf > 0.0).then(|| {
        let mut rank: Vec<usize> = (0..cfg.n_entities).collect();
        rank.shuffle(&mut rng);
        rank.iter()
            .map(|&k| {
                let c = (cmax as f64 / ((k + 1) as f64).powf(cfg.usage_zipf)).floor() as u64;
                c.clamp(cmin, cmax)
            })
            .collect()
    });

    let mut by_signature: BTreeMap<&[usize], Vec<usize>> = BTreeMap::new();
    for (e, classes) in entity_classes.iter().enumerate() {
        by_signature.entry(classes.as_slice()).or_default().push(e);
    }

    let mut periods = Vec::with_capacity(cfg.n_periods);
    let mut clauses_drawn = Vec::with_capacity(cfg.n_periods);
    let mut truth = Vec::new();
    let mut required: Vec<Vec<(usize, f64)>> = vec![Vec::new(); cfg.n_entities];

    for p in 0..cfg.n_periods {
        let mut per_entity: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); cfg.n_entities];
        let mut drawn = 0u64;
        for (classes, members) in &by_signature {
            let probs = latents.distribution(cfg, classes, p);
            if p == 0 {
                let req = required_set(&probs, cfg.required_mass);
                for &e in members {
                    required[e] = req.clone();
                }
            }
            let kept: Vec<(usize, f64)> = if cfg.truth_mass < 1.0 {
                required_set(&probs, cfg.truth_mass)
            } else {
                probs.iter().copied().enumerate().filter(|&(_, q)| q > 0.0).collect()
            };
            truth.push(TruthRow {
                period: p,
                classes: classes.to_vec(),
                distribution: kept,
            });
            let cum = cumulative(&probs);
            for &e in members {
                let n = match &zipf_clauses {
                    Some(z) => z[e],
                    None => rng.random_range(cmin..=cmax),
                };
                drawn += n;
                let counts = &mut per_entity[e];
                for _ in 0..n {
                    *counts.entry(sample_cumulative(&cum, &mut rng)).or_default() += 1;
                }
            }
        }
        let label = SynthOutput::period_label(p);
        let records: Vec<UsageRecord> = per_entity
            .into_iter()
            .enumerate()
            .flat_map(|(e, counts)| {
                let label = label.clone();
                counts.into_iter().map(move |(r, c)| UsageRecord {
                    entity: entity_id(e),
                    relation: relation_id(r),
                    count: c,
                    period: Some(label.clone()),
                })
            })
            .collect();
        periods.push(records);
        clauses_drawn.push(drawn);
    }

    // Facts: required relations, each withheld with probability gap_rate.
    let mut kb = KbSnapshot::default();
    let mut gaps = BTreeMap::new();
    for (e, classes) in entity_classes.iter().enumerate() {
        let mut present = BTreeSet::new();
        let mut missing = Vec::new();
        for &(r, _) in &required[e] {
            if rng.random::<f64>() < cfg.gap_rate {
                missing.push(relation_id(r));
            } else {
                present.insert(relation_id(r));
            }
        }
        let id = entity_id(e);
        if !missing.is_empty() {
            gaps.insert(id.clone(), missing);
        }
        kb.insert(
            id,
            EntityFacts {
                classes: classes.iter().map(|&c| class_id(c)).collect(),
                relations: present,
            },
        )?;
    }

    Ok(SynthOutput {
        config: cfg.clone(),
        kb,
        periods,
        clauses_drawn,
        truth,
        gaps,
    })
}
