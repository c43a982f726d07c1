//! NDJSON readers and writers for usage logs and KB snapshots.
//!
//! Usage log lines look like
//! `{"entity":"USA","relation":"hasCapital","count":8,"period":"T1"}` where
//! `count` (default 1) and `period` are optional. Snapshot lines look like
//! `{"entity":"e","classes":["person"],"relations":["hasName"]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{ClassId, EntityId, RelationId};

/// One attributed query clause (or `count` identical ones).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub entity: EntityId,
    pub relation: RelationId,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<String>,
}

fn one() -> u64 {
    1
}

fn is_one(c: &u64) -> bool {
    *c == 1
}

impl UsageRecord {
    pub fn new(entity: EntityId, relation: RelationId, count: u64) -> Self {
        Self {
            entity,
            relation,
            count,
            period: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct UsageLog {
    pub records: Vec<UsageRecord>,
    /// Lines that failed to parse but stayed under the tolerated fraction.
    pub malformed: Vec<MalformedLine>,
}

impl UsageLog {
    pub fn total_count(&self) -> u64 {
        self.records.iter().map(|r| r.count).sum()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LoadOptions {
    /// Largest tolerated fraction of malformed non-blank lines.
    pub max_malformed_fraction: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            max_malformed_fraction: 0.01,
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn load_usage_log(path: impl AsRef<Path>) -> Result<UsageLog> {
    load_usage_log_with(path, LoadOptions::default())
}

pub fn load_usage_log_with(path: impl AsRef<Path>, opts: LoadOptions) -> Result<UsageLog> {
    let path = path.as_ref();
    parse_usage_log(open(path)?, opts).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_usage_log(reader: impl BufRead, opts: LoadOptions) -> Result<UsageLog> {
    let mut log = UsageLog::default();
    let mut non_blank = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<usage log>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        non_blank += 1;
        match serde_json::from_str::<UsageRecord>(&line) {
            Ok(rec) if rec.count >= 1 => log.records.push(rec),
            Ok(_) => log.malformed.push(MalformedLine {
                line: i + 1,
                message: "count must be >= 1".into(),
            }),
            Err(e) => log.malformed.push(MalformedLine {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    let allowed = opts.max_malformed_fraction * non_blank as f64;
    if log.malformed.len() as f64 > allowed {
        let lines: Vec<String> = log
            .malformed
            .iter()
            .take(20)
            .map(|m| format!("line {}: {}", m.line, m.message))
            .collect();
        return Err(Error::Format(format!(
            "{} of {} lines malformed (tolerance {:.2}%): {}",
            log.malformed.len(),
            non_blank,
            opts.max_malformed_fraction * 100.0,
            lines.join("; ")
        )));
    }
    Ok(log)
}

pub fn write_usage_log<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = &'a UsageRecord>,
) -> Result<()> {
    let path = path.as_ref();
    write_lines(path, records)
}

pub(crate) fn write_lines<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Classes and present relations of one entity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityFacts {
    pub classes: BTreeSet<ClassId>,
    pub relations: BTreeSet<RelationId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KbSnapshot {
    pub entities: BTreeMap<EntityId, EntityFacts>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    entity: EntityId,
    classes: Vec<ClassId>,
    #[serde(default)]
    relations: Vec<RelationId>,
}

impl KbSnapshot {
    pub fn get(&self, entity: &EntityId) -> Option<&EntityFacts> {
        self.entities.get(entity)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Adds an entity, merging by set union when it already exists.
    /// Returns `true` if the entity was already present.
    pub fn insert(&mut self, entity: EntityId, facts: EntityFacts) -> Result<bool> {
        if facts.classes.is_empty() {
            return Err(Error::Schema(format!("entity {entity} has no classes")));
        }
        match self.entities.get_mut(&entity) {
            Some(existing) => {
                existing.classes.extend(facts.classes);
                existing.relations.extend(facts.relations);
                Ok(true)
            }
            None => {
                self.entities.insert(entity, facts);
                Ok(false)
            }
        }
    }
}

pub fn load_kb_snapshot(path: impl AsRef<Path>) -> Result<KbSnapshot> {
    let path = path.as_ref();
    parse_kb_snapshot(open(path)?).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_kb_snapshot(reader: impl BufRead) -> Result<KbSnapshot> {
    let mut kb = KbSnapshot::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<kb snapshot>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotLine = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        let entity = rec.entity.clone();
        let merged = kb.insert(
            rec.entity,
            EntityFacts {
                classes: rec.classes.into_iter().collect(),
                relations: rec.relations.into_iter().collect(),
            },
        )?;
        if merged {
            log::warn!("duplicate snapshot entry for {entity} (line {}), merged", i + 1);
        }
    }
    Ok(kb)
}

pub fn write_kb_snapshot(path: impl AsRef<Path>, kb: &KbSnapshot) -> Result<()> {
    write_lines(
        path.as_ref(),
        kb.entities.iter().map(|(e, f)| SnapshotLine {
            entity: e.clone(),
            classes: f.classes.iter().cloned().collect(),
            relations: f.relations.iter().cloned().collect(),
        }),
    )
}
