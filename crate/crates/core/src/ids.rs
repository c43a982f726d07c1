//! Identifiers, vocabularies and class signatures.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn validate(s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_control) {
        return Err(Error::InvalidId(s.to_owned()));
    }
    Ok(())
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Result<Self> {
                let s = s.into();
                validate(&s)?;
                Ok(Self(s))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl TryFrom<String> for $name {
            type Error = Error;
            fn try_from(s: String) -> Result<Self> {
                Self::new(s)
            }
        }

        impl From<$name> for String {
            fn from(id: $name) -> String {
                id.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// A KB class (type), e.g. `person`.
    ClassId
);
string_id!(
    /// A KB relation, e.g. `hasBirthdate`.
    RelationId
);
string_id!(EntityId);

/// Interned class and relation identifiers.
///
/// Both lists are kept in strictly ascending string order, so the dense
/// index order of relations coincides with the order of their identifiers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    classes: Vec<ClassId>,
    relations: Vec<RelationId>,
}

impl Vocabulary {
    /// Builds a vocabulary from arbitrary iterators; ids are sorted and
    /// deduplicated.
    pub fn from_ids(
        classes: impl IntoIterator<Item = ClassId>,
        relations: impl IntoIterator<Item = RelationId>,
    ) -> Result<Self> {
        let classes: Vec<_> = classes.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let relations: Vec<_> = relations
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::from_sorted(classes, relations)
    }

    /// Builds a vocabulary from lists that must already be strictly ascending.
    pub fn from_sorted(classes: Vec<ClassId>, relations: Vec<RelationId>) -> Result<Self> {
        if classes.is_empty() || relations.is_empty() {
            return Err(Error::Schema(
                "vocabulary needs at least one class and one relation".into(),
            ));
        }
        if !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Schema("class list is not strictly ascending".into()));
        }
        if !relations.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Schema(
                "relation list is not strictly ascending".into(),
            ));
        }
        Ok(Self { classes, relations })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn class(&self, idx: u32) -> &ClassId {
        &self.classes[idx as usize]
    }

    pub fn relation(&self, idx: u32) -> &RelationId {
        &self.relations[idx as usize]
    }

    pub fn class_index(&self, id: &str) -> Option<u32> {
        self.classes
            .binary_search_by(|c| c.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    pub fn relation_index(&self, id: &str) -> Option<u32> {
        self.relations
            .binary_search_by(|r| r.as_str().cmp(id))
            .ok()
            .map(|i| i as u32)
    }

    /// Maps class ids onto a signature over this vocabulary. Unknown classes
    /// are dropped and counted; `None` when nothing is known.
    pub fn signature_of<'a>(
        &self,
        classes: impl IntoIterator<Item = &'a ClassId>,
    ) -> (Option<ClassSignature>, usize) {
        let mut unknown = 0;
        let mut idx = Vec::new();
        for c in classes {
            match self.class_index(c.as_str()) {
                Some(i) => idx.push(i),
                None => unknown += 1,
            }
        }
        (ClassSignature::new(idx).ok(), unknown)
    }
}

/// The exact set of classes an entity belongs to, as sorted vocabulary
/// indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassSignature(Vec<u32>);

impl ClassSignature {
    pub fn new(indices: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut v: Vec<u32> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Schema("class signature is empty".into()));
        }
        Ok(Self(v))
    }

    pub fn classes(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, class: u32) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    /// Class names joined by `|`; stable across vocabularies.
    pub fn canonical_string(&self, vocab: &Vocabulary) -> String {
        self.0
            .iter()
            .map(|&c| vocab.class(c).as_str())
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn class_ids<'a>(&'a self, vocab: &'a Vocabulary) -> impl Iterator<Item = &'a ClassId> + 'a {
        self.0.iter().map(move |&c| vocab.class(c))
    }
}
