//! Wikidata dump ingestion: streaming projection into [`SlimEntity`] records
//! and the compact on-disk [`store`] format used between pipeline passes.

mod dump;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::id::EntityId;

pub use dump::{parse_dump_stream, DumpParser, ErrorTally, IngestError, MalformedLine};
pub use store::{read_slim_store, write_slim_store, SlimStoreReader, StoreError, StoreHeader};

/// One value of a kept claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClaimValue {
    Entity(EntityId),
    /// Strings, quantities, coordinates, `somevalue`/`novalue` snaks.
    Skipped,
}

impl ClaimValue {
    pub fn entity(&self) -> Option<EntityId> {
        match self {
            ClaimValue::Entity(id) => Some(*id),
            ClaimValue::Skipped => None,
        }
    }
}

/// Minimal projection of a Wikidata item: kept claims and kept sitelinks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlimEntity {
    pub id: EntityId,
    pub claims: BTreeMap<EntityId, Vec<ClaimValue>>,
    /// Wiki code (`enwiki`) to article title, exactly as spelled in the dump.
    pub sitelinks: BTreeMap<String, String>,
}

impl SlimEntity {
    pub fn new(id: EntityId) -> Self {
        Self {
            id,
            claims: BTreeMap::new(),
            sitelinks: BTreeMap::new(),
        }
    }

    pub fn with_claim(mut self, prop: EntityId, value: EntityId) -> Self {
        self.claims.entry(prop).or_default().push(ClaimValue::Entity(value));
        self
    }

    pub fn with_sitelink(mut self, wiki: impl Into<String>, title: impl Into<String>) -> Self {
        self.sitelinks.insert(wiki.into(), title.into());
        self
    }

    /// Entity-valued claim values of `prop`, in claim order.
    pub fn values(&self, prop: EntityId) -> impl Iterator<Item = EntityId> + '_ {
        self.claims
            .get(&prop)
            .into_iter()
            .flatten()
            .filter_map(ClaimValue::entity)
    }
}

/// Which claims and sitelinks survive projection.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KeepSet {
    pub props: BTreeSet<EntityId>,
    pub wikis: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum KeepSetError {
    #[error("keep-set needs at least one property")]
    NoProperties,
    #[error("{0} is not a property id")]
    NotAProperty(EntityId),
}

impl KeepSet {
    pub fn new(
        props: impl IntoIterator<Item = EntityId>,
        wikis: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Self, KeepSetError> {
        let props: BTreeSet<EntityId> = props.into_iter().collect();
        if props.is_empty() {
            return Err(KeepSetError::NoProperties);
        }
        if let Some(bad) = props.iter().find(|p| p.is_item()) {
            return Err(KeepSetError::NotAProperty(*bad));
        }
        Ok(Self {
            props,
            wikis: wikis.into_iter().map(Into::into).collect(),
        })
    }

    pub fn keeps_prop(&self, prop: &EntityId) -> bool {
        self.props.contains(prop)
    }

    pub fn keeps_wiki(&self, wiki: &str) -> bool {
        self.wikis.contains(wiki)
    }
}

/// Sitelink key for a Wikipedia language code: `en` → `enwiki`, `zh-yue` → `zh_yuewiki`.
pub fn wiki_code(language: &str) -> String {
    format!("{}wiki", language.replace('-', "_"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wiki_codes() {
        assert_eq!(wiki_code("en"), "enwiki");
        assert_eq!(wiki_code("zh-yue"), "zh_yuewiki");
    }

    #[test]
    fn keep_set_validation() {
        assert!(matches!(KeepSet::new([], ["enwiki"]), Err(KeepSetError::NoProperties)));
        assert!(matches!(
            KeepSet::new([EntityId::item(5)], ["enwiki"]),
            Err(KeepSetError::NotAProperty(_))
        ));
    }
}
