//! Deciding whether an item relates to the target country.
//!
//! Country-valued properties (`direct_props`) match when their value is the
//! target. Place-valued properties (`place_props`) match when the place climbs
//! to the target through `geo_chain_props` edges within `max_depth` hops. The
//! geographic edges come from a first pass over the entities ([`GeoIndex`]).

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::id::{parse_id_list, render_id_list, EntityId, IdError};
use crate::ingest::SlimEntity;

const INSTANCE_OF: u64 = 31;
const DISAMBIGUATION_PAGE: u64 = 4167410;

#[derive(Debug, Error)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("bad id in rules: {0}")]
    Id(#[from] IdError),
    #[error("{0} is both a direct and a place property")]
    Overlap(EntityId),
    #[error("max_depth must be at least 1")]
    ZeroDepth,
    #[error("target {0} is not an item")]
    TargetNotItem(EntityId),
    #[error("{0} in a property list is not a property")]
    NotAProperty(EntityId),
}

#[derive(Debug, Error)]
pub enum AttributionError {
    #[error("item {0} appears more than once in the input")]
    DuplicateItem(EntityId),
    #[error("attribution line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub direct_props: BTreeSet<EntityId>,
    pub place_props: BTreeSet<EntityId>,
    pub geo_chain_props: Vec<EntityId>,
    pub max_depth: u32,
    pub target: EntityId,
    /// Items that are instances of any of these classes are never attributed.
    pub exclude_classes: BTreeSet<EntityId>,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self {
            direct_props: [17, 27, 495].map(EntityId::property).into(),
            place_props: [19, 276].map(EntityId::property).into(),
            geo_chain_props: vec![EntityId::property(17)],
            max_depth: 5,
            target: EntityId::item(30),
            exclude_classes: [EntityId::item(DISAMBIGUATION_PAGE)].into(),
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), RuleError> {
        if let Some(p) = self.direct_props.intersection(&self.place_props).next() {
            return Err(RuleError::Overlap(*p));
        }
        if self.max_depth == 0 {
            return Err(RuleError::ZeroDepth);
        }
        if !self.target.is_item() {
            return Err(RuleError::TargetNotItem(self.target));
        }
        let props = self
            .direct_props
            .iter()
            .chain(&self.place_props)
            .chain(&self.geo_chain_props);
        for p in props {
            if p.is_item() {
                return Err(RuleError::NotAProperty(*p));
            }
        }
        Ok(())
    }

    pub fn instance_of() -> EntityId {
        EntityId::property(INSTANCE_OF)
    }

    /// Every property the rules read. Use it as the parse keep-set.
    pub fn required_props(&self) -> BTreeSet<EntityId> {
        let mut props: BTreeSet<EntityId> = self
            .direct_props
            .iter()
            .chain(&self.place_props)
            .chain(&self.geo_chain_props)
            .copied()
            .collect();
        if !self.exclude_classes.is_empty() {
            props.insert(Self::instance_of());
        }
        props
    }

    pub fn is_excluded(&self, entity: &SlimEntity) -> bool {
        !self.exclude_classes.is_empty()
            && entity
                .values(Self::instance_of())
                .any(|class| self.exclude_classes.contains(&class))
    }

    /// Parse a `key=value` rules file. Keys not present keep their defaults.
    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = RuleSet::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: String| RuleError::Syntax { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "target" => rules.target = value.parse()?,
                "direct" => rules.direct_props = parse_id_list(value)?.into_iter().collect(),
                "place" => rules.place_props = parse_id_list(value)?.into_iter().collect(),
                "geo_chain" => rules.geo_chain_props = parse_id_list(value)?,
                "max_depth" => {
                    rules.max_depth = value.parse().map_err(|_| syntax(format!("bad max_depth {value:?}")))?
                }
                "exclude_classes" => rules.exclude_classes = parse_id_list(value)?.into_iter().collect(),
                other => return Err(syntax(format!("unknown key {other:?}"))),
            }
        }
        rules.validate()?;
        Ok(rules)
    }

    pub fn render(&self) -> String {
        format!(
            "target={}\ndirect={}\nplace={}\ngeo_chain={}\nmax_depth={}\nexclude_classes={}\n",
            self.target,
            render_id_list(&self.direct_props),
            render_id_list(&self.place_props),
            render_id_list(&self.geo_chain_props),
            self.max_depth,
            render_id_list(&self.exclude_classes),
        )
    }
}

impl FromStr for RuleSet {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Place → values of its geographic chain properties.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeoIndex {
    edges: HashMap<EntityId, Vec<EntityId>>,
}

impl GeoIndex {
    pub fn get(&self, place: &EntityId) -> &[EntityId] {
        self.edges.get(place).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn insert(&mut self, place: EntityId, parents: Vec<EntityId>) {
        self.edges.insert(place, parents);
    }
}

pub fn build_geo_index<E: Borrow<SlimEntity>>(entities: impl IntoIterator<Item = E>, rules: &RuleSet) -> GeoIndex {
    let mut index = GeoIndex::default();
    for entity in entities {
        index.add(entity.borrow(), rules);
    }
    index
}

impl GeoIndex {
    /// Record `entity`'s geographic claims. For streaming first passes.
    pub fn add(&mut self, entity: &SlimEntity, rules: &RuleSet) {
        let parents: Vec<EntityId> = rules
            .geo_chain_props
            .iter()
            .flat_map(|prop| entity.values(*prop))
            .collect();
        if !parents.is_empty() {
            self.edges.insert(entity.id, parents);
        }
    }
}

/// Everything reachable from `place` in 1..=max_depth hops.
pub fn resolve_place_country(index: &GeoIndex, place: EntityId, rules: &RuleSet) -> BTreeSet<EntityId> {
    let mut reached = BTreeSet::new();
    let mut frontier = vec![place];
    for _ in 0..rules.max_depth {
        let mut next = Vec::new();
        for node in frontier {
            for &parent in index.get(&node) {
                if reached.insert(parent) {
                    next.push(parent);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    reached
}

/// Shortest chain from `place` to the target: the entities after `place`,
/// ending at the target. `place` must differ from the target.
fn path_to_target(index: &GeoIndex, place: EntityId, rules: &RuleSet) -> Option<Vec<EntityId>> {
    let mut parent_of: HashMap<EntityId, EntityId> = HashMap::from([(place, place)]);
    let mut frontier = vec![place];
    for _ in 0..rules.max_depth {
        let mut next_frontier = Vec::new();
        for node in frontier {
            for &next in index.get(&node) {
                if parent_of.contains_key(&next) {
                    continue;
                }
                parent_of.insert(next, node);
                if next == rules.target {
                    let mut path = vec![next];
                    let mut cursor = node;
                    while cursor != place {
                        path.push(cursor);
                        cursor = parent_of[&cursor];
                    }
                    path.reverse();
                    return Some(path);
                }
                next_frontier.push(next);
            }
        }
        if next_frontier.is_empty() {
            break;
        }
        frontier = next_frontier;
    }
    None
}

/// One reason an item relates to the target: `P19 > Q60 > Q30`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenancePath {
    pub property: EntityId,
    /// Entities after the property; the last one is the target.
    pub hops: Vec<EntityId>,
}

impl fmt::Display for ProvenancePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.property)?;
        for hop in &self.hops {
            write!(f, ">{hop}")?;
        }
        Ok(())
    }
}

impl FromStr for ProvenancePath {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('>');
        let property = parts.next().unwrap_or_default().parse()?;
        let hops = parts.map(str::parse).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { property, hops })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributionResult {
    pub item: EntityId,
    pub provenance: Vec<ProvenancePath>,
}

impl AttributionResult {
    pub fn unrelated(item: EntityId) -> Self {
        Self {
            item,
            provenance: Vec::new(),
        }
    }

    pub fn related(&self) -> bool {
        !self.provenance.is_empty()
    }
}

pub type Attributions = BTreeMap<EntityId, AttributionResult>;

pub fn attribute_item(entity: &SlimEntity, index: &GeoIndex, rules: &RuleSet) -> AttributionResult {
    let mut provenance = Vec::new();
    for &prop in &rules.direct_props {
        if entity.values(prop).any(|v| v == rules.target) {
            provenance.push(ProvenancePath {
                property: prop,
                hops: vec![rules.target],
            });
        }
    }
    for &prop in &rules.place_props {
        let mut seen = BTreeSet::new();
        for place in entity.values(prop) {
            if !seen.insert(place) {
                continue;
            }
            // A place claim naming the country itself needs no climbing.
            let chain = if place == rules.target {
                Some(Vec::new())
            } else {
                path_to_target(index, place, rules)
            };
            if let Some(chain) = chain {
                let mut hops = vec![place];
                hops.extend(chain);
                provenance.push(ProvenancePath { property: prop, hops });
            }
        }
    }
    AttributionResult {
        item: entity.id,
        provenance,
    }
}

pub fn attribute_all<E: Borrow<SlimEntity>>(
    entities: impl IntoIterator<Item = E>,
    index: &GeoIndex,
    rules: &RuleSet,
) -> Result<Attributions, AttributionError> {
    let mut results = Attributions::new();
    for entity in entities {
        let entity = entity.borrow();
        let result = if rules.is_excluded(entity) {
            AttributionResult::unrelated(entity.id)
        } else {
            attribute_item(entity, index, rules)
        };
        if results.insert(entity.id, result).is_some() {
            return Err(AttributionError::DuplicateItem(entity.id));
        }
    }
    Ok(results)
}

/// Write the `item<TAB>related<TAB>provenance` file, sorted by item.
pub fn write_attributions<W: Write>(results: &Attributions, mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "item\trelated\tprovenance")?;
    for result in results.values() {
        let provenance = result
            .provenance
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        writeln!(sink, "{}\t{}\t{}", result.item, result.related(), provenance)?;
    }
    sink.flush()
}

pub fn read_attributions<R: BufRead>(source: R) -> Result<Attributions, AttributionError> {
    let mut results = Attributions::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        let parse_err = |message: String| AttributionError::Parse { line: i + 1, message };
        if i == 0 {
            if line != "item\trelated\tprovenance" {
                return Err(parse_err(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(item), Some(related), Some(provenance)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err("expected 3 fields".into()));
        };
        let item: EntityId = item.parse().map_err(|e| parse_err(format!("{e}")))?;
        let related: bool = related
            .parse()
            .map_err(|_| parse_err(format!("bad flag {related:?}")))?;
        let provenance = provenance
            .split(';')
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<ProvenancePath>, _>>()
            .map_err(|e| parse_err(format!("{e}")))?;
        if related == provenance.is_empty() {
            return Err(parse_err("related flag disagrees with provenance".into()));
        }
        if results.insert(item, AttributionResult { item, provenance }).is_some() {
            return Err(AttributionError::DuplicateItem(item));
        }
    }
    Ok(results)
}
