//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use langcov::{ClaimValue, EntityId, RuleSet, SlimEntity};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn q(n: u64) -> EntityId {
    EntityId::item(n)
}

pub fn p(n: u64) -> EntityId {
    EntityId::property(n)
}

pub fn desk_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/desk")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random entity graph. Entity numbers run 1..=n; a handful of them act as
/// countries, a larger share as places chained to other places or countries
/// (cycles included), the rest as items with direct and place claims.
pub fn random_world(seed: u64, n: u64, rules: &RuleSet) -> Vec<SlimEntity> {
    let mut rng = rng(seed);
    let countries = (n / 50).max(2);
    let places = n / 3;
    let direct: Vec<EntityId> = rules.direct_props.iter().copied().collect();
    let place_props: Vec<EntityId> = rules.place_props.iter().copied().collect();
    let chain = rules.geo_chain_props.clone();
    let excluded: Vec<EntityId> = rules.exclude_classes.iter().copied().collect();
    let mut world = Vec::with_capacity(n as usize);
    for i in 1..=n {
        let mut e = SlimEntity::new(q(i));
        let any = |rng: &mut ChaCha8Rng| q(rng.gen_range(1..=n));
        // the first three numbers are the candidate targets; favour them
        let country = |rng: &mut ChaCha8Rng| {
            q(if rng.gen_bool(0.3) {
                rng.gen_range(1..=3)
            } else {
                rng.gen_range(1..=countries)
            })
        };
        let place_or_country = |rng: &mut ChaCha8Rng| q(rng.gen_range(1..=countries + places));
        if i <= countries {
            if rng.gen_bool(0.7) {
                e = e.with_claim(chain[0], q(i));
            }
        } else if i <= countries + places {
            for _ in 0..rng.gen_range(0..=2) {
                let prop = *chain.choose(&mut rng).unwrap();
                let parent = if rng.gen_bool(0.6) {
                    country(&mut rng)
                } else {
                    place_or_country(&mut rng)
                };
                e = e.with_claim(prop, parent);
            }
        } else {
            for _ in 0..rng.gen_range(0..=2) {
                let prop = *direct.choose(&mut rng).unwrap();
                let v = if rng.gen_bool(0.5) {
                    country(&mut rng)
                } else {
                    any(&mut rng)
                };
                e = e.with_claim(prop, v);
            }
            for _ in 0..rng.gen_range(0..=2) {
                let prop = *place_props.choose(&mut rng).unwrap();
                e = e.with_claim(prop, place_or_country(&mut rng));
            }
        }
        if rng.gen_bool(0.05) {
            let prop = *direct.choose(&mut rng).unwrap();
            e.claims.entry(prop).or_default().push(ClaimValue::Skipped);
        }
        if !excluded.is_empty() && rng.gen_bool(0.03) {
            e = e.with_claim(RuleSet::instance_of(), *excluded.choose(&mut rng).unwrap());
        }
        if rng.gen_bool(0.02) {
            e = e.with_claim(RuleSet::instance_of(), q(rng.gen_range(1..=n)));
        }
        world.push(e);
    }
    world
}

/// Rules with a random target among the first few numbers and a random depth.
pub fn random_rules(seed: u64) -> RuleSet {
    let mut rng = rng(seed ^ 0x5eed);
    let mut rules = RuleSet {
        target: q(rng.gen_range(1..=3)),
        max_depth: rng.gen_range(1..=6),
        ..RuleSet::default()
    };
    if rng.gen_bool(0.3) {
        rules.geo_chain_props = vec![p(17), p(131)];
    }
    rules
}

/// Related-ness by exhaustive walk enumeration: follow every geo-chain edge
/// from every place value, without memoisation or visited sets, up to
/// `max_depth` edges.
pub struct BruteOracle<'a> {
    edges: BTreeMap<EntityId, Vec<EntityId>>,
    rules: &'a RuleSet,
}

impl<'a> BruteOracle<'a> {
    pub fn new(world: &[SlimEntity], rules: &'a RuleSet) -> Self {
        let mut edges: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        for e in world {
            for prop in &rules.geo_chain_props {
                for v in e.claims.get(prop).into_iter().flatten() {
                    if let ClaimValue::Entity(v) = v {
                        edges.entry(e.id).or_default().push(*v);
                    }
                }
            }
        }
        Self { edges, rules }
    }

    fn walks_reach(&self, from: EntityId, budget: u32) -> bool {
        if budget == 0 {
            return false;
        }
        self.edges
            .get(&from)
            .into_iter()
            .flatten()
            .any(|&next| next == self.rules.target || self.walks_reach(next, budget - 1))
    }

    /// Shortest walk length from `from` to the target, if any within depth.
    pub fn distance(&self, from: EntityId) -> Option<u32> {
        if from == self.rules.target {
            return Some(0);
        }
        (1..=self.rules.max_depth).find(|&d| self.walks_reach(from, d))
    }

    pub fn related(&self, e: &SlimEntity) -> bool {
        let values = |prop: &EntityId| {
            e.claims
                .get(prop)
                .into_iter()
                .flatten()
                .filter_map(|v| match v {
                    ClaimValue::Entity(id) => Some(*id),
                    ClaimValue::Skipped => None,
                })
                .collect::<Vec<_>>()
        };
        if values(&RuleSet::instance_of())
            .iter()
            .any(|c| self.rules.exclude_classes.contains(c))
        {
            return false;
        }
        let direct = self
            .rules
            .direct_props
            .iter()
            .any(|prop| values(prop).contains(&self.rules.target));
        let place = self
            .rules
            .place_props
            .iter()
            .any(|prop| values(prop).into_iter().any(|v| self.distance(v).is_some()));
        direct || place
    }

    pub fn related_set(&self, world: &[SlimEntity]) -> BTreeSet<EntityId> {
        world.iter().filter(|e| self.related(e)).map(|e| e.id).collect()
    }
}

/// Serialize an entity as a full dump line, with noise the parser must ignore.
pub fn dump_line(e: &SlimEntity) -> String {
    let mut claims = serde_json::Map::new();
    for (prop, values) in &e.claims {
        let stmts: Vec<serde_json::Value> = values
            .iter()
            .map(|v| match v {
                ClaimValue::Entity(id) => serde_json::json!({
                    "mainsnak": {"snaktype": "value", "property": prop.to_string(),
                        "datavalue": {"value": {"entity-type": "item", "numeric-id": id.number(), "id": id.to_string()},
                            "type": "wikibase-entityid"}, "datatype": "wikibase-item"},
                    "type": "statement", "rank": "normal", "qualifiers": {"P580": []}}),
                ClaimValue::Skipped => serde_json::json!({
                    "mainsnak": {"snaktype": "novalue", "property": prop.to_string()},
                    "type": "statement", "rank": "normal"}),
            })
            .collect();
        claims.insert(prop.to_string(), serde_json::Value::Array(stmts));
    }
    let sitelinks: serde_json::Map<String, serde_json::Value> = e
        .sitelinks
        .iter()
        .map(|(w, t)| (w.clone(), serde_json::json!({"site": w, "title": t, "badges": []})))
        .collect();
    serde_json::json!({
        "type": "item",
        "id": e.id.to_string(),
        "labels": {"en": {"language": "en", "value": format!("label {}", e.id)}},
        "descriptions": [],
        "claims": claims,
        "sitelinks": sitelinks,
    })
    .to_string()
}

/// Whole dump text in the `[`, `line,`, ..., `]` layout.
pub fn dump_text(entities: &[SlimEntity]) -> String {
    let mut out = String::from("[\n");
    for (i, e) in entities.iter().enumerate() {
        out.push_str(&dump_line(e));
        if i + 1 < entities.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("]\n");
    out
}
