use std::borrow::Cow;
use std::collections::HashMap;
use std::io::{self, BufRead};

use serde::Deserialize;
use serde_json::value::RawValue;
use thiserror::Error;

use super::{ClaimValue, KeepSet, SlimEntity};
use crate::id::{EntityId, EntityKind};

/// At most this many malformed lines keep their message; the count is always exact.
const MAX_TALLY_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading dump: {0}")]
    Io(#[from] io::Error),
    #[error("dump truncated at line {line}: {reason}")]
    Truncated { line: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub line: u64,
    pub reason: String,
}

/// Malformed lines skipped while parsing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorTally {
    count: u64,
    samples: Vec<MalformedLine>,
}

impl ErrorTally {
    pub fn record(&mut self, line: u64, reason: impl Into<String>) {
        self.count += 1;
        if self.samples.len() < MAX_TALLY_SAMPLES {
            self.samples.push(MalformedLine {
                line,
                reason: reason.into(),
            });
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn samples(&self) -> &[MalformedLine] {
        &self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Line-at-a-time parser over a decompressed Wikidata JSON dump.
///
/// Only one line is held in memory at a time. Malformed lines are tallied and
/// skipped; a malformed line that is also the unterminated last line of the
/// input ends iteration with [`IngestError::Truncated`].
pub struct DumpParser<R> {
    reader: R,
    keep: KeepSet,
    buf: Vec<u8>,
    line: u64,
    bytes: u64,
    tally: ErrorTally,
    done: bool,
}

pub fn parse_dump_stream<R: BufRead>(reader: R, keep: KeepSet) -> DumpParser<R> {
    DumpParser::new(reader, keep)
}

impl<R: BufRead> DumpParser<R> {
    pub fn new(reader: R, keep: KeepSet) -> Self {
        Self {
            reader,
            keep,
            buf: Vec::with_capacity(64 * 1024),
            line: 0,
            bytes: 0,
            tally: ErrorTally::default(),
            done: false,
        }
    }

    pub fn tally(&self) -> &ErrorTally {
        &self.tally
    }

    pub fn into_tally(self) -> ErrorTally {
        self.tally
    }

    pub fn lines_read(&self) -> u64 {
        self.line
    }

    pub fn bytes_read(&self) -> u64 {
        self.bytes
    }
}

impl<R: BufRead> Iterator for DumpParser<R> {
    type Item = Result<SlimEntity, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            let n = match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            };
            if n == 0 {
                self.done = true;
                break;
            }
            self.line += 1;
            self.bytes += n as u64;
            let terminated = self.buf.last() == Some(&b'\n');

            let mut body = self.buf.trim_ascii();
            if body.is_empty() || body == b"[" || body == b"]" {
                continue;
            }
            if let Some(stripped) = body.strip_suffix(b",") {
                body = stripped;
            }
            match parse_entity_line(body, &self.keep) {
                Ok(Some(entity)) => return Some(Ok(entity)),
                Ok(None) => {}
                Err(reason) if !terminated => {
                    self.done = true;
                    return Some(Err(IngestError::Truncated {
                        line: self.line,
                        reason,
                    }));
                }
                Err(reason) => self.tally.record(self.line, reason),
            }
        }
        None
    }
}

#[derive(Deserialize)]
struct RawEntity<'a> {
    #[serde(borrow)]
    id: Cow<'a, str>,
    #[serde(rename = "type", borrow, default)]
    kind: Option<Cow<'a, str>>,
    #[serde(borrow, default)]
    claims: Option<&'a RawValue>,
    #[serde(borrow, default)]
    sitelinks: Option<&'a RawValue>,
}

#[derive(Deserialize)]
struct Statement<'a> {
    #[serde(borrow)]
    mainsnak: Snak<'a>,
    #[serde(borrow, default)]
    rank: Option<Cow<'a, str>>,
}

#[derive(Deserialize)]
struct Snak<'a> {
    #[serde(borrow, default)]
    snaktype: Option<Cow<'a, str>>,
    #[serde(borrow, default)]
    datavalue: Option<DataValue<'a>>,
}

#[derive(Deserialize)]
struct DataValue<'a> {
    #[serde(rename = "type", borrow)]
    kind: Cow<'a, str>,
    #[serde(borrow)]
    value: &'a RawValue,
}

#[derive(Deserialize)]
struct EntityRef<'a> {
    #[serde(borrow, default)]
    id: Option<Cow<'a, str>>,
    #[serde(rename = "numeric-id", default)]
    numeric_id: Option<u64>,
    #[serde(rename = "entity-type", borrow, default)]
    entity_type: Option<Cow<'a, str>>,
}

#[derive(Deserialize)]
struct Sitelink<'a> {
    #[serde(borrow)]
    title: Cow<'a, str>,
}

/// Empty maps are serialized as `[]` in the dumps.
fn object_entries<'a>(raw: Option<&'a RawValue>) -> serde_json::Result<Vec<(&'a str, &'a RawValue)>> {
    match raw {
        None => Ok(Vec::new()),
        Some(raw) if raw.get().trim_start().starts_with('[') => {
            let items: Vec<&RawValue> = serde_json::from_str(raw.get())?;
            if items.is_empty() {
                Ok(Vec::new())
            } else {
                Err(serde::de::Error::custom("expected object, found non-empty array"))
            }
        }
        Some(raw) => {
            let map: HashMap<&'a str, &'a RawValue> = serde_json::from_str(raw.get())?;
            Ok(map.into_iter().collect())
        }
    }
}

fn parse_entity_line(line: &[u8], keep: &KeepSet) -> Result<Option<SlimEntity>, String> {
    let raw: RawEntity = serde_json::from_slice(line).map_err(|e| e.to_string())?;
    let id: EntityId = raw.id.parse().map_err(|e| format!("{e}"))?;
    match raw.kind.as_deref() {
        Some("item") if id.is_item() => {}
        Some("item") => return Err(format!("item with non-item id {id}")),
        Some(_) => return Ok(None),
        None if id.is_item() => {}
        None => return Ok(None),
    }

    let mut entity = SlimEntity::new(id);
    for (key, statements) in object_entries(raw.claims).map_err(|e| e.to_string())? {
        let Ok(prop) = key.parse::<EntityId>() else {
            continue;
        };
        if !keep.keeps_prop(&prop) {
            continue;
        }
        let statements: Vec<Statement> =
            serde_json::from_str(statements.get()).map_err(|e| format!("claims {key}: {e}"))?;
        let values: Vec<ClaimValue> = statements
            .iter()
            .filter(|s| s.rank.as_deref() != Some("deprecated"))
            .map(claim_value)
            .collect::<Result<_, _>>()?;
        if !values.is_empty() {
            entity.claims.insert(prop, values);
        }
    }
    for (wiki, link) in object_entries(raw.sitelinks).map_err(|e| e.to_string())? {
        if !keep.keeps_wiki(wiki) {
            continue;
        }
        let link: Sitelink = serde_json::from_str(link.get()).map_err(|e| format!("sitelink {wiki}: {e}"))?;
        if !link.title.is_empty() {
            entity.sitelinks.insert(wiki.to_owned(), link.title.into_owned());
        }
    }
    Ok(Some(entity))
}

fn claim_value(statement: &Statement) -> Result<ClaimValue, String> {
    let snak = &statement.mainsnak;
    if snak.snaktype.as_deref().is_some_and(|t| t != "value") {
        return Ok(ClaimValue::Skipped);
    }
    let Some(datavalue) = &snak.datavalue else {
        return Ok(ClaimValue::Skipped);
    };
    if datavalue.kind != "wikibase-entityid" {
        return Ok(ClaimValue::Skipped);
    }
    let reference: EntityRef = serde_json::from_str(datavalue.value.get()).map_err(|e| e.to_string())?;
    let kind = match reference.entity_type.as_deref() {
        Some("item") => Some(EntityKind::Item),
        Some("property") => Some(EntityKind::Property),
        Some(_) => return Ok(ClaimValue::Skipped),
        None => None,
    };
    let id = match (reference.numeric_id, kind, reference.id) {
        (Some(n), Some(kind), _) => EntityId::new(kind, n),
        (_, _, Some(id)) => id.parse().ok(),
        _ => None,
    };
    // Lexemes, forms and senses have no numeric item/property form.
    Ok(id.map_or(ClaimValue::Skipped, ClaimValue::Entity))
}
