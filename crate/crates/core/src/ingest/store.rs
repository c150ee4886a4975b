//! SlimStore: a versioned, line-oriented record file.
//!
//! ```text
//! WCM1
//! count=2 props=P17,P27 wikis=dewiki,enwiki
//! Q30<TAB>P17:Q30<TAB>dewiki=Vereinigte Staaten|enwiki=United States
//! Q22686<TAB>P27:Q30,_<TAB>enwiki=Donald Trump
//! ```
//!
//! Claim groups are separated by `;`, values by `,`, and `_` marks a skipped
//! (non-entity) value. Sitelinks are separated by `|`. Titles are
//! percent-encoded for `%`, `|`, and control characters (tab, newline).

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, CONTROLS};
use thiserror::Error;

use super::{ClaimValue, KeepSet, SlimEntity};
use crate::id::{parse_id_list, render_id_list, EntityId};

const MAGIC: &str = "WCM";
const VERSION: &str = "1";
const SKIPPED: &str = "_";

const TITLE_ESCAPES: &AsciiSet = &CONTROLS.add(b'%').add(b'|');

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store write failed after {written} records: {source}")]
    PartialWrite { written: u64, source: io::Error },
    #[error("reading store: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported store format version {0:?}")]
    UnsupportedVersion(String),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreHeader {
    pub count: u64,
    pub keep: KeepSet,
}

impl StoreHeader {
    fn render(&self) -> String {
        format!(
            "count={} props={} wikis={}",
            self.count,
            render_id_list(&self.keep.props),
            self.keep.wikis.iter().cloned().collect::<Vec<_>>().join(",")
        )
    }

    fn parse(line: &str) -> Result<Self, StoreError> {
        let corrupt = || StoreError::Corrupt(format!("bad header {line:?}"));
        let mut fields = line.split(' ');
        let mut take = |key: &str| {
            fields
                .next()
                .and_then(|f| f.strip_prefix(key))
                .and_then(|f| f.strip_prefix('='))
                .ok_or_else(corrupt)
        };
        let count = take("count")?.parse().map_err(|_| corrupt())?;
        let props = parse_id_list(take("props")?).map_err(|_| corrupt())?;
        let wikis = take("wikis")?
            .split(',')
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect::<BTreeSet<_>>();
        Ok(Self {
            count,
            keep: KeepSet {
                props: props.into_iter().collect(),
                wikis,
            },
        })
    }
}

/// Sort `entities` by id and write them as a SlimStore. Returns the record count.
pub fn write_slim_store<W: Write>(
    entities: impl IntoIterator<Item = SlimEntity>,
    keep: &KeepSet,
    mut sink: W,
) -> Result<u64, StoreError> {
    let mut entities: Vec<SlimEntity> = entities.into_iter().collect();
    entities.sort_by_key(|e| e.id.number());

    let header = StoreHeader {
        count: entities.len() as u64,
        keep: keep.clone(),
    };
    let mut written = 0u64;
    let fail = |written, source| StoreError::PartialWrite { written, source };
    writeln!(sink, "{MAGIC}{VERSION}").map_err(|e| fail(written, e))?;
    writeln!(sink, "{}", header.render()).map_err(|e| fail(written, e))?;
    let mut line = String::new();
    for entity in &entities {
        line.clear();
        render_record(entity, &mut line);
        sink.write_all(line.as_bytes()).map_err(|e| fail(written, e))?;
        written += 1;
    }
    sink.flush().map_err(|e| fail(written, e))?;
    Ok(written)
}

fn render_record(entity: &SlimEntity, out: &mut String) {
    use std::fmt::Write as _;

    let _ = write!(out, "{}\t", entity.id);
    for (i, (prop, values)) in entity.claims.iter().enumerate() {
        if i > 0 {
            out.push(';');
        }
        let _ = write!(out, "{prop}:");
        for (j, value) in values.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            match value {
                ClaimValue::Entity(id) => {
                    let _ = write!(out, "{id}");
                }
                ClaimValue::Skipped => out.push_str(SKIPPED),
            }
        }
    }
    out.push('\t');
    for (i, (wiki, title)) in entity.sitelinks.iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        let _ = write!(out, "{wiki}={}", utf8_percent_encode(title, TITLE_ESCAPES));
    }
    out.push('\n');
}

/// Streaming reader. The header is validated on open; the record count is
/// checked against the header when the stream ends.
pub struct SlimStoreReader<R> {
    reader: R,
    header: StoreHeader,
    buf: String,
    seen: u64,
    last: Option<u64>,
    done: bool,
}

pub fn read_slim_store<R: BufRead>(source: R) -> Result<SlimStoreReader<R>, StoreError> {
    SlimStoreReader::open(source)
}

impl<R: BufRead> SlimStoreReader<R> {
    pub fn open(mut reader: R) -> Result<Self, StoreError> {
        let mut buf = String::new();
        reader.read_line(&mut buf)?;
        let magic = buf.trim_end_matches('\n');
        match magic.strip_prefix(MAGIC) {
            Some(VERSION) => {}
            Some(v) if !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()) => {
                return Err(StoreError::UnsupportedVersion(v.to_owned()))
            }
            _ => return Err(StoreError::Corrupt("missing WCM magic".into())),
        }
        buf.clear();
        reader.read_line(&mut buf)?;
        let header = StoreHeader::parse(buf.trim_end_matches('\n'))?;
        Ok(Self {
            reader,
            header,
            buf,
            seen: 0,
            last: None,
            done: false,
        })
    }

    pub fn header(&self) -> &StoreHeader {
        &self.header
    }

    fn next_record(&mut self) -> Result<Option<SlimEntity>, StoreError> {
        self.buf.clear();
        if self.reader.read_line(&mut self.buf)? == 0 {
            if self.seen != self.header.count {
                return Err(StoreError::Corrupt(format!(
                    "header declares {} records, found {}",
                    self.header.count, self.seen
                )));
            }
            return Ok(None);
        }
        self.seen += 1;
        if self.seen > self.header.count {
            return Err(StoreError::Corrupt(format!(
                "more records than the declared {}",
                self.header.count
            )));
        }
        let Some(line) = self.buf.strip_suffix('\n') else {
            return Err(StoreError::Corrupt(format!("record {} is truncated", self.seen)));
        };
        let entity = parse_record(line, &self.header.keep)
            .map_err(|e| StoreError::Corrupt(format!("record {}: {e}", self.seen)))?;
        if self.last.is_some_and(|last| last > entity.id.number()) {
            return Err(StoreError::Corrupt(format!(
                "record {} ({}) out of order",
                self.seen, entity.id
            )));
        }
        self.last = Some(entity.id.number());
        Ok(Some(entity))
    }
}

impl<R: BufRead> Iterator for SlimStoreReader<R> {
    type Item = Result<SlimEntity, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let next = self.next_record().transpose();
        if !matches!(next, Some(Ok(_))) {
            self.done = true;
        }
        next
    }
}

fn parse_record(line: &str, keep: &KeepSet) -> Result<SlimEntity, String> {
    let mut fields = line.split('\t');
    let (Some(id), Some(claims), Some(links), None) = (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err("expected 3 tab-separated fields".into());
    };
    let id: EntityId = id.parse().map_err(|e| format!("{e}"))?;
    if !id.is_item() {
        return Err(format!("{id} is not an item"));
    }
    let mut entity = SlimEntity::new(id);
    for group in claims.split(';').filter(|g| !g.is_empty()) {
        let (prop, values) = group
            .split_once(':')
            .ok_or_else(|| format!("bad claim group {group:?}"))?;
        let prop: EntityId = prop.parse().map_err(|e| format!("{e}"))?;
        if !keep.keeps_prop(&prop) {
            return Err(format!("{prop} outside the header keep-set"));
        }
        let values = values
            .split(',')
            .map(|v| match v {
                SKIPPED => Ok(ClaimValue::Skipped),
                v => v.parse().map(ClaimValue::Entity).map_err(|e| format!("{e}")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if entity.claims.insert(prop, values).is_some() {
            return Err(format!("duplicate claim group {prop}"));
        }
    }
    for link in links.split('|').filter(|l| !l.is_empty()) {
        let (wiki, title) = link.split_once('=').ok_or_else(|| format!("bad sitelink {link:?}"))?;
        if !keep.keeps_wiki(wiki) {
            return Err(format!("{wiki} outside the header keep-set"));
        }
        let title = percent_decode_str(title).decode_utf8().map_err(|e| e.to_string())?;
        if title.is_empty() {
            return Err(format!("empty title for {wiki}"));
        }
        if entity.sitelinks.insert(wiki.to_owned(), title.into_owned()).is_some() {
            return Err(format!("duplicate sitelink {wiki}"));
        }
    }
    Ok(entity)
}
