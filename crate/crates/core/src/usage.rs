//! Pageview totals per (language, title) and readership per (language, country).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use percent_encoding::percent_decode_str;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UsageError {
    #[error("malformed pageviews line: {0}")]
    Malformed(String),
    #[error("view total for {language}:{title} overflows")]
    Overflow { language: String, title: String },
    #[error("readership row {row}: {message}")]
    Readership { row: usize, message: String },
    #[error("duplicate readership row for {language},{country}")]
    DuplicateReadership { language: String, country: String },
    #[error("views file line {line}: {message}")]
    ViewsFile { line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewRecord {
    pub language: String,
    /// Underscore form, percent-decoded.
    pub title: String,
    pub views: u64,
}

/// Decide which pageview domains are tracked Wikipedia languages.
#[derive(Debug, Clone, Default)]
pub struct LanguageFilter {
    allow: Option<BTreeSet<String>>,
}

impl LanguageFilter {
    pub fn all() -> Self {
        Self { allow: None }
    }

    pub fn only(languages: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            allow: Some(languages.into_iter().map(Into::into).collect()),
        }
    }

    pub fn tracks(&self, language: &str) -> bool {
        self.allow.as_ref().is_none_or(|allow| allow.contains(language))
    }
}

/// Map a pageviews domain code onto a Wikipedia language. Mobile (`.m`) and
/// zero-rated (`.zero`) variants fold into the base language; sister projects
/// (`en.d`, `en.b`, `commons.m`, ...) give `None`.
pub fn wikipedia_language(domain: &str) -> Option<&str> {
    let (language, suffix) = domain.split_once('.').unwrap_or((domain, ""));
    let is_wikipedia = matches!(suffix, "" | "m" | "zero" | "m.zero");
    if !is_wikipedia || language.is_empty() || !language.bytes().all(|b| b.is_ascii_lowercase() || b == b'-') {
        return None;
    }
    Some(language)
}

/// Normalize an article title to pageview form (spaces become underscores).
pub fn normalize_title(title: &str) -> String {
    title.replace(' ', "_")
}

/// Parse one pageviews line. `Ok(None)` is a skip: untracked domain or blank line.
pub fn parse_pageviews_line(line: &str, filter: &LanguageFilter) -> Result<Option<ViewRecord>, UsageError> {
    let line = line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() {
        return Ok(None);
    }
    let mut fields = line.split(' ');
    let (Some(domain), Some(title), Some(count)) = (fields.next(), fields.next(), fields.next()) else {
        return Err(UsageError::Malformed(line.to_owned()));
    };
    if title.is_empty() {
        return Err(UsageError::Malformed(line.to_owned()));
    }
    let views: u64 = count.parse().map_err(|_| UsageError::Malformed(line.to_owned()))?;
    let Some(language) = wikipedia_language(domain) else {
        return Ok(None);
    };
    if !filter.tracks(language) {
        return Ok(None);
    }
    let title = percent_decode_str(title)
        .decode_utf8()
        .map_or_else(|_| title.to_owned(), |t| t.into_owned());
    Ok(Some(ViewRecord {
        language: language.to_owned(),
        title: normalize_title(&title),
        views,
    }))
}

/// Exact per-(language, title) view totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViewTotals {
    totals: HashMap<String, HashMap<String, u64>>,
}

impl ViewTotals {
    pub fn add(&mut self, record: ViewRecord) -> Result<(), UsageError> {
        let slot = self
            .totals
            .entry(record.language.clone())
            .or_default()
            .entry(record.title.clone())
            .or_insert(0);
        *slot = slot.checked_add(record.views).ok_or(UsageError::Overflow {
            language: record.language,
            title: record.title,
        })?;
        Ok(())
    }

    /// Fold another shard's totals into this one.
    pub fn merge(&mut self, other: ViewTotals) -> Result<(), UsageError> {
        for (language, titles) in other.totals {
            for (title, views) in titles {
                self.add(ViewRecord {
                    language: language.clone(),
                    title,
                    views,
                })?;
            }
        }
        Ok(())
    }

    /// Missing entries count as zero views.
    pub fn get(&self, language: &str, title: &str) -> u64 {
        self.totals
            .get(language)
            .and_then(|titles| titles.get(title))
            .copied()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.totals.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries sorted by language, then title.
    pub fn sorted(&self) -> Vec<(&str, &str, u64)> {
        let mut rows: Vec<_> = self
            .totals
            .iter()
            .flat_map(|(lang, titles)| titles.iter().map(move |(t, v)| (lang.as_str(), t.as_str(), *v)))
            .collect();
        rows.sort_unstable();
        rows
    }

    pub fn language_total(&self, language: &str) -> u128 {
        self.totals
            .get(language)
            .map_or(0, |titles| titles.values().map(|&v| u128::from(v)).sum())
    }

    /// `language<TAB>title<TAB>views`, sorted.
    pub fn write_tsv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "language\ttitle\tviews")?;
        for (language, title, views) in self.sorted() {
            writeln!(sink, "{language}\t{title}\t{views}")?;
        }
        sink.flush()
    }

    pub fn read_tsv<R: BufRead>(source: R) -> Result<Self, UsageError> {
        let mut totals = ViewTotals::default();
        for (i, line) in source.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line != "language\ttitle\tviews" {
                    return Err(UsageError::ViewsFile {
                        line: 1,
                        message: format!("unexpected header {line:?}"),
                    });
                }
                continue;
            }
            let bad = |message: &str| UsageError::ViewsFile {
                line: i + 1,
                message: message.to_owned(),
            };
            let mut fields = line.split('\t');
            let (Some(language), Some(title), Some(views), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(bad("expected 3 fields"));
            };
            let views = views.parse().map_err(|_| bad("bad view count"))?;
            totals.add(ViewRecord {
                language: language.to_owned(),
                title: title.to_owned(),
                views,
            })?;
        }
        Ok(totals)
    }
}

/// Sum a stream of view records. Shard-invariant: see [`ViewTotals::merge`].
pub fn aggregate_views(records: impl IntoIterator<Item = ViewRecord>) -> Result<ViewTotals, UsageError> {
    let mut totals = ViewTotals::default();
    for record in records {
        totals.add(record)?;
    }
    Ok(totals)
}

/// Read a pageviews file, returning its totals and the number of malformed lines skipped.
pub fn read_pageviews<R: BufRead>(source: R, filter: &LanguageFilter) -> Result<(ViewTotals, u64), UsageError> {
    let mut totals = ViewTotals::default();
    let mut malformed = 0u64;
    for line in source.lines() {
        match parse_pageviews_line(&line?, filter) {
            Ok(Some(record)) => totals.add(record)?,
            Ok(None) => {}
            Err(UsageError::Malformed(line)) => {
                log::debug!("skipping malformed pageviews line {line:?}");
                malformed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((totals, malformed))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadershipRecord {
    pub language: String,
    pub country: String,
    pub readers: u64,
    pub views_from: u64,
}

pub type Readership = BTreeMap<String, Vec<ReadershipRecord>>;

#[derive(Deserialize)]
struct ReadershipRow {
    language: String,
    country: String,
    readers: i64,
    views_from: i64,
}

/// Parse the `language,country,readers,views_from` CSV, grouped by language.
pub fn parse_readership_table<R: Read>(source: R) -> Result<Readership, UsageError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    for column in ["language", "country", "readers", "views_from"] {
        if !headers.iter().any(|h| h == column) {
            return Err(UsageError::Readership {
                row: 1,
                message: format!("missing column {column:?}"),
            });
        }
    }
    let mut seen = BTreeSet::new();
    let mut table = Readership::new();
    for (i, row) in reader.deserialize::<ReadershipRow>().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(|e| UsageError::Readership {
            row: row_no,
            message: e.to_string(),
        })?;
        let (Ok(readers), Ok(views_from)) = (u64::try_from(row.readers), u64::try_from(row.views_from)) else {
            return Err(UsageError::Readership {
                row: row_no,
                message: "negative count".into(),
            });
        };
        if row.language.is_empty() || row.country.is_empty() {
            return Err(UsageError::Readership {
                row: row_no,
                message: "empty language or country".into(),
            });
        }
        if !seen.insert((row.language.clone(), row.country.clone())) {
            return Err(UsageError::DuplicateReadership {
                language: row.language,
                country: row.country,
            });
        }
        table.entry(row.language.clone()).or_default().push(ReadershipRecord {
            language: row.language,
            country: row.country,
            readers,
            views_from,
        });
    }
    Ok(table)
}
