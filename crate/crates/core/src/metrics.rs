//! Per-language coverage metrics.
//!
//! - `ppcrw`: share of a language's readers located in its primary country.
//! - `vpc`: share of a language's views coming from its primary country.
//! - `ras`: share of the language's articles related to the target country.
//! - `ravs`: share of the language's article views going to related articles.
//!
//! All four are kept as exact [`Share`] fractions; conversion to decimals
//! happens only when rendering.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::attribution::Attributions;
use crate::id::EntityId;
use crate::ingest::{wiki_code, SlimEntity};
use crate::usage::{normalize_title, ReadershipRecord, ViewTotals};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{language}:{title} is claimed by both {first} and {second}")]
    TitleConflict {
        language: String,
        title: String,
        first: EntityId,
        second: EntityId,
    },
    #[error("no readership data")]
    NoReadership,
    #[error("primary country {0} missing from readership")]
    UnknownPrimary(String),
    #[error("{0} is undefined: zero denominator")]
    Undefined(&'static str),
    #[error("no attribution for {0}")]
    MissingAttribution(EntityId),
    #[error("{0} overflows")]
    Overflow(&'static str),
    #[error("metrics file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Exact fraction `num / den` with `num <= den` and `den > 0`.
#[derive(Debug, Clone, Copy)]
pub struct Share {
    num: u64,
    den: u64,
}

impl Share {
    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0 && num <= den).then_some(Self { num, den })
    }

    pub fn one() -> Self {
        Self { num: 1, den: 1 }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Percentage rounded half-up to an integer, computed exactly.
    pub fn rounded_percent(&self) -> u64 {
        let (num, den) = (u128::from(self.num), u128::from(self.den));
        ((200 * num + den) / (2 * den)) as u64
    }

    /// Parse a decimal fraction such as `0.601234` (as written by [`write_metrics`]).
    pub fn from_decimal(s: &str) -> Option<Self> {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || int.is_empty() {
            return None;
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = int.parse().ok()?;
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
        Share::new(int.checked_mul(den)?.checked_add(frac)?, den)
    }
}

impl PartialEq for Share {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Share {}

impl PartialOrd for Share {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Share {
    fn cmp(&self, other: &Self) -> Ordering {
        (u128::from(self.num) * u128::from(other.den)).cmp(&(u128::from(other.num) * u128::from(self.den)))
    }
}

impl fmt::Display for Share {
    /// Six decimal places.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let scaled = (u128::from(self.num) * 2_000_000 + u128::from(self.den)) / (2 * u128::from(self.den));
        write!(f, "{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
    }
}

/// Titles of one language edition and the item owning each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageArticleSet {
    pub language: String,
    pub articles: BTreeMap<String, EntityId>,
}

impl LanguageArticleSet {
    pub fn new(language: impl Into<String>) -> Self {
        Self {
            language: language.into(),
            articles: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn insert(&mut self, title: &str, item: EntityId) -> Result<(), MetricsError> {
        let title = normalize_title(title);
        match self.articles.get(&title) {
            Some(&first) if first != item => Err(MetricsError::TitleConflict {
                language: self.language.clone(),
                title,
                first,
                second: item,
            }),
            Some(_) => Ok(()),
            None => {
                self.articles.insert(title, item);
                Ok(())
            }
        }
    }
}

pub type ArticleSets = BTreeMap<String, LanguageArticleSet>;

/// Collect sitelinked titles for each requested language.
pub fn build_article_sets<E: Borrow<SlimEntity>>(
    entities: impl IntoIterator<Item = E>,
    languages: &BTreeSet<String>,
) -> Result<ArticleSets, MetricsError> {
    let mut sets = ArticleSetBuilder::new(languages);
    for entity in entities {
        sets.add(entity.borrow())?;
    }
    Ok(sets.finish())
}

/// Incremental form of [`build_article_sets`] for streaming passes.
pub struct ArticleSetBuilder {
    by_wiki: BTreeMap<String, LanguageArticleSet>,
}

impl ArticleSetBuilder {
    pub fn new(languages: &BTreeSet<String>) -> Self {
        Self {
            by_wiki: languages
                .iter()
                .map(|l| (wiki_code(l), LanguageArticleSet::new(l.clone())))
                .collect(),
        }
    }

    pub fn add(&mut self, entity: &SlimEntity) -> Result<(), MetricsError> {
        for (wiki, title) in &entity.sitelinks {
            if let Some(set) = self.by_wiki.get_mut(wiki) {
                set.insert(title, entity.id)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> ArticleSets {
        self.by_wiki
            .into_values()
            .map(|set| (set.language.clone(), set))
            .collect()
    }
}

/// Country with the most readers; ties go to the smallest country code.
pub fn primary_country(readership: &[ReadershipRecord]) -> Result<&str, MetricsError> {
    readership
        .iter()
        .max_by(|a, b| a.readers.cmp(&b.readers).then_with(|| b.country.cmp(&a.country)))
        .map(|r| r.country.as_str())
        .ok_or(MetricsError::NoReadership)
}

fn primary_share(
    readership: &[ReadershipRecord],
    primary: &str,
    field: fn(&ReadershipRecord) -> u64,
    name: &'static str,
) -> Result<Share, MetricsError> {
    let record = readership
        .iter()
        .find(|r| r.country == primary)
        .ok_or_else(|| MetricsError::UnknownPrimary(primary.to_owned()))?;
    let total = readership
        .iter()
        .try_fold(0u64, |acc, r| acc.checked_add(field(r)))
        .ok_or(MetricsError::Overflow(name))?;
    Share::new(field(record), total).ok_or(MetricsError::Undefined(name))
}

pub fn compute_ppcrw(readership: &[ReadershipRecord], primary: &str) -> Result<Share, MetricsError> {
    primary_share(readership, primary, |r| r.readers, "ppcrw")
}

pub fn compute_vpc(readership: &[ReadershipRecord], primary: &str) -> Result<Share, MetricsError> {
    primary_share(readership, primary, |r| r.views_from, "vpc")
}

/// Related-article share. Returns the share with its related and total counts.
pub fn compute_ras(
    articles: &LanguageArticleSet,
    attributions: &Attributions,
) -> Result<(Share, u64, u64), MetricsError> {
    let mut related = 0u64;
    for item in articles.articles.values() {
        let result = attributions.get(item).ok_or(MetricsError::MissingAttribution(*item))?;
        if result.related() {
            related += 1;
        }
    }
    let total = articles.len() as u64;
    let share = Share::new(related, total).ok_or(MetricsError::Undefined("ras"))?;
    Ok((share, related, total))
}

/// Related-views share over titles in the article set; views elsewhere are ignored.
pub fn compute_ravs(
    articles: &LanguageArticleSet,
    attributions: &Attributions,
    views: &ViewTotals,
) -> Result<(Share, u64, u64), MetricsError> {
    let mut related = 0u64;
    let mut total = 0u64;
    for (title, item) in &articles.articles {
        let result = attributions.get(item).ok_or(MetricsError::MissingAttribution(*item))?;
        let v = views.get(&articles.language, title);
        total = total.checked_add(v).ok_or(MetricsError::Overflow("ravs"))?;
        if result.related() {
            related += v;
        }
    }
    let share = Share::new(related, total).ok_or(MetricsError::Undefined("ravs"))?;
    Ok((share, related, total))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricsRow {
    pub language: String,
    pub primary_country: String,
    pub ppcrw: Share,
    pub vpc: Share,
    pub article_count: u64,
    pub related_article_count: u64,
    pub total_views: u64,
    pub related_views: u64,
}

impl MetricsRow {
    pub fn ras(&self) -> Option<Share> {
        Share::new(self.related_article_count, self.article_count)
    }

    pub fn ravs(&self) -> Option<Share> {
        Share::new(self.related_views, self.total_views)
    }
}

/// Everything [`compute_all`] reads.
pub struct MetricsInputs<'a> {
    pub article_sets: &'a ArticleSets,
    pub attributions: &'a Attributions,
    pub views: &'a ViewTotals,
    pub readership: &'a crate::usage::Readership,
}

pub fn compute_row(language: &str, inputs: &MetricsInputs) -> Result<MetricsRow, MetricsError> {
    let readership = inputs.readership.get(language).map(Vec::as_slice).unwrap_or_default();
    let primary = primary_country(readership)?;
    let ppcrw = compute_ppcrw(readership, primary)?;
    let vpc = compute_vpc(readership, primary)?;
    let empty = LanguageArticleSet::new(language);
    let articles = inputs.article_sets.get(language).unwrap_or(&empty);
    let (_, related_article_count, article_count) = compute_ras(articles, inputs.attributions)?;
    let (_, related_views, total_views) = compute_ravs(articles, inputs.attributions, inputs.views)?;
    Ok(MetricsRow {
        language: language.to_owned(),
        primary_country: primary.to_owned(),
        ppcrw,
        vpc,
        article_count,
        related_article_count,
        total_views,
        related_views,
    })
}

/// One result per language, in the given order. A failing language does not
/// stop the others.
pub fn compute_all<'l>(
    languages: impl IntoIterator<Item = &'l str>,
    inputs: &MetricsInputs,
) -> Vec<(String, Result<MetricsRow, MetricsError>)> {
    languages
        .into_iter()
        .map(|language| (language.to_owned(), compute_row(language, inputs)))
        .collect()
}

const METRICS_HEADER: &str = "language\tprimary_country\tppcrw\tvpc\tras\travs\tarticle_count\trelated_article_count\ttotal_views\trelated_views";

/// Write rows as metrics TSV, six decimal places per fraction.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "{METRICS_HEADER}")?;
    for row in rows {
        let show = |s: Option<Share>| s.map_or_else(|| "NA".to_owned(), |s| s.to_string());
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.language,
            row.primary_country,
            row.ppcrw,
            row.vpc,
            show(row.ras()),
            show(row.ravs()),
            row.article_count,
            row.related_article_count,
            row.total_views,
            row.related_views
        )?;
    }
    sink.flush()
}

/// Read metrics TSV. PPCRW and VPC come back as six-decimal fractions; the
/// article and view shares are rebuilt exactly from the raw counts.
pub fn read_metrics<R: BufRead>(source: R) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut rows = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let parse = |message: String| MetricsError::Parse { line: i + 1, message };
        let line = line.map_err(|e| parse(e.to_string()))?;
        if i == 0 {
            if line != METRICS_HEADER {
                return Err(parse(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(parse(format!("expected 10 fields, got {}", fields.len())));
        }
        let share = |s: &str| Share::from_decimal(s).ok_or_else(|| parse(format!("bad fraction {s:?}")));
        let count = |s: &str| s.parse::<u64>().map_err(|_| parse(format!("bad count {s:?}")));
        let row = MetricsRow {
            language: fields[0].to_owned(),
            primary_country: fields[1].to_owned(),
            ppcrw: share(fields[2])?,
            vpc: share(fields[3])?,
            article_count: count(fields[6])?,
            related_article_count: count(fields[7])?,
            total_views: count(fields[8])?,
            related_views: count(fields[9])?,
        };
        if row.related_article_count > row.article_count || row.related_views > row.total_views {
            return Err(parse("related count exceeds total".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}
