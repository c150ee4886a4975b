//! Cultural-cluster aggregation of per-language metrics.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::metrics::{MetricsRow, Share};

/// Inglehart-Welzel cluster assignments shipped with the crate.
pub const DEFAULT_CLUSTER_MAP: &str = include_str!("../assets/cluster_map.csv");

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("country {country} assigned to both {first:?} and {second:?}")]
    ConflictingAssignment {
        country: String,
        first: String,
        second: String,
    },
    #[error("cluster map row {row}: {message}")]
    MapRow { row: usize, message: String },
    #[error("cluster has no members")]
    NoMembers,
    #[error("{0} share undefined: zero pooled denominator")]
    Undefined(&'static str),
    #[error("unknown aggregation mode {0:?}")]
    UnknownMode(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterMap {
    by_country: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct MapRow {
    country: String,
    cluster: String,
}

impl ClusterMap {
    pub fn parse<R: Read>(source: R) -> Result<Self, ClusterError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(source);
        let mut map = ClusterMap::default();
        for (i, row) in reader.deserialize::<MapRow>().enumerate() {
            let row = row.map_err(|e| ClusterError::MapRow {
                row: i + 2,
                message: e.to_string(),
            })?;
            if row.country.is_empty() || row.cluster.is_empty() {
                return Err(ClusterError::MapRow {
                    row: i + 2,
                    message: "empty field".into(),
                });
            }
            map.insert(row.country, row.cluster)?;
        }
        Ok(map)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CLUSTER_MAP.as_bytes()).expect("bundled cluster map is valid")
    }

    pub fn insert(&mut self, country: String, cluster: String) -> Result<(), ClusterError> {
        match self.by_country.get(&country) {
            Some(existing) if *existing != cluster => Err(ClusterError::ConflictingAssignment {
                country,
                first: existing.clone(),
                second: cluster,
            }),
            _ => {
                self.by_country.insert(country, cluster);
                Ok(())
            }
        }
    }

    pub fn cluster_of(&self, country: &str) -> Option<&str> {
        self.by_country.get(country).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_country.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_country.is_empty()
    }
}

/// Rows partitioned by cluster, plus rows whose primary country has no cluster.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterAssignment {
    pub clusters: BTreeMap<String, Vec<MetricsRow>>,
    pub unassigned: Vec<MetricsRow>,
}

pub fn assign_clusters(rows: &[MetricsRow], map: &ClusterMap) -> ClusterAssignment {
    let mut assignment = ClusterAssignment::default();
    for row in rows {
        match map.cluster_of(&row.primary_country) {
            Some(cluster) => assignment
                .clusters
                .entry(cluster.to_owned())
                .or_default()
                .push(row.clone()),
            None => {
                log::warn!(
                    "{}: primary country {} has no cluster",
                    row.language,
                    row.primary_country
                );
                assignment.unassigned.push(row.clone());
            }
        }
    }
    assignment
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum of numerators over sum of denominators.
    #[default]
    Pooled,
    /// Unweighted mean of member shares.
    Mean,
}

impl FromStr for Aggregation {
    type Err = ClusterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "mean" => Ok(Self::Mean),
            other => Err(ClusterError::UnknownMode(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRow {
    pub cluster: String,
    /// Views-based share.
    pub popularity_share: f64,
    /// Article-count-based share.
    pub article_share: f64,
    pub member_languages: Vec<String>,
}

fn pooled(pairs: impl Iterator<Item = (u64, u64)>, name: &'static str) -> Result<f64, ClusterError> {
    let (num, den) = pairs.fold((0u128, 0u128), |(n, d), (a, b)| (n + u128::from(a), d + u128::from(b)));
    if den == 0 {
        return Err(ClusterError::Undefined(name));
    }
    // Exact for realistic totals; u128 keeps the sums from overflowing.
    Ok(num as f64 / den as f64)
}

fn mean(shares: impl Iterator<Item = Option<Share>>, name: &'static str) -> Result<f64, ClusterError> {
    let mut values = shares
        .map(|s| s.map(|s| s.value()).ok_or(ClusterError::Undefined(name)))
        .collect::<Result<Vec<_>, _>>()?;
    // fixed summation order, so member order cannot change the last bit
    values.sort_by(f64::total_cmp);
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn aggregate_cluster(cluster: &str, members: &[MetricsRow], mode: Aggregation) -> Result<ClusterRow, ClusterError> {
    if members.is_empty() {
        return Err(ClusterError::NoMembers);
    }
    let (popularity_share, article_share) = match mode {
        Aggregation::Pooled => (
            pooled(members.iter().map(|m| (m.related_views, m.total_views)), "popularity")?,
            pooled(
                members.iter().map(|m| (m.related_article_count, m.article_count)),
                "article",
            )?,
        ),
        Aggregation::Mean => (
            mean(members.iter().map(MetricsRow::ravs), "popularity")?,
            mean(members.iter().map(MetricsRow::ras), "article")?,
        ),
    };
    let mut member_languages: Vec<String> = members.iter().map(|m| m.language.clone()).collect();
    member_languages.sort();
    Ok(ClusterRow {
        cluster: cluster.to_owned(),
        popularity_share,
        article_share,
        member_languages,
    })
}

/// Aggregate every cluster of an assignment, in cluster-name order.
pub fn aggregate_all(assignment: &ClusterAssignment, mode: Aggregation) -> Result<Vec<ClusterRow>, ClusterError> {
    assignment
        .clusters
        .iter()
        .map(|(name, members)| aggregate_cluster(name, members, mode))
        .collect()
}

/// `cluster<TAB>popularity_share<TAB>article_share<TAB>languages`.
pub fn write_clusters<W: Write>(rows: &[ClusterRow], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "cluster\tpopularity_share\tarticle_share\tlanguages")?;
    for row in rows {
        writeln!(
            sink,
            "{}\t{:.6}\t{:.6}\t{}",
            row.cluster,
            row.popularity_share,
            row.article_share,
            row.member_languages.join(",")
        )?;
    }
    sink.flush()
}
