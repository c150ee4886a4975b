use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{sort_by_ravs, ReportError};
use crate::metrics::{MetricsRow, Share};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Log,
    Linear,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Log => "log",
            Scale::Linear => "linear",
        })
    }
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log" => Ok(Scale::Log),
            "linear" => Ok(Scale::Linear),
            other => Err(format!("unknown scale {other:?} (expected log or linear)")),
        }
    }
}

/// Red below 50% primary-country readership (integer percent), blue from 50%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorBucket {
    Red,
    Blue,
}

impl ColorBucket {
    pub fn for_ppcrw(ppcrw: Share) -> Self {
        if ppcrw.rounded_percent() <= 49 {
            ColorBucket::Red
        } else {
            ColorBucket::Blue
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartDatum {
    pub lang: String,
    /// Related-article share.
    pub x: f64,
    /// Related-views share.
    pub y: f64,
    /// Article count.
    pub size: u64,
    pub color: ColorBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartData {
    pub scale: Scale,
    /// Rows left out because a log axis cannot place a zero.
    pub dropped: u64,
    pub data: Vec<ChartDatum>,
}

impl ChartData {
    pub fn to_json(&self) -> Result<String, ReportError> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        Ok(json)
    }
}

/// Chart points in table order. Under a log scale, rows with a zero share are dropped.
pub fn emit_chart_data(rows: &[MetricsRow], scale: Scale) -> ChartData {
    let mut dropped = 0;
    let mut data = Vec::new();
    for row in sort_by_ravs(rows) {
        let (Some(ras), Some(ravs)) = (row.ras(), row.ravs()) else {
            dropped += 1;
            continue;
        };
        if scale == Scale::Log && (ras.numerator() == 0 || ravs.numerator() == 0) {
            log::warn!("{}: zero share cannot be placed on a log axis", row.language);
            dropped += 1;
            continue;
        }
        data.push(ChartDatum {
            lang: row.language.clone(),
            x: ras.value(),
            y: ravs.value(),
            size: row.article_count,
            color: ColorBucket::for_ppcrw(row.ppcrw),
        });
    }
    ChartData { scale, dropped, data }
}
