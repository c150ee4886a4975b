//! Output artifacts: the sorted metrics table, bubble-chart data, and SVG.

mod chart;
mod svg;
mod table;

use thiserror::Error;

pub use chart::{emit_chart_data, ChartData, ChartDatum, ColorBucket, Scale};
pub use svg::{emit_svg, AxisLimits};
pub use table::{emit_table, format_percent, sort_by_ravs};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to plot")]
    EmptyChart,
    #[error("invalid axis limits {min}..{max} for {scale} scale")]
    BadLimits { min: f64, max: f64, scale: Scale },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
