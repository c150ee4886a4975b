//! Measure how much of each Wikipedia language edition covers topics related
//! to one country, from a Wikidata entity dump, pageview dumps, and a
//! readership-by-country table.
//!
//! The flow is: [`ingest`] projects the dump into slim records, [`attribution`]
//! decides which items relate to the target country, [`usage`] totals
//! pageviews, [`metrics`] computes per-language shares, [`clusters`] pools
//! them by cultural cluster, and [`report`] renders tables and charts.
//! [`pipeline`] runs everything end to end.

pub mod attribution;
pub mod clusters;
pub mod id;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod usage;

pub use attribution::{
    attribute_all, attribute_item, build_geo_index, resolve_place_country, AttributionResult, Attributions, GeoIndex,
    ProvenancePath, RuleSet,
};
pub use clusters::{aggregate_cluster, assign_clusters, Aggregation, ClusterMap, ClusterRow};
pub use id::{EntityId, EntityKind};
pub use ingest::{parse_dump_stream, read_slim_store, write_slim_store, ClaimValue, KeepSet, SlimEntity};
pub use metrics::{
    build_article_sets, compute_all, compute_ppcrw, compute_ras, compute_ravs, compute_vpc, primary_country,
    LanguageArticleSet, MetricsRow, Share,
};
pub use pipeline::{run_pipeline, EntitySource, PipelineError, RunConfig, RunManifest, Stage};
pub use report::{emit_chart_data, emit_svg, emit_table, AxisLimits, ChartData, ChartDatum, ColorBucket, Scale};
pub use usage::{
    aggregate_views, parse_pageviews_line, parse_readership_table, ReadershipRecord, ViewRecord, ViewTotals,
};
