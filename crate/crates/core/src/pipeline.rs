//! End-to-end run: dump or store → geo index → attribution → usage →
//! metrics → clusters → reports.
//!
//! Artifacts are staged under `<out>/.partial` and moved into `<out>` only
//! after every stage succeeds.

use std::collections::{BTreeMap, BTreeSet};
use std::error::Error as StdError;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attribution::{attribute_all, write_attributions, GeoIndex, RuleSet};
use crate::clusters::{aggregate_all, assign_clusters, write_clusters, Aggregation, ClusterMap};
use crate::id::EntityId;
use crate::ingest::{parse_dump_stream, read_slim_store, wiki_code, write_slim_store, KeepSet, SlimEntity, StoreError};
use crate::metrics::{compute_all, write_metrics, ArticleSetBuilder, MetricsInputs};
use crate::report::{emit_chart_data, emit_svg, emit_table, AxisLimits, Scale};
use crate::usage::{parse_readership_table, read_pageviews, LanguageFilter, ViewTotals};

pub const METRICS_FILE: &str = "metrics.tsv";
pub const TABLE_FILE: &str = "table.tsv";
pub const CLUSTERS_FILE: &str = "clusters.tsv";
pub const ATTRIBUTION_FILE: &str = "attribution.tsv";
pub const CHART_JSON_FILE: &str = "chart.json";
pub const CHART_SVG_FILE: &str = "chart.svg";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STORE_FILE: &str = "entities.wcm";

const PARTIAL_DIR: &str = ".partial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    GeoIndex,
    Attribution,
    Usage,
    Metrics,
    Clusters,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::GeoIndex => "geo-index",
            Stage::Attribution => "attribution",
            Stage::Usage => "usage",
            Stage::Metrics => "metrics",
            Stage::Clusters => "clusters",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn StdError + Send + Sync>,
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: Into<Box<dyn StdError + Send + Sync>>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

/// Where entities come from: a raw JSON dump or a previously written store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntitySource {
    Dump(PathBuf),
    Store(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub entities: EntitySource,
    pub pageviews: Vec<PathBuf>,
    pub readership: PathBuf,
    /// Rules file; defaults apply when absent.
    pub rules: Option<PathBuf>,
    pub target: Option<EntityId>,
    /// Country → cluster CSV; the bundled map is used when absent.
    pub cluster_map: Option<PathBuf>,
    pub languages: Vec<String>,
    pub out_dir: PathBuf,
    pub scale: Scale,
    pub aggregation: Aggregation,
    pub limits: Option<AxisLimits>,
    pub svg: bool,
}

impl RunConfig {
    pub fn new(entities: EntitySource, readership: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            entities,
            pageviews: Vec::new(),
            readership: readership.into(),
            rules: None,
            target: None,
            cluster_map: None,
            languages: Vec::new(),
            out_dir: out_dir.into(),
            scale: Scale::Log,
            aggregation: Aggregation::Pooled,
            limits: None,
            svg: true,
        }
    }

    pub fn load_rules(&self) -> Result<RuleSet, Box<dyn StdError + Send + Sync>> {
        let mut rules = match &self.rules {
            Some(path) => fs::read_to_string(path)?.parse()?,
            None => RuleSet::default(),
        };
        if let Some(target) = self.target {
            rules.target = target;
        }
        rules.validate()?;
        Ok(rules)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunManifest {
    pub inputs: Vec<InputDigest>,
    pub rules: String,
    pub languages: Vec<String>,
    pub entities: u64,
    pub geo_index_entries: u64,
    pub related_items: u64,
    pub dump_malformed_lines: u64,
    pub pageview_entries: u64,
    pub pageview_malformed_lines: u64,
    pub metric_rows: u64,
    pub failed_languages: BTreeMap<String, String>,
    pub unassigned_languages: Vec<String>,
    pub chart_dropped: u64,
    pub outputs: Vec<String>,
}

pub fn file_digest(path: &Path) -> io::Result<(u64, String)> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        bytes += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((bytes, hex::encode(hasher.finalize())))
}

fn digest(role: &str, path: &Path) -> io::Result<InputDigest> {
    let (bytes, sha256) = file_digest(path)?;
    Ok(InputDigest {
        role: role.to_owned(),
        path: path.display().to_string(),
        bytes,
        sha256,
    })
}

/// Keep-set needed to run `rules` over `languages`.
pub fn keep_set_for(rules: &RuleSet, languages: &BTreeSet<String>) -> KeepSet {
    KeepSet {
        props: rules.required_props(),
        wikis: languages.iter().map(|l| wiki_code(l)).collect(),
    }
}

/// Parse a dump into a SlimStore file. Returns (records written, malformed lines).
pub fn slim_dump(dump: &Path, keep: &KeepSet, store: &Path) -> Result<(u64, u64), Box<dyn StdError + Send + Sync>> {
    let reader = BufReader::with_capacity(1 << 20, File::open(dump)?);
    slim_stream(reader, keep, BufWriter::new(File::create(store)?))
}

/// [`slim_dump`] over any reader and sink, e.g. a decompressor on stdin.
pub fn slim_stream<R: BufRead, W: Write>(
    dump: R,
    keep: &KeepSet,
    sink: W,
) -> Result<(u64, u64), Box<dyn StdError + Send + Sync>> {
    let mut parser = parse_dump_stream(dump, keep.clone());
    // the store is sorted by id, so records are gathered before writing
    let entities = parser.by_ref().collect::<Result<Vec<SlimEntity>, _>>()?;
    let tally = parser.into_tally();
    for sample in tally.samples().iter().take(10) {
        log::warn!("dump line {}: {}", sample.line, sample.reason);
    }
    let written = write_slim_store(entities, keep, sink)?;
    Ok((written, tally.count()))
}

/// Stream a store, handing each entity to `visit`.
pub fn for_each_stored(
    store: &Path,
    mut visit: impl FnMut(SlimEntity) -> Result<(), Box<dyn StdError + Send + Sync>>,
) -> Result<(), Box<dyn StdError + Send + Sync>> {
    let reader = read_slim_store(BufReader::with_capacity(1 << 20, File::open(store)?))?;
    for entity in reader {
        visit(entity?)?;
    }
    Ok(())
}

fn check_store_covers(store: &Path, keep: &KeepSet) -> Result<(), Box<dyn StdError + Send + Sync>> {
    let reader = read_slim_store(BufReader::new(File::open(store)?))?;
    let header = reader.header();
    let missing_props: Vec<String> = keep
        .props
        .difference(&header.keep.props)
        .map(ToString::to_string)
        .collect();
    let missing_wikis: Vec<&String> = keep.wikis.difference(&header.keep.wikis).collect();
    if !missing_props.is_empty() || !missing_wikis.is_empty() {
        return Err(Box::new(StoreError::Corrupt(format!(
            "store was built without {missing_props:?} {missing_wikis:?}"
        ))));
    }
    Ok(())
}

/// Run every stage. On success the artifacts are in `config.out_dir` and the
/// manifest is returned.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest, PipelineError> {
    fs::create_dir_all(&config.out_dir).at(Stage::Config)?;
    let staging = config.out_dir.join(PARTIAL_DIR);
    if staging.exists() {
        fs::remove_dir_all(&staging).at(Stage::Config)?;
    }
    fs::create_dir_all(&staging).at(Stage::Config)?;
    let result = run_stages(config, &staging);
    match result {
        Ok(manifest) => {
            for name in &manifest.outputs {
                fs::rename(staging.join(name), config.out_dir.join(name)).at(Stage::Report)?;
            }
            fs::remove_dir_all(&staging).at(Stage::Report)?;
            Ok(manifest)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

fn run_stages(config: &RunConfig, staging: &Path) -> Result<RunManifest, PipelineError> {
    let mut manifest = RunManifest::default();
    let languages: BTreeSet<String> = config.languages.iter().cloned().collect();
    if languages.is_empty() {
        return Err("no languages configured").at(Stage::Config);
    }
    manifest.languages = languages.iter().cloned().collect();
    let rules = config.load_rules().at(Stage::Config)?;
    manifest.rules = rules.render();
    if let Some(path) = &config.rules {
        manifest.inputs.push(digest("rules", path).at(Stage::Config)?);
    }
    let keep = keep_set_for(&rules, &languages);

    let store = match &config.entities {
        EntitySource::Dump(dump) => {
            manifest.inputs.push(digest("dump", dump).at(Stage::Ingest)?);
            let store = staging.join(STORE_FILE);
            let (_, malformed) = slim_dump(dump, &keep, &store).at(Stage::Ingest)?;
            manifest.dump_malformed_lines = malformed;
            manifest.outputs.push(STORE_FILE.to_owned());
            store
        }
        EntitySource::Store(store) => {
            manifest.inputs.push(digest("store", store).at(Stage::Ingest)?);
            check_store_covers(store, &keep).at(Stage::Ingest)?;
            store.clone()
        }
    };

    // first pass
    let mut index = GeoIndex::default();
    for_each_stored(&store, |entity| {
        index.add(&entity, &rules);
        Ok(())
    })
    .at(Stage::GeoIndex)?;
    manifest.geo_index_entries = index.len() as u64;

    // second pass: attribution and article sets share one read of the store
    let reader = read_slim_store(BufReader::with_capacity(
        1 << 20,
        File::open(&store).at(Stage::Attribution)?,
    ))
    .at(Stage::Attribution)?;
    let mut builder = ArticleSetBuilder::new(&languages);
    let mut store_err = None;
    let mut sets_err = None;
    let mut seen = 0u64;
    let stream = reader
        .map_while(|entity| entity.map_err(|e| store_err = Some(e)).ok())
        .inspect(|entity| {
            seen += 1;
            if let Err(e) = builder.add(entity) {
                sets_err.get_or_insert(e);
            }
        });
    let attributions = attribute_all(stream, &index, &rules).at(Stage::Attribution)?;
    if let Some(e) = store_err {
        return Err(e).at(Stage::Attribution);
    }
    if let Some(e) = sets_err {
        return Err(e).at(Stage::Attribution);
    }
    manifest.entities = seen;
    let article_sets = builder.finish();
    manifest.related_items = attributions.values().filter(|r| r.related()).count() as u64;
    write_attributions(
        &attributions,
        BufWriter::new(File::create(staging.join(ATTRIBUTION_FILE)).at(Stage::Attribution)?),
    )
    .at(Stage::Attribution)?;
    manifest.outputs.push(ATTRIBUTION_FILE.to_owned());

    let filter = LanguageFilter::only(languages.iter().cloned());
    let mut views = ViewTotals::default();
    for path in &config.pageviews {
        manifest.inputs.push(digest("pageviews", path).at(Stage::Usage)?);
        let file = File::open(path).at(Stage::Usage)?;
        let (totals, malformed) = read_pageviews(BufReader::new(file), &filter).at(Stage::Usage)?;
        manifest.pageview_malformed_lines += malformed;
        views.merge(totals).at(Stage::Usage)?;
    }
    manifest.pageview_entries = views.len() as u64;

    manifest
        .inputs
        .push(digest("readership", &config.readership).at(Stage::Metrics)?);
    let readership = parse_readership_table(File::open(&config.readership).at(Stage::Metrics)?).at(Stage::Metrics)?;
    let inputs = MetricsInputs {
        article_sets: &article_sets,
        attributions: &attributions,
        views: &views,
        readership: &readership,
    };
    let mut rows = Vec::new();
    for (language, result) in compute_all(languages.iter().map(String::as_str), &inputs) {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("{language}: {e}");
                manifest.failed_languages.insert(language, e.to_string());
            }
        }
    }
    if rows.is_empty() {
        return Err("no language produced metrics").at(Stage::Metrics);
    }
    manifest.metric_rows = rows.len() as u64;
    write_metrics(
        &rows,
        BufWriter::new(File::create(staging.join(METRICS_FILE)).at(Stage::Metrics)?),
    )
    .at(Stage::Metrics)?;
    manifest.outputs.push(METRICS_FILE.to_owned());

    let cluster_map = match &config.cluster_map {
        Some(path) => {
            manifest.inputs.push(digest("cluster_map", path).at(Stage::Clusters)?);
            ClusterMap::parse(File::open(path).at(Stage::Clusters)?).at(Stage::Clusters)?
        }
        None => ClusterMap::bundled(),
    };
    let assignment = assign_clusters(&rows, &cluster_map);
    manifest.unassigned_languages = assignment.unassigned.iter().map(|r| r.language.clone()).collect();
    let cluster_rows = aggregate_all(&assignment, config.aggregation).at(Stage::Clusters)?;
    write_clusters(
        &cluster_rows,
        BufWriter::new(File::create(staging.join(CLUSTERS_FILE)).at(Stage::Clusters)?),
    )
    .at(Stage::Clusters)?;
    manifest.outputs.push(CLUSTERS_FILE.to_owned());

    emit_table(
        &rows,
        BufWriter::new(File::create(staging.join(TABLE_FILE)).at(Stage::Report)?),
    )
    .at(Stage::Report)?;
    manifest.outputs.push(TABLE_FILE.to_owned());
    let chart = emit_chart_data(&rows, config.scale);
    manifest.chart_dropped = chart.dropped;
    fs::write(staging.join(CHART_JSON_FILE), chart.to_json().at(Stage::Report)?).at(Stage::Report)?;
    manifest.outputs.push(CHART_JSON_FILE.to_owned());
    if config.svg && !chart.data.is_empty() {
        let limits = config.limits.unwrap_or_else(|| AxisLimits::default_for(config.scale));
        fs::write(
            staging.join(CHART_SVG_FILE),
            emit_svg(&chart, limits).at(Stage::Report)?,
        )
        .at(Stage::Report)?;
        manifest.outputs.push(CHART_SVG_FILE.to_owned());
    }

    manifest.outputs.push(MANIFEST_FILE.to_owned());
    let json = serde_json::to_string_pretty(&manifest).at(Stage::Report)? + "\n";
    fs::write(staging.join(MANIFEST_FILE), json).at(Stage::Report)?;
    Ok(manifest)
}
