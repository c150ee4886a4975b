use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use langcov::attribution::{read_attributions, write_attributions};
use langcov::clusters::{aggregate_all, write_clusters};
use langcov::metrics::{compute_all, read_metrics, write_metrics, ArticleSetBuilder, MetricsInputs};
use langcov::pipeline::{for_each_stored, keep_set_for, slim_stream};
use langcov::usage::{read_pageviews, LanguageFilter};
use langcov::{
    assign_clusters, attribute_all, emit_chart_data, emit_svg, emit_table, parse_readership_table, read_slim_store,
    run_pipeline, Aggregation, AxisLimits, ClusterMap, EntityId, EntitySource, GeoIndex, RuleSet, RunConfig, Scale,
    ViewTotals,
};

/// Country-coverage metrics for Wikipedia language editions.
#[derive(Parser)]
#[command(name = "langcov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Project a Wikidata JSON dump into a slim store.
    Slim {
        /// Decompressed dump, or `-` for stdin.
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        langs: Languages,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Decide which store items relate to the target country.
    Attribute {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        rules: RuleArgs,
    },
    /// Total hourly pageview files per (language, title).
    Usage {
        #[arg(long, num_args = 1.., required = true)]
        pageviews: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        langs: Languages,
    },
    /// Per-language shares from a store, attributions, views and readership.
    Metrics {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        attribution: PathBuf,
        #[arg(long)]
        views: PathBuf,
        #[arg(long)]
        readership: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        langs: Languages,
    },
    /// Pool metrics rows by cultural cluster.
    Clusters {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cluster_map: Option<PathBuf>,
        #[arg(long, default_value = "pooled")]
        aggregation: Aggregation,
    },
    /// Table, chart data and SVG from a metrics file.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        chart: ChartArgs,
    },
    /// Every stage in one go.
    All {
        /// Decompressed dump.
        #[arg(long, conflicts_with = "store", required_unless_present = "store")]
        dump: Option<PathBuf>,
        /// Existing slim store instead of a dump.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        pageviews: Vec<PathBuf>,
        #[arg(long)]
        readership: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cluster_map: Option<PathBuf>,
        #[arg(long, default_value = "pooled")]
        aggregation: Aggregation,
        #[command(flatten)]
        langs: Languages,
        #[command(flatten)]
        rules: RuleArgs,
        #[command(flatten)]
        chart: ChartArgs,
    },
}

#[derive(Args)]
struct Languages {
    /// Comma-separated language codes, e.g. `en,de,es`.
    #[arg(long, value_delimiter = ',', required = true)]
    languages: Vec<String>,
}

impl Languages {
    fn set(&self) -> BTreeSet<String> {
        self.languages
            .iter()
            .map(|l| l.trim().to_owned())
            .filter(|l| !l.is_empty())
            .collect()
    }
}

#[derive(Args)]
struct RuleArgs {
    /// Attribution rules file (`key=value` lines).
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Target country item, overriding the rules file.
    #[arg(long)]
    target: Option<EntityId>,
}

impl RuleArgs {
    fn load(&self) -> Result<RuleSet> {
        let mut rules = match &self.rules {
            Some(path) => read_text(path)?
                .parse()
                .with_context(|| format!("rules file {}", path.display()))?,
            None => RuleSet::default(),
        };
        if let Some(target) = self.target {
            rules.target = target;
        }
        rules.validate()?;
        Ok(rules)
    }
}

#[derive(Args)]
struct ChartArgs {
    #[arg(long, default_value = "log")]
    scale: Scale,
    /// Axis range as `min,max`, e.g. `0.001,1`.
    #[arg(long, value_parser = parse_limits)]
    axis_limits: Option<AxisLimits>,
    /// Skip the SVG.
    #[arg(long)]
    no_svg: bool,
}

fn parse_limits(s: &str) -> Result<AxisLimits, String> {
    let (min, max) = s.split_once(',').ok_or("expected min,max")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(AxisLimits {
        min: parse(min)?,
        max: parse(max)?,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::with_capacity(
        1 << 20,
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn anyhow_box(e: Box<dyn std::error::Error + Send + Sync>) -> anyhow::Error {
    anyhow::anyhow!(e)
}

fn slim(dump: &Path, out: &Path, langs: &Languages, rules: &RuleArgs) -> Result<()> {
    let keep = keep_set_for(&rules.load()?, &langs.set());
    let sink = create(out)?;
    let (written, malformed) = if dump == Path::new("-") {
        slim_stream(io::stdin().lock(), &keep, sink)
    } else {
        slim_stream(open(dump)?, &keep, sink)
    }
    .map_err(anyhow_box)?;
    log::info!(
        "wrote {written} records to {}; {malformed} malformed lines skipped",
        out.display()
    );
    Ok(())
}

fn attribute(store: &Path, out: &Path, rules: &RuleArgs) -> Result<()> {
    let rules = rules.load()?;
    let mut index = GeoIndex::default();
    for_each_stored(store, |e| {
        index.add(&e, &rules);
        Ok(())
    })
    .map_err(anyhow_box)?;
    let mut store_err = None;
    let entities = read_slim_store(open(store)?)?.map_while(|e| e.map_err(|e| store_err = Some(e)).ok());
    let results = attribute_all(entities, &index, &rules)?;
    if let Some(e) = store_err {
        return Err(e.into());
    }
    let related = results.values().filter(|r| r.related()).count();
    write_attributions(&results, create(out)?)?;
    log::info!("{related} of {} items related to {}", results.len(), rules.target);
    Ok(())
}

fn usage(pageviews: &[PathBuf], out: &Path, langs: &Languages) -> Result<()> {
    let filter = LanguageFilter::only(langs.set());
    let mut totals = ViewTotals::default();
    for path in pageviews {
        let (views, malformed) = read_pageviews(open(path)?, &filter).with_context(|| format!("{}", path.display()))?;
        if malformed > 0 {
            log::warn!("{}: {malformed} malformed lines skipped", path.display());
        }
        totals.merge(views)?;
    }
    totals.write_tsv(create(out)?)?;
    Ok(())
}

fn metrics(
    store: &Path,
    attribution: &Path,
    views: &Path,
    readership: &Path,
    out: &Path,
    langs: &Languages,
) -> Result<()> {
    let languages = langs.set();
    let mut builder = ArticleSetBuilder::new(&languages);
    for_each_stored(store, |e| Ok(builder.add(&e)?)).map_err(anyhow_box)?;
    let article_sets = builder.finish();
    let attributions = read_attributions(open(attribution)?)?;
    let views = ViewTotals::read_tsv(open(views)?)?;
    let readership = parse_readership_table(open(readership)?)?;
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
            Err(e) => log::warn!("{language}: {e}"),
        }
    }
    if rows.is_empty() {
        bail!("no language produced metrics");
    }
    write_metrics(&rows, create(out)?)?;
    Ok(())
}

fn clusters(metrics: &Path, out: &Path, cluster_map: Option<&Path>, mode: Aggregation) -> Result<()> {
    let rows = read_metrics(open(metrics)?)?;
    let map = match cluster_map {
        Some(path) => ClusterMap::parse(open(path)?)?,
        None => ClusterMap::bundled(),
    };
    let assignment = assign_clusters(&rows, &map);
    for row in &assignment.unassigned {
        log::warn!(
            "{}: primary country {} is in no cluster",
            row.language,
            row.primary_country
        );
    }
    write_clusters(&aggregate_all(&assignment, mode)?, create(out)?)?;
    Ok(())
}

fn report(metrics: &Path, out: &Path, chart: &ChartArgs) -> Result<()> {
    let rows = read_metrics(open(metrics)?)?;
    fs::create_dir_all(out)?;
    emit_table(&rows, create(&out.join("table.tsv"))?)?;
    let data = emit_chart_data(&rows, chart.scale);
    if data.dropped > 0 {
        log::warn!("{} rows left off the chart", data.dropped);
    }
    fs::write(out.join("chart.json"), data.to_json()?)?;
    if !chart.no_svg {
        let limits = chart
            .axis_limits
            .unwrap_or_else(|| AxisLimits::default_for(chart.scale));
        fs::write(out.join("chart.svg"), emit_svg(&data, limits)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Slim {
            dump,
            out,
            langs,
            rules,
        } => slim(&dump, &out, &langs, &rules),
        Command::Attribute { store, out, rules } => attribute(&store, &out, &rules),
        Command::Usage { pageviews, out, langs } => usage(&pageviews, &out, &langs),
        Command::Metrics {
            store,
            attribution,
            views,
            readership,
            out,
            langs,
        } => metrics(&store, &attribution, &views, &readership, &out, &langs),
        Command::Clusters {
            metrics,
            out,
            cluster_map,
            aggregation,
        } => clusters(&metrics, &out, cluster_map.as_deref(), aggregation),
        Command::Report { metrics, out, chart } => report(&metrics, &out, &chart),
        Command::All {
            dump,
            store,
            pageviews,
            readership,
            out,
            cluster_map,
            aggregation,
            langs,
            rules,
            chart,
        } => {
            let entities = match (dump, store) {
                (Some(dump), _) => EntitySource::Dump(dump),
                (None, Some(store)) => EntitySource::Store(store),
                (None, None) => bail!("one of --dump or --store is required"),
            };
            let mut config = RunConfig::new(entities, readership, out);
            config.pageviews = pageviews;
            config.rules = rules.rules;
            config.target = rules.target;
            config.cluster_map = cluster_map;
            config.languages = langs.set().into_iter().collect();
            config.scale = chart.scale;
            config.aggregation = aggregation;
            config.limits = chart.axis_limits;
            config.svg = !chart.no_svg;
            let manifest = run_pipeline(&config)?;
            let mut stdout = io::stdout().lock();
            writeln!(
                stdout,
                "{} entities, {} related, {} language rows; artifacts in {}",
                manifest.entities,
                manifest.related_items,
                manifest.metric_rows,
                config.out_dir.display()
            )?;
            for (language, reason) in &manifest.failed_languages {
                writeln!(stdout, "skipped {language}: {reason}")?;
            }
            Ok(())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
