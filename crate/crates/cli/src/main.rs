//! `georef`: geo-reference place graphs against a gazetteer, evaluate the
//! results and inspect individual places.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use georef_core::evaluation::{evaluate, threshold_range, AnnotationSet};
use georef_core::gazetteer::{load_gazetteer, GazetteerOptions};
use georef_core::graph::ParseMode;
use georef_core::matching::SemanticDictionary;
use georef_core::output::{alr_to_geojson, clusters_to_geojson, read_results, write_results};
use georef_core::pipeline::{georeference, GeoreferenceRun, Method, PipelineConfig};
use georef_core::{Gazetteer, PlaceGraph};

use config::TuningArgs;

const EXIT_NO_ANCHORS: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_OUTPUT: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "georef", version, about = "Geo-reference place graphs against a gazetteer")]
struct Cli {
    /// More log output (-v info, -vv debug); RUST_LOG overrides
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline and write one GeoJSON feature per place
    Georeference(GeoreferenceArgs),
    /// Score a results file against annotations
    Evaluate(EvaluateArgs),
    /// Show how one place was geo-referenced
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Place graph JSON
    #[arg(long, value_name = "FILE")]
    graph: PathBuf,

    /// Gazetteer GeoJSON FeatureCollection
    #[arg(long, value_name = "FILE")]
    gazetteer: PathBuf,

    /// Gazetteer coordinates are planar meters, not longitude/latitude
    #[arg(long)]
    projected: bool,

    /// Worker threads for scoring and K-function counting [default: available cores]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Debug, Args)]
struct GeoreferenceArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Output GeoJSON; the run manifest goes to `<out>.manifest.json`
    #[arg(long, value_name = "FILE", default_value = "results.geojson")]
    out: PathBuf,

    /// Write each place's ALR to `<dir>/<place_id>.geojson`
    #[arg(long, value_name = "DIR")]
    dump_alr: Option<PathBuf>,

    /// Write the anchor K-function profile as CSV (d,k)
    #[arg(long, value_name = "FILE")]
    dump_kfunction: Option<PathBuf>,

    /// Write anchor cluster bounding boxes as GeoJSON
    #[arg(long, value_name = "FILE")]
    dump_clusters: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Results GeoJSON written by `georeference`
    #[arg(long, value_name = "FILE")]
    results: PathBuf,

    /// Annotation JSON keyed by place id
    #[arg(long, value_name = "FILE")]
    annotations: PathBuf,

    /// Gazetteer for truth-entry footprints, in the same coordinates as the results
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,

    /// Metrics JSON; CSV curves are written beside it
    #[arg(long, value_name = "FILE", default_value = "metrics.json")]
    out: PathBuf,

    /// Threshold sweep for the recall trade-off, `start:end:step`
    #[arg(long, value_name = "START:END:STEP", default_value = "0.0:1.0:0.1")]
    thresholds: String,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Place id to report on
    #[arg(long, value_name = "ID")]
    place: String,
}

/// Failure writing an output file, as opposed to bad input.
#[derive(Debug)]
struct OutputFailed {
    path: PathBuf,
    source: std::io::Error,
}

impl std::fmt::Display for OutputFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.source)
    }
}

impl std::error::Error for OutputFailed {}

fn write_output(path: &Path, contents: &str) -> Result<(), OutputFailed> {
    let failed = |source| OutputFailed {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(failed)?;
    }
    std::fs::write(path, contents).map_err(failed)
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_input(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
struct FileDigest {
    role: &'static str,
    path: String,
    sha256: String,
}

impl FileDigest {
    fn new(role: &'static str, path: &Path, bytes: &[u8]) -> Self {
        FileDigest {
            role,
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }
}

/// Everything that determines a run's output.
#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    inputs: Vec<FileDigest>,
    projected: bool,
    config: &'a PipelineConfig,
    outputs: Vec<FileDigest>,
}

struct Loaded {
    graph: PlaceGraph,
    gazetteer: Gazetteer,
    dict: SemanticDictionary,
    config: PipelineConfig,
    digests: Vec<FileDigest>,
}

fn load(input: &InputArgs) -> Result<Loaded> {
    let config = input.tuning.resolve()?;
    let mut digests = Vec::new();

    let bytes = read_input(&input.graph)?;
    digests.push(FileDigest::new("graph", &input.graph, &bytes));
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", input.graph.display()))?;
    let mode = if config.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let graph =
        PlaceGraph::from_json(&text, mode).with_context(|| format!("loading graph {}", input.graph.display()))?;
    for w in graph.warnings() {
        log::warn!("{w}");
    }

    let bytes = read_input(&input.gazetteer)?;
    digests.push(FileDigest::new("gazetteer", &input.gazetteer, &bytes));
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", input.gazetteer.display()))?;
    let gazetteer = load_gazetteer(
        &text,
        GazetteerOptions {
            projected: input.projected,
        },
    )
    .with_context(|| format!("loading gazetteer {}", input.gazetteer.display()))?;

    let dict = match &config.dictionary {
        Some(path) => {
            let path = Path::new(path);
            let bytes = read_input(path)?;
            digests.push(FileDigest::new("dictionary", path, &bytes));
            let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
            SemanticDictionary::parse(&text).with_context(|| format!("loading dictionary {}", path.display()))?
        }
        None => SemanticDictionary::builtin(),
    };
    if let Some(path) = &input.tuning.config {
        digests.push(FileDigest::new("config", path, &read_input(path)?));
    }
    log::info!(
        "{} places, {} edges, {} gazetteer entries, {} dictionary pairs",
        graph.len(),
        graph.edges().len(),
        gazetteer.len(),
        dict.len()
    );
    Ok(Loaded {
        graph,
        gazetteer,
        dict,
        config,
        digests,
    })
}

fn run_pipeline(input: &InputArgs, loaded: &Loaded) -> Result<GeoreferenceRun> {
    let go = || georeference(&loaded.graph, &loaded.gazetteer, &loaded.dict, &loaded.config);
    let run = match input.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build()
            .context("starting worker threads")?
            .install(go),
        None => go(),
    };
    run.context("anchor disambiguation failed")
}

/// Place ids may contain anything; keep file names portable.
fn file_stem(place_id: &str) -> String {
    place_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_georeference(args: &GeoreferenceArgs) -> Result<ExitCode> {
    let loaded = load(&args.input)?;
    let run = run_pipeline(&args.input, &loaded)?;
    let projection = loaded.gazetteer.projection();
    let mut outputs = Vec::new();

    let text = write_results(&run.results, projection.as_ref());
    write_output(&args.out, &text)?;
    outputs.push(FileDigest::new("results", &args.out, text.as_bytes()));

    if let Some(dir) = &args.dump_alr {
        for r in &run.results {
            if let Some(doc) = alr_to_geojson(r, projection.as_ref()) {
                let path = dir.join(format!("{}.geojson", file_stem(&r.place_id)));
                write_output(&path, &doc)?;
                outputs.push(FileDigest::new("alr", &path, doc.as_bytes()));
            }
        }
    }
    let disambiguation = run.disambiguation.as_ref();
    if let Some(path) = &args.dump_kfunction {
        let csv = match disambiguation.and_then(|d| d.profile.as_ref()) {
            Some(p) => p.to_csv(),
            None => {
                log::warn!("fewer than two anchor candidates; the K-function profile is empty");
                "d,k\n".to_string()
            }
        };
        write_output(path, &csv)?;
        outputs.push(FileDigest::new("kfunction", path, csv.as_bytes()));
    }
    if let Some(path) = &args.dump_clusters {
        let clusters = disambiguation.map(|d| d.clusters.as_slice()).unwrap_or_default();
        let mut doc = serde_json::to_string_pretty(&clusters_to_geojson(clusters, projection.as_ref()))?;
        doc.push('\n');
        write_output(path, &doc)?;
        outputs.push(FileDigest::new("clusters", path, doc.as_bytes()));
    }

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        inputs: loaded.digests,
        projected: args.input.projected,
        config: &loaded.config,
        outputs,
    };
    let mut manifest_path = args.out.clone().into_os_string();
    manifest_path.push(".manifest.json");
    let mut doc = serde_json::to_string_pretty(&manifest)?;
    doc.push('\n');
    write_output(Path::new(&manifest_path), &doc)?;

    let count = |m: Method| run.results.iter().filter(|r| r.method == m).count();
    eprintln!(
        "{} places: {} anchor, {} best_match, {} alr_only, {} unresolved -> {}",
        run.results.len(),
        count(Method::Anchor),
        count(Method::BestMatch),
        count(Method::AlrOnly),
        count(Method::Unresolved),
        args.out.display()
    );
    if run.anchor_count() == 0 {
        log::error!("no place could be anchored; every place is unresolved");
        return Ok(ExitCode::from(EXIT_NO_ANCHORS));
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_thresholds(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, end, step] = parts.as_slice() else {
        bail!("--thresholds expects start:end:step, got `{spec}`");
    };
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .with_context(|| format!("--thresholds: `{s}` is not a number"))
    };
    let taus = threshold_range(num(start)?, num(end)?, num(step)?)
        .ok_or_else(|| anyhow!("--thresholds: need finite start <= end and a positive step"))?;
    if taus.iter().any(|t| !(0.0..=1.0).contains(t)) {
        bail!("--thresholds must stay within [0, 1]");
    }
    Ok(taus)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<ExitCode> {
    let thresholds = parse_thresholds(&args.thresholds)?;
    let results = read_results(&read_text(&args.results)?)
        .with_context(|| format!("loading results {}", args.results.display()))?;
    let annotations = AnnotationSet::from_json(&read_text(&args.annotations)?)
        .with_context(|| format!("loading annotations {}", args.annotations.display()))?;
    // Results are in the gazetteer's own coordinates, so no projection here.
    let gazetteer = match &args.gazetteer {
        Some(p) => Some(
            load_gazetteer(&read_text(p)?, GazetteerOptions { projected: true })
                .with_context(|| format!("loading gazetteer {}", p.display()))?,
        ),
        None => None,
    };
    let report = evaluate(&results, &annotations, gazetteer.as_ref(), &thresholds)?;

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_output(&args.out, &json)?;
    let similarity = args.out.with_extension("similarity.csv");
    let tradeoff = args.out.with_extension("tradeoff.csv");
    write_output(&similarity, &report.similarity_csv())?;
    write_output(&tradeoff, &report.tradeoff_csv())?;

    let show = |r: &georef_core::evaluation::Ratio| match r.value {
        Some(v) => format!("{:.3} ({}/{})", v, r.correct, r.total),
        None => "n/a".to_string(),
    };
    println!("anchor precision            {}", show(&report.anchor_precision));
    println!("best-match precision        {}", show(&report.best_match_precision));
    println!(
        "ALR precision, gazetteered  {}",
        show(&report.alr_precision_gazetteered)
    );
    println!(
        "ALR precision, other        {}",
        show(&report.alr_precision_non_gazetteered)
    );
    println!(
        "wrote {}, {}, {}",
        args.out.display(),
        similarity.display(),
        tradeoff.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(args: &InspectArgs) -> Result<ExitCode> {
    let loaded = load(&args.input)?;
    if !loaded.graph.contains(&args.place) {
        bail!("unknown place id `{}`", args.place);
    }
    let run = run_pipeline(&args.input, &loaded)?;
    let r = run.result(&args.place).expect("every place has a result");

    let mut out = String::new();
    let _ = writeln!(out, "place       {}", r.place_id);
    let _ = writeln!(out, "references  {}", r.references.join(" | "));
    let _ = writeln!(out, "method      {} (threshold {})", r.method, r.threshold);
    if let Some(e) = &r.entry_id {
        let name = loaded.gazetteer.entry(e).map_or("", |e| e.name.as_str());
        match r.score {
            Some(s) => {
                let _ = writeln!(out, "entry       {e} `{name}` score {s:.4}");
            }
            None => {
                let _ = writeln!(out, "entry       {e} `{name}`");
            }
        }
    }
    if let Some(round) = r.round {
        let _ = writeln!(out, "round       {round}");
    }
    if !r.relata.is_empty() {
        let _ = writeln!(out, "relata      {}", r.relata.join(", "));
    }
    if let Some(alr) = &r.alr {
        let _ = writeln!(out, "ALR area    {:.1} m2", alr.area());
    }
    let _ = writeln!(out, "provenance");
    for p in &r.provenance {
        let _ = writeln!(out, "  {p}");
    }
    if !r.score_table.is_empty() {
        let _ = writeln!(out, "candidates ({} scored rows)", r.score_table.len());
        let _ = writeln!(
            out,
            "  {:<12} {:>8} {:>9} {:>8}  {:<28} reference",
            "entry", "overall", "ref_sim", "spatial", "name"
        );
        for row in &r.score_table {
            let name = loaded.gazetteer.entry(&row.entry_id).map_or("", |e| e.name.as_str());
            let _ = writeln!(
                out,
                "  {:<12} {:>8.4} {:>9.4} {:>8.4}  {name:<28} {}",
                row.entry_id, row.overall, row.ref_sim, row.spat_sim, row.reference
            );
        }
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let outcome = match &cli.command {
        Command::Georeference(a) => cmd_georeference(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<OutputFailed>().is_some() {
                ExitCode::from(EXIT_OUTPUT)
            } else {
                ExitCode::from(EXIT_INVALID)
            }
        }
    }
}
