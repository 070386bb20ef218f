use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use atem_core::cluster::Reducer;
use atem_core::corpus::{self, CorpusFormat};
use atem_core::emergence::{DetectMode, Search};
use atem_core::pipeline::stages::{write_atomic, VALIDATION};
use atem_core::pipeline::{Config, Outcome, Stage, Workspace};
use atem_core::synth::{self, SynthSpec};
use atem_core::topics::RepKind;
use atem_core::{AtemError, Result};

#[derive(Parser)]
#[command(name = "atem", version, about = "Emerging-topic detection over citation-linked corpora")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Work directory holding stage artifacts (default: atem-work).
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Global seed; stage seeds derive from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Single-threaded numeric paths; byte-reproducible artifacts.
    #[arg(long, global = true)]
    deterministic: bool,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load documents and citations, build the timeline, report anomalies.
    Ingest(IngestArgs),
    /// Train document embeddings, or align vectors from a file.
    Embed(EmbedArgs),
    /// Content clusters x citation communities -> topics.
    Cluster(ClusterArgs),
    /// Split topics by period and compute term representations.
    Topics(TopicsArgs),
    /// Build the topic-citation graph.
    Graph,
    /// Train per-period topic embeddings.
    Dynembed(DynembedArgs),
    /// Detect emerging topic pairs.
    Detect(DetectArgs),
    /// Compare predictability of new neighbours against connected topics.
    Eval(EvalArgs),
    /// Generate a synthetic corpus with planted emergence events.
    Synth(SynthArgs),
    /// Summary and plot-ready CSVs under <workdir>/report.
    Report,
    /// Run several stages in order.
    Run(RunArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    citations: Option<PathBuf>,
    /// jsonl or csv; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_enum::<CorpusFormat>)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    window_years: Option<i32>,
    #[arg(long)]
    overlap_years: Option<i32>,
    /// Also write the validation report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Use precomputed document vectors (binary or text format).
    #[arg(long)]
    load: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    resolution: Option<f64>,
    /// pca:<dim> or none.
    #[arg(long)]
    reduce: Option<String>,
}

#[derive(Args)]
struct TopicsArgs {
    #[arg(long)]
    min_docs: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
    /// ctfidf or nearest_words.
    #[arg(long, value_parser = parse_enum::<RepKind>)]
    rep: Option<RepKind>,
}

#[derive(Args)]
struct DynembedArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    half_life: Option<f64>,
    #[arg(long)]
    walks_per_node: Option<usize>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    /// knn or cluster.
    #[arg(long, value_parser = parse_enum::<DetectMode>)]
    mode: Option<DetectMode>,
    /// exact or ann.
    #[arg(long, value_parser = parse_enum::<Search>)]
    search: Option<Search>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_dist: Option<f64>,
    #[arg(long)]
    min_norm: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    max_path_len: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON spec; missing fields take defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Every stage, starting with synth when no corpus path is configured.
    #[arg(long)]
    all: bool,
    /// Stages to run, in the given order.
    stages: Vec<String>,
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let mut cfg = Config::load(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let p = &mut cfg.paths;
    for slot in [&mut p.corpus, &mut p.citations, &mut p.doc_embeddings, &mut p.workdir] {
        if let Some(x) = slot.as_mut() {
            if x.is_relative() {
                *x = base.join(&*x);
            }
        }
    }
    Ok(cfg)
}

fn parse_reducer(s: &str) -> Result<(Reducer, Option<usize>)> {
    let bad = || AtemError::InvalidParam(format!("--reduce expects pca:<dim> or none, got {s:?}"));
    match s.split_once(':') {
        Some(("pca", d)) => Ok((Reducer::Pca, Some(d.parse().map_err(|_| bad())?))),
        None if s == "pca" => Ok((Reducer::Pca, None)),
        None if s == "none" || s == "identity" => Ok((Reducer::Identity, None)),
        _ => Err(bad()),
    }
}

fn report_outcome(stage: Stage, o: Outcome) {
    let what = match o {
        Outcome::Ran => "done",
        Outcome::Skipped => "up to date",
    };
    println!("{}: {what}", stage.name());
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    set(&mut cfg.seed, cli.seed);
    cfg.deterministic |= cli.deterministic;
    let workdir = cli
        .workdir
        .clone()
        .or_else(|| cfg.paths.workdir.clone())
        .unwrap_or_else(|| PathBuf::from("atem-work"));

    let stage = match cli.command {
        Command::Synth(a) => {
            let mut spec = match (&a.spec, &cfg.synth) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(p).map_err(|e| AtemError::Io {
                        path: p.clone(),
                        source: e,
                    })?;
                    serde_json::from_str::<SynthSpec>(&text)
                        .map_err(|e| AtemError::InvalidParam(format!("synth spec: {e}")))?
                }
                (None, Some(s)) => s.clone(),
                (None, None) => SynthSpec::default(),
            };
            set(&mut spec.seed, cli.seed);
            let (c, truth) = synth::generate_corpus(&spec)?;
            write_atomic(&a.out.join("documents.jsonl"), corpus::write_documents_jsonl(&c)?.as_bytes())?;
            write_atomic(&a.out.join("citations.csv"), corpus::write_citations_csv(&c)?.as_bytes())?;
            let mut t = serde_json::to_string_pretty(&truth)?;
            t.push('\n');
            write_atomic(&a.out.join("truth.json"), t.as_bytes())?;
            println!("synth: {} documents, {} citation edges -> {}", c.len(), c.citations.len(), a.out.display());
            return Ok(());
        }
        Command::Run(a) => {
            let ws = Workspace::new(&workdir, cfg)?;
            let stages = if a.all {
                ws.all_stages()
            } else if a.stages.is_empty() {
                return Err(AtemError::InvalidParam("run needs --all or a list of stages".into()));
            } else {
                a.stages
                    .iter()
                    .map(|s| Stage::parse(s).ok_or_else(|| AtemError::InvalidParam(format!("unknown stage {s:?}"))))
                    .collect::<Result<Vec<_>>>()?
            };
            ws.cfg.validate()?;
            for s in stages {
                report_outcome(s, ws.run_stage(s)?);
            }
            return Ok(());
        }
        Command::Ingest(a) => {
            set(&mut cfg.paths.corpus, a.corpus.map(Some));
            set(&mut cfg.paths.citations, a.citations.map(Some));
            set(&mut cfg.paths.format, a.format.map(Some));
            set(&mut cfg.ingest.window_years, a.window_years);
            set(&mut cfg.ingest.overlap_years, a.overlap_years);
            let ws = Workspace::new(&workdir, cfg)?;
            report_outcome(Stage::Ingest, ws.run_stage(Stage::Ingest)?);
            let report = std::fs::read(ws.path(VALIDATION)).map_err(|e| AtemError::Io {
                path: ws.path(VALIDATION),
                source: e,
            })?;
            if let Some(p) = a.report {
                write_atomic(&p, &report)?;
            } else {
                print!("{}", String::from_utf8_lossy(&report));
            }
            return Ok(());
        }
        Command::Embed(a) => {
            set(&mut cfg.embed.dim, a.dim);
            set(&mut cfg.embed.epochs, a.epochs);
            set(&mut cfg.embed.window, a.window);
            set(&mut cfg.paths.doc_embeddings, a.load.map(Some));
            Stage::Embed
        }
        Command::Cluster(a) => {
            set(&mut cfg.cluster.min_cluster_size, a.min_cluster_size);
            set(&mut cfg.cluster.resolution, a.resolution);
            if let Some(r) = a.reduce {
                let (reducer, dim) = parse_reducer(&r)?;
                cfg.cluster.reducer = reducer;
                set(&mut cfg.cluster.reduce_dim, dim);
            }
            Stage::Cluster
        }
        Command::Topics(a) => {
            set(&mut cfg.topics.min_docs, a.min_docs);
            set(&mut cfg.topics.top_n, a.top_n);
            set(&mut cfg.topics.representation, a.rep);
            Stage::Topics
        }
        Command::Graph => Stage::Graph,
        Command::Dynembed(a) => {
            set(&mut cfg.dynembed.dim, a.dim);
            set(&mut cfg.dynembed.half_life_periods, a.half_life);
            set(&mut cfg.dynembed.walks_per_node, a.walks_per_node);
            set(&mut cfg.dynembed.walk_length, a.walk_length);
            set(&mut cfg.dynembed.epochs_per_period, a.epochs);
            Stage::Dynembed
        }
        Command::Detect(a) => {
            set(&mut cfg.detect.mode, a.mode);
            set(&mut cfg.detect.search, a.search);
            set(&mut cfg.detect.k, a.k);
            set(&mut cfg.detect.max_distance, a.max_dist);
            set(&mut cfg.detect.min_norm, a.min_norm);
            Stage::Detect
        }
        Command::Eval(a) => {
            set(&mut cfg.eval.sample_size, a.sample_size);
            set(&mut cfg.eval.k, a.k);
            set(&mut cfg.eval.max_path_len, a.max_path_len);
            Stage::Eval
        }
        Command::Report => Stage::Report,
    };
    let ws = Workspace::new(&workdir, cfg)?;
    report_outcome(stage, ws.run_stage(stage)?);
    if stage == Stage::Report {
        if let Ok(s) = std::fs::read_to_string(ws.path("report/summary.txt")) {
            print!("{s}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
