//! File-based stages over a work directory.
//!
//! Each stage reads its inputs from the work directory, writes its outputs
//! through temp files renamed into place, and records parameters, seed and
//! content hashes in `manifest.json`. A stage whose record matches the
//! current parameters, seed, input hashes and on-disk outputs is skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::analysis;
use super::config::Config;
use crate::cluster::{topics_from_jsonl, topics_to_jsonl};
use crate::corpus::{self, load_citations, load_corpus_with, Corpus, CorpusFormat, LoadOptions, Timeline};
use crate::docembed::{self, align_doc_embeddings, DocEmbeddings};
use crate::dynembed::{embedding_distance, TopicEmbeddingSeries};
use crate::emergence::{records_from_jsonl, records_to_jsonl, EmergingRecord};
use crate::error::{AtemError, Result};
use crate::evaluation::{self, rows_from_csv, Aggregates};
use crate::synth;
use crate::tcgraph::TopicCitationGraph;
use crate::topics::{self, EvolvingTopic, RepKind};
use crate::vecio::NamedVectors;

pub const SYNTH_DOCS: &str = "synth/documents.jsonl";
pub const SYNTH_CITES: &str = "synth/citations.csv";
pub const SYNTH_TRUTH: &str = "synth/truth.json";
pub const DOCS: &str = "corpus/documents.jsonl";
pub const CITES: &str = "corpus/citations.csv";
pub const TIMELINE: &str = "corpus/timeline.json";
pub const VALIDATION: &str = "corpus/validation.json";
pub const DOC_VEC: &str = "doc_embeddings.vec";
pub const WORD_VEC: &str = "word_embeddings.vec";
pub const COVERAGE: &str = "embed_coverage.json";
pub const TOPICS: &str = "topics.jsonl";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const EVOLVING: &str = "evolving_topics.jsonl";
pub const GRAPH: &str = "topic_graph.csv";
pub const GRAPH_DIAG: &str = "graph_diagnostics.json";
pub const EMB_DIR: &str = "embeddings";
pub const EMB_MANIFEST: &str = "embeddings/manifest.json";
pub const EMERGING: &str = "emerging.jsonl";
pub const REPORT: &str = "report.csv";
pub const AGGREGATES: &str = "aggregates.json";
pub const CORRELATIONS: &str = "correlations.csv";
pub const REPORT_DIR: &str = "report";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Synth,
    Ingest,
    Embed,
    Cluster,
    Topics,
    Graph,
    Dynembed,
    Detect,
    Eval,
    Report,
}

impl Stage {
    /// The analysis chain, in execution order.
    pub const CHAIN: [Stage; 9] = [
        Stage::Ingest,
        Stage::Embed,
        Stage::Cluster,
        Stage::Topics,
        Stage::Graph,
        Stage::Dynembed,
        Stage::Detect,
        Stage::Eval,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Topics => "topics",
            Stage::Graph => "graph",
            Stage::Dynembed => "dynembed",
            Stage::Detect => "detect",
            Stage::Eval => "eval",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        [Stage::Synth].into_iter().chain(Stage::CHAIN).find(|st| st.name() == s)
    }

    /// Name used in "missing: ..." messages for this stage's outputs.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Synth => "synthetic corpus",
            Stage::Ingest => "corpus",
            Stage::Embed => "doc_embeddings",
            Stage::Cluster => "topics",
            Stage::Topics => "evolving_topics",
            Stage::Graph => "topic_graph",
            Stage::Dynembed => "embeddings",
            Stage::Detect => "emerging",
            Stage::Eval => "evaluation",
            Stage::Report => "report",
        }
    }
}

/// Stage that produces a work-directory file.
fn producer(rel: &str) -> Stage {
    match rel {
        SYNTH_DOCS | SYNTH_CITES | SYNTH_TRUTH => Stage::Synth,
        DOCS | CITES | TIMELINE | VALIDATION => Stage::Ingest,
        DOC_VEC | WORD_VEC | COVERAGE => Stage::Embed,
        TOPICS | ASSIGNMENTS => Stage::Cluster,
        EVOLVING => Stage::Topics,
        GRAPH | GRAPH_DIAG => Stage::Graph,
        EMERGING => Stage::Detect,
        REPORT | AGGREGATES | CORRELATIONS => Stage::Eval,
        r if r.starts_with("embeddings/") => Stage::Dynembed,
        _ => Stage::Report,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub params: Value,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
}

/// Files a stage produces. Directories listed in `owned` are cleared of
/// anything not in `files`; paths in `remove` are deleted.
#[derive(Default)]
struct Outputs {
    files: BTreeMap<String, Vec<u8>>,
    owned: Vec<String>,
    remove: Vec<String>,
}

impl Outputs {
    fn put(&mut self, rel: &str, bytes: impl Into<Vec<u8>>) {
        self.files.insert(rel.to_string(), bytes.into());
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn json_line(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Write `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AtemError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| AtemError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| AtemError::io(path, e))
}

/// A work directory plus the configuration its stages run under.
pub struct Workspace {
    pub root: PathBuf,
    pub cfg: Config,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, cfg: Config) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| AtemError::io(&root, e))?;
        Ok(Workspace { root, cfg })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.path(MANIFEST);
        match fs::read_to_string(&p) {
            Ok(text) => Ok(serde_json::from_str(&text)?),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(AtemError::io(&p, e)),
        }
    }

    /// Stages run by `run --all`: synthesis first when no corpus path is
    /// configured but a synth spec is.
    pub fn all_stages(&self) -> Vec<Stage> {
        let mut v = Vec::new();
        if self.cfg.paths.corpus.is_none() && self.cfg.synth.is_some() {
            v.push(Stage::Synth);
        }
        v.extend(Stage::CHAIN);
        v
    }

    pub fn run_all(&self) -> Result<Vec<(Stage, Outcome)>> {
        self.cfg.validate()?;
        self.all_stages()
            .into_iter()
            .map(|s| self.run_stage(s).map(|o| (s, o)))
            .collect()
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Outcome> {
        self.cfg.validate()?;
        let inputs = self.input_hashes(stage)?;
        let params = self.params(stage)?;
        let seed = self.cfg.stage_seed(stage.name());
        let mut manifest = self.manifest()?;
        if let Some(rec) = manifest.stages.get(stage.name()) {
            if rec.params == params && rec.seed == seed && rec.inputs == inputs && self.outputs_intact(&rec.outputs) {
                info!("{}: up to date, skipped", stage.name());
                return Ok(Outcome::Skipped);
            }
        }
        info!("{}: running", stage.name());
        let out = self.execute(stage)?;
        let outputs = self.commit(&out)?;
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                params,
                seed,
                inputs,
                outputs,
            },
        );
        write_atomic(&self.path(MANIFEST), &json_line(&manifest)?)?;
        Ok(Outcome::Ran)
    }

    fn outputs_intact(&self, outputs: &BTreeMap<String, String>) -> bool {
        outputs
            .iter()
            .all(|(rel, h)| fs::read(self.path(rel)).is_ok_and(|b| &sha256_hex(&b) == h))
    }

    fn commit(&self, out: &Outputs) -> Result<BTreeMap<String, String>> {
        for rel in &out.remove {
            let p = self.path(rel);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| AtemError::io(&p, e))?;
            }
        }
        for dir in &out.owned {
            let d = self.path(dir);
            let Ok(entries) = fs::read_dir(&d) else { continue };
            for entry in entries.flatten() {
                let rel = format!("{dir}/{}", entry.file_name().to_string_lossy());
                if entry.path().is_file() && !out.files.contains_key(&rel) {
                    fs::remove_file(entry.path()).map_err(|e| AtemError::io(entry.path(), e))?;
                }
            }
        }
        let mut hashes = BTreeMap::new();
        for (rel, bytes) in &out.files {
            write_atomic(&self.path(rel), bytes)?;
            hashes.insert(rel.clone(), sha256_hex(bytes));
        }
        Ok(hashes)
    }

    /// External corpus inputs of the ingest stage: explicit paths, or the
    /// synthesised corpus inside the work directory.
    fn corpus_sources(&self) -> Result<(String, Option<String>)> {
        match &self.cfg.paths.corpus {
            Some(p) => Ok((
                p.to_string_lossy().into_owned(),
                self.cfg.paths.citations.as_ref().map(|c| c.to_string_lossy().into_owned()),
            )),
            None if self.cfg.synth.is_some() => Ok((SYNTH_DOCS.into(), Some(SYNTH_CITES.into()))),
            None => Err(AtemError::InvalidParam(
                "no corpus configured: set paths.corpus or a [synth] spec".into(),
            )),
        }
    }

    /// Resolve an input name: work-directory relative unless absolute or
    /// given as an external path.
    fn resolve(&self, name: &str, external: bool) -> PathBuf {
        if external {
            PathBuf::from(name)
        } else {
            self.path(name)
        }
    }

    fn input_names(&self, stage: Stage) -> Result<Vec<(String, bool)>> {
        let ws = |v: &[&str]| v.iter().map(|s| (s.to_string(), false)).collect::<Vec<_>>();
        Ok(match stage {
            Stage::Synth => Vec::new(),
            Stage::Ingest => {
                let (docs, cites) = self.corpus_sources()?;
                let external = self.cfg.paths.corpus.is_some();
                let mut v = vec![(docs, external)];
                v.extend(cites.map(|c| (c, external)));
                v
            }
            Stage::Embed => {
                let mut v = ws(&[DOCS, TIMELINE]);
                if let Some(p) = &self.cfg.paths.doc_embeddings {
                    v.push((p.to_string_lossy().into_owned(), true));
                }
                v
            }
            Stage::Cluster => ws(&[DOCS, CITES, TIMELINE, DOC_VEC]),
            Stage::Topics => {
                let mut v = ws(&[DOCS, TIMELINE, TOPICS]);
                if self.cfg.topics.representation == RepKind::NearestWords {
                    v.extend(ws(&[DOC_VEC, WORD_VEC]));
                }
                v
            }
            Stage::Graph => ws(&[DOCS, CITES, TIMELINE, EVOLVING]),
            Stage::Dynembed => ws(&[TIMELINE, EVOLVING, GRAPH]),
            Stage::Detect => {
                let mut v = ws(&[DOCS, TIMELINE, EVOLVING, EMB_MANIFEST]);
                v.extend(self.snapshot_files()?.into_iter().map(|f| (f, false)));
                v
            }
            Stage::Eval => {
                let mut v = ws(&[DOCS, TIMELINE, EVOLVING, GRAPH, EMERGING, EMB_MANIFEST]);
                v.extend(self.snapshot_files()?.into_iter().map(|f| (f, false)));
                v
            }
            Stage::Report => {
                let mut v = ws(&[TIMELINE, EVOLVING, GRAPH, EMERGING, REPORT, AGGREGATES, EMB_MANIFEST]);
                v.extend(self.snapshot_files()?.into_iter().map(|f| (f, false)));
                v
            }
        })
    }

    /// Snapshot files listed by the embeddings manifest.
    fn snapshot_files(&self) -> Result<Vec<String>> {
        #[derive(Deserialize)]
        struct M {
            snapshots: Vec<String>,
        }
        let p = self.path(EMB_MANIFEST);
        let text = fs::read_to_string(&p).map_err(|_| self.missing(EMB_MANIFEST))?;
        let m: M = serde_json::from_str(&text)?;
        Ok(m.snapshots.into_iter().map(|f| format!("{EMB_DIR}/{f}")).collect())
    }

    fn missing(&self, rel: &str) -> AtemError {
        let stage = producer(rel);
        AtemError::Missing {
            artifact: stage.artifact().to_string(),
            stage: stage.name().to_string(),
        }
    }

    fn input_hashes(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (name, external) in self.input_names(stage)? {
            let p = self.resolve(&name, external);
            let bytes = fs::read(&p).map_err(|e| {
                if e.kind() != std::io::ErrorKind::NotFound {
                    AtemError::io(&p, e)
                } else if external {
                    AtemError::Missing {
                        artifact: format!("input file {}", p.display()),
                        stage: stage.name().to_string(),
                    }
                } else {
                    self.missing(&name)
                }
            })?;
            out.insert(name, sha256_hex(&bytes));
        }
        Ok(out)
    }

    fn params(&self, stage: Stage) -> Result<Value> {
        let c = &self.cfg;
        let det = c.deterministic;
        Ok(match stage {
            Stage::Synth => json!({ "spec": self.synth_spec()? }),
            Stage::Ingest => json!({ "ingest": c.ingest, "format": c.paths.format }),
            Stage::Embed => json!({ "embed": c.embed, "load": c.paths.doc_embeddings.is_some(), "deterministic": det }),
            Stage::Cluster => json!({ "cluster": c.cluster, "deterministic": det }),
            Stage::Topics => json!({ "topics": c.topics, "min_token_count": c.embed.min_token_count }),
            Stage::Graph => json!({ "deterministic": det }),
            Stage::Dynembed => json!({ "dynembed": c.dynembed, "deterministic": det }),
            Stage::Detect => json!({ "detect": c.detect, "deterministic": det }),
            Stage::Eval => json!({ "eval": c.eval, "detect": c.detect, "deterministic": det }),
            Stage::Report => json!({}),
        })
    }

    fn synth_spec(&self) -> Result<synth::SynthSpec> {
        self.cfg
            .synth
            .clone()
            .ok_or_else(|| AtemError::InvalidParam("synth stage needs a [synth] spec".into()))
    }

    fn execute(&self, stage: Stage) -> Result<Outputs> {
        match stage {
            Stage::Synth => self.synth(),
            Stage::Ingest => self.ingest(),
            Stage::Embed => self.embed(),
            Stage::Cluster => self.cluster(),
            Stage::Topics => self.topics(),
            Stage::Graph => self.graph(),
            Stage::Dynembed => self.dynembed(),
            Stage::Detect => self.detect(),
            Stage::Eval => self.eval(),
            Stage::Report => self.report(),
        }
    }

    fn read(&self, rel: &str) -> Result<String> {
        fs::read_to_string(self.path(rel)).map_err(|_| self.missing(rel))
    }

    /// The ingested corpus with its timeline; citations only when asked.
    pub fn load_corpus(&self, with_citations: bool) -> Result<Corpus> {
        let docs = self.path(DOCS);
        if !docs.exists() {
            return Err(self.missing(DOCS));
        }
        let mut c = load_corpus_with(&docs, CorpusFormat::Jsonl, &LoadOptions::default())?;
        if with_citations {
            if !self.path(CITES).exists() {
                return Err(self.missing(CITES));
            }
            load_citations(&self.path(CITES), &mut c)?;
        }
        c.timeline = serde_json::from_str::<Timeline>(&self.read(TIMELINE)?)?;
        Ok(c)
    }

    pub fn load_evolving(&self, corpus: &Corpus) -> Result<Vec<EvolvingTopic>> {
        topics::from_jsonl(&self.read(EVOLVING)?, corpus, self.cfg.topics.top_n)
    }

    pub fn load_graph(&self, topics: &[EvolvingTopic], n_periods: usize) -> Result<TopicCitationGraph> {
        let nodes = topics.iter().map(|t| t.topic_id.clone()).collect();
        TopicCitationGraph::from_csv(&self.read(GRAPH)?, nodes, n_periods)
    }

    pub fn load_series(&self) -> Result<TopicEmbeddingSeries> {
        if !self.path(EMB_MANIFEST).exists() {
            return Err(self.missing(EMB_MANIFEST));
        }
        TopicEmbeddingSeries::load(&self.path(EMB_DIR))
    }

    fn synth(&self) -> Result<Outputs> {
        let (corpus, truth) = synth::generate_corpus(&self.synth_spec()?)?;
        let mut out = Outputs::default();
        out.put(SYNTH_DOCS, corpus::write_documents_jsonl(&corpus)?);
        out.put(SYNTH_CITES, corpus::write_citations_csv(&corpus)?);
        out.put(SYNTH_TRUTH, json_line(&truth)?);
        Ok(out)
    }

    fn ingest(&self) -> Result<Outputs> {
        let (docs, cites) = self.corpus_sources()?;
        let external = self.cfg.paths.corpus.is_some();
        let docs = self.resolve(&docs, external);
        let format = self.cfg.paths.format.unwrap_or_else(|| {
            if docs.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                CorpusFormat::Csv
            } else {
                CorpusFormat::Jsonl
            }
        });
        let opts = LoadOptions {
            min_year: self.cfg.ingest.min_year,
            max_year: self.cfg.ingest.max_year,
        };
        let mut c = load_corpus_with(&docs, format, &opts)?;
        if let Some(cites) = cites {
            load_citations(&self.resolve(&cites, external), &mut c)?;
        }
        analysis::apply_timeline(&mut c, &self.cfg)?;
        let report = corpus::validate(&c);
        info!("ingested {} documents, {} citation edges, {} periods", report.documents, report.edges, report.periods);
        let mut out = Outputs::default();
        out.put(DOCS, corpus::write_documents_jsonl(&c)?);
        out.put(CITES, corpus::write_citations_csv(&c)?);
        out.put(TIMELINE, json_line(&c.timeline)?);
        out.put(VALIDATION, json_line(&report)?);
        Ok(out)
    }

    fn embed(&self) -> Result<Outputs> {
        let mut c = self.load_corpus(false)?;
        let mut out = Outputs::default();
        match &self.cfg.paths.doc_embeddings {
            Some(p) => {
                let (emb, coverage) = docembed::load_doc_embeddings(p, &c)?;
                out.put(DOC_VEC, emb.doc_vectors.to_bytes());
                out.put(COVERAGE, json_line(&coverage)?);
                out.remove.push(WORD_VEC.into());
            }
            None => {
                let emb = analysis::embed(&mut c, &self.cfg)?;
                out.put(DOC_VEC, emb.doc_vectors.to_bytes());
                if let Some(w) = &emb.word_vectors {
                    out.put(WORD_VEC, w.to_bytes());
                }
                out.remove.push(COVERAGE.into());
            }
        }
        Ok(out)
    }

    fn doc_embeddings(&self, corpus: &Corpus, with_words: bool) -> Result<DocEmbeddings> {
        if !self.path(DOC_VEC).exists() {
            return Err(self.missing(DOC_VEC));
        }
        let (mut emb, _) = align_doc_embeddings(&NamedVectors::load(&self.path(DOC_VEC))?, corpus)?;
        if with_words {
            if !self.path(WORD_VEC).exists() {
                return Err(AtemError::MissingWordVectors);
            }
            emb.word_vectors = Some(NamedVectors::load(&self.path(WORD_VEC))?);
        }
        Ok(emb)
    }

    fn cluster(&self) -> Result<Outputs> {
        let c = self.load_corpus(true)?;
        let emb = self.doc_embeddings(&c, false)?;
        let cl = analysis::cluster(&c, &emb, &self.cfg)?;
        let mut topic_of: Vec<Option<&str>> = vec![None; c.len()];
        for t in &cl.topics.topics {
            for &d in &t.docs {
                topic_of[d] = Some(&t.topic_id);
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["doc_id", "content", "community", "topic_id"])?;
        let label = |l: Option<usize>| l.map(|x| x.to_string()).unwrap_or_default();
        for (i, d) in c.documents().iter().enumerate() {
            w.write_record([
                d.doc_id.clone(),
                label(cl.content.labels[i]),
                label(cl.communities.labels[i]),
                topic_of[i].unwrap_or_default().to_string(),
            ])?;
        }
        let mut out = Outputs::default();
        out.put(TOPICS, topics_to_jsonl(&cl.topics, &c)?);
        out.put(ASSIGNMENTS, evaluation::finish(w)?);
        Ok(out)
    }

    fn topics(&self) -> Result<Outputs> {
        let mut c = self.load_corpus(false)?;
        docembed::prepare_vocabulary(&mut c, self.cfg.embed.min_token_count);
        let set = topics_from_jsonl(&self.read(TOPICS)?, &c)?;
        let rep = self.cfg.topics.representation;
        let emb = match rep {
            RepKind::NearestWords => Some(self.doc_embeddings(&c, true)?),
            RepKind::Ctfidf => None,
        };
        let ts = analysis::evolving_topics(&set, &c, emb.as_ref(), &self.cfg)?;
        let mut out = Outputs::default();
        out.put(EVOLVING, topics::to_jsonl(&ts, &c, rep)?);
        Ok(out)
    }

    fn graph(&self) -> Result<Outputs> {
        let c = self.load_corpus(true)?;
        let ts = self.load_evolving(&c)?;
        let g = analysis::graph(&ts, &c, &self.cfg);
        let mut out = Outputs::default();
        out.put(GRAPH, g.to_csv()?);
        out.put(GRAPH_DIAG, json_line(&g.diagnostics)?);
        Ok(out)
    }

    fn dynembed(&self) -> Result<Outputs> {
        let timeline: Timeline = serde_json::from_str(&self.read(TIMELINE)?)?;
        let nodes: Vec<String> = topic_ids(&self.read(EVOLVING)?)?;
        let g = TopicCitationGraph::from_csv(&self.read(GRAPH)?, nodes, timeline.len())?;
        let params = self.cfg.walk_params();
        let series = analysis::dynembed(&g, &self.cfg)?;
        let mut out = Outputs::default();
        for (name, bytes) in series.files(&params)? {
            out.put(&format!("{EMB_DIR}/{name}"), bytes);
        }
        out.owned.push(EMB_DIR.into());
        Ok(out)
    }

    fn detect(&self) -> Result<Outputs> {
        let c = self.load_corpus(false)?;
        let ts = self.load_evolving(&c)?;
        let series = self.load_series()?;
        check_nodes(&ts, &series)?;
        let docs = analysis::doc_sets(&ts, &c, &self.cfg);
        let records = analysis::emerging(&series, &ts, &c, &docs, &self.cfg)?;
        info!("{} emerging pairs", records.len());
        let mut out = Outputs::default();
        out.put(EMERGING, records_to_jsonl(&records)?);
        Ok(out)
    }

    fn eval(&self) -> Result<Outputs> {
        let c = self.load_corpus(false)?;
        let ts = self.load_evolving(&c)?;
        let series = self.load_series()?;
        check_nodes(&ts, &series)?;
        self.read(EMERGING)?;
        let g = self.load_graph(&ts, c.timeline.len())?;
        let docs = analysis::doc_sets(&ts, &c, &self.cfg);
        let report = analysis::evaluate(&c, &ts, &g, &series, &docs, &self.cfg)?;
        let ag = &report.aggregates;
        let mut out = Outputs::default();
        out.put(REPORT, evaluation::rows_to_csv(&report.rows)?);
        out.put(AGGREGATES, json_line(ag)?);
        out.put(CORRELATIONS, evaluation::correlations_to_csv(&ag.correlation_labels, &ag.correlations)?);
        Ok(out)
    }

    fn report(&self) -> Result<Outputs> {
        let timeline: Timeline = serde_json::from_str(&self.read(TIMELINE)?)?;
        let nodes = topic_ids(&self.read(EVOLVING)?)?;
        let g = TopicCitationGraph::from_csv(&self.read(GRAPH)?, nodes, timeline.len())?;
        let series = self.load_series()?;
        let emerging = records_from_jsonl(&self.read(EMERGING)?)?;
        let rows = rows_from_csv(&self.read(REPORT)?)?;
        let ag: Aggregates = serde_json::from_str(&self.read(AGGREGATES)?)?;
        let mut out = Outputs::default();
        let dir = |f: &str| format!("{REPORT_DIR}/{f}");
        out.put(&dir("topic_citations.csv"), topic_citation_series(&g, &timeline)?);
        out.put(&dir("co_citations.csv"), co_citation_counts(&g)?);
        out.put(&dir("distance_evolution.csv"), distance_evolution(&series, &emerging)?);
        out.put(&dir("predictability_by_period.csv"), predictability_by_period(&ag)?);
        out.put(&dir("pair_counts.csv"), pair_counts(&ag)?);
        out.put(&dir("predictability_summary.csv"), predictability_summary(&ag)?);
        out.put(&dir("emergence_values.csv"), emergence_values(&rows)?);
        out.put(&dir("summary.txt"), summary(&timeline, &g, &emerging, &ag));
        out.owned.push(REPORT_DIR.into());
        Ok(out)
    }
}

fn topic_ids(evolving: &str) -> Result<Vec<String>> {
    #[derive(Deserialize)]
    struct Line {
        topic_id: String,
    }
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    for l in evolving.lines().filter(|l| !l.trim().is_empty()) {
        let l: Line = serde_json::from_str(l)?;
        if seen.insert(l.topic_id.clone()) {
            ids.push(l.topic_id);
        }
    }
    Ok(ids)
}

fn check_nodes(topics: &[EvolvingTopic], series: &TopicEmbeddingSeries) -> Result<()> {
    if topics.len() != series.nodes.len() || topics.iter().zip(&series.nodes).any(|(t, n)| &t.topic_id != n) {
        return Err(AtemError::Format(
            "embeddings were trained on a different topic list; rerun dynembed".into(),
        ));
    }
    Ok(())
}

fn csv_of(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(evaluation::finish(w)?.into_bytes())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn year_of(timeline: &Timeline, p: usize) -> String {
    timeline.periods.get(p).map(|x| x.start_year.to_string()).unwrap_or_default()
}

/// Incoming and outgoing citation weight of every topic per period. Topics
/// without citations contribute no rows.
fn topic_citation_series(g: &TopicCitationGraph, timeline: &Timeline) -> Result<Vec<u8>> {
    let mut acc: BTreeMap<(usize, usize), (u64, u64)> = BTreeMap::new();
    for e in &g.edges {
        acc.entry((e.dst, e.period)).or_default().0 += e.weight;
        acc.entry((e.src, e.period)).or_default().1 += e.weight;
    }
    csv_of(
        &["topic_id", "period", "year", "cited", "citing"],
        acc.into_iter().map(|((t, p), (cited, citing))| {
            vec![g.nodes[t].clone(), p.to_string(), year_of(timeline, p), cited.to_string(), citing.to_string()]
        }),
    )
}

/// Per period, how many other topics cite both members of a pair.
fn co_citation_counts(g: &TopicCitationGraph) -> Result<Vec<u8>> {
    let mut cited: BTreeMap<(usize, usize), Vec<(usize, u64)>> = BTreeMap::new();
    for e in g.edges.iter().filter(|e| e.src != e.dst) {
        cited.entry((e.period, e.src)).or_default().push((e.dst, e.weight));
    }
    let mut acc: BTreeMap<(usize, usize, usize), (u64, u64)> = BTreeMap::new();
    for ((p, _), targets) in &cited {
        for (i, &(a, wa)) in targets.iter().enumerate() {
            for &(b, wb) in &targets[i + 1..] {
                let slot = acc.entry((*p, a.min(b), a.max(b))).or_default();
                slot.0 += 1;
                slot.1 += wa.min(wb);
            }
        }
    }
    csv_of(
        &["period", "topic_a", "topic_b", "citing_topics", "weight"],
        acc.into_iter().map(|((p, a, b), (n, w))| {
            vec![p.to_string(), g.nodes[a].clone(), g.nodes[b].clone(), n.to_string(), w.to_string()]
        }),
    )
}

/// Embedding distance of every emerging pair over all periods where both
/// members have a vector.
fn distance_evolution(series: &TopicEmbeddingSeries, emerging: &[EmergingRecord]) -> Result<Vec<u8>> {
    let index: BTreeMap<&str, usize> = series.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut rows = Vec::new();
    for r in emerging {
        let (Some(&a), Some(&b)) = (index.get(r.t.as_str()), index.get(r.tx.as_str())) else {
            warn!("emerging pair {}-{} is not in the embeddings", r.t, r.tx);
            continue;
        };
        for p in 0..series.periods() {
            if let (Some(u), Some(v)) = (series.vector(a, p), series.vector(b, p)) {
                let d = embedding_distance(u, v).ok();
                rows.push(vec![r.t.clone(), r.tx.clone(), r.period.to_string(), p.to_string(), opt(d)]);
            }
        }
    }
    csv_of(&["t", "tx", "emergence_period", "period", "distance"], rows)
}

fn predictability_by_period(ag: &Aggregates) -> Result<Vec<u8>> {
    csv_of(
        &["period", "year", "mean_n", "mean_c"],
        ag.by_period.iter().map(|y| {
            vec![
                y.period.to_string(),
                y.year.map(|x| x.to_string()).unwrap_or_default(),
                opt(y.mean_n),
                opt(y.mean_c),
            ]
        }),
    )
}

fn pair_counts(ag: &Aggregates) -> Result<Vec<u8>> {
    csv_of(
        &["period", "n", "c", "cn"],
        ag.counts
            .iter()
            .map(|c| vec![c.period.to_string(), c.n.to_string(), c.c.to_string(), c.cn.to_string()]),
    )
}

fn predictability_summary(ag: &Aggregates) -> Result<Vec<u8>> {
    let row = |name: &str, s: &evaluation::SourceSummary| {
        let q = |i: usize| opt(s.quartiles.map(|q| q[i]));
        vec![name.to_string(), s.rows.to_string(), s.defined.to_string(), opt(s.mean), q(0), q(1), q(2)]
    };
    csv_of(
        &["source", "rows", "defined", "mean", "q1", "median", "q3"],
        [row("N", &ag.n), row("C", &ag.c)],
    )
}

fn emergence_values(rows: &[evaluation::ReportRow]) -> Result<Vec<u8>> {
    csv_of(
        &["source", "period", "emergence", "future_past_ratio"],
        rows.iter().filter_map(|r| {
            let e = r.emergence?;
            let ratio = (r.past > 0).then(|| evaluation::future_past_ratio(e));
            Some(vec![format!("{:?}", r.source), r.period.to_string(), e.to_string(), opt(ratio)])
        }),
    )
}

fn summary(timeline: &Timeline, g: &TopicCitationGraph, emerging: &[EmergingRecord], ag: &Aggregates) -> String {
    let mut s = String::new();
    let span = match (timeline.periods.first(), timeline.periods.last()) {
        (Some(a), Some(b)) => format!("{}-{}", a.start_year, b.end_year),
        _ => "empty".into(),
    };
    let _ = writeln!(s, "periods: {} ({span})", timeline.len());
    let _ = writeln!(s, "topics: {}", g.nodes.len());
    let _ = writeln!(s, "topic graph edges: {}", g.edges.len());
    let _ = writeln!(s, "emerging pairs: {}", emerging.len());
    for (name, x) in [("N", &ag.n), ("C", &ag.c)] {
        let _ = writeln!(
            s,
            "{name}: {} pairs, {} with shared documents, mean predictability {}",
            x.rows,
            x.defined,
            x.mean.map(|m| format!("{m:.4}")).unwrap_or_else(|| "undefined".into())
        );
    }
    match &ag.difference {
        Some(d) => {
            let _ = writeln!(
                s,
                "mean N - mean C: {:.4} ({:.0}% CI {:.4} .. {:.4}, {} resamples)",
                d.difference,
                d.confidence * 100.0,
                d.low,
                d.high,
                d.iterations
            );
        }
        None => {
            let _ = writeln!(s, "mean N - mean C: undefined");
        }
    }
    let mut top: Vec<&EmergingRecord> = emerging.iter().filter(|r| r.emergence.is_some()).collect();
    top.sort_by(|a, b| {
        b.emergence
            .partial_cmp(&a.emergence)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (&a.t, &a.tx).cmp(&(&b.t, &b.tx)))
    });
    if !top.is_empty() {
        let _ = writeln!(s, "most predictable emerging pairs:");
    }
    for r in top.iter().take(10) {
        let _ = writeln!(
            s,
            "  {} + {} at period {} (distance {:.3}, past {}, future {}, predictability {:.3}): {}",
            r.t,
            r.tx,
            r.period,
            r.distance,
            r.past_count,
            r.future_count,
            r.emergence.unwrap_or_default(),
            r.rep_sample.join(" ")
        );
    }
    s
}
