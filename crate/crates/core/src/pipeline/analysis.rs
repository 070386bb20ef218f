//! In-memory stage functions. The file-based stages and the tests share them.

use log::info;

use super::config::Config;
use crate::cluster::{
    aggregate, citation_graph, density_cluster, detect_communities, reduce_dimensions, ClusterAssignment, Points, Reducer,
    TopicSet,
};
use crate::corpus::{build_timeline, Corpus};
use crate::docembed::{self, DocEmbeddings};
use crate::dynembed::{embedding_distance, train_dynamic_embeddings, TopicEmbeddingSeries};
use crate::emergence::{self, DetectMode, DocSets, EmergingRecord, NeighborEvent};
use crate::error::Result;
use crate::evaluation::{run_protocol, EvaluationReport, ProtocolInputs};
use crate::tcgraph::{build_topic_citation_graph, TopicCitationGraph};
use crate::topics::{self, EvolvingTopic, RepKind};

pub fn apply_timeline(corpus: &mut Corpus, cfg: &Config) -> Result<()> {
    corpus.timeline = build_timeline(corpus, cfg.ingest.window_years, cfg.ingest.overlap_years)?;
    Ok(())
}

pub fn embed(corpus: &mut Corpus, cfg: &Config) -> Result<DocEmbeddings> {
    docembed::train_doc_embeddings(corpus, &cfg.embed_params())
}

pub struct Clustering {
    pub content: ClusterAssignment,
    pub communities: ClusterAssignment,
    pub topics: TopicSet,
}

pub fn cluster(corpus: &Corpus, emb: &DocEmbeddings, cfg: &Config) -> Result<Clustering> {
    let points = Points::from_f32(emb.dim, &emb.doc_vectors.data);
    let target = cfg.cluster.reduce_dim.min(emb.dim);
    let reduced = match cfg.cluster.reducer {
        Reducer::Identity => reduce_dimensions(&points, emb.dim, Reducer::Identity)?,
        Reducer::Pca => reduce_dimensions(&points, target, Reducer::Pca)?,
    };
    let content = density_cluster(&reduced, &cfg.density_params(), cfg.execution());
    let communities = detect_communities(&citation_graph(corpus), &cfg.community_params());
    let topics = aggregate(&content, &communities);
    info!(
        "{} content clusters ({} noise docs), {} communities, {} topics",
        content.cluster_count,
        content.noise_count(),
        communities.cluster_count,
        topics.topics.len()
    );
    Ok(Clustering {
        content,
        communities,
        topics,
    })
}

pub fn evolving_topics(set: &TopicSet, corpus: &Corpus, emb: Option<&DocEmbeddings>, cfg: &Config) -> Result<Vec<EvolvingTopic>> {
    let mut ts = topics::slice_topics(set, corpus, cfg.topics.min_docs);
    match (cfg.topics.representation, emb) {
        (RepKind::NearestWords, Some(e)) => topics::represent_nearest_words(&mut ts, e, cfg.topics.top_n)?,
        (RepKind::NearestWords, None) => return Err(crate::AtemError::MissingWordVectors),
        (RepKind::Ctfidf, _) => topics::represent_ctfidf(&mut ts, corpus, cfg.topics.top_n),
    }
    Ok(ts)
}

pub fn graph(topics: &[EvolvingTopic], corpus: &Corpus, cfg: &Config) -> TopicCitationGraph {
    build_topic_citation_graph(topics, corpus, cfg.execution())
}

pub fn dynembed(graph: &TopicCitationGraph, cfg: &Config) -> Result<TopicEmbeddingSeries> {
    train_dynamic_embeddings(graph, &cfg.walk_params())
}

pub fn doc_sets(topics: &[EvolvingTopic], corpus: &Corpus, cfg: &Config) -> DocSets {
    DocSets::build(topics, corpus, cfg.doc_set_source(), cfg.execution())
}

pub fn detect(series: &TopicEmbeddingSeries, cfg: &Config) -> Result<Vec<NeighborEvent>> {
    let p = cfg.detection_params();
    p.validate()?;
    Ok(emergence::detect_all(series, &p))
}

/// Emerging topics as written to `emerging.jsonl`: first-detection pairs in
/// knn mode, every member pair of each new set in cluster mode.
pub fn emerging(
    series: &TopicEmbeddingSeries,
    topics: &[EvolvingTopic],
    corpus: &Corpus,
    docs: &DocSets,
    cfg: &Config,
) -> Result<Vec<EmergingRecord>> {
    let p = cfg.detection_params();
    p.validate()?;
    let pairs: Vec<NeighborEvent> = match p.mode {
        DetectMode::Knn => emergence::unique_pairs(&emergence::detect_all(series, &p)),
        DetectMode::Cluster => {
            let mut out = Vec::new();
            for (set, period) in emergence::detect_sets(series, &p) {
                for (i, &t) in set.iter().enumerate() {
                    for &tx in &set[i + 1..] {
                        let (a, b) = (series.vector(t, period), series.vector(tx, period));
                        let distance = embedding_distance(a.unwrap_or_default(), b.unwrap_or_default())?;
                        out.push(NeighborEvent { t, tx, period, distance });
                    }
                }
            }
            out
        }
    };
    pairs
        .iter()
        .map(|e| {
            let em = emergence::form_emerging_pair(e.t, e.tx, e.period, topics, corpus, docs)?;
            Ok(EmergingRecord::new(&em, topics, e.distance))
        })
        .collect()
}

pub fn evaluate(
    corpus: &Corpus,
    topics: &[EvolvingTopic],
    graph: &TopicCitationGraph,
    series: &TopicEmbeddingSeries,
    docs: &DocSets,
    cfg: &Config,
) -> Result<EvaluationReport> {
    let inputs = ProtocolInputs {
        corpus,
        topics,
        graph,
        series,
        docs,
    };
    run_protocol(&inputs, &cfg.protocol_params(), &cfg.detection_params())
}

/// Every intermediate result of one end-to-end run.
pub struct Analysis {
    pub corpus: Corpus,
    pub embeddings: DocEmbeddings,
    pub clustering: Clustering,
    pub topics: Vec<EvolvingTopic>,
    pub graph: TopicCitationGraph,
    pub series: TopicEmbeddingSeries,
    pub detections: Vec<NeighborEvent>,
    pub docs: DocSets,
    pub emerging: Vec<EmergingRecord>,
    pub report: EvaluationReport,
}

impl Analysis {
    pub fn run(mut corpus: Corpus, cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        apply_timeline(&mut corpus, cfg)?;
        let embeddings = embed(&mut corpus, cfg)?;
        let clustering = cluster(&corpus, &embeddings, cfg)?;
        let topics = evolving_topics(&clustering.topics, &corpus, Some(&embeddings), cfg)?;
        let graph = graph(&topics, &corpus, cfg);
        let series = dynembed(&graph, cfg)?;
        let detections = detect(&series, cfg)?;
        let docs = doc_sets(&topics, &corpus, cfg);
        let emerging = emerging(&series, &topics, &corpus, &docs, cfg)?;
        let report = evaluate(&corpus, &topics, &graph, &series, &docs, cfg)?;
        Ok(Analysis {
            corpus,
            embeddings,
            clustering,
            topics,
            graph,
            series,
            detections,
            docs,
            emerging,
            report,
        })
    }
}
