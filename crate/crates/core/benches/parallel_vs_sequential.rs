use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use atem_core::cluster::{density_cluster, Points};
use atem_core::corpus::Corpus;
use atem_core::docembed::DocEmbeddings;
use atem_core::dynembed::TopicEmbeddingSeries;
use atem_core::pipeline::{analysis, Config};
use atem_core::synth::{generate_corpus, SynthSpec};
use atem_core::tcgraph::TopicCitationGraph;
use atem_core::topics::EvolvingTopic;

struct Fixture {
    corpus: Corpus,
    emb: DocEmbeddings,
    topics: Vec<EvolvingTopic>,
    graph: TopicCitationGraph,
    series: TopicEmbeddingSeries,
}

fn config(deterministic: bool) -> Config {
    let mut cfg = Config {
        deterministic,
        ..Config::default()
    };
    cfg.embed.epochs = 3;
    cfg
}

fn fixture() -> Fixture {
    let cfg = config(true);
    let (mut corpus, _) = generate_corpus(&SynthSpec::default()).unwrap();
    analysis::apply_timeline(&mut corpus, &cfg).unwrap();
    let emb = analysis::embed(&mut corpus, &cfg).unwrap();
    let clustering = analysis::cluster(&corpus, &emb, &cfg).unwrap();
    let topics = analysis::evolving_topics(&clustering.topics, &corpus, Some(&emb), &cfg).unwrap();
    let graph = analysis::graph(&topics, &corpus, &cfg);
    let series = analysis::dynembed(&graph, &cfg).unwrap();
    Fixture {
        corpus,
        emb,
        topics,
        graph,
        series,
    }
}

const MODES: [(&str, bool); 2] = [("sequential", true), ("parallel", false)];

fn benches(c: &mut Criterion) {
    let fx = fixture();

    let mut g = c.benchmark_group("docembed");
    g.sample_size(10);
    for (name, det) in MODES {
        let cfg = config(det);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut corpus = fx.corpus.clone();
                analysis::embed(&mut corpus, &cfg).unwrap()
            })
        });
    }
    g.finish();

    let points = Points::from_f32(fx.emb.dim, &fx.emb.doc_vectors.data);
    let mut g = c.benchmark_group("density_cluster");
    g.sample_size(10);
    for (name, det) in MODES {
        let cfg = config(det);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| density_cluster(&points, &cfg.density_params(), cfg.execution()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("topic_graph");
    for (name, det) in MODES {
        let cfg = config(det);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| analysis::graph(&fx.topics, &fx.corpus, &cfg))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("dynembed");
    g.sample_size(10);
    for (name, det) in MODES {
        let cfg = config(det);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| analysis::dynembed(&fx.graph, &cfg).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("detect");
    for (name, det) in MODES {
        let cfg = config(det);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| analysis::detect(&fx.series, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(parallel_vs_sequential, benches);
criterion_main!(parallel_vs_sequential);
