//! Emerging-topic detection on per-period topic embeddings.
//!
//! A pair `(t, tx)` emerges at period `i` when their embeddings are within
//! `max_distance` at `i` and were farther apart at every earlier period in
//! which both had a usable (norm >= `min_norm`) embedding.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::{density_cluster, DensityParams, Points};
use crate::corpus::{Corpus, DocIdx};
use crate::dynembed::{embedding_distance, TopicEmbeddingSeries};
use crate::error::{AtemError, Result};
use crate::evaluation::predictability;
use crate::par::{self, Execution};
use crate::seed;
use crate::text::tokenize;
use crate::topics::{EvolvingTopic, TermVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectMode {
    #[default]
    Knn,
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    #[default]
    Exact,
    Ann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub k: usize,
    pub max_distance: f64,
    pub min_norm: f64,
    pub mode: DetectMode,
    pub search: Search,
    /// Minimum members for a cluster-mode emergent set.
    pub min_set_size: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for DetectionParams {
    fn default() -> Self {
        DetectionParams {
            k: 10,
            max_distance: 0.2,
            min_norm: 0.22,
            mode: DetectMode::Knn,
            search: Search::Exact,
            min_set_size: 2,
            seed: 42,
            execution: Execution::Deterministic,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_distance > 0.0 && self.max_distance <= 2.0) {
            return Err(AtemError::InvalidParam("max_distance must lie in (0, 2]".into()));
        }
        if !(self.min_norm >= 0.0) {
            return Err(AtemError::InvalidParam("min_norm must be >= 0".into()));
        }
        if self.k == 0 {
            return Err(AtemError::InvalidParam("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Why a query produced no neighbours without searching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoSnapshot,
    Absent,
    LowNorm,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Neighbors {
    /// `(topic index, distance)` ascending by distance.
    pub hits: Vec<(usize, f64)>,
    pub skipped: Option<SkipReason>,
}

fn usable(series: &TopicEmbeddingSeries, u: usize, period: usize, min_norm: f64) -> Option<&[f32]> {
    let snap = series.snapshots.get(period)?;
    let n = snap.norm(u)?;
    (n > 0.0 && f64::from(n) >= min_norm).then(|| snap.get(u).unwrap())
}

fn was_close_before(series: &TopicEmbeddingSeries, t: usize, tx: usize, period: usize, params: &DetectionParams) -> bool {
    (0..period).any(|j| {
        match (usable(series, t, j, params.min_norm), usable(series, tx, j, params.min_norm)) {
            (Some(a), Some(b)) => embedding_distance(a, b).is_ok_and(|d| d <= params.max_distance),
            _ => false,
        }
    })
}

/// Random-hyperplane LSH over one snapshot. Candidates are re-ranked with the
/// exact distance, so the index only decides which topics are looked at.
#[derive(Debug, Clone)]
pub struct AnnIndex {
    planes: Vec<Vec<Vec<f32>>>,
    tables: Vec<HashMap<u64, Vec<usize>>>,
}

impl AnnIndex {
    pub const TABLES: usize = 20;
    pub const BITS: usize = 6;

    pub fn build(series: &TopicEmbeddingSeries, period: usize, min_norm: f64, seed_value: u64) -> Self {
        let mut rng = seed::rng_for(seed_value, &[0xA11, period as u64]);
        let planes: Vec<Vec<Vec<f32>>> = (0..Self::TABLES)
            .map(|_| {
                (0..Self::BITS)
                    .map(|_| (0..series.dim).map(|_| rng.gen::<f32>() * 2.0 - 1.0).collect())
                    .collect()
            })
            .collect();
        let mut tables = vec![HashMap::new(); Self::TABLES];
        for u in 0..series.nodes.len() {
            if let Some(v) = usable(series, u, period, min_norm) {
                for (t, table) in tables.iter_mut().enumerate() {
                    table.entry(hash(&planes[t], v)).or_insert_with(Vec::new).push(u);
                }
            }
        }
        AnnIndex { planes, tables }
    }

    pub fn candidates(&self, q: &[f32]) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (planes, table) in self.planes.iter().zip(&self.tables) {
            if let Some(bucket) = table.get(&hash(planes, q)) {
                out.extend(bucket.iter().copied());
            }
        }
        out
    }
}

fn hash(planes: &[Vec<f32>], v: &[f32]) -> u64 {
    planes
        .iter()
        .enumerate()
        .fold(0u64, |h, (b, p)| if crate::linalg::dot(p, v) >= 0.0 { h | (1 << b) } else { h })
}

/// New nearest neighbours of `t` at `period`.
pub fn detect_new_neighbors(series: &TopicEmbeddingSeries, t: usize, period: usize, params: &DetectionParams) -> Neighbors {
    detect_with(series, t, period, params, None)
}

fn detect_with(
    series: &TopicEmbeddingSeries,
    t: usize,
    period: usize,
    params: &DetectionParams,
    index: Option<&AnnIndex>,
) -> Neighbors {
    let skip = |r| Neighbors { hits: Vec::new(), skipped: Some(r) };
    let Some(snap) = series.snapshots.get(period) else {
        return skip(SkipReason::NoSnapshot);
    };
    if snap.get(t).is_none() {
        return skip(SkipReason::Absent);
    }
    let Some(q) = usable(series, t, period, params.min_norm) else {
        return skip(SkipReason::LowNorm);
    };
    let pool: Vec<usize> = match index {
        Some(ix) => ix.candidates(q).into_iter().collect(),
        None => (0..series.nodes.len()).collect(),
    };
    let mut hits: Vec<(usize, f64)> = pool
        .into_iter()
        .filter(|&u| u != t)
        .filter_map(|u| {
            let v = usable(series, u, period, params.min_norm)?;
            let d = embedding_distance(q, v).ok()?;
            (d <= params.max_distance).then_some((u, d))
        })
        .filter(|&(u, _)| !was_close_before(series, t, u, period, params))
        .collect();
    hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    hits.truncate(params.k);
    Neighbors { hits, skipped: None }
}

/// One directed detection: `tx` entered the new-neighbour set of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborEvent {
    pub t: usize,
    pub tx: usize,
    pub period: usize,
    pub distance: f64,
}

/// New-neighbour sets of every topic at every period.
pub fn detect_all(series: &TopicEmbeddingSeries, params: &DetectionParams) -> Vec<NeighborEvent> {
    let mut out = Vec::new();
    for period in 0..series.periods() {
        let index = (params.search == Search::Ann).then(|| AnnIndex::build(series, period, params.min_norm, params.seed));
        let per_topic = par::map_range(params.execution, series.nodes.len(), |t| {
            detect_with(series, t, period, params, index.as_ref()).hits
        });
        for (t, hits) in per_topic.into_iter().enumerate() {
            out.extend(hits.into_iter().map(|(tx, distance)| NeighborEvent { t, tx, period, distance }));
        }
    }
    out
}

/// Undirected pairs from directed events, each stamped with its first period.
pub fn unique_pairs(events: &[NeighborEvent]) -> Vec<NeighborEvent> {
    let mut first: BTreeMap<(usize, usize), (usize, f64)> = BTreeMap::new();
    for e in events {
        let key = (e.t.min(e.tx), e.t.max(e.tx));
        let slot = first.entry(key).or_insert((e.period, e.distance));
        if e.period < slot.0 {
            *slot = (e.period, e.distance);
        }
    }
    first
        .into_iter()
        .map(|((t, tx), (period, distance))| NeighborEvent { t, tx, period, distance })
        .collect()
}

/// Density clusters of the usable snapshot vectors at `period`. Vectors are
/// unit-normalised so the fixed radius `sqrt(2 * max_distance)` is the
/// cosine-distance threshold.
pub fn cluster_period_embeddings(series: &TopicEmbeddingSeries, period: usize, params: &DetectionParams) -> Vec<Vec<usize>> {
    let ids: Vec<usize> = (0..series.nodes.len())
        .filter(|&u| usable(series, u, period, params.min_norm).is_some())
        .collect();
    if ids.len() < 2 {
        return Vec::new();
    }
    let mut data = Vec::with_capacity(ids.len() * series.dim);
    for &u in &ids {
        let v = series.vector(u, period).unwrap();
        let n = crate::linalg::norm(v);
        data.extend(v.iter().map(|x| f64::from(x / n)));
    }
    let size = params.min_set_size.max(2);
    let density = DensityParams {
        min_cluster_size: size,
        k_core: size - 1,
        eps: Some((2.0 * params.max_distance).sqrt()),
        ..DensityParams::default()
    };
    let a = density_cluster(&Points::new(series.dim, data), &density, params.execution);
    let mut sets = vec![Vec::new(); a.cluster_count];
    for (i, l) in a.labels.iter().enumerate() {
        if let Some(c) = l {
            sets[*c].push(ids[i]);
        }
    }
    sets.retain(|s| s.len() >= size);
    sets
}

/// Cluster-mode emergent sets, each stamped with the first period it appears.
pub fn detect_sets(series: &TopicEmbeddingSeries, params: &DetectionParams) -> Vec<(Vec<usize>, usize)> {
    let mut seen: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for period in 0..series.periods() {
        for s in cluster_period_embeddings(series, period, params) {
            seen.entry(s).or_insert(period);
        }
    }
    let mut out: Vec<_> = seen.into_iter().collect();
    out.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// How the document set of a topic pair is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DocSetSource {
    /// Intersection of the members' own per-period document clusters.
    Cluster,
    /// Documents containing at least `min_hits` of each member's top
    /// `profile_terms` profile terms.
    Query { min_hits: usize, profile_terms: usize },
}

impl Default for DocSetSource {
    fn default() -> Self {
        DocSetSource::Query {
            min_hits: 2,
            profile_terms: 10,
        }
    }
}

/// Per-topic sorted document lists used to build pair document sets.
#[derive(Debug, Clone)]
pub struct DocSets {
    source: DocSetSource,
    matches: Vec<Vec<DocIdx>>,
}

impl DocSets {
    pub fn build(topics: &[EvolvingTopic], corpus: &Corpus, source: DocSetSource, exec: Execution) -> Self {
        let matches = match source {
            DocSetSource::Cluster => topics
                .iter()
                .map(|t| {
                    let s: BTreeSet<DocIdx> = t.per_period_docs.iter().flatten().copied().collect();
                    s.into_iter().collect()
                })
                .collect(),
            DocSetSource::Query { min_hits, profile_terms } => {
                let mut postings: HashMap<String, Vec<DocIdx>> = HashMap::new();
                let token_sets = par::map(exec, corpus.documents(), |d| {
                    let mut toks = tokenize(&d.text());
                    toks.sort_unstable();
                    toks.dedup();
                    toks
                });
                for (i, toks) in token_sets.into_iter().enumerate() {
                    for tok in toks {
                        postings.entry(tok).or_default().push(i);
                    }
                }
                par::map(exec, topics, |t| {
                    let mut hits: BTreeMap<DocIdx, usize> = BTreeMap::new();
                    for tok in t.profile(profile_terms).tokens() {
                        for &d in postings.get(tok).map(Vec::as_slice).unwrap_or(&[]) {
                            *hits.entry(d).or_insert(0) += 1;
                        }
                    }
                    hits.into_iter().filter(|(_, c)| *c >= min_hits.max(1)).map(|(d, _)| d).collect()
                })
            }
        };
        DocSets { source, matches }
    }

    pub fn source(&self) -> DocSetSource {
        self.source
    }

    pub fn of(&self, topic: usize) -> &[DocIdx] {
        &self.matches[topic]
    }

    /// Sorted documents shared by both topics.
    pub fn shared(&self, a: usize, b: usize) -> Vec<DocIdx> {
        intersect(&self.matches[a], &self.matches[b])
    }
}

fn intersect(a: &[DocIdx], b: &[DocIdx]) -> Vec<DocIdx> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmergingTopic {
    pub members: Vec<usize>,
    pub period: usize,
    pub distance: Option<f64>,
    pub rep: Vec<Option<TermVector>>,
    pub docs: Vec<Vec<DocIdx>>,
    pub past: Vec<DocIdx>,
    pub future: Vec<DocIdx>,
}

impl EmergingTopic {
    pub fn emergence(&self) -> Option<f64> {
        predictability(self.past.len() as u64, self.future.len() as u64)
    }

    pub fn cluster_size(&self) -> usize {
        self.past.len() + self.future.len()
    }
}

/// Merge two topics into the candidate emerging topic of period `k`. A
/// document is past when its first period precedes `k`, future otherwise.
pub fn form_emerging_pair(
    t: usize,
    tx: usize,
    k: usize,
    topics: &[EvolvingTopic],
    corpus: &Corpus,
    docs: &DocSets,
) -> Result<EmergingTopic> {
    if t == tx {
        return Err(AtemError::InvalidParam(format!("emerging pair needs two topics, got {t} twice")));
    }
    let (a, b) = (&topics[t], &topics[tx]);
    let n = a.periods().max(b.periods());
    let rep = (0..n)
        .map(|p| match (a.per_period_rep.get(p).cloned().flatten(), b.per_period_rep.get(p).cloned().flatten()) {
            (Some(x), Some(y)) => Some(x.union_max(&y)),
            (x, y) => x.or(y),
        })
        .collect();
    let per_period: Vec<Vec<DocIdx>> = match docs.source() {
        DocSetSource::Cluster => (0..n)
            .map(|p| {
                let mut x = a.per_period_docs.get(p).cloned().unwrap_or_default();
                let mut y = b.per_period_docs.get(p).cloned().unwrap_or_default();
                x.sort_unstable();
                y.sort_unstable();
                intersect(&x, &y)
            })
            .collect(),
        DocSetSource::Query { .. } => {
            let mut out = vec![Vec::new(); n];
            for d in docs.shared(t, tx) {
                for p in corpus.timeline.periods_of(corpus.doc(d).year) {
                    if p < n {
                        out[p].push(d);
                    }
                }
            }
            out
        }
    };
    let all: BTreeSet<DocIdx> = per_period.iter().flatten().copied().collect();
    let (past, future) = all
        .into_iter()
        .partition(|&d| corpus.timeline.first_period_of(corpus.doc(d).year).is_some_and(|p| p < k));
    Ok(EmergingTopic {
        members: vec![t, tx],
        period: k,
        distance: None,
        rep,
        docs: per_period,
        past,
        future,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergingRecord {
    pub t: String,
    pub tx: String,
    pub period: usize,
    pub distance: f64,
    pub past_count: usize,
    pub future_count: usize,
    pub emergence: Option<f64>,
    pub rep_sample: Vec<String>,
}

impl EmergingRecord {
    pub fn new(e: &EmergingTopic, topics: &[EvolvingTopic], distance: f64) -> Self {
        let rep_sample = e
            .rep
            .get(e.period)
            .cloned()
            .flatten()
            .unwrap_or_else(|| topics[e.members[0]].profile(10).union_max(&topics[e.members[1]].profile(10)));
        EmergingRecord {
            t: topics[e.members[0]].topic_id.clone(),
            tx: topics[e.members[1]].topic_id.clone(),
            period: e.period,
            distance,
            past_count: e.past.len(),
            future_count: e.future.len(),
            emergence: e.emergence(),
            rep_sample: rep_sample.tokens().take(10).map(str::to_string).collect(),
        }
    }
}

pub fn records_to_jsonl(records: &[EmergingRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<EmergingRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(AtemError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::vecio::NamedVectors;
    use proptest::prelude::*;
    use rand::Rng;

    /// Series whose vectors are given as (angle, norm) per node per period.
    fn series_2d(per_period: &[Vec<Option<(f64, f64)>>]) -> TopicEmbeddingSeries {
        let n = per_period[0].len();
        let nodes: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let tables: Vec<NamedVectors> = per_period
            .iter()
            .map(|row| {
                let mut t = NamedVectors::new(2);
                for (i, v) in row.iter().enumerate() {
                    if let Some((a, r)) = v {
                        t.push(nodes[i].clone(), &[(r * a.cos()) as f32, (r * a.sin()) as f32]).unwrap();
                    }
                }
                t
            })
            .collect();
        TopicEmbeddingSeries::from_snapshot_tables(nodes, &tables).unwrap()
    }

    fn angle_for(distance: f64) -> f64 {
        (1.0 - distance).acos()
    }

    #[test]
    fn new_close_neighbour_is_returned() {
        let s = series_2d(&[
            vec![Some((0.0, 1.0)), Some((angle_for(0.5), 1.0))],
            vec![Some((0.0, 1.0)), Some((angle_for(0.1), 1.0))],
        ]);
        let r = detect_new_neighbors(&s, 0, 1, &DetectionParams::default());
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].0, 1);
        assert!((r.hits[0].1 - 0.1).abs() < 1e-6);
    }

    #[test]
    fn old_neighbour_is_not_new() {
        let s = series_2d(&[
            vec![Some((0.0, 1.0)), Some((angle_for(0.1), 1.0))],
            vec![Some((0.0, 1.0)), Some((angle_for(0.1), 1.0))],
        ]);
        assert!(detect_new_neighbors(&s, 0, 1, &DetectionParams::default()).hits.is_empty());
    }

    #[test]
    fn low_norm_candidates_and_queries_are_skipped() {
        let s = series_2d(&[vec![Some((0.0, 1.0)), Some((angle_for(0.05), 0.1)), None]]);
        let p = DetectionParams::default();
        assert!(detect_new_neighbors(&s, 0, 0, &p).hits.is_empty());
        assert_eq!(detect_new_neighbors(&s, 1, 0, &p).skipped, Some(SkipReason::LowNorm));
        assert_eq!(detect_new_neighbors(&s, 2, 0, &p).skipped, Some(SkipReason::Absent));
        assert_eq!(detect_new_neighbors(&s, 0, 3, &p).skipped, Some(SkipReason::NoSnapshot));
    }

    #[test]
    fn low_norm_history_does_not_witness_closeness() {
        let s = series_2d(&[
            vec![Some((0.0, 1.0)), Some((angle_for(0.05), 0.1))],
            vec![Some((0.0, 1.0)), Some((angle_for(0.05), 1.0))],
        ]);
        assert_eq!(detect_new_neighbors(&s, 0, 1, &DetectionParams::default()).hits.len(), 1);
    }

    fn random_series(seed_value: u64, n: usize, periods: usize, dim: usize) -> TopicEmbeddingSeries {
        let mut rng = seed::rng(seed_value);
        let nodes: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let tables: Vec<NamedVectors> = (0..periods)
            .map(|_| {
                let mut t = NamedVectors::new(dim);
                for id in &nodes {
                    if rng.gen_bool(0.9) {
                        let v: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
                        t.push(id.clone(), &v).unwrap();
                    }
                }
                t
            })
            .collect();
        TopicEmbeddingSeries::from_snapshot_tables(nodes, &tables).unwrap()
    }

    #[test]
    fn exhaustive_settings_return_every_first_coexistence() {
        let s = random_series(3, 8, 4, 4);
        let p = DetectionParams {
            k: 8,
            max_distance: 2.0,
            min_norm: 0.0,
            ..DetectionParams::default()
        };
        for t in 0..8 {
            for i in 0..4 {
                let got: BTreeSet<usize> = detect_new_neighbors(&s, t, i, &p).hits.iter().map(|h| h.0).collect();
                let mut want = BTreeSet::new();
                if s.vector(t, i).is_some() {
                    for u in (0..8).filter(|&u| u != t && s.vector(u, i).is_some()) {
                        if !(0..i).any(|j| s.vector(t, j).is_some() && s.vector(u, j).is_some()) {
                            want.insert(u);
                        }
                    }
                }
                assert_eq!(got, want, "t={t} i={i}");
            }
        }
    }

    #[test]
    fn ann_agrees_with_exact_search() {
        let mut agree = 0;
        let mut total = 0;
        for sd in 0..5 {
            let s = random_series(sd, 60, 3, 4);
            let exact = DetectionParams {
                max_distance: 0.2,
                min_norm: 0.0,
                ..DetectionParams::default()
            };
            let ann = DetectionParams { search: Search::Ann, ..exact.clone() };
            for i in 0..3 {
                let ix = AnnIndex::build(&s, i, 0.0, ann.seed);
                for t in 0..60 {
                    let a = detect_new_neighbors(&s, t, i, &exact).hits;
                    let b = detect_with(&s, t, i, &ann, Some(&ix)).hits;
                    total += 1;
                    agree += usize::from(a == b);
                }
            }
        }
        assert!(agree as f64 >= 0.9 * total as f64, "{agree}/{total}");
    }

    #[test]
    fn cluster_mode_finds_two_blobs() {
        let mut rng = seed::rng(9);
        let mut row = Vec::new();
        for c in [0.0f64, 2.0] {
            for _ in 0..5 {
                row.push(Some((c + rng.gen_range(-0.05..0.05), 1.0)));
            }
        }
        let s = series_2d(&[row]);
        let sets = cluster_period_embeddings(&s, 0, &DetectionParams::default());
        assert_eq!(sets, vec![(0..5).collect::<Vec<_>>(), (5..10).collect()]);
    }

    #[test]
    fn cluster_mode_ignores_distant_topics_and_singletons() {
        let row: Vec<_> = (0..6).map(|i| Some((i as f64, 1.0))).collect();
        let s = series_2d(&[row]);
        assert!(cluster_period_embeddings(&s, 0, &DetectionParams::default()).is_empty());
    }

    fn toy_corpus() -> Corpus {
        let docs = (0..6).map(|i| Document::new(format!("d{i}"), "x", "y", 2000 + i)).collect();
        Corpus::from_documents(docs).unwrap()
    }

    fn topic(id: &str, per_period: &[&[usize]]) -> EvolvingTopic {
        EvolvingTopic {
            topic_id: id.into(),
            per_period_docs: per_period.iter().map(|p| p.to_vec()).collect(),
            per_period_rep: vec![None; per_period.len()],
        }
    }

    #[test]
    fn pair_partition_examples() {
        let c = toy_corpus();
        let ts = vec![
            topic("a", &[&[0], &[1], &[], &[3], &[], &[5]]),
            topic("b", &[&[], &[2], &[], &[3], &[], &[5]]),
            topic("c", &[&[], &[], &[], &[], &[], &[]]),
            topic("d", &[&[], &[], &[2], &[], &[], &[]]),
        ];
        let ds = DocSets::build(&ts, &c, DocSetSource::Cluster, Execution::Deterministic);
        let e = form_emerging_pair(0, 2, 3, &ts, &c, &ds).unwrap();
        assert!(e.docs.iter().all(Vec::is_empty));
        assert_eq!(e.emergence(), None);
        let e = form_emerging_pair(0, 1, 3, &ts, &c, &ds).unwrap();
        assert!(e.past.is_empty());
        assert_eq!(e.future, vec![3, 5]);
        assert_eq!(e.emergence(), Some(1.0));
        let e = form_emerging_pair(1, 3, 3, &ts, &c, &ds).unwrap();
        assert!(e.past.is_empty() && e.future.is_empty());
        let ts2 = vec![topic("a", &[&[], &[], &[2]]), topic("b", &[&[], &[], &[2]])];
        let ds2 = DocSets::build(&ts2, &c, DocSetSource::Cluster, Execution::Deterministic);
        let e = form_emerging_pair(0, 1, 3, &ts2, &c, &ds2).unwrap();
        assert_eq!((e.past.clone(), e.future.clone()), (vec![2], vec![]));
        assert!(form_emerging_pair(0, 0, 3, &ts2, &c, &ds2).is_err());
    }

    #[test]
    fn query_doc_sets_use_profile_terms() {
        let docs = vec![
            Document::new("a1", "alpha beta", "gamma", 2000),
            Document::new("b1", "delta epsilon", "zeta", 2000),
            Document::new("m1", "alpha beta delta", "epsilon", 2001),
        ];
        let c = Corpus::from_documents(docs).unwrap();
        let rep = |w: &[&str]| Some(TermVector::top(w.iter().map(|t| (t.to_string(), 1.0)).collect(), 10));
        let ts = vec![
            EvolvingTopic {
                topic_id: "a".into(),
                per_period_docs: vec![vec![c.idx("a1").unwrap()], vec![]],
                per_period_rep: vec![rep(&["alpha", "beta", "gamma"]), None],
            },
            EvolvingTopic {
                topic_id: "b".into(),
                per_period_docs: vec![vec![c.idx("b1").unwrap()], vec![]],
                per_period_rep: vec![rep(&["delta", "epsilon", "zeta"]), None],
            },
        ];
        let ds = DocSets::build(&ts, &c, DocSetSource::default(), Execution::Deterministic);
        let m = c.idx("m1").unwrap();
        assert_eq!(ds.shared(0, 1), vec![m]);
        let e = form_emerging_pair(0, 1, 1, &ts, &c, &ds).unwrap();
        assert_eq!(e.future, vec![m]);
        assert_eq!(e.docs[1], vec![m]);
        let r = EmergingRecord::new(&e, &ts, 0.1);
        assert_eq!(records_from_jsonl(&records_to_jsonl(std::slice::from_ref(&r)).unwrap()).unwrap(), vec![r]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn detections_are_one_shot_and_bounded(sd in 0u64..1000, phi in 0.05f64..1.0) {
            let s = random_series(sd, 10, 5, 3);
            let p = DetectionParams { max_distance: phi, min_norm: 0.1, k: 10, ..DetectionParams::default() };
            let events = detect_all(&s, &p);
            let mut seen = BTreeSet::new();
            for e in &events {
                prop_assert!(e.distance >= 0.0 && e.distance <= phi);
                prop_assert!(seen.insert((e.t, e.tx)), "pair reported twice");
                let d = embedding_distance(s.vector(e.t, e.period).unwrap(), s.vector(e.tx, e.period).unwrap()).unwrap();
                prop_assert!(d <= phi);
            }
        }
    }
}
