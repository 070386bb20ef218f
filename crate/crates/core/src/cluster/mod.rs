//! Content clusters, citation communities and their intersection.

mod community;
mod density;
mod metrics;
mod reduce;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocIdx};

pub use community::{citation_graph, detect_communities, modularity, CommunityParams, WeightedGraph};
pub use density::{density_cluster, DensityParams};
pub use metrics::adjusted_rand_index;
pub use reduce::{reduce_dimensions, Reducer};

/// Row-major points of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged point data");
        Points { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(1, Vec::len);
        Points::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn from_f32(dim: usize, data: &[f32]) -> Self {
        Points::new(dim, data.iter().map(|x| f64::from(*x)).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Per-item cluster label; `None` is NOISE.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<Option<usize>>,
    pub cluster_count: usize,
}

impl ClusterAssignment {
    /// Relabel clusters densely in order of first appearance.
    pub fn canonical(raw: &[Option<usize>]) -> Self {
        let mut map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut next = 0;
        let labels = raw
            .iter()
            .map(|l| {
                l.map(|c| {
                    *map.entry(c).or_insert_with(|| {
                        next += 1;
                        next - 1
                    })
                })
            })
            .collect();
        ClusterAssignment {
            labels,
            cluster_count: next,
        }
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.cluster_count];
        for l in self.labels.iter().flatten() {
            s[*l] += 1;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub content_cluster: usize,
    pub community: usize,
    pub docs: Vec<DocIdx>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicSet {
    pub topics: Vec<Topic>,
}

pub fn topic_id(content: usize, community: usize) -> String {
    format!("T{content}C{community}")
}

/// Intersect every content cluster with every community; NOISE documents
/// belong to no topic and empty intersections are dropped.
pub fn aggregate(content: &ClusterAssignment, communities: &ClusterAssignment) -> TopicSet {
    assert_eq!(content.labels.len(), communities.labels.len(), "assignments over different corpora");
    let mut cells: BTreeMap<(usize, usize), Vec<DocIdx>> = BTreeMap::new();
    for (d, (t, c)) in content.labels.iter().zip(&communities.labels).enumerate() {
        if let (Some(t), Some(c)) = (t, c) {
            cells.entry((*t, *c)).or_default().push(d);
        }
    }
    TopicSet {
        topics: cells
            .into_iter()
            .map(|((t, c), docs)| Topic {
                topic_id: topic_id(t, c),
                content_cluster: t,
                community: c,
                docs,
            })
            .collect(),
    }
}

/// `topics.jsonl` lines: `{"topic_id": ..., "doc_ids": [...]}`.
pub fn topics_to_jsonl(set: &TopicSet, corpus: &Corpus) -> crate::Result<String> {
    let mut out = String::new();
    for t in &set.topics {
        let ids: Vec<&str> = t.docs.iter().map(|&d| corpus.doc(d).doc_id.as_str()).collect();
        out.push_str(&serde_json::to_string(&serde_json::json!({
            "topic_id": t.topic_id,
            "doc_ids": ids,
        }))?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse `topics.jsonl`. Content and community ids are recovered from
/// `T<i>C<j>` ids when present.
pub fn topics_from_jsonl(text: &str, corpus: &Corpus) -> crate::Result<TopicSet> {
    #[derive(Deserialize)]
    struct Line {
        topic_id: String,
        doc_ids: Vec<String>,
    }
    let mut topics = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(line)?;
        let mut docs = Vec::with_capacity(l.doc_ids.len());
        for id in &l.doc_ids {
            let d = corpus
                .idx(id)
                .ok_or_else(|| crate::AtemError::Format(format!("topics line {}: unknown doc {id:?}", n + 1)))?;
            docs.push(d);
        }
        docs.sort_unstable();
        docs.dedup();
        let (content_cluster, community) = parse_topic_id(&l.topic_id).unwrap_or((n, 0));
        topics.push(Topic {
            topic_id: l.topic_id,
            content_cluster,
            community,
            docs,
        });
    }
    Ok(TopicSet { topics })
}

fn parse_topic_id(id: &str) -> Option<(usize, usize)> {
    let rest = id.strip_prefix('T')?;
    let (t, c) = rest.split_once('C')?;
    Some((t.parse().ok()?, c.parse().ok()?))
}
