//! The evolving topic-citation graph.
//!
//! An edge `(tx, ty, j)` exists when some document of `tx` in period `j`
//! cites a document of `ty` in a period `k <= j`. Its weight counts distinct
//! document citations, one increment per satisfying `(j, k)` pair.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{AtemError, Result};
use crate::par::{self, Execution};
use crate::seed;
use crate::topics::EvolvingTopic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TopicEdge {
    pub src: usize,
    pub dst: usize,
    pub period: usize,
    pub weight: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDiagnostics {
    /// Citations with an endpoint outside every topic.
    pub unassigned: u64,
    /// Citations whose cited document only sits in later periods than the citing one.
    pub anachronistic: u64,
    /// Citations with both endpoints in some topic.
    pub in_topics: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicCitationGraph {
    pub nodes: Vec<String>,
    pub n_periods: usize,
    /// Sorted by (period, src, dst).
    pub edges: Vec<TopicEdge>,
    pub diagnostics: GraphDiagnostics,
}

type EdgeKey = (usize, usize, usize);

#[derive(Default)]
struct Partial {
    weights: BTreeMap<EdgeKey, u64>,
    diag: GraphDiagnostics,
}

pub fn build_topic_citation_graph(topics: &[EvolvingTopic], corpus: &Corpus, exec: Execution) -> TopicCitationGraph {
    let n_periods = corpus.timeline.len();
    let mut membership: Vec<Vec<(usize, usize)>> = vec![Vec::new(); corpus.len()];
    for (ti, t) in topics.iter().enumerate() {
        for (p, docs) in t.per_period_docs.iter().enumerate() {
            for &d in docs {
                membership[d].push((ti, p));
            }
        }
    }
    let acc = par::fold_reduce(
        exec,
        &corpus.citations,
        4096,
        Partial::default,
        |acc, e| {
            let (ms, md) = (&membership[e.src], &membership[e.dst]);
            if ms.is_empty() || md.is_empty() {
                acc.diag.unassigned += 1;
                return;
            }
            acc.diag.in_topics += 1;
            let mut any = false;
            for &(tx, j) in ms {
                for &(ty, k) in md {
                    if k <= j {
                        *acc.weights.entry((j, tx, ty)).or_insert(0) += 1;
                        any = true;
                    }
                }
            }
            if !any {
                acc.diag.anachronistic += 1;
            }
        },
        |mut a, b| {
            for (k, w) in b.weights {
                *a.weights.entry(k).or_insert(0) += w;
            }
            a.diag.unassigned += b.diag.unassigned;
            a.diag.anachronistic += b.diag.anachronistic;
            a.diag.in_topics += b.diag.in_topics;
            a
        },
    );
    TopicCitationGraph {
        nodes: topics.iter().map(|t| t.topic_id.clone()).collect(),
        n_periods,
        edges: acc
            .weights
            .into_iter()
            .map(|((period, src, dst), weight)| TopicEdge { src, dst, period, weight })
            .collect(),
        diagnostics: acc.diag,
    }
}

/// Weighted static digraph for one period.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticGraph {
    pub edges: BTreeMap<(usize, usize), u64>,
}

impl TopicCitationGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == id)
    }

    /// Edges labelled exactly `period`, or `<= period` when cumulative (weights summed).
    pub fn slice(&self, period: usize, cumulative: bool) -> StaticGraph {
        let mut edges = BTreeMap::new();
        for e in &self.edges {
            if e.period == period || (cumulative && e.period < period) {
                *edges.entry((e.src, e.dst)).or_insert(0) += e.weight;
            }
        }
        StaticGraph { edges }
    }

    /// Undirected adjacency of the cumulative slice at `period`, without self-loops.
    fn undirected_neighbors(&self, period: usize) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.nodes.len()];
        for e in self.edges.iter().filter(|e| e.period <= period && e.src != e.dst) {
            adj[e.src].insert(e.dst);
            adj[e.dst].insert(e.src);
        }
        adj
    }

    /// Topics within `max_len` undirected hops of `topic` on the cumulative
    /// slice at `period` (excluding `topic`), sorted.
    pub fn reachable_within(&self, topic: usize, period: usize, max_len: usize) -> Vec<usize> {
        let adj = self.undirected_neighbors(period);
        let mut depth = vec![usize::MAX; self.nodes.len()];
        depth[topic] = 0;
        let mut q = VecDeque::from([topic]);
        let mut out = Vec::new();
        while let Some(u) = q.pop_front() {
            if depth[u] == max_len {
                continue;
            }
            for &v in &adj[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    out.push(v);
                    q.push_back(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Uniform sample without replacement of up to `count` topics reachable
    /// from `topic` within `max_len` hops at `period`. Sorted output.
    pub fn connected_pairs(&self, topic: usize, period: usize, max_len: usize, count: usize, seed_value: u64) -> Vec<usize> {
        let mut cand = self.reachable_within(topic, period, max_len);
        let mut rng = seed::rng_for(seed_value, &[topic as u64, period as u64]);
        cand.shuffle(&mut rng);
        cand.truncate(count);
        cand.sort_unstable();
        cand
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["src", "dst", "period", "weight"])?;
        for e in &self.edges {
            w.write_record([
                self.nodes[e.src].as_str(),
                self.nodes[e.dst].as_str(),
                &e.period.to_string(),
                &e.weight.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| AtemError::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| AtemError::Format(e.to_string()))
    }

    /// Parse `topic_graph.csv` over a known node list.
    pub fn from_csv(text: &str, nodes: Vec<String>, n_periods: usize) -> Result<Self> {
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut weights: BTreeMap<EdgeKey, u64> = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| row.get(i).ok_or_else(|| AtemError::Format("short topic_graph row".into()));
            let look = |s: &str| index.get(s).copied().ok_or_else(|| AtemError::Format(format!("unknown topic {s:?}")));
            let src = look(field(0)?)?;
            let dst = look(field(1)?)?;
            let period: usize = field(2)?.parse().map_err(|_| AtemError::Format("bad period".into()))?;
            let weight: u64 = field(3)?.parse().map_err(|_| AtemError::Format("bad weight".into()))?;
            if period >= n_periods {
                return Err(AtemError::Format(format!("edge period {period} beyond timeline")));
            }
            if weight > 0 {
                *weights.entry((period, src, dst)).or_insert(0) += weight;
            }
        }
        Ok(TopicCitationGraph {
            nodes,
            n_periods,
            edges: weights
                .into_iter()
                .map(|((period, src, dst), weight)| TopicEdge { src, dst, period, weight })
                .collect(),
            diagnostics: GraphDiagnostics::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    /// Topic x holds docs by period; topic y likewise.
    fn fixture(x: &[(usize, &str)], y: &[(usize, &str)], cites: &[(&str, &str)]) -> (Vec<EvolvingTopic>, Corpus) {
        let mut docs = Vec::new();
        for (p, id) in x.iter().chain(y) {
            docs.push(Document::new(*id, "t", "", 2000 + *p as i32));
        }
        docs.push(Document::new("late", "t", "", 2004));
        let mut c = Corpus::from_documents(docs).unwrap();
        c.set_citations(cites.iter().copied()).unwrap();
        let n = c.timeline.len();
        let mk = |name: &str, list: &[(usize, &str)]| {
            let mut per = vec![Vec::new(); n];
            for (p, id) in list {
                per[*p].push(c.idx(id).unwrap());
            }
            EvolvingTopic { topic_id: name.into(), per_period_docs: per, per_period_rep: vec![None; n] }
        };
        (vec![mk("tx", x), mk("ty", y)], c)
    }

    #[test]
    fn single_citation_single_edge() {
        let (t, c) = fixture(&[(2, "x2")], &[(1, "y1")], &[("x2", "y1")]);
        let g = build_topic_citation_graph(&t, &c, Execution::Deterministic);
        assert_eq!(g.edges, vec![TopicEdge { src: 0, dst: 1, period: 2, weight: 1 }]);
    }

    #[test]
    fn citations_into_two_earlier_periods_accumulate() {
        let (t, c) = fixture(&[(2, "x2")], &[(0, "y0"), (2, "y2")], &[("x2", "y0"), ("x2", "y2")]);
        let g = build_topic_citation_graph(&t, &c, Execution::Deterministic);
        assert_eq!(g.edges, vec![TopicEdge { src: 0, dst: 1, period: 2, weight: 2 }]);
    }

    #[test]
    fn citing_the_future_makes_no_edge() {
        let (t, c) = fixture(&[(1, "x1")], &[(3, "y3")], &[("x1", "y3"), ("x1", "late")]);
        let g = build_topic_citation_graph(&t, &c, Execution::Parallel);
        assert!(g.edges.is_empty());
        assert_eq!(g.diagnostics.anachronistic, 1);
        assert_eq!(g.diagnostics.unassigned, 1);
    }

    fn chain_graph() -> TopicCitationGraph {
        let mk = |src, dst, period, weight| TopicEdge { src, dst, period, weight };
        TopicCitationGraph {
            nodes: (0..5).map(|i| format!("t{i}")).collect(),
            n_periods: 4,
            edges: vec![mk(0, 1, 0, 1), mk(1, 2, 0, 1), mk(2, 3, 1, 1), mk(3, 4, 1, 1)],
            diagnostics: GraphDiagnostics::default(),
        }
    }

    #[test]
    fn slicing_rules() {
        let mk = |src, dst, period, weight| TopicEdge { src, dst, period, weight };
        let g = TopicCitationGraph {
            nodes: vec!["a".into(), "b".into()],
            n_periods: 4,
            edges: vec![mk(0, 1, 1, 2), mk(0, 1, 2, 3), mk(1, 0, 3, 1)],
            diagnostics: GraphDiagnostics::default(),
        };
        assert_eq!(g.slice(2, true).edges[&(0, 1)], 5);
        assert_eq!(g.slice(1, false).edges.len(), 1);
        assert!(g.slice(0, true).edges.is_empty());
        let g13 = TopicCitationGraph { edges: vec![mk(0, 1, 1, 1), mk(0, 1, 3, 1)], ..g.clone() };
        assert!(g13.slice(2, false).edges.is_empty());
        assert_eq!(g13.slice(2, true).edges[&(0, 1)], 1);
    }

    #[test]
    fn hop_limited_reachability() {
        let g = chain_graph();
        assert_eq!(g.reachable_within(0, 3, 3), vec![1, 2, 3]);
        assert_eq!(g.reachable_within(0, 0, 3), vec![1, 2]);
        assert_eq!(g.connected_pairs(0, 3, 3, 10, 1), vec![1, 2, 3]);
        assert_eq!(g.connected_pairs(4, 0, 3, 10, 1), Vec::<usize>::new());
        let a = g.connected_pairs(2, 3, 3, 2, 99);
        assert_eq!(a.len(), 2);
        assert_eq!(a, g.connected_pairs(2, 3, 3, 2, 99));
    }

    #[test]
    fn csv_round_trip() {
        let g = chain_graph();
        let text = g.to_csv().unwrap();
        assert!(text.starts_with("src,dst,period,weight\n"));
        let back = TopicCitationGraph::from_csv(&text, g.nodes.clone(), 4).unwrap();
        assert_eq!(back.edges, g.edges);
    }
}
