//! Modularity-based community detection on the undirected citation graph.
//!
//! Louvain local moving and aggregation, with a refinement step after every
//! level that splits internally disconnected communities into their
//! connected components. Node visiting order is a seeded shuffle, so results
//! are reproducible for a given seed.

use std::collections::{BTreeMap, VecDeque};

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ClusterAssignment;
use crate::corpus::Corpus;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommunityParams {
    pub resolution: f64,
    /// Maximum number of aggregation levels.
    pub passes: usize,
    pub seed: u64,
}

impl Default for CommunityParams {
    fn default() -> Self {
        CommunityParams {
            resolution: 1.0,
            passes: 10,
            seed: 42,
        }
    }
}

/// Undirected weighted graph. A non-loop edge `{u, v}` is listed in both
/// adjacency lists; a self-loop is listed once.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph { adj: vec![Vec::new(); n] }
    }

    /// Build from an edge list; parallel and reversed edges are merged by summing.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            let key = if u <= v { (u, v) } else { (v, u) };
            *merged.entry(key).or_insert(0.0) += w;
        }
        let mut g = WeightedGraph::new(n);
        for ((u, v), w) in merged {
            g.adj[u].push((v, w));
            if u != v {
                g.adj[v].push((u, w));
            }
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adj[u]
    }

    /// Weighted degree; self-loops count twice.
    pub fn degree(&self, u: usize) -> f64 {
        self.adj[u]
            .iter()
            .map(|&(v, w)| if v == u { 2.0 * w } else { w })
            .sum()
    }

    /// Total edge weight `m` (each undirected edge once).
    pub fn total_weight(&self) -> f64 {
        (0..self.node_count()).map(|u| self.degree(u)).sum::<f64>() / 2.0
    }

    pub fn edge_count(&self) -> usize {
        self.adj
            .iter()
            .enumerate()
            .map(|(u, a)| a.iter().filter(|(v, _)| *v >= u).count())
            .sum()
    }
}

/// Symmetrized document citation graph, weights = citation multiplicity.
pub fn citation_graph(corpus: &Corpus) -> WeightedGraph {
    WeightedGraph::from_edges(
        corpus.len(),
        corpus
            .citations
            .iter()
            .map(|e| (e.src, e.dst, f64::from(e.multiplicity))),
    )
}

/// Newman modularity at resolution 1.
pub fn modularity(partition: &[usize], graph: &WeightedGraph) -> f64 {
    modularity_at(partition, graph, 1.0)
}

pub fn modularity_at(partition: &[usize], graph: &WeightedGraph, resolution: f64) -> f64 {
    let m = graph.total_weight();
    if m == 0.0 {
        return 0.0;
    }
    let k = partition.iter().copied().max().map_or(0, |x| x + 1);
    let mut internal = vec![0.0; k];
    let mut total = vec![0.0; k];
    for u in 0..graph.node_count() {
        total[partition[u]] += graph.degree(u);
        for &(v, w) in graph.neighbors(u) {
            if partition[u] == partition[v] {
                // Non-loop edges are seen from both ends.
                internal[partition[u]] += if u == v { w } else { w / 2.0 };
            }
        }
    }
    internal
        .iter()
        .zip(&total)
        .map(|(i, t)| i / m - resolution * (t / (2.0 * m)).powi(2))
        .sum()
}

pub fn detect_communities(graph: &WeightedGraph, params: &CommunityParams) -> ClusterAssignment {
    let n = graph.node_count();
    if graph.total_weight() == 0.0 {
        warn!("citation graph has no edges; every document is its own community");
        return ClusterAssignment::canonical(&(0..n).map(Some).collect::<Vec<_>>());
    }
    let mut membership: Vec<usize> = (0..n).collect();
    let mut level_graph = graph.clone();
    for level in 0..params.passes.max(1) {
        let mut rng = seed::rng_for(params.seed, &[level as u64]);
        let local = local_moving(&level_graph, params.resolution, &mut rng);
        let refined = split_disconnected(&level_graph, &local);
        let count = refined.iter().copied().max().map_or(0, |x| x + 1);
        for m in membership.iter_mut() {
            *m = refined[*m];
        }
        if count == level_graph.node_count() {
            break;
        }
        level_graph = aggregate_graph(&level_graph, &refined, count);
    }
    let membership = split_disconnected(graph, &membership);
    ClusterAssignment::canonical(&membership.into_iter().map(Some).collect::<Vec<_>>())
}

fn local_moving(g: &WeightedGraph, resolution: f64, rng: &mut impl rand::Rng) -> Vec<usize> {
    let n = g.node_count();
    let m2 = 2.0 * g.total_weight();
    let degree: Vec<f64> = (0..n).map(|u| g.degree(u)).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut tot = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut link = vec![0.0f64; n];
    let mut touched: Vec<usize> = Vec::new();
    for _sweep in 0..100 {
        let mut moved = false;
        for &u in &order {
            let cu = comm[u];
            let ku = degree[u];
            for &(v, w) in g.neighbors(u) {
                if v == u {
                    continue;
                }
                let c = comm[v];
                if link[c] == 0.0 {
                    touched.push(c);
                }
                link[c] += w;
            }
            tot[cu] -= ku;
            let gain = |c: usize, l: f64| l - resolution * tot[c] * ku / m2;
            let mut best = cu;
            let mut best_gain = gain(cu, link[cu]);
            for &c in &touched {
                let gc = gain(c, link[c]);
                if gc > best_gain + 1e-12 || (gc > best_gain - 1e-12 && c < best && best != cu) {
                    best = c;
                    best_gain = gc;
                }
            }
            tot[best] += ku;
            if best != cu {
                comm[u] = best;
                moved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    comm
}

/// Relabel so that every community is connected; labels dense from 0 in
/// order of the lowest node of each component.
fn split_disconnected(g: &WeightedGraph, comm: &[usize]) -> Vec<usize> {
    let n = g.node_count();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in g.neighbors(u) {
                if out[v] == usize::MAX && comm[v] == comm[s] {
                    out[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    out
}

fn aggregate_graph(g: &WeightedGraph, comm: &[usize], count: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..g.node_count() {
        for &(v, w) in g.neighbors(u) {
            if u < v {
                edges.push((comm[u], comm[v], w));
            } else if u == v {
                edges.push((comm[u], comm[u], w));
            }
        }
    }
    WeightedGraph::from_edges(count, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn cliques_with_bridge(k: usize) -> WeightedGraph {
        let mut e = Vec::new();
        for base in [0, k] {
            for i in 0..k {
                for j in (i + 1)..k {
                    e.push((base + i, base + j, 1.0));
                }
            }
        }
        e.push((0, k, 1.0));
        WeightedGraph::from_edges(2 * k, e)
    }

    fn is_connected_within(g: &WeightedGraph, labels: &[Option<usize>]) -> bool {
        let comm: Vec<usize> = labels.iter().map(|l| l.unwrap()).collect();
        let split = split_disconnected(g, &comm);
        let a = split.iter().copied().max().unwrap_or(0);
        let b = comm.iter().copied().max().unwrap_or(0);
        a == b
    }

    #[test]
    fn two_cliques_are_recovered() {
        let g = cliques_with_bridge(10);
        let a = detect_communities(&g, &CommunityParams::default());
        assert_eq!(a.cluster_count, 2);
        assert!(a.labels[..10].iter().all(|l| *l == a.labels[0]));
        assert!(a.labels[10..].iter().all(|l| *l == a.labels[10]));
        assert_ne!(a.labels[0], a.labels[10]);
    }

    #[test]
    fn triangle_is_one_community() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        assert_eq!(detect_communities(&g, &CommunityParams::default()).cluster_count, 1);
    }

    #[test]
    fn empty_graph_gives_singletons() {
        let g = WeightedGraph::new(4);
        let a = detect_communities(&g, &CommunityParams::default());
        assert_eq!(a.cluster_count, 4);
    }

    #[test]
    fn modularity_reference_values() {
        let g = WeightedGraph::from_edges(
            6,
            [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 3, 1.0)],
        );
        assert!((modularity(&[0, 0, 0, 1, 1, 1], &g) - 0.5).abs() < 1e-12);
        assert!(modularity(&[0; 6], &g).abs() < 1e-12);
        // singletons: -sum (deg/2m)^2 = -6 * (2/12)^2
        let single: Vec<usize> = (0..6).collect();
        assert!((modularity(&single, &g) + 6.0 * (2.0f64 / 12.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn beats_random_partitions_and_stays_connected() {
        let mut rng = seed::rng(8);
        for trial in 0..5 {
            let n = 60;
            let edges: Vec<(usize, usize, f64)> = (0..150)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), 1.0))
                .filter(|(a, b, _)| a != b)
                .collect();
            let g = WeightedGraph::from_edges(n, edges);
            let params = CommunityParams { seed: trial, ..Default::default() };
            let a = detect_communities(&g, &params);
            let labels: Vec<usize> = a.labels.iter().map(|l| l.unwrap()).collect();
            let q = modularity(&labels, &g);
            let single: Vec<usize> = (0..n).collect();
            assert!(q >= modularity(&single, &g));
            let k = a.cluster_count.max(2);
            let random: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            assert!(q >= modularity(&random, &g));
            assert!(is_connected_within(&g, &a.labels));
        }
    }

    #[test]
    fn same_seed_same_result() {
        let g = cliques_with_bridge(6);
        let p = CommunityParams::default();
        assert_eq!(detect_communities(&g, &p), detect_communities(&g, &p));
    }
}
