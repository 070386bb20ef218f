//! Per-period topic embeddings from time-decayed random walks and a
//! warm-started skip-gram.
//!
//! At period `i` the walk graph is the cumulative slice of the topic graph
//! with every edge `(u, v, j, w)` weighted `w * 2^(-(i - j) / half_life)`,
//! traversable in both directions. Skip-gram training with the whole walk
//! as context continues from the state reached at `i - 1`, so snapshot `i`
//! only ever sees edges labelled `<= i`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AtemError, Result};
use crate::linalg;
use crate::par::{self, Execution};
use crate::seed;
use crate::sgns::{self, NoiseTable, Scratch, SharedMatrix};
use crate::tcgraph::TopicCitationGraph;
use crate::vecio::NamedVectors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkParams {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub half_life_periods: f64,
    pub dim: usize,
    pub epochs_per_period: usize,
    pub negatives: usize,
    pub learning_rate: f32,
    pub seed: u64,
    /// Let walks step along intra-topic self-loops.
    pub include_self_loops: bool,
    pub execution: Execution,
}

impl Default for WalkParams {
    fn default() -> Self {
        WalkParams {
            walks_per_node: 10,
            walk_length: 8,
            half_life_periods: 2.0,
            dim: 32,
            epochs_per_period: 5,
            negatives: 5,
            learning_rate: 0.025,
            seed: 42,
            include_self_loops: false,
            execution: Execution::Deterministic,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(AtemError::InvalidParam("walk_length must be >= 2".into()));
        }
        if !(self.half_life_periods > 0.0) {
            return Err(AtemError::InvalidParam("half_life_periods must be > 0".into()));
        }
        if self.dim < 2 {
            return Err(AtemError::InvalidParam("dynembed dim must be >= 2".into()));
        }
        Ok(())
    }
}

/// Undirected, decayed transition structure for one period.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    /// Per node: neighbours sorted by index with cumulative weights.
    neighbors: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
    /// Nodes with an incident edge labelled <= period.
    pub active: Vec<bool>,
    pub strength: Vec<f64>,
}

impl WalkGraph {
    pub fn at_period(graph: &TopicCitationGraph, period: usize, params: &WalkParams) -> Self {
        let n = graph.nodes.len();
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        let mut active = vec![false; n];
        for e in graph.edges.iter().filter(|e| e.period <= period) {
            active[e.src] = true;
            active[e.dst] = true;
            if e.src == e.dst && !params.include_self_loops {
                continue;
            }
            let age = (period - e.period) as f64;
            let w = e.weight as f64 * (-age / params.half_life_periods).exp2();
            *acc[e.src].entry(e.dst).or_insert(0.0) += w;
            if e.src != e.dst {
                *acc[e.dst].entry(e.src).or_insert(0.0) += w;
            }
        }
        let mut neighbors = Vec::with_capacity(n);
        let mut cumulative = Vec::with_capacity(n);
        let mut strength = Vec::with_capacity(n);
        for m in acc {
            let mut total = 0.0;
            let (ns, cs): (Vec<usize>, Vec<f64>) = m
                .into_iter()
                .map(|(v, w)| {
                    total += w;
                    (v, total)
                })
                .unzip();
            neighbors.push(ns);
            cumulative.push(cs);
            strength.push(total);
        }
        WalkGraph {
            neighbors,
            cumulative,
            active,
            strength,
        }
    }

    /// Exact one-step transition distribution out of `u`.
    pub fn transition_probabilities(&self, u: usize) -> Vec<(usize, f64)> {
        let total = self.strength[u];
        let mut prev = 0.0;
        self.neighbors[u]
            .iter()
            .zip(&self.cumulative[u])
            .map(|(&v, &c)| {
                let p = (c - prev) / total;
                prev = c;
                (v, p)
            })
            .collect()
    }

    fn step<R: Rng>(&self, u: usize, rng: &mut R) -> Option<usize> {
        let cum = &self.cumulative[u];
        let total = *cum.last()?;
        if total <= 0.0 {
            return None;
        }
        let x = rng.gen::<f64>() * total;
        let i = cum.partition_point(|c| *c <= x).min(cum.len() - 1);
        Some(self.neighbors[u][i])
    }

    fn walk(&self, start: usize, len: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut w = Vec::with_capacity(len);
        w.push(start);
        let mut cur = start;
        while w.len() < len {
            match self.step(cur, rng) {
                Some(next) => {
                    w.push(next);
                    cur = next;
                }
                None => break,
            }
        }
        w
    }
}

/// Walks for every active node at `period`, node-major order. Each walk has
/// its own seed, so the result does not depend on thread scheduling.
pub fn generate_walks(graph: &TopicCitationGraph, period: usize, params: &WalkParams) -> Vec<Vec<usize>> {
    let wg = WalkGraph::at_period(graph, period, params);
    walks_on(&wg, period, params)
}

fn walks_on(wg: &WalkGraph, period: usize, params: &WalkParams) -> Vec<Vec<usize>> {
    let starts: Vec<usize> = (0..wg.active.len()).filter(|&u| wg.active[u]).collect();
    par::map(params.execution, &starts, |&u| {
        (0..params.walks_per_node)
            .map(|k| {
                let mut rng = seed::rng_for(params.seed, &[0x57A1, period as u64, u as u64, k as u64]);
                wg.walk(u, params.walk_length, &mut rng)
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// One embedding table per period, indexed by topic position.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    rows: Vec<Option<Vec<f32>>>,
    norms: Vec<f32>,
}

impl Snapshot {
    fn empty(n: usize) -> Self {
        Snapshot {
            rows: vec![None; n],
            norms: vec![0.0; n],
        }
    }

    pub fn get(&self, node: usize) -> Option<&[f32]> {
        self.rows.get(node)?.as_deref()
    }

    pub fn norm(&self, node: usize) -> Option<f32> {
        self.rows.get(node)?.as_ref().map(|_| self.norms[node])
    }

    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().enumerate().filter(|(_, r)| r.is_some()).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.rows.iter().filter(|r| r.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn set(&mut self, node: usize, v: Vec<f32>) {
        self.norms[node] = linalg::norm(&v);
        self.rows[node] = Some(v);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicEmbeddingSeries {
    pub dim: usize,
    pub nodes: Vec<String>,
    pub snapshots: Vec<Snapshot>,
}

impl TopicEmbeddingSeries {
    pub fn periods(&self) -> usize {
        self.snapshots.len()
    }

    pub fn vector(&self, node: usize, period: usize) -> Option<&[f32]> {
        self.snapshots.get(period)?.get(node)
    }

    pub fn snapshot_vectors(&self, period: usize) -> NamedVectors {
        let mut t = NamedVectors::new(self.dim);
        for u in self.snapshots[period].present() {
            t.push(self.nodes[u].clone(), self.snapshots[period].get(u).unwrap())
                .expect("snapshot rows share the series dim");
        }
        t
    }

    pub fn from_snapshot_tables(nodes: Vec<String>, tables: &[NamedVectors]) -> Result<Self> {
        let dim = tables.iter().map(|t| t.dim).find(|d| *d > 0).unwrap_or(0);
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut snapshots = Vec::with_capacity(tables.len());
        for (p, t) in tables.iter().enumerate() {
            if !t.is_empty() && t.dim != dim {
                return Err(AtemError::DimMismatch {
                    expected: dim,
                    found: t.dim,
                    context: format!("snapshot {p}"),
                });
            }
            let mut s = Snapshot::empty(nodes.len());
            for (id, v) in t.iter() {
                let u = *index
                    .get(id)
                    .ok_or_else(|| AtemError::Format(format!("snapshot {p}: unknown topic {id:?}")))?;
                s.set(u, v.to_vec());
            }
            snapshots.push(s);
        }
        Ok(TopicEmbeddingSeries { dim, nodes, snapshots })
    }

    /// Serialised snapshot files and `manifest.json`, keyed by file name.
    pub fn files(&self, params: &WalkParams) -> Result<Vec<(String, Vec<u8>)>> {
        let mut files = Vec::new();
        for p in 0..self.periods() {
            files.push((format!("embeddings_p{p}.vec"), self.snapshot_vectors(p).to_bytes()));
        }
        let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
        let manifest = serde_json::json!({
            "snapshots": names,
            "dim": self.dim,
            "nodes": self.nodes,
            "params": params,
            "seed": params.seed,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        files.push(("manifest.json".into(), text.into_bytes()));
        Ok(files)
    }

    /// Write `embeddings_p<i>.vec` files and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path, params: &WalkParams) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| AtemError::io(dir, e))?;
        let mut names = Vec::new();
        for (name, bytes) in self.files(params)? {
            let path = dir.join(&name);
            std::fs::write(&path, bytes).map_err(|e| AtemError::io(&path, e))?;
            names.push(name);
        }
        Ok(names)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Manifest {
            snapshots: Vec<String>,
            nodes: Vec<String>,
        }
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| AtemError::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)?;
        let tables = m
            .snapshots
            .iter()
            .map(|f| NamedVectors::load(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_snapshot_tables(m.nodes, &tables)
    }
}

pub fn train_dynamic_embeddings(graph: &TopicCitationGraph, params: &WalkParams) -> Result<TopicEmbeddingSeries> {
    params.validate()?;
    let n = graph.nodes.len();
    let dim = params.dim;
    let input = SharedMatrix::zeros(n, dim);
    let output = SharedMatrix::zeros(n, dim);
    let mut initialised = vec![false; n];
    let mut snapshots: Vec<Snapshot> = Vec::with_capacity(graph.n_periods);

    for period in 0..graph.n_periods {
        let wg = WalkGraph::at_period(graph, period, params);
        if !wg.active.iter().any(|a| *a) {
            snapshots.push(snapshots.last().cloned().unwrap_or_else(|| Snapshot::empty(n)));
            continue;
        }
        for u in 0..n {
            if wg.active[u] && !initialised[u] {
                let mut rng = seed::rng_for(params.seed, &[0x1A17, u as u64]);
                input.set(u, &sgns::init_row(dim, &mut rng));
                initialised[u] = true;
            }
        }
        let mut walks = walks_on(&wg, period, params);
        let noise = NoiseTable::new((0..n).map(|u| if wg.active[u] { wg.strength[u].max(1e-9) } else { 0.0 }));
        let pairs_per_epoch: usize = walks.iter().map(|w| w.len() * w.len().saturating_sub(1)).sum();
        let total = (pairs_per_epoch * params.epochs_per_period).max(1) as f64;
        let lr0 = params.learning_rate;
        for epoch in 0..params.epochs_per_period {
            walks.shuffle(&mut seed::rng_for(params.seed, &[0xE90C, period as u64, epoch as u64]));
            let chunk = if params.execution.is_parallel() { 32 } else { walks.len().max(1) };
            let per_walk = pairs_per_epoch as f64 / walks.len().max(1) as f64;
            par::for_each_chunk(params.execution, &walks, chunk, |ci, ws| {
                let mut rng = seed::rng_for(params.seed, &[0x5C, period as u64, epoch as u64, ci as u64]);
                let mut scratch = Scratch::new(dim);
                let mut done = (epoch * pairs_per_epoch) as f64 + (ci * chunk) as f64 * per_walk;
                for w in ws {
                    let lr = (lr0 * (1.0 - (done / total) as f32)).max(lr0 * 1e-4);
                    done += per_walk;
                    for (p, &center) in w.iter().enumerate() {
                        for (q, &ctx) in w.iter().enumerate() {
                            if p != q && ctx != center {
                                sgns::train_pair_excluding(
                                    &input,
                                    center,
                                    &output,
                                    ctx,
                                    Some(center),
                                    &noise,
                                    params.negatives,
                                    lr,
                                    &mut rng,
                                    &mut scratch,
                                );
                            }
                        }
                    }
                }
            });
        }
        let mut snap = Snapshot::empty(n);
        for u in 0..n {
            if wg.active[u] {
                let v = input.row_vec(u);
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(AtemError::Format(format!("topic embedding diverged at period {period}")));
                }
                snap.set(u, v);
            }
        }
        snapshots.push(snap);
    }
    Ok(TopicEmbeddingSeries {
        dim,
        nodes: graph.nodes.clone(),
        snapshots,
    })
}

/// Cosine distance `1 - cos(u, v)` in `[0, 2]`.
pub fn embedding_distance(u: &[f32], v: &[f32]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(AtemError::DimMismatch {
            expected: u.len(),
            found: v.len(),
            context: "embedding_distance".into(),
        });
    }
    let c = linalg::cosine(u, v).ok_or(AtemError::ZeroNorm)?;
    Ok((1.0 - f64::from(c)).clamp(0.0, 2.0))
}
