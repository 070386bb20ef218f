//! Mutual-reachability density clustering.
//!
//! Core distance is the distance to the `k_core`-th nearest other point and
//! `eps` is the `eps_quantile` of all core distances unless fixed. Core points (core
//! distance <= eps) are linked when their mutual reachability
//! `max(core(p), core(q), d(p, q))` is <= eps; connected components form
//! clusters. A non-core point joins its nearest core point if that point lies
//! within eps. Components smaller than `min_cluster_size` become NOISE.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, Points};
use crate::linalg::euclidean;
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityParams {
    pub min_cluster_size: usize,
    pub eps_quantile: f64,
    pub k_core: usize,
    /// Fixed neighbourhood radius; overrides `eps_quantile` when set.
    pub eps: Option<f64>,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            min_cluster_size: 5,
            eps_quantile: 0.9,
            k_core: 5,
            eps: None,
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so roots do not depend on union order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn density_cluster(points: &Points, params: &DensityParams, exec: Execution) -> ClusterAssignment {
    let n = points.len();
    if n == 0 || n < params.min_cluster_size.max(2) {
        warn!("density clustering got {n} points; everything is NOISE");
        return ClusterAssignment::canonical(&vec![None; n]);
    }
    let k = params.k_core.clamp(1, n - 1);
    let core: Vec<f64> = par::map_range(exec, n, |i| {
        let mut d: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| euclidean(points.row(i), points.row(j)))
            .collect();
        let (_, kth, _) = d.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
        *kth
    });
    let mut sorted = core.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let q = params.eps_quantile.clamp(0.0, 1.0);
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let eps = params.eps.unwrap_or(sorted[rank]);

    let is_core: Vec<bool> = core.iter().map(|c| *c <= eps).collect();
    let core_ids: Vec<usize> = (0..n).filter(|&i| is_core[i]).collect();

    // Core-core links, computed per point (parallel), merged sequentially.
    let links: Vec<Vec<usize>> = par::map(exec, &core_ids, |&i| {
        core_ids
            .iter()
            .copied()
            .filter(|&j| j > i && euclidean(points.row(i), points.row(j)) <= eps)
            .collect()
    });
    let mut uf = UnionFind::new(n);
    for (&i, js) in core_ids.iter().zip(&links) {
        for &j in js {
            uf.union(i, j);
        }
    }

    let border: Vec<Option<usize>> = par::map_range(exec, n, |i| {
        if is_core[i] {
            return None;
        }
        core_ids
            .iter()
            .map(|&j| (euclidean(points.row(i), points.row(j)), j))
            .filter(|(d, _)| *d <= eps)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, j)| j)
    });

    let mut raw: Vec<Option<usize>> = (0..n)
        .map(|i| {
            if is_core[i] {
                Some(uf.find(i))
            } else {
                border[i].map(|j| uf.find(j))
            }
        })
        .collect();
    let mut size = vec![0usize; n];
    for r in raw.iter().flatten() {
        size[*r] += 1;
    }
    for l in raw.iter_mut() {
        if l.is_some_and(|r| size[r] < params.min_cluster_size) {
            *l = None;
        }
    }
    let out = ClusterAssignment::canonical(&raw);
    if out.cluster_count == 0 {
        warn!("density clustering labelled every point NOISE");
    }
    out
}
