//! Exact cost oracles and quality metrics.
//!
//! Everything here is brute force over the uncounted store view. None of it is
//! called from the clustering hot path.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::EvalError;
use crate::graph::{AdjacencyStore, NodeId, NodeStatus, StoreView};

/// A clustering: disjoint blocks of nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    blocks: Vec<Vec<NodeId>>,
}

impl Partition {
    pub fn from_blocks(blocks: Vec<Vec<NodeId>>) -> Self {
        Partition {
            blocks: blocks.into_iter().filter(|b| !b.is_empty()).collect(),
        }
    }

    pub fn singletons(nodes: impl IntoIterator<Item = NodeId>) -> Self {
        Partition {
            blocks: nodes.into_iter().map(|u| vec![u]).collect(),
        }
    }

    pub fn blocks(&self) -> &[Vec<NodeId>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Canonical form: members sorted, blocks sorted by first member.
    pub fn canonical(&self) -> Vec<Vec<NodeId>> {
        let mut out: Vec<Vec<NodeId>> = self
            .blocks
            .iter()
            .map(|b| {
                let mut b = b.clone();
                b.sort_unstable();
                b
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Block label per node id (`u32::MAX` when uncovered).
    pub fn labels(&self, id_bound: usize) -> Result<Vec<u32>, EvalError> {
        let bound = self
            .blocks
            .iter()
            .flatten()
            .map(|u| u.index() + 1)
            .max()
            .unwrap_or(0)
            .max(id_bound);
        let mut labels = vec![u32::MAX; bound];
        for (i, block) in self.blocks.iter().enumerate() {
            for &u in block {
                if labels[u.index()] != u32::MAX {
                    return Err(EvalError::Overlap(u));
                }
                labels[u.index()] = i as u32;
            }
        }
        Ok(labels)
    }
}

/// Which graph a clustering is scored against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalScope {
    /// Every present node, soft-deleted ones included: the graph the
    /// algorithm sees.
    #[default]
    AlgorithmView,
    /// Active nodes only; soft-deleted nodes and their edges are dropped.
    TrueGraph,
}

impl EvalScope {
    fn admits(self, status: Option<NodeStatus>) -> bool {
        match (self, status) {
            (_, None) => false,
            (EvalScope::AlgorithmView, Some(_)) => true,
            (EvalScope::TrueGraph, Some(s)) => s == NodeStatus::Active,
        }
    }
}

/// Clustering objective against the all-singletons baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub raw_cost: u64,
    /// The all-singletons cost, i.e. the edge count.
    pub singleton_cost: u64,
    /// `raw_cost / singleton_cost`; absent for an edgeless graph.
    pub normalized: Option<f64>,
}

fn scoped_labels(
    store: &AdjacencyStore,
    partition: &Partition,
    scope: EvalScope,
) -> Result<(Vec<u32>, Vec<u64>), EvalError> {
    let view = store.inspect();
    let mut labels = vec![u32::MAX; store.id_bound()];
    let mut sizes = Vec::with_capacity(partition.len());
    for (i, block) in partition.blocks().iter().enumerate() {
        let mut size = 0u64;
        for &u in block {
            let status = view.status(u);
            if status.is_none() {
                return Err(EvalError::Foreign(u));
            }
            if !scope.admits(status) {
                continue;
            }
            if labels[u.index()] != u32::MAX {
                return Err(EvalError::Overlap(u));
            }
            labels[u.index()] = i as u32;
            size += 1;
        }
        sizes.push(size);
    }
    for u in store.nodes() {
        if scope.admits(view.status(u)) && labels[u.index()] == u32::MAX {
            return Err(EvalError::Uncovered(u));
        }
    }
    Ok((labels, sizes))
}

fn scoped_edge_count(store: &AdjacencyStore, scope: EvalScope) -> u64 {
    match scope {
        EvalScope::AlgorithmView => store.edge_count() as u64,
        EvalScope::TrueGraph => {
            let view = store.inspect();
            let twice: u64 = store
                .active_nodes()
                .map(|u| {
                    view.neighbors(u)
                        .iter()
                        .filter(|&&v| scope.admits(view.status(v)))
                        .count() as u64
                })
                .sum();
            twice / 2
        }
    }
}

/// Disagreements: non-edges inside blocks plus edges across blocks.
pub fn clustering_cost(
    store: &AdjacencyStore,
    partition: &Partition,
    scope: EvalScope,
) -> Result<u64, EvalError> {
    let (labels, sizes) = scoped_labels(store, partition, scope)?;
    let view = store.inspect();
    let mut intra_twice = 0u64;
    for u in store.nodes() {
        let lu = labels[u.index()];
        if lu == u32::MAX {
            continue;
        }
        intra_twice += view
            .neighbors(u)
            .iter()
            .filter(|&&v| labels[v.index()] == lu)
            .count() as u64;
    }
    let intra = intra_twice / 2;
    let pairs: u64 = sizes.iter().map(|&s| s * s.saturating_sub(1) / 2).sum();
    let edges = scoped_edge_count(store, scope);
    Ok((pairs - intra) + (edges - intra))
}

/// Twice the cost of one cluster: `2·[non-edges inside] + [edges with
/// exactly one endpoint inside]`, by pair enumeration.
pub fn cluster_cost_halves(view: StoreView<'_>, block: &[NodeId], inside: impl Fn(NodeId) -> bool, admit: impl Fn(NodeId) -> bool) -> u64 {
    let mut nonedges = 0u64;
    for (i, &a) in block.iter().enumerate() {
        for &b in &block[i + 1..] {
            if !view.has_edge(a, b) {
                nonedges += 1;
            }
        }
    }
    let leaving: u64 = block
        .iter()
        .map(|&a| {
            view.neighbors(a)
                .iter()
                .filter(|&&v| admit(v) && !inside(v))
                .count() as u64
        })
        .sum();
    2 * nonedges + leaving
}

/// Same objective as [`clustering_cost`], summed cluster by cluster.
pub fn clustering_cost_per_cluster(
    store: &AdjacencyStore,
    partition: &Partition,
    scope: EvalScope,
) -> Result<u64, EvalError> {
    let (labels, _) = scoped_labels(store, partition, scope)?;
    let view = store.inspect();
    let mut halves = 0u64;
    for (i, block) in partition.blocks().iter().enumerate() {
        let kept: Vec<NodeId> = block
            .iter()
            .copied()
            .filter(|&u| scope.admits(view.status(u)))
            .collect();
        let label = i as u32;
        halves += cluster_cost_halves(
            view,
            &kept,
            |v| labels[v.index()] == label,
            |v| scope.admits(view.status(v)),
        );
    }
    Ok(halves / 2)
}

pub fn normalized_objective(
    store: &AdjacencyStore,
    partition: &Partition,
    scope: EvalScope,
) -> Result<ObjectiveReport, EvalError> {
    let raw_cost = clustering_cost(store, partition, scope)?;
    let singleton_cost = scoped_edge_count(store, scope);
    let normalized = (singleton_cost > 0).then(|| raw_cost as f64 / singleton_cost as f64);
    Ok(ObjectiveReport {
        raw_cost,
        singleton_cost,
        normalized,
    })
}

fn membership(store: &AdjacencyStore, nodes: &[NodeId]) -> Result<Vec<bool>, EvalError> {
    let mut mark = vec![false; store.id_bound()];
    for &u in nodes {
        if !store.contains(u) {
            return Err(EvalError::Foreign(u));
        }
        if mark[u.index()] {
            return Err(EvalError::Overlap(u));
        }
        mark[u.index()] = true;
    }
    Ok(mark)
}

/// Exact `cost*(B|C)`: non-edges inside `C` plus edges inside `B` with at
/// least one endpoint in `B − C`. Pair enumeration over `B`.
pub fn cost_star_oracle(store: &AdjacencyStore, b: &[NodeId], c: &[NodeId]) -> Result<u64, EvalError> {
    let in_b = membership(store, b)?;
    let in_c = membership(store, c)?;
    if let Some(&u) = c.iter().find(|u| !in_b[u.index()]) {
        return Err(EvalError::Foreign(u));
    }
    let view = store.inspect();
    let mut cost = 0u64;
    for (i, &x) in b.iter().enumerate() {
        for &y in &b[i + 1..] {
            let both_in_c = in_c[x.index()] && in_c[y.index()];
            let edge = view.has_edge(x, y);
            if both_in_c && !edge || !both_in_c && edge {
                cost += 1;
            }
        }
    }
    Ok(cost)
}

/// Edges with exactly one endpoint in `B`.
pub fn boundary_edges(store: &AdjacencyStore, b: &[NodeId]) -> Result<u64, EvalError> {
    let in_b = membership(store, b)?;
    let view = store.inspect();
    Ok(b
        .iter()
        .map(|&u| view.neighbors(u).iter().filter(|v| !in_b[v.index()]).count() as u64)
        .sum())
}

/// Exact `cost(B|C) = cost*(B|C) + e(B, V−B)/2`.
pub fn cost_given(store: &AdjacencyStore, b: &[NodeId], c: &[NodeId]) -> Result<f64, EvalError> {
    Ok(cost_star_oracle(store, b, c)? as f64 + boundary_edges(store, b)? as f64 / 2.0)
}

/// `C_t = {u ∈ B : d(u) ≥ t}` with current (uncounted) degrees.
pub fn threshold_candidate(store: &AdjacencyStore, b: &[NodeId], t: f64) -> Vec<NodeId> {
    let view = store.inspect();
    b.iter().copied().filter(|&u| view.degree(u) as f64 >= t).collect()
}

/// Exact argmin over `grid` of `cost(B|C_t)`, ties to the smallest threshold.
/// Returns `(index into grid, cost)`.
pub fn brute_force_best_threshold(
    store: &AdjacencyStore,
    b: &[NodeId],
    grid: &[f64],
) -> Result<(usize, f64), EvalError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in grid.iter().enumerate() {
        let c = threshold_candidate(store, b, t);
        let cost = cost_given(store, b, &c)?;
        if best.map_or(true, |(_, bc)| cost < bc) {
            best = Some((i, cost));
        }
    }
    Ok(best.unwrap_or((0, 0.0)))
}
