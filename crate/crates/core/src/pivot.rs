//! Pivot bookkeeping shared by both clustering algorithms: random ranks, the
//! pivot pointer array, the reverse index `B(v)` with its cluster subset
//! `C(v)`, and the exploration step that re-points a pivot's neighborhood.

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::ClusterError;
use crate::eval::Partition;
use crate::graph::{AdjacencyStore, NodeId};

/// Rank with the node id as tie-break, so that equal draws still give a
/// strict total order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankKey {
    pub rank: f64,
    pub node: NodeId,
}

impl Eq for RankKey {}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank
            .total_cmp(&other.rank)
            .then(self.node.cmp(&other.node))
    }
}

/// Uniform `[0, 1)` rank per node. Smaller rank means higher priority.
#[derive(Debug, Clone, Default)]
pub struct RankAssignment {
    ranks: Vec<f64>,
}

impl RankAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    fn slot(&mut self, u: NodeId) -> &mut f64 {
        if u.index() >= self.ranks.len() {
            self.ranks.resize(u.index() + 1, f64::NAN);
        }
        &mut self.ranks[u.index()]
    }

    pub fn assign<R: Rng + ?Sized>(&mut self, u: NodeId, rng: &mut R) -> Result<f64, ClusterError> {
        let slot = self.slot(u);
        if !slot.is_nan() {
            return Err(ClusterError::RankAssigned(u));
        }
        let r: f64 = rng.gen();
        *slot = r;
        Ok(r)
    }

    /// Sets a rank directly, overwriting any previous value.
    pub fn set(&mut self, u: NodeId, rank: f64) {
        *self.slot(u) = rank;
    }

    pub fn get(&self, u: NodeId) -> Option<f64> {
        self.ranks.get(u.index()).copied().filter(|r| !r.is_nan())
    }

    #[inline]
    pub fn rank(&self, u: NodeId) -> f64 {
        self.ranks[u.index()]
    }

    #[inline]
    pub fn key(&self, u: NodeId) -> RankKey {
        RankKey {
            rank: self.ranks[u.index()],
            node: u,
        }
    }

    pub fn clear(&mut self) {
        self.ranks.clear();
    }
}

const NONE: u32 = u32::MAX;

/// Pivot pointers and the `B`/`C` reverse index.
///
/// Every node has a pointer `p(u)`; it defaults to `u` itself. A node is in
/// `B(v)` exactly when `p(u) = v` and `v` is a pivot. `C(v) ⊆ B(v)` is the
/// part kept as `v`'s cluster; the rest of `B(v)` are singletons. Members of
/// `B(v)` are kept in a swap-remove list so membership changes are O(1).
#[derive(Debug, Clone, Default)]
pub struct PivotState {
    pointer: Vec<NodeId>,
    is_pivot: Vec<bool>,
    demoted: Vec<bool>,
    owner: Vec<u32>,
    slot: Vec<u32>,
    in_cluster: Vec<bool>,
    members: Vec<Vec<NodeId>>,
}

/// What an exploration changed, for callers that maintain per-cluster data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExploreReport {
    /// Nodes attached to the exploring node's `B`.
    pub joined: Vec<NodeId>,
    /// Pivots that stay pivots but lost members (may repeat).
    pub shrunk: Vec<NodeId>,
    /// Pivots that lost pivot status.
    pub demoted: Vec<NodeId>,
}

impl ExploreReport {
    pub fn is_empty(&self) -> bool {
        self.joined.is_empty() && self.shrunk.is_empty() && self.demoted.is_empty()
    }
}

impl PivotState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ensure(&mut self, u: NodeId) {
        let need = u.index() + 1;
        if need > self.pointer.len() {
            let old = self.pointer.len();
            self.pointer.extend((old..need).map(|i| NodeId(i as u32)));
            self.is_pivot.resize(need, false);
            self.demoted.resize(need, false);
            self.owner.resize(need, NONE);
            self.slot.resize(need, NONE);
            self.in_cluster.resize(need, false);
            self.members.resize_with(need, Vec::new);
        }
    }

    pub fn clear(&mut self) {
        *self = Self::default();
    }

    #[inline]
    pub fn pointer(&self, u: NodeId) -> NodeId {
        self.pointer.get(u.index()).copied().unwrap_or(u)
    }

    /// Sets `p(u)` without touching the reverse index.
    pub fn set_pointer(&mut self, u: NodeId, v: NodeId) {
        self.ensure(u);
        self.pointer[u.index()] = v;
    }

    #[inline]
    pub fn is_pivot(&self, u: NodeId) -> bool {
        self.is_pivot.get(u.index()).copied().unwrap_or(false)
    }

    pub fn was_demoted(&self, u: NodeId) -> bool {
        self.demoted.get(u.index()).copied().unwrap_or(false)
    }

    /// The pivot whose `B` contains `u`.
    #[inline]
    pub fn owner(&self, u: NodeId) -> Option<NodeId> {
        match self.owner.get(u.index()) {
            Some(&o) if o != NONE => Some(NodeId(o)),
            _ => None,
        }
    }

    #[inline]
    pub fn in_cluster(&self, u: NodeId) -> bool {
        self.in_cluster.get(u.index()).copied().unwrap_or(false)
    }

    pub fn set_in_cluster(&mut self, u: NodeId, keep: bool) {
        debug_assert!(self.owner(u).is_some() || !keep);
        self.in_cluster[u.index()] = keep;
    }

    /// `B(v)`; empty for non-pivots.
    pub fn members(&self, v: NodeId) -> &[NodeId] {
        self.members.get(v.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `C(v)` as a fresh list.
    pub fn cluster(&self, v: NodeId) -> Vec<NodeId> {
        self.members(v)
            .iter()
            .copied()
            .filter(|&u| self.in_cluster(u))
            .collect()
    }

    pub fn pivots(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.is_pivot
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// Marks `u` as a pivot with `B(u) = C(u) = {u}`.
    pub fn make_pivot(&mut self, u: NodeId) {
        self.ensure(u);
        debug_assert!(!self.demoted[u.index()], "demoted node {u} promoted again");
        self.detach(u);
        self.pointer[u.index()] = u;
        self.is_pivot[u.index()] = true;
        self.attach(u, u, true);
    }

    /// Removes `u` from whatever `B` holds it. Returns the former owner.
    pub fn detach(&mut self, u: NodeId) -> Option<NodeId> {
        let owner = self.owner(u)?;
        let list = &mut self.members[owner.index()];
        let at = self.slot[u.index()] as usize;
        list.swap_remove(at);
        if let Some(&moved) = list.get(at) {
            self.slot[moved.index()] = at as u32;
        }
        self.owner[u.index()] = NONE;
        self.slot[u.index()] = NONE;
        self.in_cluster[u.index()] = false;
        Some(owner)
    }

    /// Puts `u` into `B(v)` and points it at `v`. `v` must be a pivot.
    pub fn attach(&mut self, u: NodeId, v: NodeId, keep: bool) {
        self.ensure(u);
        self.ensure(v);
        debug_assert!(self.is_pivot[v.index()]);
        self.detach(u);
        self.pointer[u.index()] = v;
        let list = &mut self.members[v.index()];
        self.slot[u.index()] = list.len() as u32;
        list.push(u);
        self.owner[u.index()] = v.0;
        self.in_cluster[u.index()] = keep;
    }

    /// Strips pivot status from `w`; every member of `B(w)` other than `w`
    /// is released as a singleton (pointer left at `w`). Returns the released
    /// members.
    pub fn demote(&mut self, w: NodeId) -> Vec<NodeId> {
        let list = core::mem::take(&mut self.members[w.index()]);
        for &z in &list {
            self.owner[z.index()] = NONE;
            self.slot[z.index()] = NONE;
            self.in_cluster[z.index()] = false;
        }
        self.is_pivot[w.index()] = false;
        self.demoted[w.index()] = true;
        list.into_iter().filter(|&z| z != w).collect()
    }

    /// Materializes `{C(v) ∪ {v}}` for every pivot plus singletons for the
    /// remaining `nodes`.
    pub fn export(&self, nodes: impl IntoIterator<Item = NodeId>) -> Partition {
        let mut blocks: Vec<Vec<NodeId>> = Vec::new();
        for v in self.pivots() {
            let mut block = self.cluster(v);
            if !self.in_cluster(v) {
                block.push(v);
            }
            blocks.push(block);
        }
        for u in nodes {
            let grouped = self.is_pivot(u) || (self.owner(u).is_some() && self.in_cluster(u));
            if !grouped {
                blocks.push(alloc::vec![u]);
            }
        }
        debug_assert!(blocks.iter().flatten().count() == {
            let mut all: Vec<NodeId> = blocks.iter().flatten().copied().collect();
            all.sort_unstable();
            all.dedup();
            all.len()
        }, "node placed in two clusters");
        Partition::from_blocks(blocks)
    }

    /// Full consistency check of the reverse index against the pointers.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        for (i, &owner) in self.owner.iter().enumerate() {
            let u = NodeId(i as u32);
            if owner == NONE {
                if self.in_cluster[i] {
                    return Err("cluster flag on a node outside every B");
                }
                continue;
            }
            let v = NodeId(owner);
            if !self.is_pivot(v) {
                return Err("B owner is not a pivot");
            }
            if self.pointer[i] != v {
                return Err("member pointer differs from its owner");
            }
            if self.members[v.index()].get(self.slot[i] as usize) != Some(&u) {
                return Err("slot index out of sync");
            }
        }
        for (i, list) in self.members.iter().enumerate() {
            let v = NodeId(i as u32);
            if !list.is_empty() && !self.is_pivot(v) {
                return Err("non-pivot holds members");
            }
            if self.is_pivot(v) {
                if self.pointer[i] != v {
                    return Err("pivot does not point at itself");
                }
                if self.owner(v) != Some(v) {
                    return Err("pivot missing from its own B");
                }
            }
            if list.iter().any(|u| self.owner(*u) != Some(v)) {
                return Err("member list lists a foreign node");
            }
        }
        for (i, &p) in self.is_pivot.iter().enumerate() {
            if p && self.demoted[i] {
                return Err("demoted node is a pivot again");
            }
        }
        Ok(())
    }
}

/// Re-points the neighborhood of `u` towards `u`.
///
/// For every neighbor `w` whose current pointer ranks after `u`: if `w` is a
/// pivot it is demoted and each node of `B(w)` adjacent to `u` is re-pointed
/// to `u` (the others become singletons); then `p(w) ← u`. When `u` is a
/// pivot, re-pointed nodes join `B(u)`; otherwise they become singletons
/// pointing at `u`.
pub fn repoint_neighbors(
    u: NodeId,
    store: &AdjacencyStore,
    ranks: &RankAssignment,
    state: &mut PivotState,
    keep: bool,
) -> Result<ExploreReport, ClusterError> {
    let u_key = ranks.key(u);
    let u_pivot = state.is_pivot(u);
    let mut report = ExploreReport::default();
    state.ensure(u);
    for &w in store.scan_neighbors(u)? {
        if ranks.key(state.pointer(w)) <= u_key {
            continue;
        }
        if state.is_pivot(w) {
            for z in state.demote(w) {
                if store.has_edge(z, u)? {
                    point_to(state, z, u, u_pivot, keep, &mut report);
                }
            }
            report.demoted.push(w);
        }
        point_to(state, w, u, u_pivot, keep, &mut report);
    }
    Ok(report)
}

fn point_to(
    state: &mut PivotState,
    z: NodeId,
    u: NodeId,
    u_pivot: bool,
    keep: bool,
    report: &mut ExploreReport,
) {
    if let Some(prev) = state.detach(z) {
        if state.is_pivot(prev) && prev != u {
            report.shrunk.push(prev);
        }
    }
    if u_pivot {
        state.attach(z, u, keep);
        report.joined.push(z);
    } else {
        state.set_pointer(z, u);
    }
}

/// Explore from a pivot `u`; new members of `B(u)` enter `C(u)` when `keep`.
pub fn explore(
    u: NodeId,
    store: &AdjacencyStore,
    ranks: &RankAssignment,
    state: &mut PivotState,
    keep: bool,
) -> Result<ExploreReport, ClusterError> {
    if !state.is_pivot(u) {
        return Err(ClusterError::NotPivot(u));
    }
    repoint_neighbors(u, store, ranks, state, keep)
}
