//! The graph database: an undirected simple graph that only grows by node
//! insertion, answers the three counted query primitives (degree, uniform
//! random neighbor, edge membership) and keeps soft-deleted nodes queryable
//! until they are purged.

use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt;

use hashbrown::HashSet;
use rand::Rng;
use rustc_hash::FxBuildHasher;

use crate::error::GraphError;

/// Dense node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Active,
    SoftDeleted,
}

/// Snapshot of the database operation counters.
///
/// `adjacency_reads` counts entries returned by full neighborhood scans; a
/// scan of `N(u)` costs `d(u)` operations in the query model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub degree_queries: u64,
    pub neighbor_samples: u64,
    pub edge_checks: u64,
    pub adjacency_reads: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.degree_queries + self.neighbor_samples + self.edge_checks + self.adjacency_reads
    }
}

impl core::ops::Sub for OpCounter {
    type Output = OpCounter;

    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            degree_queries: self.degree_queries - rhs.degree_queries,
            neighbor_samples: self.neighbor_samples - rhs.neighbor_samples,
            edge_checks: self.edge_checks - rhs.edge_checks,
            adjacency_reads: self.adjacency_reads - rhs.adjacency_reads,
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Counters {
    degree_queries: Cell<u64>,
    neighbor_samples: Cell<u64>,
    edge_checks: Cell<u64>,
    adjacency_reads: Cell<u64>,
}

#[inline]
fn bump(c: &Cell<u64>, by: u64) {
    c.set(c.get() + by);
}

#[inline]
fn edge_key(u: NodeId, v: NodeId) -> u64 {
    let (a, b) = if u.0 < v.0 { (u.0, v.0) } else { (v.0, u.0) };
    ((a as u64) << 32) | b as u64
}

/// Adjacency store with soft deletion and operation accounting.
///
/// Node slots are indexed by [`NodeId`]; a slot is either absent, active or
/// soft-deleted. Counted queries take `&self` and bump interior counters, so
/// the store can be shared read-only by the clustering code while it mutates
/// its own state.
#[derive(Debug, Default, Clone)]
pub struct AdjacencyStore {
    neighbors: Vec<Vec<NodeId>>,
    status: Vec<Option<NodeStatus>>,
    edges: HashSet<u64, FxBuildHasher>,
    present: usize,
    soft_deleted: usize,
    counters: Counters,
}

impl AdjacencyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let mut store = Self::new();
        store.neighbors.reserve(nodes);
        store.status.reserve(nodes);
        store
    }

    /// Size of the id space (one past the largest id ever inserted).
    pub fn id_bound(&self) -> usize {
        self.status.len()
    }

    /// Number of present nodes, active or soft-deleted.
    pub fn node_count(&self) -> usize {
        self.present
    }

    pub fn active_count(&self) -> usize {
        self.present - self.soft_deleted
    }

    pub fn soft_deleted_count(&self) -> usize {
        self.soft_deleted
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn status(&self, u: NodeId) -> Option<NodeStatus> {
        self.status.get(u.index()).copied().flatten()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.status(u).is_some()
    }

    pub fn is_active(&self, u: NodeId) -> bool {
        self.status(u) == Some(NodeStatus::Active)
    }

    /// Present nodes in increasing id order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn active_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == Some(NodeStatus::Active))
            .map(|(i, _)| NodeId(i as u32))
    }

    fn check(&self, u: NodeId) -> Result<(), GraphError> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(GraphError::Absent(u))
        }
    }

    /// Inserts `u` together with its edges to already-present nodes.
    /// Duplicate entries in `incident` are ignored.
    pub fn insert_node(&mut self, u: NodeId, incident: &[NodeId]) -> Result<(), GraphError> {
        if self.contains(u) {
            return Err(GraphError::Duplicate(u));
        }
        if u.0 >= u32::MAX >> 1 {
            return Err(GraphError::IdOutOfRange(u));
        }
        if let Some(&v) = incident.iter().find(|v| !self.contains(**v)) {
            return Err(GraphError::Absent(v));
        }
        let idx = u.index();
        if idx >= self.status.len() {
            self.status.resize(idx + 1, None);
            self.neighbors.resize_with(idx + 1, Vec::new);
        }
        self.status[idx] = Some(NodeStatus::Active);
        self.present += 1;
        let mut list = Vec::with_capacity(incident.len());
        for &v in incident {
            if self.edges.insert(edge_key(u, v)) {
                list.push(v);
                self.neighbors[v.index()].push(u);
            }
        }
        self.neighbors[idx] = list;
        Ok(())
    }

    pub fn soft_delete(&mut self, u: NodeId) -> Result<(), GraphError> {
        match self.status(u) {
            None => Err(GraphError::Absent(u)),
            Some(NodeStatus::SoftDeleted) => Err(GraphError::AlreadyDeleted(u)),
            Some(NodeStatus::Active) => {
                self.status[u.index()] = Some(NodeStatus::SoftDeleted);
                self.soft_deleted += 1;
                Ok(())
            }
        }
    }

    /// Removes every soft-deleted node and its incident edges. Returns the
    /// number of purged nodes.
    pub fn purge_soft_deleted(&mut self) -> usize {
        if self.soft_deleted == 0 {
            return 0;
        }
        let doomed: Vec<NodeId> = self
            .nodes()
            .filter(|&u| self.status(u) == Some(NodeStatus::SoftDeleted))
            .collect();
        let mut touched: Vec<NodeId> = Vec::new();
        for &u in &doomed {
            let list = core::mem::take(&mut self.neighbors[u.index()]);
            for v in list {
                self.edges.remove(&edge_key(u, v));
                if self.status(v) == Some(NodeStatus::Active) {
                    touched.push(v);
                }
            }
            self.status[u.index()] = None;
        }
        touched.sort_unstable();
        touched.dedup();
        for v in touched {
            let status = &self.status;
            self.neighbors[v.index()].retain(|w| status[w.index()].is_some());
        }
        let purged = doomed.len();
        self.present -= purged;
        self.soft_deleted = 0;
        purged
    }

    /// Degree query (counted). Soft-deleted neighbors count.
    pub fn degree(&self, u: NodeId) -> Result<usize, GraphError> {
        self.check(u)?;
        bump(&self.counters.degree_queries, 1);
        Ok(self.neighbors[u.index()].len())
    }

    /// `k` independent uniform draws from `N(u)`, with replacement (counted).
    pub fn sample_neighbors<R: Rng + ?Sized>(
        &self,
        u: NodeId,
        k: usize,
        rng: &mut R,
    ) -> Result<Vec<NodeId>, GraphError> {
        self.check(u)?;
        let list = &self.neighbors[u.index()];
        if list.is_empty() {
            return Err(GraphError::NoNeighbors(u));
        }
        bump(&self.counters.neighbor_samples, k as u64);
        Ok((0..k).map(|_| list[uniform_below(rng, list.len() as u32) as usize]).collect())
    }

    /// [`Self::sample_neighbors`] without the buffer: calls `f` on each draw.
    pub fn for_each_sampled_neighbor<R: Rng + ?Sized>(
        &self,
        u: NodeId,
        k: usize,
        rng: &mut R,
        mut f: impl FnMut(NodeId),
    ) -> Result<(), GraphError> {
        self.check(u)?;
        let list = &self.neighbors[u.index()];
        if list.is_empty() {
            return Err(GraphError::NoNeighbors(u));
        }
        bump(&self.counters.neighbor_samples, k as u64);
        let len = list.len() as u32;
        for _ in 0..k {
            f(list[uniform_below(rng, len) as usize]);
        }
        Ok(())
    }

    /// Edge membership query (counted).
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        self.check(u)?;
        self.check(v)?;
        bump(&self.counters.edge_checks, 1);
        Ok(self.edges.contains(&edge_key(u, v)))
    }

    /// Checks that all of `nodes` are present and charges `count` edge checks,
    /// to be spent through [`Self::edge_between`] on pairs from `nodes`.
    pub(crate) fn charge_edge_checks(&self, nodes: &[NodeId], count: usize) -> Result<(), GraphError> {
        for &u in nodes {
            self.check(u)?;
        }
        bump(&self.counters.edge_checks, count as u64);
        Ok(())
    }

    pub(crate) fn edge_between(&self, u: NodeId, v: NodeId) -> bool {
        self.edges.contains(&edge_key(u, v))
    }

    /// Full neighborhood scan; charged `d(u)` adjacency reads.
    pub fn scan_neighbors(&self, u: NodeId) -> Result<&[NodeId], GraphError> {
        self.check(u)?;
        let list = &self.neighbors[u.index()];
        bump(&self.counters.adjacency_reads, list.len() as u64);
        Ok(list)
    }

    pub fn ops(&self) -> OpCounter {
        OpCounter {
            degree_queries: self.counters.degree_queries.get(),
            neighbor_samples: self.counters.neighbor_samples.get(),
            edge_checks: self.counters.edge_checks.get(),
            adjacency_reads: self.counters.adjacency_reads.get(),
        }
    }

    pub fn reset_ops(&mut self) {
        self.counters = Counters::default();
    }

    /// Uncounted read access for evaluators and invariant checks.
    pub fn inspect(&self) -> StoreView<'_> {
        StoreView { store: self }
    }
}

/// Uncounted view over an [`AdjacencyStore`]. Absent nodes read as having no
/// neighbors.
#[derive(Clone, Copy)]
pub struct StoreView<'a> {
    store: &'a AdjacencyStore,
}

impl<'a> StoreView<'a> {
    pub fn neighbors(&self, u: NodeId) -> &'a [NodeId] {
        self.store
            .neighbors
            .get(u.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.neighbors(u).len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u != v && self.store.edges.contains(&edge_key(u, v))
    }

    pub fn status(&self, u: NodeId) -> Option<NodeStatus> {
        self.store.status(u)
    }

    /// Full symmetry / simplicity scan. Returns the first offending pair.
    pub fn check_symmetry(&self) -> Result<(), (NodeId, NodeId)> {
        let mut seen: HashSet<u64, FxBuildHasher> = HashSet::default();
        for u in self.store.nodes() {
            seen.clear();
            for &v in self.neighbors(u) {
                if v == u || !self.store.contains(v) || !seen.insert(v.0 as u64) {
                    return Err((u, v));
                }
                if !self.neighbors(v).contains(&u) || !self.has_edge(u, v) {
                    return Err((u, v));
                }
            }
        }
        let listed: usize = self.store.nodes().map(|u| self.degree(u)).sum();
        if listed != 2 * self.store.edge_count() {
            return Err((NodeId(u32::MAX), NodeId(u32::MAX)));
        }
        Ok(())
    }
}

/// Uniform draw from `0..n` by widening multiply with rejection; one `u32`
/// from `rng` in the common case.
pub fn uniform_below<R: Rng + ?Sized>(rng: &mut R, n: u32) -> u32 {
    debug_assert!(n > 0);
    let mut m = rng.next_u32() as u64 * n as u64;
    if (m as u32) < n {
        let floor = n.wrapping_neg() % n;
        while (m as u32) < floor {
            m = rng.next_u32() as u64 * n as u64;
        }
    }
    (m >> 32) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    #[test]
    fn insert_isolated_and_edge() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        assert_eq!(g.degree(n(0)).unwrap(), 0);
        g.insert_node(n(1), &[n(0)]).unwrap();
        assert_eq!(g.degree(n(0)).unwrap(), 1);
        assert_eq!(g.degree(n(1)).unwrap(), 1);
        assert!(g.has_edge(n(0), n(1)).unwrap());
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn insert_rejections() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        assert_eq!(g.insert_node(n(0), &[]), Err(GraphError::Duplicate(n(0))));
        assert_eq!(g.insert_node(n(2), &[n(5)]), Err(GraphError::Absent(n(5))));
        assert!(!g.contains(n(2)));
    }

    #[test]
    fn duplicate_incident_entries_are_collapsed() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        g.insert_node(n(1), &[n(0), n(0)]).unwrap();
        assert_eq!(g.inspect().degree(n(0)), 1);
        assert_eq!(g.inspect().degree(n(1)), 1);
    }

    #[test]
    fn soft_deleted_nodes_keep_and_gain_edges() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        g.insert_node(n(1), &[n(0)]).unwrap();
        g.soft_delete(n(0)).unwrap();
        assert!(g.has_edge(n(0), n(1)).unwrap());
        assert_eq!(g.degree(n(0)).unwrap(), 1);
        g.soft_delete(n(1)).unwrap();
        g.insert_node(n(2), &[n(1)]).unwrap();
        assert_eq!(g.degree(n(1)).unwrap(), 2);
        assert_eq!(g.soft_delete(n(1)), Err(GraphError::AlreadyDeleted(n(1))));
        assert_eq!(g.soft_delete(n(9)), Err(GraphError::Absent(n(9))));
    }

    #[test]
    fn purge_cases() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        g.insert_node(n(1), &[n(0)]).unwrap();
        g.insert_node(n(2), &[n(0), n(1)]).unwrap();
        assert_eq!(g.purge_soft_deleted(), 0);
        assert_eq!(g.edge_count(), 3);

        g.soft_delete(n(1)).unwrap();
        assert_eq!(g.purge_soft_deleted(), 1);
        assert!(!g.contains(n(1)));
        assert_eq!(g.inspect().neighbors(n(0)), &[n(2)]);
        assert_eq!(g.edge_count(), 1);
        g.inspect().check_symmetry().unwrap();

        g.soft_delete(n(0)).unwrap();
        g.soft_delete(n(2)).unwrap();
        assert_eq!(g.purge_soft_deleted(), 2);
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn counters_track_calls() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        g.insert_node(n(1), &[n(0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        g.degree(n(0)).unwrap();
        g.degree(n(1)).unwrap();
        g.has_edge(n(0), n(1)).unwrap();
        g.sample_neighbors(n(0), 5, &mut rng).unwrap();
        g.scan_neighbors(n(1)).unwrap();
        let ops = g.ops();
        assert_eq!(ops.degree_queries, 2);
        assert_eq!(ops.edge_checks, 1);
        assert_eq!(ops.neighbor_samples, 5);
        assert_eq!(ops.adjacency_reads, 1);
        assert_eq!(ops.total(), 9);
        // uncounted view leaves counters alone
        g.inspect().degree(n(0));
        g.inspect().has_edge(n(0), n(1));
        assert_eq!(g.ops(), ops);
        g.reset_ops();
        assert_eq!(g.ops().total(), 0);
    }

    #[test]
    fn sampling_single_neighbor_and_errors() {
        let mut g = AdjacencyStore::new();
        g.insert_node(n(0), &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(
            g.sample_neighbors(n(0), 1, &mut rng),
            Err(GraphError::NoNeighbors(n(0)))
        );
        g.insert_node(n(1), &[n(0)]).unwrap();
        assert_eq!(g.sample_neighbors(n(0), 5, &mut rng).unwrap(), alloc::vec![n(1); 5]);
    }

    #[test]
    fn sampling_is_uniform_and_deterministic() {
        let mut g = AdjacencyStore::new();
        for i in 0..3 {
            g.insert_node(n(i), &[]).unwrap();
        }
        g.insert_node(n(3), &[n(1), n(2)]).unwrap();
        let draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = g.sample_neighbors(n(3), draws, &mut rng).unwrap();
        let ones = s.iter().filter(|&&v| v == n(1)).count() as f64 / draws as f64;
        assert!((ones - 0.5).abs() < 0.01, "frequency {ones}");

        let a = g.sample_neighbors(n(3), 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = g.sample_neighbors(n(3), 20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_below_counts_are_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [1u32, 2, 7, 40, 1000] {
            let draws = 200_000u32;
            let mut hist = alloc::vec![0u32; n as usize];
            for _ in 0..draws {
                hist[uniform_below(&mut rng, n) as usize] += 1;
            }
            let p = 1.0 / n as f64;
            let mean = draws as f64 * p;
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!(hist.iter().all(|&h| (h as f64 - mean).abs() <= 5.0 * sd + 1e-9), "{n}");
        }
    }

    #[test]
    fn has_edge_symmetric_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut g = AdjacencyStore::new();
        for i in 0..60u32 {
            let inc: Vec<NodeId> = (0..i).filter(|_| rng.gen_bool(0.2)).map(NodeId).collect();
            g.insert_node(n(i), &inc).unwrap();
        }
        for _ in 0..1000 {
            let a = n(rng.gen_range(0..60));
            let b = n(rng.gen_range(0..60));
            assert_eq!(g.has_edge(a, b).unwrap(), g.has_edge(b, a).unwrap());
        }
    }

    proptest! {
        #[test]
        fn symmetry_survives_inserts_deletes_and_purges(
            ops in proptest::collection::vec((0u8..4, any::<u64>()), 1..120)
        ) {
            let mut g = AdjacencyStore::new();
            let mut next = 0u32;
            for (kind, seed) in ops {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                match kind {
                    0 | 1 => {
                        let present: Vec<NodeId> = g.nodes().collect();
                        let inc: Vec<NodeId> =
                            present.into_iter().filter(|_| rng.gen_bool(0.4)).collect();
                        g.insert_node(NodeId(next), &inc).unwrap();
                        next += 1;
                    }
                    2 => {
                        let active: Vec<NodeId> = g.active_nodes().collect();
                        if !active.is_empty() {
                            let u = active[rng.gen_range(0..active.len())];
                            g.soft_delete(u).unwrap();
                        }
                    }
                    _ => {
                        let before = g.node_count();
                        let deleted = g.soft_deleted_count();
                        prop_assert_eq!(g.purge_soft_deleted(), deleted);
                        prop_assert_eq!(g.node_count(), before - deleted);
                    }
                }
                prop_assert!(g.inspect().check_symmetry().is_ok());
                for u in g.nodes() {
                    prop_assert_eq!(g.inspect().degree(u), g.inspect().neighbors(u).len());
                }
            }
        }
    }
}
