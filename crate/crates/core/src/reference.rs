//! Reference Clustering: the dynamic pivot variant that scans the whole
//! neighborhood of every arriving node, plus a static evaluation of the same
//! pivot rule on a finished graph.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::ClusterError;
use crate::eval::Partition;
use crate::graph::{AdjacencyStore, NodeId};
use crate::maintenance::Clusterer;
use crate::pivot::{explore, repoint_neighbors, PivotState, RankAssignment};

/// Dynamic Reference Clustering over node insertions.
///
/// The default variant re-points the neighborhood of every arrival, pivot or
/// not, so that after any insertion order the state equals
/// [`static_pivot_oracle`] on the current graph. [`ReferenceClustering::literal`]
/// only explores from new pivots; an arrival that is not a pivot then leaves
/// higher-ranked pivots among its neighbors untouched, so the final clustering
/// can depend on the insertion order.
#[derive(Debug, Clone, Default)]
pub struct ReferenceClustering {
    ranks: RankAssignment,
    state: PivotState,
    processed: Vec<bool>,
    literal: bool,
}

impl ReferenceClustering {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn literal() -> Self {
        Self {
            literal: true,
            ..Self::default()
        }
    }

    /// Sizes the per-node tables for ids below `id_bound` up front.
    pub fn reserve(&mut self, id_bound: usize) {
        if id_bound > 0 {
            self.state.ensure(NodeId(id_bound as u32 - 1));
        }
        if self.processed.len() < id_bound {
            self.processed.resize(id_bound, false);
        }
    }

    pub fn state(&self) -> &PivotState {
        &self.state
    }

    pub fn ranks(&self) -> &RankAssignment {
        &self.ranks
    }

    pub fn ranks_mut(&mut self) -> &mut RankAssignment {
        &mut self.ranks
    }

    /// Inserts `u`, whose rank must already be assigned and whose edges must
    /// already be in `store`.
    pub fn insert(&mut self, store: &AdjacencyStore, u: NodeId) -> Result<(), ClusterError> {
        if !store.contains(u) {
            return Err(crate::error::GraphError::Absent(u).into());
        }
        if self.ranks.get(u).is_none() {
            return Err(ClusterError::MissingRank(u));
        }
        if u.index() >= self.processed.len() {
            self.processed.resize(u.index() + 1, false);
        }
        if self.processed[u.index()] {
            return Err(ClusterError::AlreadyProcessed(u));
        }
        self.processed[u.index()] = true;
        self.state.ensure(u);

        let mut best = self.ranks.key(u);
        for &w in store.scan_neighbors(u)? {
            let k = self.ranks.key(w);
            if k < best {
                best = k;
            }
        }
        let v = best.node;
        if v == u {
            self.state.make_pivot(u);
            explore(u, store, &self.ranks, &mut self.state, true)?;
            return Ok(());
        }
        if self.state.is_pivot(v) {
            self.state.attach(u, v, true);
        } else {
            self.state.set_pointer(u, v);
        }
        if !self.literal {
            repoint_neighbors(u, store, &self.ranks, &mut self.state, true)?;
        }
        Ok(())
    }

    pub fn export(&self, store: &AdjacencyStore) -> Partition {
        self.state.export(store.nodes())
    }

    pub fn reset(&mut self) {
        self.ranks.clear();
        self.state.clear();
        self.processed.clear();
    }
}

impl Clusterer for ReferenceClustering {
    fn ranks_mut(&mut self) -> &mut RankAssignment {
        &mut self.ranks
    }

    fn process<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        u: NodeId,
        _rng: &mut R,
    ) -> Result<(), ClusterError> {
        self.insert(store, u)
    }

    fn reset(&mut self) {
        ReferenceClustering::reset(self);
    }

    fn export(&self, store: &AdjacencyStore) -> Partition {
        ReferenceClustering::export(self, store)
    }
}

/// Pivot rule evaluated directly on a finished graph: `p(u)` is the
/// minimum-rank node of `N[u]`, and `u` sits in the cluster of `p(u)` iff
/// `p(p(u)) = p(u)`. Reads the graph without charging the counters.
pub fn static_pivot_oracle(store: &AdjacencyStore, ranks: &RankAssignment) -> Partition {
    let view = store.inspect();
    let bound = store.id_bound();
    let mut pointer: Vec<Option<NodeId>> = alloc::vec![None; bound];
    for u in store.nodes() {
        let mut best = ranks.key(u);
        for &w in view.neighbors(u) {
            let k = ranks.key(w);
            if k < best {
                best = k;
            }
        }
        pointer[u.index()] = Some(best.node);
    }
    let mut blocks: Vec<Vec<NodeId>> = alloc::vec![Vec::new(); bound];
    let mut loose = Vec::new();
    for u in store.nodes() {
        let p = pointer[u.index()].unwrap();
        if pointer[p.index()] == Some(p) {
            blocks[p.index()].push(u);
        } else {
            loose.push(alloc::vec![u]);
        }
    }
    blocks.extend(loose);
    Partition::from_blocks(blocks)
}
