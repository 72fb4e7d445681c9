//! Update handling: deletions are recorded but otherwise ignored, and the
//! whole clustering is rebuilt once enough updates have accumulated.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ClusterError;
use crate::eval::Partition;
use crate::graph::{AdjacencyStore, NodeId};
use crate::pivot::RankAssignment;

/// A node-insertion clustering algorithm driven by [`Engine`].
pub trait Clusterer {
    fn ranks_mut(&mut self) -> &mut RankAssignment;

    /// Places `u`, whose rank is assigned and whose edges are in `store`.
    fn process<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        u: NodeId,
        rng: &mut R,
    ) -> Result<(), ClusterError>;

    /// Forgets all ranks and clustering state.
    fn reset(&mut self);

    fn export(&self, store: &AdjacencyStore) -> Partition;
}

/// Every node on its own.
#[derive(Debug, Clone, Default)]
pub struct Singletons {
    ranks: RankAssignment,
}

impl Singletons {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clusterer for Singletons {
    fn ranks_mut(&mut self) -> &mut RankAssignment {
        &mut self.ranks
    }

    fn process<R: Rng + ?Sized>(
        &mut self,
        _store: &AdjacencyStore,
        _u: NodeId,
        _rng: &mut R,
    ) -> Result<(), ClusterError> {
        Ok(())
    }

    fn reset(&mut self) {
        self.ranks.clear();
    }

    fn export(&self, store: &AdjacencyStore) -> Partition {
        Partition::singletons(store.nodes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerMode {
    /// Rebuild after `ε·n0/6` updates of any kind.
    AllUpdates,
    /// Rebuild after `ε·n0` deletions.
    #[default]
    DeletionsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EpochState {
    /// Node count right after the last rebuild.
    pub n0: usize,
    pub updates_since: u64,
    pub deletions_since: u64,
    pub mode: TriggerMode,
}

impl EpochState {
    pub fn new(mode: TriggerMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// Number of counted updates that triggers a rebuild.
    pub fn threshold(&self, eps: f64) -> f64 {
        match self.mode {
            TriggerMode::AllUpdates => eps * self.n0 as f64 / 6.0,
            TriggerMode::DeletionsOnly => eps * self.n0 as f64,
        }
    }

    pub fn should_recompute(&self, eps: f64) -> bool {
        let count = match self.mode {
            TriggerMode::AllUpdates => self.updates_since,
            TriggerMode::DeletionsOnly => self.deletions_since,
        };
        count >= 1 && count as f64 >= self.threshold(eps)
    }
}

pub fn should_recompute(epoch: &EpochState, eps: f64) -> bool {
    epoch.should_recompute(eps)
}

/// Owns the graph and a clusterer, feeds it updates and rebuilds it when the
/// epoch trigger fires.
#[derive(Debug, Clone)]
pub struct Engine<C> {
    store: AdjacencyStore,
    clusterer: C,
    epoch: EpochState,
    eps: f64,
    rng: ChaCha8Rng,
    recomputes: u64,
}

impl<C: Clusterer> Engine<C> {
    pub fn new(clusterer: C, eps: f64, mode: TriggerMode, seed: u64) -> Self {
        Self::with_store(AdjacencyStore::new(), clusterer, eps, mode, seed)
    }

    pub fn with_store(store: AdjacencyStore, clusterer: C, eps: f64, mode: TriggerMode, seed: u64) -> Self {
        Self {
            store,
            clusterer,
            epoch: EpochState::new(mode),
            eps,
            rng: ChaCha8Rng::seed_from_u64(seed),
            recomputes: 0,
        }
    }

    pub fn store(&self) -> &AdjacencyStore {
        &self.store
    }

    pub fn clusterer(&self) -> &C {
        &self.clusterer
    }

    pub fn epoch(&self) -> &EpochState {
        &self.epoch
    }

    pub fn recomputes(&self) -> u64 {
        self.recomputes
    }

    pub fn export(&self) -> Partition {
        self.clusterer.export(&self.store)
    }

    /// Inserts `u` with edges to the listed nodes that are still present
    /// (purged nodes are dropped from the list).
    pub fn insert(&mut self, u: NodeId, incident: &[NodeId]) -> Result<(), ClusterError> {
        let kept: Vec<NodeId> = incident
            .iter()
            .copied()
            .filter(|&w| w != u && self.store.contains(w))
            .collect();
        self.store.insert_node(u, &kept)?;
        self.clusterer.ranks_mut().assign(u, &mut self.rng)?;
        self.clusterer.process(&self.store, u, &mut self.rng)?;
        self.epoch.updates_since += 1;
        self.maybe_recompute()
    }

    /// Soft-deletes `u`; the clustering is not touched.
    pub fn delete(&mut self, u: NodeId) -> Result<(), ClusterError> {
        self.store.soft_delete(u)?;
        self.epoch.updates_since += 1;
        self.epoch.deletions_since += 1;
        self.maybe_recompute()
    }

    fn maybe_recompute(&mut self) -> Result<(), ClusterError> {
        if self.epoch.should_recompute(self.eps) {
            self.recompute()?;
        }
        Ok(())
    }

    /// Purges soft-deleted nodes, draws fresh ranks and reinserts every node
    /// in increasing rank order.
    pub fn recompute(&mut self) -> Result<(), ClusterError> {
        self.store.purge_soft_deleted();
        self.clusterer.reset();
        let mut order: Vec<NodeId> = self.store.nodes().collect();
        let ranks = self.clusterer.ranks_mut();
        for &u in &order {
            ranks.assign(u, &mut self.rng)?;
        }
        order.sort_unstable_by_key(|&u| ranks.key(u));
        for &u in &order {
            self.clusterer.process(&self.store, u, &mut self.rng)?;
        }
        self.epoch.n0 = self.store.node_count();
        self.epoch.updates_since = 0;
        self.epoch.deletions_since = 0;
        self.recomputes += 1;
        Ok(())
    }
}
