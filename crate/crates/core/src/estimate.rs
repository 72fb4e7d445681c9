//! Sampling estimators for the cost of clustering a set `B` as one cluster
//! `C ⊆ B` plus singletons, and their maintenance under node insertion.

use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use rand::Rng;
use rustc_hash::FxBuildHasher;

use crate::error::{ClusterError, GraphError};
use crate::graph::{uniform_below, AdjacencyStore, NodeId};

/// Natural log of `n`, floored at `ln 2` so budgets stay positive on tiny
/// graphs.
pub fn ln_n(n: usize) -> f64 {
    libm::log(n.max(2) as f64)
}

/// In-cluster pairs drawn per cluster member: `ceil(5·ln n / ε³)`.
pub fn pairs_per_member(n: usize, eps: f64) -> usize {
    libm::ceil(5.0 * ln_n(n) / (eps * eps * eps)) as usize
}

/// Neighbor samples per singleton node: `η = ceil(10·ln n / ε³)`.
pub fn edge_samples(n: usize, eps: f64) -> usize {
    libm::ceil(10.0 * ln_n(n) / (eps * eps * eps)) as usize
}

fn binom2(k: usize) -> f64 {
    k as f64 * k.saturating_sub(1) as f64 / 2.0
}

/// Indices in `0..len` that an independent Bernoulli(1−q) pass would mark,
/// found with geometric skips so the work is proportional to the output.
pub fn resample_indices<R: Rng + ?Sized>(len: usize, q: f64, rng: &mut R) -> Vec<usize> {
    if q >= 1.0 || len == 0 {
        return Vec::new();
    }
    if q <= 0.0 {
        return (0..len).collect();
    }
    let log_q = libm::log(q);
    let mut out = Vec::new();
    let mut i = 0usize;
    loop {
        // U in (0, 1]; floor(ln U / ln q) is the number of failures before
        // the next success of a Bernoulli(1−q) sequence.
        let u = 1.0 - rng.gen::<f64>();
        let skip = libm::floor(libm::log(u) / log_q);
        if skip >= (len - i) as f64 {
            break;
        }
        i += skip as usize;
        out.push(i);
        i += 1;
        if i >= len {
            break;
        }
    }
    out
}

const NONEDGE_BIT: u64 = 1 << 63;

fn pack(a: NodeId, b: NodeId, nonedge: bool) -> u64 {
    ((a.0 as u64) << 32) | b.0 as u64 | if nonedge { NONEDGE_BIT } else { 0 }
}

fn unpack(x: u64) -> (NodeId, NodeId, bool) {
    let a = ((x & !NONEDGE_BIT) >> 32) as u32;
    (NodeId(a), NodeId(x as u32), x & NONEDGE_BIT != 0)
}

fn distinct_pair<R: Rng + ?Sized>(k: usize, rng: &mut R) -> (usize, usize) {
    let i = uniform_below(rng, k as u32) as usize;
    let mut j = uniform_below(rng, k as u32 - 1) as usize;
    if j >= i {
        j += 1;
    }
    (i, j)
}

/// Sampled pairs of a cluster with their non-edge flags.
///
/// Holds `|C|·per_member` pairs, each an ordered draw of two distinct members
/// stored unordered. Clusters of size ≤ 1 hold no pairs and estimate 0.
#[derive(Debug, Clone)]
pub struct InClusterSketch {
    members: Vec<NodeId>,
    pairs: Vec<u64>,
    nonedges: usize,
    per_member: usize,
}

impl InClusterSketch {
    pub fn empty(per_member: usize) -> Self {
        Self {
            members: Vec::new(),
            pairs: Vec::new(),
            nonedges: 0,
            per_member: per_member.max(1),
        }
    }

    pub fn build<R: Rng + ?Sized>(
        store: &AdjacencyStore,
        members: &[NodeId],
        per_member: usize,
        rng: &mut R,
    ) -> Result<Self, GraphError> {
        let mut s = Self::empty(per_member);
        s.members.extend_from_slice(members);
        if members.len() >= 2 {
            let tau = members.len() * s.per_member;
            s.pairs.reserve_exact(tau);
            s.draw(store, tau, rng)?;
        }
        Ok(s)
    }

    fn draw<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        count: usize,
        rng: &mut R,
    ) -> Result<(), GraphError> {
        let k = self.members.len();
        store.charge_edge_checks(&self.members, count)?;
        for _ in 0..count {
            let (i, j) = distinct_pair(k, rng);
            let (a, b) = (self.members[i], self.members[j]);
            let nonedge = !store.edge_between(a, b);
            self.nonedges += nonedge as usize;
            self.pairs.push(pack(a, b, nonedge));
        }
        Ok(())
    }

    pub fn cluster_size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn tau(&self) -> usize {
        self.pairs.len()
    }

    pub fn per_member(&self) -> usize {
        self.per_member
    }

    pub fn nonedge_count(&self) -> usize {
        self.nonedges
    }

    /// `S·binom(|C|,2)/τ`.
    pub fn estimate(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.nonedges as f64 * binom2(self.members.len()) / self.pairs.len() as f64
    }

    pub fn pairs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.pairs.iter().map(|&x| {
            let (a, b, _) = unpack(x);
            (a, b)
        })
    }

    /// Re-checks every stored pair against the graph without charging the
    /// counters; returns the number of non-edges.
    pub fn recount(&self, store: &AdjacencyStore) -> usize {
        let view = store.inspect();
        self.pairs
            .iter()
            .filter(|&&x| {
                let (a, b, _) = unpack(x);
                !view.has_edge(a, b)
            })
            .count()
    }

    /// Adds `z` to the cluster: each stored pair is replaced with probability
    /// `1 − binom(|C|,2)/binom(|C|+1,2)` by `{z, u}` for uniform `u ∈ C`, then
    /// fresh pairs over `C + z` top the sample up to `|C+z|·per_member`.
    /// Returns the number of replaced pairs.
    pub fn insert<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        z: NodeId,
        rng: &mut R,
    ) -> Result<usize, GraphError> {
        let k = self.members.len();
        let mut replaced = 0;
        if !self.pairs.is_empty() {
            let q = binom2(k) / binom2(k + 1);
            for idx in resample_indices(self.pairs.len(), q, rng) {
                let u = self.members[uniform_below(rng, k as u32) as usize];
                let nonedge = !store.has_edge(z, u)?;
                let (_, _, old) = unpack(self.pairs[idx]);
                self.nonedges = self.nonedges - old as usize + nonedge as usize;
                self.pairs[idx] = pack(z, u, nonedge);
                replaced += 1;
            }
        }
        self.members.push(z);
        if self.members.len() >= 2 {
            let target = self.members.len() * self.per_member;
            self.draw(store, target.saturating_sub(self.pairs.len()), rng)?;
        }
        Ok(replaced)
    }
}

/// Running cost estimate for `(B, C)`; see [`cost_estimate`].
///
/// `tcost = Σ_{w∈C} d(w) − |C|(|C|−1) + 3·in_cluster + boundary + singletons`
/// where `boundary` accumulates the sampled terms of nodes of `B − C` present
/// at construction and `singletons` the degrees of nodes added to `B − C`
/// later. Nodes must satisfy `d ≥ threshold` to enter `C` and `d < threshold`
/// to enter `B − C`; a threshold of 0 accepts any node into `C`.
#[derive(Debug, Clone)]
pub struct ClusterCostSketch {
    eps: f64,
    threshold: f64,
    degree_sum: u64,
    in_cluster: InClusterSketch,
    boundary_sum: f64,
    singleton_sum: u64,
    counted: HashSet<NodeId, FxBuildHasher>,
}

impl ClusterCostSketch {
    pub(crate) fn from_parts(
        eps: f64,
        threshold: f64,
        degree_sum: u64,
        in_cluster: InClusterSketch,
        boundary_sum: f64,
        counted: HashSet<NodeId, FxBuildHasher>,
    ) -> Self {
        Self {
            eps,
            threshold,
            degree_sum,
            in_cluster,
            boundary_sum,
            singleton_sum: 0,
            counted,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub(crate) fn set_threshold(&mut self, t: f64) {
        self.threshold = t;
    }

    pub fn cluster_size(&self) -> usize {
        self.in_cluster.cluster_size()
    }

    pub fn degree_sum(&self) -> u64 {
        self.degree_sum
    }

    /// `2·binom(|C|,2)`.
    pub fn size_term(&self) -> u64 {
        let c = self.cluster_size() as u64;
        c * c.saturating_sub(1)
    }

    pub fn boundary_sum(&self) -> f64 {
        self.boundary_sum
    }

    pub fn singleton_sum(&self) -> u64 {
        self.singleton_sum
    }

    pub fn in_cluster(&self) -> &InClusterSketch {
        &self.in_cluster
    }

    pub fn tcost(&self) -> f64 {
        self.degree_sum as f64 - self.size_term() as f64
            + 3.0 * self.in_cluster.estimate()
            + self.boundary_sum
            + self.singleton_sum as f64
    }

    /// `tcost + 9ε|C|`; the numerator of [`Self::estimate`]. Comparisons use
    /// this value, which orders candidates like the estimate whenever
    /// `1 − 37ε > 0` and stays meaningful when it is not.
    pub fn score(&self) -> f64 {
        self.tcost() + 9.0 * self.eps * self.cluster_size() as f64
    }

    /// `X = (tcost + 9ε|C|)/(1 − 37ε)`.
    pub fn estimate(&self) -> f64 {
        self.score() / (1.0 - 37.0 * self.eps)
    }

    fn admit(&mut self, z: NodeId) -> Result<(), ClusterError> {
        if !self.counted.insert(z) {
            return Err(ClusterError::AlreadyCounted(z));
        }
        Ok(())
    }

    /// `z` joins `B − C`: adds `d(z)`.
    pub fn update_singleton_insert(
        &mut self,
        store: &AdjacencyStore,
        z: NodeId,
    ) -> Result<(), ClusterError> {
        let d = store.degree(z)?;
        self.singleton_insert_with_degree(z, d)
    }

    pub(crate) fn singleton_insert_with_degree(&mut self, z: NodeId, d: usize) -> Result<(), ClusterError> {
        if self.threshold > 0.0 && d as f64 >= self.threshold {
            return Err(ClusterError::MembershipMismatch(z));
        }
        self.admit(z)?;
        self.singleton_sum += d as u64;
        Ok(())
    }

    /// `z` joins `C`: adds `d(z)`, grows the size term and updates the pair
    /// sample. Returns the number of replaced pairs.
    pub fn update_cluster_insert<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        z: NodeId,
        rng: &mut R,
    ) -> Result<usize, ClusterError> {
        let d = store.degree(z)?;
        self.cluster_insert_with_degree(store, z, d, rng)
    }

    pub(crate) fn cluster_insert_with_degree<R: Rng + ?Sized>(
        &mut self,
        store: &AdjacencyStore,
        z: NodeId,
        d: usize,
        rng: &mut R,
    ) -> Result<usize, ClusterError> {
        if (d as f64) < self.threshold {
            return Err(ClusterError::MembershipMismatch(z));
        }
        self.admit(z)?;
        self.degree_sum += d as u64;
        Ok(self.in_cluster.insert(store, z, rng)?)
    }
}

/// Side of a node relative to `(B, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Cluster,
    Rest,
}

/// Builds a [`ClusterCostSketch`] for `C ⊆ B` from scratch. `n` sets the
/// sample budgets.
pub fn cost_estimate<R: Rng + ?Sized>(
    store: &AdjacencyStore,
    b: &[NodeId],
    c: &[NodeId],
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<ClusterCostSketch, ClusterError> {
    let mut side: HashMap<NodeId, Side, FxBuildHasher> = HashMap::with_capacity_and_hasher(b.len(), FxBuildHasher);
    for &u in b {
        side.insert(u, Side::Rest);
    }
    for &u in c {
        match side.get_mut(&u) {
            Some(s) => *s = Side::Cluster,
            None => return Err(ClusterError::MembershipMismatch(u)),
        }
    }
    let mut degree_sum = 0u64;
    for &u in c {
        degree_sum += store.degree(u)? as u64;
    }
    let in_cluster = InClusterSketch::build(store, c, pairs_per_member(n, eps), rng)?;
    let eta = edge_samples(n, eps);
    let mut boundary = 0.0;
    for &w in b {
        if side[&w] == Side::Cluster {
            continue;
        }
        let d = store.degree(w)?;
        if d == 0 {
            continue;
        }
        let (mut rest, mut outside) = (0usize, 0usize);
        store.for_each_sampled_neighbor(w, eta, rng, |x| match side.get(&x) {
            Some(Side::Rest) => rest += 1,
            Some(Side::Cluster) => {}
            None => outside += 1,
        })?;
        let scale = d as f64 / eta as f64;
        boundary += scale * rest as f64 / 2.0 + scale * outside as f64;
    }
    let counted = b.iter().copied().collect();
    Ok(ClusterCostSketch::from_parts(eps, 0.0, degree_sum, in_cluster, boundary, counted))
}

/// Builds only the in-cluster part: returns `(estimate, sketch)`.
pub fn in_cluster_cost_estimate<R: Rng + ?Sized>(
    store: &AdjacencyStore,
    c: &[NodeId],
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<(f64, InClusterSketch), GraphError> {
    let s = InClusterSketch::build(store, c, pairs_per_member(n, eps), rng)?;
    Ok((s.estimate(), s))
}

/// Which of two candidate clusters a comparison kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    First,
    Second,
}

/// Keeps `C` only when its estimate is strictly below that of `C'`.
pub fn cost_compare<R: Rng + ?Sized>(
    store: &AdjacencyStore,
    b: &[NodeId],
    c: &[NodeId],
    c_prime: &[NodeId],
    eps: f64,
    n: usize,
    rng: &mut R,
) -> Result<Choice, ClusterError> {
    let x = cost_estimate(store, b, c, eps, n, rng)?.score();
    let y = cost_estimate(store, b, c_prime, eps, n, rng)?.score();
    Ok(if x < y { Choice::First } else { Choice::Second })
}

/// [`cost_compare`] with exact `cost*` values.
pub fn cost_compare_exact(
    store: &AdjacencyStore,
    b: &[NodeId],
    c: &[NodeId],
    c_prime: &[NodeId],
) -> Result<Choice, ClusterError> {
    let x = exact_cost_star(store, b, c)?;
    let y = exact_cost_star(store, b, c_prime)?;
    Ok(if x < y { Choice::First } else { Choice::Second })
}

/// Exact `cost*(B|C) = [non-edges in C] + e(B) − e(C)` from adjacency lists
/// (uncounted).
pub fn exact_cost_star(store: &AdjacencyStore, b: &[NodeId], c: &[NodeId]) -> Result<u64, ClusterError> {
    let mut side: HashMap<NodeId, Side, FxBuildHasher> = HashMap::with_capacity_and_hasher(b.len(), FxBuildHasher);
    for &u in b {
        if !store.contains(u) {
            return Err(GraphError::Absent(u).into());
        }
        side.insert(u, Side::Rest);
    }
    for &u in c {
        match side.get_mut(&u) {
            Some(s) => *s = Side::Cluster,
            None => return Err(ClusterError::MembershipMismatch(u)),
        }
    }
    Ok(exact_cost_star_by(store, b, |u| side.get(&u).copied().map(|s| s == Side::Cluster)))
}

/// `cost*` with membership given by `side(u)`: `None` outside `B`,
/// `Some(true)` in `C`, `Some(false)` in `B − C`.
pub(crate) fn exact_cost_star_by(
    store: &AdjacencyStore,
    b: &[NodeId],
    side: impl Fn(NodeId) -> Option<bool>,
) -> u64 {
    let view = store.inspect();
    let (mut e_b2, mut e_c2, mut c_size) = (0u64, 0u64, 0u64);
    for &u in b {
        let in_c = side(u) == Some(true);
        c_size += in_c as u64;
        for &w in view.neighbors(u) {
            match side(w) {
                Some(true) if in_c => {
                    e_b2 += 1;
                    e_c2 += 1;
                }
                Some(_) => e_b2 += 1,
                None => {}
            }
        }
    }
    let (e_b, e_c) = (e_b2 / 2, e_c2 / 2);
    c_size * c_size.saturating_sub(1) / 2 - e_c + (e_b - e_c)
}
