use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_pivot::estimate::exact_cost_star;
use sparse_pivot::eval::{
    boundary_edges, clustering_cost, clustering_cost_per_cluster, cost_given, cost_star_oracle, normalized_objective,
};
use sparse_pivot::{AdjacencyStore, EvalScope, NodeId, Partition};

fn random_graph(rng: &mut ChaCha8Rng, size: u32, p: f64) -> (AdjacencyStore, Vec<(u32, u32)>) {
    let mut store = AdjacencyStore::new();
    let mut edges = Vec::new();
    for u in 0..size {
        let inc: Vec<NodeId> = (0..u).filter(|_| rng.gen_bool(p)).map(NodeId).collect();
        edges.extend(inc.iter().map(|w| (w.0, u)));
        store.insert_node(NodeId(u), &inc).unwrap();
    }
    (store, edges)
}

fn random_partition(rng: &mut ChaCha8Rng, nodes: &[NodeId], blocks: usize) -> Vec<Vec<NodeId>> {
    let mut out = vec![Vec::new(); blocks];
    for &u in nodes {
        out[rng.gen_range(0..blocks)].push(u);
    }
    out.retain(|b| !b.is_empty());
    out
}

/// Disagreements by enumerating every pair against a label table.
fn pair_cost(size: u32, edges: &[(u32, u32)], blocks: &[Vec<NodeId>], alive: impl Fn(u32) -> bool) -> u64 {
    let mut label = vec![usize::MAX; size as usize];
    for (i, b) in blocks.iter().enumerate() {
        for u in b {
            label[u.index()] = i;
        }
    }
    let is_edge = |a: u32, b: u32| edges.contains(&(a.min(b), a.max(b)));
    let mut cost = 0;
    for a in 0..size {
        for b in a + 1..size {
            if !alive(a) || !alive(b) {
                continue;
            }
            let same = label[a as usize] == label[b as usize];
            cost += (same != is_edge(a, b)) as u64;
        }
    }
    cost
}

#[test]
fn path_and_triangle_examples() {
    let mut g = AdjacencyStore::new();
    g.insert_node(NodeId(0), &[]).unwrap();
    g.insert_node(NodeId(1), &[NodeId(0)]).unwrap();
    g.insert_node(NodeId(2), &[NodeId(1)]).unwrap();
    let one = Partition::from_blocks(vec![vec![NodeId(0), NodeId(1), NodeId(2)]]);
    assert_eq!(clustering_cost(&g, &one, EvalScope::AlgorithmView).unwrap(), 1);
    g.insert_node(NodeId(3), &[]).unwrap();
    let all = [NodeId(0), NodeId(1), NodeId(2)];
    // B = {a,b,c}, C = {a,b} with edges {a,b},{a,c}: relabel the path b–a–c.
    let mut h = AdjacencyStore::new();
    h.insert_node(NodeId(0), &[]).unwrap();
    h.insert_node(NodeId(1), &[NodeId(0)]).unwrap();
    h.insert_node(NodeId(2), &[NodeId(0)]).unwrap();
    assert_eq!(cost_star_oracle(&h, &all, &[NodeId(0), NodeId(1)]).unwrap(), 1);
    let rep = normalized_objective(&g, &Partition::singletons(g.nodes()), EvalScope::AlgorithmView).unwrap();
    assert_eq!(rep.normalized, Some(1.0));
}

#[test]
fn disjoint_cliques_cost_nothing() {
    let mut g = AdjacencyStore::new();
    let mut blocks = Vec::new();
    for c in 0..5u32 {
        let members: Vec<NodeId> = (0..6).map(|i| NodeId(c * 6 + i)).collect();
        for (i, &u) in members.iter().enumerate() {
            g.insert_node(u, &members[..i]).unwrap();
        }
        blocks.push(members);
    }
    let rep = normalized_objective(&g, &Partition::from_blocks(blocks), EvalScope::AlgorithmView).unwrap();
    assert_eq!((rep.raw_cost, rep.normalized), (0, Some(0.0)));
}

#[test]
fn cost_given_exceeds_cost_star_by_half_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let size = rng.gen_range(2..30);
        let p = rng.gen_range(0.05..0.8);
        let (store, edges) = random_graph(&mut rng, size, p);
        let mut b: Vec<NodeId> = (0..size).map(NodeId).collect();
        b.shuffle(&mut rng);
        b.truncate(rng.gen_range(1..=size as usize));
        let mut c = b.clone();
        c.truncate(rng.gen_range(0..=b.len()));
        let leaving = edges
            .iter()
            .filter(|&&(x, y)| b.contains(&NodeId(x)) != b.contains(&NodeId(y)))
            .count() as f64;
        let star = cost_star_oracle(&store, &b, &c).unwrap();
        assert_eq!(cost_given(&store, &b, &c).unwrap() - star as f64, leaving / 2.0);
        assert_eq!(boundary_edges(&store, &b).unwrap() as f64, leaving);
        assert_eq!(exact_cost_star(&store, &b, &c).unwrap(), star);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn three_cost_routes_agree(seed in any::<u64>(), size in 1u32..35, blocks in 1usize..8, deleted in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = rng.gen_range(0.0..0.7);
        let (mut store, edges) = random_graph(&mut rng, size, p);
        let nodes: Vec<NodeId> = store.nodes().collect();
        let mut gone = Vec::new();
        for &u in nodes.choose_multiple(&mut rng, deleted.min(nodes.len())) {
            store.soft_delete(u).unwrap();
            gone.push(u.0);
        }
        let parts = random_partition(&mut rng, &nodes, blocks);
        let partition = Partition::from_blocks(parts.clone());

        let all = pair_cost(size, &edges, &parts, |_| true);
        prop_assert_eq!(clustering_cost(&store, &partition, EvalScope::AlgorithmView).unwrap(), all);
        prop_assert_eq!(clustering_cost_per_cluster(&store, &partition, EvalScope::AlgorithmView).unwrap(), all);

        let alive = pair_cost(size, &edges, &parts, |u| !gone.contains(&u));
        prop_assert_eq!(clustering_cost(&store, &partition, EvalScope::TrueGraph).unwrap(), alive);
        prop_assert_eq!(clustering_cost_per_cluster(&store, &partition, EvalScope::TrueGraph).unwrap(), alive);

        let rep = normalized_objective(&store, &partition, EvalScope::AlgorithmView).unwrap();
        prop_assert_eq!(rep.singleton_cost, edges.len() as u64);
        if let Some(v) = rep.normalized {
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, all == 0);
        }

        // Reordering blocks and members changes nothing.
        let mut shuffled = parts.clone();
        shuffled.reverse();
        for b in &mut shuffled {
            b.shuffle(&mut rng);
        }
        prop_assert_eq!(clustering_cost(&store, &Partition::from_blocks(shuffled), EvalScope::AlgorithmView).unwrap(), all);
    }

    #[test]
    fn relabeling_preserves_cost(seed in any::<u64>(), size in 1u32..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (store, edges) = random_graph(&mut rng, size, 0.3);
        let nodes: Vec<NodeId> = store.nodes().collect();
        let parts = random_partition(&mut rng, &nodes, 4);
        let mut perm: Vec<u32> = (0..size).collect();
        perm.shuffle(&mut rng);
        // Rebuild the graph under the permutation, inserting in new-id order.
        let mut relabeled = AdjacencyStore::new();
        for v in 0..size {
            let inc: Vec<NodeId> = edges
                .iter()
                .filter_map(|&(a, b)| {
                    let (pa, pb) = (perm[a as usize], perm[b as usize]);
                    if pa == v && pb < v { Some(NodeId(pb)) } else if pb == v && pa < v { Some(NodeId(pa)) } else { None }
                })
                .collect();
            relabeled.insert_node(NodeId(v), &inc).unwrap();
        }
        let moved: Vec<Vec<NodeId>> = parts.iter().map(|b| b.iter().map(|u| NodeId(perm[u.index()])).collect()).collect();
        prop_assert_eq!(
            clustering_cost(&store, &Partition::from_blocks(parts), EvalScope::AlgorithmView).unwrap(),
            clustering_cost(&relabeled, &Partition::from_blocks(moved), EvalScope::AlgorithmView).unwrap()
        );
    }
}

#[test]
fn invalid_partitions_are_rejected() {
    let mut g = AdjacencyStore::new();
    for u in 0..3 {
        g.insert_node(NodeId(u), &[]).unwrap();
    }
    let overlap = Partition::from_blocks(vec![vec![NodeId(0), NodeId(1)], vec![NodeId(1), NodeId(2)]]);
    assert!(clustering_cost(&g, &overlap, EvalScope::AlgorithmView).is_err());
    let missing = Partition::from_blocks(vec![vec![NodeId(0), NodeId(1)]]);
    assert!(clustering_cost(&g, &missing, EvalScope::AlgorithmView).is_err());
    let foreign = Partition::from_blocks(vec![vec![NodeId(0), NodeId(1), NodeId(2), NodeId(9)]]);
    assert!(clustering_cost(&g, &foreign, EvalScope::AlgorithmView).is_err());
    let rep = normalized_objective(&g, &Partition::singletons(g.nodes()), EvalScope::AlgorithmView).unwrap();
    assert_eq!(rep.normalized, None);
}
