use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_pivot::eval::normalized_objective;
use sparse_pivot::{
    BreakMode, Clusterer, Engine, EvalScope, NodeId, ReferenceClustering, SparsePivot, SparsePivotParams,
    TriggerMode,
};

fn gnp_adj(rng: &mut ChaCha8Rng, size: usize, p: f64) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); size];
    for a in 0..size {
        for b in a + 1..size {
            if rng.gen_bool(p) {
                adj[a].push(NodeId(b as u32));
                adj[b].push(NodeId(a as u32));
            }
        }
    }
    adj
}

fn final_objective<C: Clusterer>(clusterer: C, adj: &[Vec<NodeId>], order: &[u32], seed: u64) -> f64 {
    let mut eng = Engine::new(clusterer, 0.1, TriggerMode::DeletionsOnly, seed);
    for &u in order {
        eng.insert(NodeId(u), &adj[u as usize]).unwrap();
    }
    normalized_objective(eng.store(), &eng.export(), EvalScope::AlgorithmView)
        .unwrap()
        .normalized
        .unwrap()
}

#[test]
fn sparse_pivot_stays_within_twice_reference_on_gnp() {
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let adj = gnp_adj(&mut rng, 500, 0.05);
        let mut order: Vec<u32> = (0..500).collect();
        order.shuffle(&mut rng);
        let sp = final_objective(SparsePivot::new(SparsePivotParams::default()), &adj, &order, seed);
        let rf = final_objective(ReferenceClustering::new(), &adj, &order, seed);
        ratios.push(sp / rf);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!(mean <= 2.0, "ratios {ratios:?}");
}

#[test]
fn every_break_mode_survives_a_fully_dynamic_stream() {
    for mode in [BreakMode::Heuristic, BreakMode::Exact, BreakMode::Estimate, BreakMode::Keep] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let size = 120usize;
        let adj = gnp_adj(&mut rng, size, 0.08);
        let params = SparsePivotParams {
            eps: 0.4,
            break_mode: mode,
            ..SparsePivotParams::default()
        };
        let mut eng = Engine::new(SparsePivot::new(params), 0.2, TriggerMode::AllUpdates, 8);
        let mut pending: Vec<u32> = (0..size as u32).collect();
        pending.shuffle(&mut rng);
        let mut present: Vec<u32> = Vec::new();
        while !pending.is_empty() || !present.is_empty() {
            if !pending.is_empty() && (present.is_empty() || rng.gen_bool(0.7)) {
                let u = pending.pop().unwrap();
                eng.insert(NodeId(u), &adj[u as usize]).unwrap();
                present.push(u);
            } else {
                let u = present.swap_remove(rng.gen_range(0..present.len()));
                eng.delete(NodeId(u)).unwrap();
            }
            eng.clusterer().state().check_invariants().unwrap();
            let rep = normalized_objective(eng.store(), &eng.export(), EvalScope::TrueGraph).unwrap();
            if let Some(v) = rep.normalized {
                assert!(v >= 0.0);
            }
        }
        assert!(eng.recomputes() > 0, "{mode:?}");
    }
}
