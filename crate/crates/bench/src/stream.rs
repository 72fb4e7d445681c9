//! Fully dynamic update streams over a static graph.

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateEvent {
    Insert(u32),
    Delete(u32),
}

/// Walks the nodes in a random arrival order. At each step, with probability
/// `insert_prob` the next node arrives, otherwise a uniformly random present
/// node leaves (an arrival happens instead when nothing is present). Once
/// every node has arrived, the remaining ones leave in random order. Every
/// node is inserted once and deleted once: `2·n` events.
pub fn generate_stream<R: Rng + ?Sized>(n: usize, insert_prob: f64, rng: &mut R) -> Vec<UpdateEvent> {
    assert!(insert_prob > 0.0 && insert_prob <= 1.0, "insert probability must lie in (0, 1]");
    let mut arrival: Vec<u32> = (0..n as u32).collect();
    arrival.shuffle(rng);
    let mut events = Vec::with_capacity(2 * n);
    let mut present: Vec<u32> = Vec::new();
    let mut next = 0;
    while next < n {
        if present.is_empty() || insert_prob >= 1.0 || rng.gen_bool(insert_prob) {
            let u = arrival[next];
            next += 1;
            present.push(u);
            events.push(UpdateEvent::Insert(u));
        } else {
            let i = rng.gen_range(0..present.len());
            events.push(UpdateEvent::Delete(present.swap_remove(i)));
        }
    }
    present.shuffle(rng);
    events.extend(present.into_iter().map(UpdateEvent::Delete));
    events
}

/// Every event names a node in `0..n`; no node is inserted twice, deleted
/// before insertion, or deleted twice.
pub fn validate_stream(n: usize, events: &[UpdateEvent]) -> Result<(), String> {
    #[derive(Clone, Copy, PartialEq)]
    enum S {
        Never,
        In,
        Out,
    }
    let mut state = vec![S::Never; n];
    for (step, e) in events.iter().enumerate() {
        let (u, want, to) = match *e {
            UpdateEvent::Insert(u) => (u, S::Never, S::In),
            UpdateEvent::Delete(u) => (u, S::In, S::Out),
        };
        let slot = state
            .get_mut(u as usize)
            .ok_or_else(|| format!("step {step}: node {u} out of range"))?;
        if *slot != want {
            return Err(format!("step {step}: invalid {e:?}"));
        }
        *slot = to;
    }
    Ok(())
}
