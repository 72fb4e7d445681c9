//! Random graph generators.

use rand::Rng;

use crate::dataset::StaticGraph;

/// Calls `f(i)` for each index in `0..len` kept independently with
/// probability `p`, jumping over the gaps with geometric skips.
fn bernoulli_indices<R: Rng + ?Sized>(len: u64, p: f64, rng: &mut R, mut f: impl FnMut(u64)) {
    if p <= 0.0 || len == 0 {
        return;
    }
    if p >= 1.0 {
        (0..len).for_each(f);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (len - i) as f64 {
            return;
        }
        i += skip as u64;
        f(i);
        i += 1;
        if i >= len {
            return;
        }
    }
}

/// Erdős–Rényi `G(n, p)`.
pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> StaticGraph {
    let total = (n as u64) * (n as u64).saturating_sub(1) / 2;
    let mut edges = Vec::new();
    // Walk rows incrementally instead of decoding every index from scratch.
    let (mut a, mut row_start) = (0u64, 0u64);
    bernoulli_indices(total, p, rng, |i| {
        while i >= row_start + (n as u64 - 1 - a) {
            row_start += n as u64 - 1 - a;
            a += 1;
        }
        edges.push((a as u32, (a + 1 + i - row_start) as u32));
    });
    StaticGraph::from_edges(n, edges)
}

/// `blocks` groups of `size` nodes; pairs inside a group are edges with
/// probability `p_in`, across groups with `p_out`. Node `i` belongs to group
/// `i / size`.
pub fn planted_partition<R: Rng + ?Sized>(blocks: usize, size: usize, p_in: f64, p_out: f64, rng: &mut R) -> StaticGraph {
    let n = blocks * size;
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = if a / size == b / size { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((a as u32, b as u32));
            }
        }
    }
    StaticGraph::from_edges(n, edges)
}
