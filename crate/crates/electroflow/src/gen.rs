//! Instance generators for tests and the bench harness.
//!
//! All families draw costs and capacities uniformly from [1,W] / [1,U]
//! (costs optionally signed) and build demands by routing a random integral
//! flow on a spanning tree, so every generated instance is feasible by
//! construction.

use crate::graph::FlowInstance;
use crate::rng::RngStream;

/// Random connected multigraph instance: a random spanning tree plus
/// `m - (n-1)` extra arcs with random endpoints and orientations.
pub fn random_connected_instance(
    n: usize,
    m: usize,
    max_cap: i64,
    max_cost: i64,
    rng: &mut RngStream,
) -> FlowInstance {
    assert!(n >= 2);
    let m = m.max(n - 1);
    let mut edges = Vec::with_capacity(m);
    // Random attachment tree over a shuffled vertex order.
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for i in 1..n {
        let parent = order[rng.gen_range(i)];
        let child = order[i];
        if rng.next_u64() & 1 == 0 {
            edges.push((parent, child));
        } else {
            edges.push((child, parent));
        }
    }
    while edges.len() < m {
        let a = rng.gen_range(n);
        let mut b = rng.gen_range(n);
        if a == b {
            b = (b + 1) % n;
        }
        edges.push((a, b));
    }
    finish_instance(n, edges, max_cap, max_cost, false, rng)
}

/// Signed-cost variant of the random family.
pub fn random_signed_cost_instance(
    n: usize,
    m: usize,
    max_cap: i64,
    max_cost: i64,
    rng: &mut RngStream,
) -> FlowInstance {
    let mut inst = random_connected_instance(n, m, max_cap, max_cost, rng);
    for c in &mut inst.cost {
        if rng.next_u64() & 1 == 0 {
            *c = -*c;
        }
    }
    inst
}

/// Grid instance on a rows x cols lattice with random arc orientations.
pub fn grid_instance(
    rows: usize,
    cols: usize,
    max_cap: i64,
    max_cost: i64,
    rng: &mut RngStream,
) -> FlowInstance {
    assert!(rows >= 1 && cols >= 1 && rows * cols >= 2);
    let n = rows * cols;
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let (a, b) = (id(r, c), id(r, c + 1));
                edges.push(if rng.next_u64() & 1 == 0 { (a, b) } else { (b, a) });
            }
            if r + 1 < rows {
                let (a, b) = (id(r, c), id(r + 1, c));
                edges.push(if rng.next_u64() & 1 == 0 { (a, b) } else { (b, a) });
            }
        }
    }
    finish_instance(n, edges, max_cap, max_cost, false, rng)
}

/// Random-regular-ish expander family: `deg` random perfect matchings over
/// a vertex permutation, discarding self-loops.
pub fn regularish_instance(
    n: usize,
    deg: usize,
    max_cap: i64,
    max_cost: i64,
    rng: &mut RngStream,
) -> FlowInstance {
    assert!(n >= 4);
    let mut edges = Vec::new();
    // Hamiltonian cycle keeps the graph connected whatever the matchings do.
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for i in 0..n {
        edges.push((order[i], order[(i + 1) % n]));
    }
    for _ in 0..deg.saturating_sub(2) {
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        for i in 0..n / 2 {
            let (a, b) = (perm[2 * i], perm[2 * i + 1]);
            if a != b {
                edges.push((a, b));
            }
        }
    }
    finish_instance(n, edges, max_cap, max_cost, false, rng)
}

fn finish_instance(
    n: usize,
    edges: Vec<(usize, usize)>,
    max_cap: i64,
    max_cost: i64,
    signed: bool,
    rng: &mut RngStream,
) -> FlowInstance {
    let m = edges.len();
    let cap: Vec<i64> = (0..m).map(|_| rng.gen_range_inclusive(1, max_cap)).collect();
    let cost: Vec<i64> = (0..m)
        .map(|_| {
            let c = rng.gen_range_inclusive(1, max_cost.max(1));
            if signed && rng.next_u64() & 1 == 0 {
                -c
            } else {
                c
            }
        })
        .collect();
    // Feasible demand: route a random flow on the first n-1 arcs (the tree).
    let mut demand = vec![0i64; n];
    for e in 0..(n - 1).min(m) {
        let f = rng.gen_range_inclusive(0, cap[e]);
        demand[edges[e].0] += f;
        demand[edges[e].1] -= f;
    }
    FlowInstance::new(n, edges, cost, cap, demand).expect("generated instance must validate")
}

/// Positive resistances for test graphs, log-uniform in [lo, hi].
pub fn random_resistances(m: usize, lo: f64, hi: f64, rng: &mut RngStream) -> Vec<f64> {
    (0..m)
        .map(|_| {
            let t = rng.next_f64();
            lo * (hi / lo).powf(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_instances_are_connected_and_feasible_by_tree_flow() {
        let mut rng = RngStream::new(77, "gen/check");
        for i in 0..20 {
            let inst = random_connected_instance(4 + i % 7, 8 + i, 10, 10, &mut rng);
            assert!(inst.is_connected());
            assert!(inst.validate().is_ok());
        }
        let grid = grid_instance(3, 4, 6, 6, &mut rng);
        assert!(grid.is_connected());
        let reg = regularish_instance(10, 4, 6, 6, &mut rng);
        assert!(reg.is_connected());
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = random_connected_instance(8, 15, 9, 9, &mut RngStream::new(5, "gen/det"));
        let b = random_connected_instance(8, 15, 9, 9, &mut RngStream::new(5, "gen/det"));
        assert_eq!(a, b);
    }
}
