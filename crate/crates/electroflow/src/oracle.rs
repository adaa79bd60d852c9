//! Exact reference solvers: successive shortest paths with Johnson
//! potentials, brute-force enumeration for tiny instances, and the dense
//! electrical step used as ground truth for the locator and checker.

use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use crate::linalg::Laplacian;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub feasible: bool,
    pub flow: Vec<i64>,
    pub cost: i128,
}

const INF: i128 = i128::MAX / 4;

/// Exact minimum cost flow by successive shortest paths. Arcs with negative
/// cost are saturated up front and replaced by their residual reversal, so
/// Dijkstra with Johnson potentials applies throughout; negative-cost cycles
/// are handled correctly by this reduction.
pub fn ssp_min_cost_flow(inst: &FlowInstance) -> OracleResult {
    let n = inst.n;
    let m = inst.m();

    // Residual arcs are kept in pairs: arc 2e is the forward copy of input
    // edge e, arc 2e+1 its reversal.
    let mut head = Vec::with_capacity(2 * m);
    let mut resid = Vec::with_capacity(2 * m);
    let mut cost = Vec::with_capacity(2 * m);
    let mut excess: Vec<i128> = inst.demand.iter().map(|&d| d as i128).collect();
    for (e, &(a, b)) in inst.edges.iter().enumerate() {
        let u = inst.cap[e];
        let c = inst.cost[e] as i128;
        if c >= 0 {
            head.push(b);
            resid.push(u);
            cost.push(c);
            head.push(a);
            resid.push(0);
            cost.push(-c);
        } else {
            // Saturate: flow u on e, leaving only the residual reversal.
            excess[a] -= u as i128;
            excess[b] += u as i128;
            head.push(b);
            resid.push(0);
            cost.push(c);
            head.push(a);
            resid.push(u);
            cost.push(-c);
        }
    }
    let tails: Vec<usize> = inst
        .edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect();
    let mut adj = vec![Vec::new(); n];
    for (arc, _) in head.iter().enumerate() {
        adj[tails[arc]].push(arc);
    }

    // Route excess from supply vertices to deficit vertices.
    let mut potential = vec![0i128; n];
    loop {
        let Some(source) = (0..n).find(|&v| excess[v] > 0) else {
            break;
        };
        // Dijkstra over reduced costs from `source`.
        let mut dist = vec![INF; n];
        let mut prev_arc = vec![usize::MAX; n];
        let mut done = vec![false; n];
        dist[source] = 0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(std::cmp::Reverse((0i128, source)));
        while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            let _ = d;
            for &arc in &adj[v] {
                if resid[arc] == 0 {
                    continue;
                }
                let w = head[arc];
                let rc = cost[arc] + potential[v] - potential[w];
                debug_assert!(rc >= 0, "negative reduced cost");
                let nd = dist[v] + rc;
                if nd < dist[w] {
                    dist[w] = nd;
                    prev_arc[w] = arc;
                    heap.push(std::cmp::Reverse((nd, w)));
                }
            }
        }
        let Some(sink) = (0..n)
            .filter(|&v| excess[v] < 0 && dist[v] < INF)
            .min_by_key(|&v| dist[v])
        else {
            // Some excess cannot reach any deficit: infeasible.
            return OracleResult {
                feasible: false,
                flow: vec![0; m],
                cost: 0,
            };
        };
        // Capping at the sink distance keeps reduced costs nonnegative even
        // across vertices this Dijkstra never reached.
        let cap_dist = dist[sink];
        for v in 0..n {
            potential[v] += dist[v].min(cap_dist);
        }
        // Push along the path as much as bottleneck and excess allow.
        let mut push = excess[source].min(-excess[sink]);
        let mut v = sink;
        while v != source {
            let arc = prev_arc[v];
            push = push.min(resid[arc] as i128);
            v = tails[arc];
        }
        let push = push as i64;
        let mut v = sink;
        while v != source {
            let arc = prev_arc[v];
            resid[arc] -= push;
            resid[arc ^ 1] += push;
            v = tails[arc];
        }
        excess[source] -= push as i128;
        excess[sink] += push as i128;
    }

    // Recover per-edge flow from the residual state.
    let mut flow = vec![0i64; m];
    for e in 0..m {
        if inst.cost[e] >= 0 {
            flow[e] = inst.cap[e] - resid[2 * e];
        } else {
            flow[e] = resid[2 * e + 1];
        }
    }
    OracleResult {
        feasible: true,
        cost: inst.flow_cost_int(&flow),
        flow,
    }
}

/// Exhaustive enumeration over all integral flows. Guard: m <= 8, u <= 4.
pub fn brute_force_min_cost_flow(inst: &FlowInstance) -> Result<OracleResult> {
    let m = inst.m();
    if m > 8 || inst.cap.iter().any(|&u| u > 4) {
        return Err(Error::InvalidArgument(
            "brute force limited to m <= 8, u <= 4".into(),
        ));
    }
    let mut best: Option<(i128, Vec<i64>)> = None;
    let mut f = vec![0i64; m];
    loop {
        if inst.is_feasible_int(&f) {
            let c = inst.flow_cost_int(&f);
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, f.clone()));
            }
        }
        // Odometer increment.
        let mut e = 0;
        loop {
            if e == m {
                return Ok(match best {
                    Some((cost, flow)) => OracleResult {
                        feasible: true,
                        flow,
                        cost,
                    },
                    None => OracleResult {
                        feasible: false,
                        flow: vec![0; m],
                        cost: 0,
                    },
                });
            }
            if f[e] < inst.cap[e] {
                f[e] += 1;
                break;
            }
            f[e] = 0;
            e += 1;
        }
    }
}

/// Dense evaluation of the electrical step
/// `f* = delta g(s) - delta R^{-1} B L^+ B^T g(s)` and its congestion
/// `rho* = sqrt(r) f*`. Ground truth for locator/checker tests.
pub fn dense_electrical_step(
    inst: &FlowInstance,
    s_plus: &[f64],
    s_minus: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = inst.m();
    if m > 5000 {
        return Err(Error::InvalidArgument(
            "dense electrical step limited to m <= 5000".into(),
        ));
    }
    let delta = 1.0 / (m as f64).sqrt();
    let r: Vec<f64> = (0..m)
        .map(|e| 1.0 / (s_plus[e] * s_plus[e]) + 1.0 / (s_minus[e] * s_minus[e]))
        .collect();
    let g: Vec<f64> = (0..m)
        .map(|e| (1.0 / s_plus[e] - 1.0 / s_minus[e]) / r[e])
        .collect();
    let lap = Laplacian::from_instance(inst, &r);
    let btg = inst.incidence_transpose_apply(&g)?;
    // Two independently grounded factorizations; their agreement certifies
    // the solve to ~1e-9.
    let phi_a = lap.factor_pinned(inst.n - 1)?.solve(&btg)?;
    let phi_b = lap.factor_pinned(0)?.solve(&btg)?;
    let scale: f64 = phi_a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for v in 0..inst.n {
        if (phi_a[v] - phi_b[v]).abs() > 1e-9 * scale {
            return Err(Error::Contract(format!(
                "dense solve routes disagree at vertex {v}"
            )));
        }
    }
    let bphi = inst.incidence_apply(&phi_a)?;
    let mut step = vec![0.0; m];
    let mut rho = vec![0.0; m];
    for e in 0..m {
        step[e] = delta * g[e] - delta * bphi[e] / r[e];
        rho[e] = r[e].sqrt() * step[e];
    }
    Ok((step, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_connected_instance, random_signed_cost_instance};
    use crate::rng::RngStream;

    #[test]
    fn single_arc() {
        let inst =
            FlowInstance::new(2, vec![(0, 1)], vec![5], vec![3], vec![1, -1]).unwrap();
        let res = ssp_min_cost_flow(&inst);
        assert!(res.feasible);
        assert_eq!(res.flow, vec![1]);
        assert_eq!(res.cost, 5);
    }

    #[test]
    fn detects_infeasible_cut() {
        let inst =
            FlowInstance::new(2, vec![(0, 1)], vec![1], vec![1], vec![2, -2]).unwrap();
        let res = ssp_min_cost_flow(&inst);
        assert!(!res.feasible);
        let bf = brute_force_min_cost_flow(&inst).unwrap();
        assert!(!bf.feasible);
    }

    #[test]
    fn ssp_matches_brute_force_on_tiny_instances() {
        let mut rng = RngStream::new(17, "oracle/cross");
        let mut checked = 0;
        for trial in 0..200 {
            let n = 3 + trial % 3;
            let m = (n - 1).max(3 + trial % 6).min(6);
            let mut inst = random_signed_cost_instance(n, m, 3, 4, &mut rng);
            // Shrink demands to keep feasibility plausible after cap clamp.
            for u in &mut inst.cap {
                *u = (*u).min(3);
            }
            let inst = match FlowInstance::new(
                inst.n,
                inst.edges.clone(),
                inst.cost.clone(),
                inst.cap.clone(),
                inst.demand.clone(),
            ) {
                Ok(i) => i,
                Err(_) => continue,
            };
            let bf = match brute_force_min_cost_flow(&inst) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let ssp = ssp_min_cost_flow(&inst);
            assert_eq!(bf.feasible, ssp.feasible, "feasibility mismatch");
            if bf.feasible {
                assert!(inst.is_feasible_int(&ssp.flow));
                assert_eq!(bf.cost, ssp.cost, "cost mismatch on {inst:?}");
                checked += 1;
            }
        }
        assert!(checked >= 100, "only {checked} feasible tiny instances");
    }

    #[test]
    fn negative_costs_and_cycles_are_exact() {
        // A pure negative cycle: optimal flow saturates it.
        let inst = FlowInstance::new(
            3,
            vec![(0, 1), (1, 2), (2, 0)],
            vec![-1, -1, -1],
            vec![2, 2, 2],
            vec![0, 0, 0],
        )
        .unwrap();
        let res = ssp_min_cost_flow(&inst);
        assert!(res.feasible);
        assert_eq!(res.flow, vec![2, 2, 2]);
        assert_eq!(res.cost, -6);
        let bf = brute_force_min_cost_flow(&inst).unwrap();
        assert_eq!(bf.cost, -6);
    }

    #[test]
    fn dense_step_is_a_circulation_and_symmetric_case_vanishes() {
        let mut rng = RngStream::new(23, "oracle/step");
        let inst = random_connected_instance(8, 18, 6, 6, &mut rng);
        let m = inst.m();
        // Symmetric slack point: step must vanish.
        let s_plus: Vec<f64> = inst.cap.iter().map(|&u| u as f64 / 2.0).collect();
        let s_minus = s_plus.clone();
        let (step, rho) = dense_electrical_step(&inst, &s_plus, &s_minus).unwrap();
        assert!(step.iter().all(|&x| x.abs() < 1e-12));
        assert!(rho.iter().all(|&x| x.abs() < 1e-12));

        // Generic point: step is a circulation.
        let s_plus: Vec<f64> = (0..m)
            .map(|e| inst.cap[e] as f64 * (0.2 + 0.6 * rng.next_f64()))
            .collect();
        let s_minus: Vec<f64> = (0..m).map(|e| inst.cap[e] as f64 - s_plus[e]).collect();
        let (step, _) = dense_electrical_step(&inst, &s_plus, &s_minus).unwrap();
        let div = inst.incidence_transpose_apply(&step).unwrap();
        let scale: f64 = step.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
        assert!(div.iter().all(|&x| x.abs() <= 1e-9 * scale));
    }
}
