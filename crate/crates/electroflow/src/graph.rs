//! Directed flow instances and the incidence operator.

use crate::error::{Error, Result};

/// Dense real vector indexed by edges.
pub type EdgeVector = Vec<f64>;
/// Dense real vector indexed by vertices.
pub type VertexVector = Vec<f64>;

/// A minimum cost flow instance: directed graph with integer costs,
/// positive integer capacities, and a balanced integer demand vector.
///
/// Sign conventions used throughout: an edge is stored as (tail, head),
/// the incidence operator maps potentials to `(B phi)_e = phi_tail - phi_head`,
/// and its transpose adds `+g_e` at the tail and `-g_e` at the head. A vertex
/// with `d_v > 0` is a net source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowInstance {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub cost: Vec<i64>,
    pub cap: Vec<i64>,
    pub demand: Vec<i64>,
}

impl FlowInstance {
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        cost: Vec<i64>,
        cap: Vec<i64>,
        demand: Vec<i64>,
    ) -> Result<Self> {
        let inst = FlowInstance {
            n,
            edges,
            cost,
            cap,
            demand,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.edges.len();
        if self.cost.len() != m || self.cap.len() != m {
            return Err(Error::InvalidInstance(
                "edge attribute arrays must have one entry per edge".into(),
            ));
        }
        if self.demand.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: self.demand.len(),
            });
        }
        for &(a, b) in &self.edges {
            if a >= self.n || b >= self.n {
                return Err(Error::InvalidInstance(format!(
                    "edge ({a},{b}) out of range for n={}",
                    self.n
                )));
            }
        }
        for (e, &u) in self.cap.iter().enumerate() {
            if u < 1 {
                return Err(Error::InvalidInstance(format!(
                    "capacity of edge {e} is {u}, must be >= 1"
                )));
            }
        }
        let total: i128 = self.demand.iter().map(|&d| d as i128).sum();
        if total != 0 {
            return Err(Error::InvalidInstance(format!(
                "demands must sum to zero, got {total}"
            )));
        }
        Ok(())
    }

    /// `(B phi)_e = phi_tail - phi_head`.
    pub fn incidence_apply(&self, phi: &[f64]) -> Result<EdgeVector> {
        if phi.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: phi.len(),
            });
        }
        Ok(self
            .edges
            .iter()
            .map(|&(a, b)| phi[a] - phi[b])
            .collect())
    }

    /// `B^T g`; the entries of the result always sum to zero.
    pub fn incidence_transpose_apply(&self, g: &[f64]) -> Result<VertexVector> {
        if g.len() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                got: g.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            out[a] += g[e];
            out[b] -= g[e];
        }
        Ok(out)
    }

    /// Net divergence of an integral flow, in exact arithmetic.
    pub fn divergence_int(&self, f: &[i64]) -> Vec<i128> {
        let mut out = vec![0i128; self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            out[a] += f[e] as i128;
            out[b] -= f[e] as i128;
        }
        out
    }

    /// Exact cost of an integral flow.
    pub fn flow_cost_int(&self, f: &[i64]) -> i128 {
        f.iter()
            .zip(&self.cost)
            .map(|(&fe, &ce)| fe as i128 * ce as i128)
            .sum()
    }

    /// Checks `B^T f = d` and `0 <= f <= u` in exact arithmetic.
    pub fn is_feasible_int(&self, f: &[i64]) -> bool {
        if f.len() != self.m() {
            return false;
        }
        if f.iter().zip(&self.cap).any(|(&fe, &ue)| fe < 0 || fe > ue) {
            return false;
        }
        self.divergence_int(f)
            .iter()
            .zip(&self.demand)
            .all(|(&div, &d)| div == d as i128)
    }

    /// True if the undirected support of the instance is connected.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> FlowInstance {
        FlowInstance::new(2, vec![(0, 1)], vec![5], vec![3], vec![1, -1]).unwrap()
    }

    #[test]
    fn incidence_single_edge() {
        let inst = single_edge();
        assert_eq!(inst.incidence_apply(&[1.0, 0.0]).unwrap(), vec![1.0]);
        assert_eq!(
            inst.incidence_transpose_apply(&[1.0]).unwrap(),
            vec![1.0, -1.0]
        );
    }

    #[test]
    fn incidence_constants_in_kernel() {
        let inst = FlowInstance::new(
            3,
            vec![(0, 1), (1, 2)],
            vec![0, 0],
            vec![1, 1],
            vec![0, 0, 0],
        )
        .unwrap();
        let out = inst.incidence_apply(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
        // Path potentials (2,1,0) give unit drops.
        let out = inst.incidence_apply(&[2.0, 1.0, 0.0]).unwrap();
        assert_eq!(out, vec![1.0, 1.0]);
    }

    #[test]
    fn transpose_of_cyclic_flow_vanishes() {
        let inst = FlowInstance::new(
            3,
            vec![(0, 1), (1, 2), (2, 0)],
            vec![0, 0, 0],
            vec![1, 1, 1],
            vec![0, 0, 0],
        )
        .unwrap();
        let out = inst.incidence_transpose_apply(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
        let zero = inst.incidence_transpose_apply(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(zero, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn transpose_total_is_zero_and_adjoint_holds() {
        let mut rng = crate::rng::RngStream::new(11, "graph/adjoint");
        let inst = crate::gen::random_connected_instance(8, 18, 9, 7, &mut rng);
        let phi: Vec<f64> = (0..inst.n).map(|_| rng.next_f64() - 0.5).collect();
        let g: Vec<f64> = (0..inst.m()).map(|_| rng.next_f64() - 0.5).collect();
        let bphi = inst.incidence_apply(&phi).unwrap();
        let btg = inst.incidence_transpose_apply(&g).unwrap();
        assert!(btg.iter().sum::<f64>().abs() < 1e-12);
        let lhs: f64 = bphi.iter().zip(&g).map(|(x, y)| x * y).sum();
        let rhs: f64 = phi.iter().zip(&btg).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
    }

    #[test]
    fn rejects_unbalanced_demand() {
        let err = FlowInstance::new(2, vec![(0, 1)], vec![1], vec![1], vec![1, 0]);
        assert!(err.is_err());
    }

    #[test]
    fn rejects_zero_capacity() {
        let err = FlowInstance::new(2, vec![(0, 1)], vec![1], vec![0], vec![0, 0]);
        assert!(err.is_err());
    }

    #[test]
    fn dimension_errors_are_reported() {
        let inst = single_edge();
        assert!(matches!(
            inst.incidence_apply(&[1.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            inst.incidence_transpose_apply(&[1.0, 2.0]),
            Err(Error::Dimension { .. })
        ));
    }
}
