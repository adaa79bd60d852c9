//! Laplacian operators, linear solves, energies, effective resistances and
//! Schur complements. Everything is exact (dense factorizations with
//! iterative refinement); this kernel is the ground truth the randomized
//! components are tested against.

use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use crate::rng::RngStream;
thread_local! {
    static FACTOR_COUNT: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Number of grounded Laplacian factorizations performed by the current
/// thread; the bench harness reports per-job deltas, which stay
/// deterministic under worker-pool execution because each job runs on one
/// thread.
pub fn laplacian_factor_count() -> u64 {
    FACTOR_COUNT.with(|c| c.get())
}

/// Weighted graph Laplacian `L = B^T R^{-1} B`, kept in edge-list form so
/// applying it costs O(m).
#[derive(Debug, Clone)]
pub struct Laplacian {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub r: Vec<f64>,
}

impl Laplacian {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, r: Vec<f64>) -> Self {
        debug_assert_eq!(edges.len(), r.len());
        debug_assert!(r.iter().all(|&x| x > 0.0));
        Laplacian { n, edges, r }
    }

    pub fn from_instance(inst: &FlowInstance, r: &[f64]) -> Self {
        Laplacian::new(inst.n, inst.edges.clone(), r.to_vec())
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `y = L x` via two passes over the edge list.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let w = 1.0 / self.r[e];
            let d = x[a] - x[b];
            y[a] += w * d;
            y[b] -= w * d;
        }
        y
    }

    /// Dense row-major copy of L.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let w = 1.0 / self.r[e];
            l[a * n + a] += w;
            l[b * n + b] += w;
            l[a * n + b] -= w;
            l[b * n + a] -= w;
        }
        l
    }

    /// Grounded Cholesky factorization realizing the pseudoinverse. The
    /// grounded vertex is the one with the largest conductance degree.
    pub fn factor(&self) -> Result<GroundedFactorization> {
        let mut deg = vec![0.0; self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if a != b {
                let w = 1.0 / self.r[e];
                deg[a] += w;
                deg[b] += w;
            }
        }
        let pin = (0..self.n)
            .max_by(|&i, &j| {
                deg[i]
                    .partial_cmp(&deg[j])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(j.cmp(&i))
            })
            .unwrap_or(0);
        GroundedFactorization::new(self, pin)
    }

    pub fn factor_pinned(&self, pin: usize) -> Result<GroundedFactorization> {
        GroundedFactorization::new(self, pin)
    }

    /// Contract each listed group of vertices to a single new vertex.
    /// Ungrouped vertices keep their own (renumbered) identity. Returns the
    /// contracted Laplacian and the vertex map. Self-loops created by the
    /// contraction are dropped (they carry no current).
    pub fn contract(&self, groups: &[&[usize]]) -> (Laplacian, Vec<usize>) {
        let mut map = vec![usize::MAX; self.n];
        for (g, group) in groups.iter().enumerate() {
            for &v in *group {
                map[v] = g;
            }
        }
        let mut next = groups.len();
        for v in 0..self.n {
            if map[v] == usize::MAX {
                map[v] = next;
                next += 1;
            }
        }
        let mut edges = Vec::new();
        let mut r = Vec::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (ma, mb) = (map[a], map[b]);
            if ma != mb {
                edges.push((ma, mb));
                r.push(self.r[e]);
            }
        }
        (Laplacian::new(next, edges, r), map)
    }
}

/// Cholesky factorization of the Laplacian with one vertex grounded.
/// `solve` returns the mean-zero representative of `L^+ b`.
#[derive(Debug, Clone)]
pub struct GroundedFactorization {
    n: usize,
    pin: usize,
    /// Diagonal-ordered factorization of L with row/column `pin` deleted,
    /// indexed by grounded positions.
    chol: DenseChol,
    lap: Laplacian,
}

const SOLVE_TOL: f64 = 1e-13;

impl GroundedFactorization {
    fn new(lap: &Laplacian, pin: usize) -> Result<Self> {
        let n = lap.n;
        if n == 0 {
            return Err(Error::InvalidArgument("empty graph".into()));
        }
        let k = n - 1;
        let dense = lap.dense();
        // Grounded matrix in grounded coordinates (skip row/col `pin`).
        let gidx = |v: usize| if v < pin { v } else { v - 1 };
        let mut a = vec![0.0; k * k];
        for v in 0..n {
            if v == pin {
                continue;
            }
            for w in 0..n {
                if w == pin {
                    continue;
                }
                a[gidx(v) * k + gidx(w)] = dense[v * n + w];
            }
        }
        let chol = DenseChol::new(a, k)?;
        FACTOR_COUNT.with(|c| c.set(c.get() + 1));
        Ok(GroundedFactorization {
            n,
            pin,
            chol,
            lap: lap.clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves `L phi = b` for balanced b, returning the mean-zero solution.
    /// Falls back on iterative refinement (at most 3 passes) when the direct
    /// solve leaves a residual above 1e-10 relative.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: b.len(),
            });
        }
        let norm1: f64 = b.iter().map(|x| x.abs()).sum();
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-9 * norm1.max(1.0) {
            return Err(Error::UnbalancedDemand { sum });
        }
        let mut phi = self.solve_raw(b);
        let norm2 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm2 > 0.0 {
            for _ in 0..6 {
                let res = residual(&self.lap, &phi, b);
                let rnorm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
                if rnorm <= SOLVE_TOL * norm2 {
                    break;
                }
                let corr = self.solve_raw(&res);
                for (p, c) in phi.iter_mut().zip(&corr) {
                    *p += c;
                }
            }
        }
        let mean = phi.iter().sum::<f64>() / self.n as f64;
        for p in &mut phi {
            *p -= mean;
        }
        Ok(phi)
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let k = self.n - 1;
        let gidx = |v: usize| if v < self.pin { v } else { v - 1 };
        let mut y = vec![0.0; k];
        for v in 0..self.n {
            if v != self.pin {
                y[gidx(v)] = b[v];
            }
        }
        self.chol.solve_in_place(&mut y);
        let mut phi = vec![0.0; self.n];
        for v in 0..self.n {
            if v != self.pin {
                phi[v] = y[gidx(v)];
            }
        }
        phi
    }
}

fn residual(lap: &Laplacian, phi: &[f64], b: &[f64]) -> Vec<f64> {
    let lphi = lap.apply(phi);
    b.iter().zip(&lphi).map(|(x, y)| x - y).collect()
}

/// In-place dense Cholesky (lower). Fails on non-positive pivots, which for
/// a grounded Laplacian means the graph is disconnected.
fn cholesky_in_place(a: &mut [f64], k: usize) -> Result<()> {
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d -= a[j * k + p] * a[j * k + p];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::SingularLaplacian);
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in (j + 1)..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s -= a[i * k + p] * a[j * k + p];
            }
            a[i * k + j] = s / d;
        }
    }
    // Zero the strict upper triangle so the factor is self-describing.
    for i in 0..k {
        for j in (i + 1)..k {
            a[i * k + j] = 0.0;
        }
    }
    Ok(())
}

fn chol_solve(chol: &[f64], k: usize, y: &mut [f64]) {
    // Forward substitution L z = y.
    for i in 0..k {
        let mut s = y[i];
        for p in 0..i {
            s -= chol[i * k + p] * y[p];
        }
        y[i] = s / chol[i * k + i];
    }
    // Back substitution L^T x = z.
    for i in (0..k).rev() {
        let mut s = y[i];
        for p in (i + 1)..k {
            s -= chol[p * k + i] * y[p];
        }
        y[i] = s / chol[i * k + i];
    }
}

/// Dense SPD solve used for small subsystems (e.g. L_FF blocks).
/// Rows are eliminated in ascending diagonal order: with conductances
/// spanning many orders of magnitude, eliminating heavy vertices into
/// light ones cancels catastrophically, while the reverse order is benign.
#[derive(Debug, Clone)]
pub struct DenseChol {
    pub k: usize,
    chol: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseChol {
    pub fn new(a: Vec<f64>, k: usize) -> Result<Self> {
        let mut perm: Vec<usize> = (0..k).collect();
        perm.sort_by(|&i, &j| {
            a[i * k + i]
                .partial_cmp(&a[j * k + j])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(i.cmp(&j))
        });
        let mut pa = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                pa[i * k + j] = a[perm[i] * k + perm[j]];
            }
        }
        cholesky_in_place(&mut pa, k)?;
        Ok(DenseChol { k, chol: pa, perm })
    }

    pub fn solve_in_place(&self, y: &mut [f64]) {
        let k = self.k;
        let mut py: Vec<f64> = (0..k).map(|i| y[self.perm[i]]).collect();
        chol_solve(&self.chol, k, &mut py);
        for i in 0..k {
            y[self.perm[i]] = py[i];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = b.to_vec();
        self.solve_in_place(&mut y);
        y
    }
}

/// Energy of a potential embedding: `sum_e (B phi)_e^2 / r_e`.
pub fn potential_energy(lap: &Laplacian, phi: &[f64]) -> f64 {
    lap.edges
        .iter()
        .zip(&lap.r)
        .map(|(&(a, b), &re)| {
            let d = phi[a] - phi[b];
            d * d / re
        })
        .sum()
}

/// Energy to route a demand: `d^T L^+ d`. A non-balanced vector is
/// mean-shifted first, matching the definitional extension.
pub fn demand_energy(fact: &GroundedFactorization, d: &[f64]) -> Result<f64> {
    let n = fact.n();
    if d.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: d.len(),
        });
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let shifted: Vec<f64> = d.iter().map(|x| x - mean).collect();
    let phi = fact.solve(&shifted)?;
    Ok(shifted.iter().zip(&phi).map(|(x, y)| x * y).sum())
}

/// Effective resistance between the contractions of two disjoint vertex
/// sets. A single edge argument is treated as the set of its endpoints.
pub fn effective_resistance(lap: &Laplacian, x: &[usize], y: &[usize]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "effective resistance needs nonempty vertex sets".into(),
        ));
    }
    if x.iter().any(|v| y.contains(v)) {
        return Err(Error::InvalidArgument(
            "effective resistance sets must be disjoint".into(),
        ));
    }
    let (contracted, _map) = lap.contract(&[x, y]);
    let fact = contracted.factor()?;
    let mut d = vec![0.0; contracted.n];
    d[0] = 1.0;
    d[1] = -1.0;
    demand_energy(&fact, &d)
}

/// Schur complement of L onto C, as a dense |C| x |C| matrix in the order
/// given by `c`. For C = V this is L itself.
pub fn schur_complement(lap: &Laplacian, c: &[usize]) -> Result<Vec<f64>> {
    let n = lap.n;
    let k = c.len();
    if k == 0 {
        return Err(Error::InvalidArgument("empty terminal set".into()));
    }
    let mut in_c = vec![false; n];
    for &v in c {
        if v >= n {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
        }
        if in_c[v] {
            return Err(Error::InvalidArgument(format!("duplicate terminal {v}")));
        }
        in_c[v] = true;
    }
    let dense = lap.dense();
    if k == n {
        // Degenerate case: reorder L itself.
        let mut sc = vec![0.0; k * k];
        for (i, &v) in c.iter().enumerate() {
            for (j, &w) in c.iter().enumerate() {
                sc[i * k + j] = dense[v * n + w];
            }
        }
        return Ok(sc);
    }
    let f: Vec<usize> = (0..n).filter(|&v| !in_c[v]).collect();
    let nf = f.len();
    let mut lff = vec![0.0; nf * nf];
    for (i, &v) in f.iter().enumerate() {
        for (j, &w) in f.iter().enumerate() {
            lff[i * nf + j] = dense[v * n + w];
        }
    }
    let fact = DenseChol::new(lff, nf)?;
    let mut sc = vec![0.0; k * k];
    // Columns of L_FF^{-1} L_FC, one solve per terminal.
    for (j, &w) in c.iter().enumerate() {
        let mut col: Vec<f64> = f.iter().map(|&v| dense[v * n + w]).collect();
        fact.solve_in_place(&mut col);
        for (i, &v) in c.iter().enumerate() {
            let mut dot = 0.0;
            for (p, &vf) in f.iter().enumerate() {
                dot += dense[v * n + vf] * col[p];
            }
            sc[i * k + j] = dense[v * n + w] - dot;
        }
    }
    Ok(sc)
}

/// Grounded solver for a dense Laplacian-like matrix (symmetric, kernel =
/// constants): grounds the last coordinate, factors, and returns mean-zero
/// solutions with one refinement pass.
#[derive(Debug, Clone)]
pub struct GroundedDense {
    k: usize,
    pin: usize,
    chol: DenseChol,
    mat: Vec<f64>,
}

impl GroundedDense {
    pub fn new(mat: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 || mat.len() != k * k {
            return Err(Error::InvalidArgument("bad dense system".into()));
        }
        let pin = (0..k)
            .max_by(|&i, &j| {
                mat[i * k + i]
                    .partial_cmp(&mat[j * k + j])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(j.cmp(&i))
            })
            .unwrap_or(k - 1);
        let g = k - 1;
        let gidx = |v: usize| if v < pin { v } else { v - 1 };
        let mut a = vec![0.0; g * g];
        for i in 0..k {
            if i == pin {
                continue;
            }
            for j in 0..k {
                if j == pin {
                    continue;
                }
                a[gidx(i) * g + gidx(j)] = mat[i * k + j];
            }
        }
        let chol = DenseChol::new(a, g)?;
        Ok(GroundedDense { k, pin, chol, mat })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut y = vec![0.0; k];
        for i in 0..k {
            let mut s = 0.0;
            for j in 0..k {
                s += self.mat[i * k + j] * x[j];
            }
            y[i] = s;
        }
        y
    }

    fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let g = self.k - 1;
        let gidx = |v: usize| if v < self.pin { v } else { v - 1 };
        let mut y = vec![0.0; g];
        for v in 0..self.k {
            if v != self.pin {
                y[gidx(v)] = b[v];
            }
        }
        self.chol.solve_in_place(&mut y);
        let mut x = vec![0.0; self.k];
        for v in 0..self.k {
            if v != self.pin {
                x[v] = y[gidx(v)];
            }
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                got: b.len(),
            });
        }
        let norm1: f64 = b.iter().map(|x| x.abs()).sum();
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-7 * norm1.max(1.0) {
            return Err(Error::UnbalancedDemand { sum });
        }
        let mut x = self.solve_raw(b);
        let norm2 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm2 > 0.0 {
            for _ in 0..4 {
                let ax = self.apply(&x);
                let res: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
                let rnorm = res.iter().map(|v| v * v).sum::<f64>().sqrt();
                if rnorm <= SOLVE_TOL * norm2 {
                    break;
                }
                let corr = self.solve_raw(&res);
                for (xi, ci) in x.iter_mut().zip(&corr) {
                    *xi += ci;
                }
            }
        }
        let mean = x.iter().sum::<f64>() / self.k as f64;
        for v in &mut x {
            *v -= mean;
        }
        Ok(x)
    }
}

/// Reads a dense Laplacian matrix back into edge-list form (one edge per
/// negative off-diagonal entry). Used to solve Schur-complement systems
/// with the same grounded machinery as full Laplacians.
pub fn laplacian_from_dense(mat: &[f64], k: usize) -> Laplacian {
    let mut edges = Vec::new();
    let mut r = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let w = -0.5 * (mat[i * k + j] + mat[j * k + i]);
            if w > 1e-14 {
                edges.push((i, j));
                r.push(1.0 / w);
            }
        }
    }
    Laplacian::new(k, edges, r)
}

/// Johnson-Lindenstrauss sketch of effective resistances:
/// `R_eff(u,v) ~ ||Q 1_u - Q 1_v||_2^2` within a 1+eps factor w.h.p.
#[derive(Debug, Clone)]
pub struct ResistanceSketch {
    pub rows: Vec<Vec<f64>>,
    pub eps: f64,
}

/// Default row count: `4 ceil(log2 n) / eps^2`.
pub fn sketch_rows_default(n: usize, eps: f64) -> usize {
    let logn = (n.max(2) as f64).log2().ceil();
    ((4.0 * logn / (eps * eps)).ceil() as usize).max(1)
}

/// Builds the sketch by solving `L phi = B^T (g / sqrt r)` for random sign
/// vectors g scaled by 1/sqrt(k); each solution vector is one row of Q.
pub fn sketch_effective_resistances(
    lap: &Laplacian,
    eps: f64,
    rng: &mut RngStream,
) -> Result<ResistanceSketch> {
    sketch_effective_resistances_with_rows(lap, eps, sketch_rows_default(lap.n, eps), rng)
}

pub fn sketch_effective_resistances_with_rows(
    lap: &Laplacian,
    eps: f64,
    k: usize,
    rng: &mut RngStream,
) -> Result<ResistanceSketch> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidArgument("sketch eps must be in (0,1)".into()));
    }
    let fact = lap.factor()?;
    let scale = 1.0 / (k as f64).sqrt();
    let mut rows = Vec::with_capacity(k);
    for _ in 0..k {
        let mut d = vec![0.0; lap.n];
        for (e, &(a, b)) in lap.edges.iter().enumerate() {
            let g = rng.sign() * scale / lap.r[e].sqrt();
            d[a] += g;
            d[b] -= g;
        }
        rows.push(fact.solve(&d)?);
    }
    Ok(ResistanceSketch { rows, eps })
}

impl ResistanceSketch {
    pub fn query(&self, u: usize, v: usize) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let d = row[u] - row[v];
                d * d
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::random_connected_instance;

    fn path3() -> Laplacian {
        Laplacian::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0])
    }

    #[test]
    fn solve_single_edge() {
        let lap = Laplacian::new(2, vec![(0, 1)], vec![2.0]);
        let fact = lap.factor().unwrap();
        let phi = fact.solve(&[1.0, -1.0]).unwrap();
        assert!((phi[0] - 1.0).abs() < 1e-12);
        assert!((phi[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn solve_zero_rhs() {
        let lap = path3();
        let fact = lap.factor().unwrap();
        let phi = fact.solve(&[0.0, 0.0, 0.0]).unwrap();
        assert!(phi.iter().all(|&x| x.abs() < 1e-14));
    }

    #[test]
    fn solve_rejects_unbalanced() {
        let lap = path3();
        let fact = lap.factor().unwrap();
        assert!(matches!(
            fact.solve(&[1.0, 0.0, 0.0]),
            Err(Error::UnbalancedDemand { .. })
        ));
    }

    #[test]
    fn solve_detects_disconnected() {
        let lap = Laplacian::new(4, vec![(0, 1), (2, 3)], vec![1.0, 1.0]);
        assert!(matches!(lap.factor(), Err(Error::SingularLaplacian)));
    }

    #[test]
    fn solve_residual_on_random_graph() {
        let mut rng = RngStream::new(2, "linalg/residual");
        for _ in 0..5 {
            let inst = random_connected_instance(10, 22, 8, 6, &mut rng);
            let r: Vec<f64> = (0..inst.m()).map(|_| 0.1 + rng.next_f64() * 4.0).collect();
            let lap = Laplacian::from_instance(&inst, &r);
            let fact = lap.factor().unwrap();
            let mut b: Vec<f64> = (0..inst.n).map(|_| rng.next_f64() - 0.5).collect();
            let mean = b.iter().sum::<f64>() / b.len() as f64;
            for x in &mut b {
                *x -= mean;
            }
            let phi = fact.solve(&b).unwrap();
            let res = residual(&lap, &phi, &b);
            let rel = norm2(&res) / norm2(&b);
            assert!(rel <= 1e-10, "residual {rel}");
            assert!(phi.iter().sum::<f64>().abs() < 1e-9);
        }
    }

    fn norm2(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn energies_on_single_edge() {
        let lap = Laplacian::new(2, vec![(0, 1)], vec![2.0]);
        assert!((potential_energy(&lap, &[1.0, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(potential_energy(&lap, &[3.0, 3.0]), 0.0);
        let fact = lap.factor().unwrap();
        // Routing one unit across r=2 costs 2; the mean-shift extension
        // turns (1,0) into (0.5,-0.5) which costs 0.5.
        assert!((demand_energy(&fact, &[1.0, -1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!((demand_energy(&fact, &[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn demand_energy_matches_potential_energy_of_solution() {
        let mut rng = RngStream::new(9, "linalg/energy");
        let inst = random_connected_instance(9, 20, 5, 5, &mut rng);
        let r: Vec<f64> = (0..inst.m()).map(|_| 0.2 + rng.next_f64() * 3.0).collect();
        let lap = Laplacian::from_instance(&inst, &r);
        let fact = lap.factor().unwrap();
        let mut d: Vec<f64> = (0..inst.n).map(|_| rng.next_f64() - 0.5).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        for x in &mut d {
            *x -= mean;
        }
        let phi = fact.solve(&d).unwrap();
        let e1 = potential_energy(&lap, &phi);
        let e2 = demand_energy(&fact, &d).unwrap();
        assert!((e1 - e2).abs() <= 1e-9 * e1.max(1.0));
    }

    #[test]
    fn effective_resistance_series_and_parallel() {
        let series = Laplacian::new(3, vec![(0, 1), (1, 2)], vec![1.0, 3.0]);
        let r = effective_resistance(&series, &[0], &[2]).unwrap();
        assert!((r - 4.0).abs() < 1e-12);

        let parallel = Laplacian::new(2, vec![(0, 1), (0, 1)], vec![2.0, 2.0]);
        let r = effective_resistance(&parallel, &[0], &[1]).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn effective_resistance_triangle_demand() {
        // Unit triangle: parallel 1 and 2 gives 2/3 between any pair.
        let tri = Laplacian::new(3, vec![(0, 1), (1, 2), (2, 0)], vec![1.0; 3]);
        let fact = tri.factor().unwrap();
        let mut d = vec![0.0; 3];
        d[0] = 1.0;
        d[1] = -1.0;
        let e = demand_energy(&fact, &d).unwrap();
        assert!((e - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn effective_resistance_rejects_overlap() {
        let lap = path3();
        assert!(effective_resistance(&lap, &[0, 1], &[1]).is_err());
    }

    #[test]
    fn schur_of_path_is_series_edge() {
        let lap = path3();
        let sc = schur_complement(&lap, &[0, 2]).unwrap();
        // Series of two unit resistors: conductance 1/2.
        assert!((sc[0] - 0.5).abs() < 1e-12);
        assert!((sc[1] + 0.5).abs() < 1e-12);
        assert!((sc[2] + 0.5).abs() < 1e-12);
        assert!((sc[3] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn schur_with_all_terminals_is_l() {
        let lap = path3();
        let sc = schur_complement(&lap, &[0, 1, 2]).unwrap();
        assert_eq!(sc, lap.dense());
    }

    #[test]
    fn schur_is_laplacian_on_random_graphs() {
        let mut rng = RngStream::new(4, "linalg/schur");
        for _ in 0..5 {
            let inst = random_connected_instance(10, 24, 5, 5, &mut rng);
            let r: Vec<f64> = (0..inst.m()).map(|_| 0.2 + rng.next_f64() * 2.0).collect();
            let lap = Laplacian::from_instance(&inst, &r);
            let c: Vec<usize> = (0..inst.n).filter(|_| rng.next_f64() < 0.4).collect();
            if c.len() < 2 || c.len() == inst.n {
                continue;
            }
            let k = c.len();
            let sc = schur_complement(&lap, &c).unwrap();
            for i in 0..k {
                let row_sum: f64 = (0..k).map(|j| sc[i * k + j]).sum();
                assert!(row_sum.abs() < 1e-10, "row sum {row_sum}");
                for j in 0..k {
                    if i != j {
                        assert!(sc[i * k + j] <= 1e-10, "positive off-diagonal");
                    }
                    assert!((sc[i * k + j] - sc[j * k + i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn sketch_single_edge_and_series() {
        let mut ok = 0;
        for seed in 0..100u64 {
            let mut rng = RngStream::new(seed, "linalg/sketch");
            let lap = Laplacian::new(2, vec![(0, 1)], vec![2.0]);
            let sk = sketch_effective_resistances(&lap, 0.5, &mut rng).unwrap();
            let q = sk.query(0, 1);
            if q >= 2.0 / 1.5 && q <= 2.0 * 1.5 {
                ok += 1;
            }
            assert_eq!(sk.query(0, 0), 0.0);
        }
        assert!(ok >= 95, "only {ok}/100 sketches within tolerance");

        let mut rng = RngStream::new(1, "linalg/sketch-series");
        let series = Laplacian::new(3, vec![(0, 1), (1, 2)], vec![1.0, 3.0]);
        let sk = sketch_effective_resistances(&series, 0.3, &mut rng).unwrap();
        let q = sk.query(0, 2);
        assert!(q >= 4.0 / 1.4 && q <= 4.0 * 1.4, "series estimate {q}");
    }

    #[test]
    fn subadditivity_duality_monotonicity() {
        let mut rng = RngStream::new(8, "linalg/props");
        for _ in 0..20 {
            let inst = random_connected_instance(8, 16, 5, 5, &mut rng);
            let r: Vec<f64> = (0..inst.m()).map(|_| 0.3 + rng.next_f64() * 2.0).collect();
            let lap = Laplacian::from_instance(&inst, &r);
            let fact = lap.factor().unwrap();
            let rand_demand = |rng: &mut RngStream| {
                let mut d: Vec<f64> = (0..inst.n).map(|_| rng.next_f64() - 0.5).collect();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                for x in &mut d {
                    *x -= mean;
                }
                d
            };
            let x = rand_demand(&mut rng);
            let y = rand_demand(&mut rng);
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let exy = demand_energy(&fact, &xy).unwrap().sqrt();
            let ex = demand_energy(&fact, &x).unwrap().sqrt();
            let ey = demand_energy(&fact, &y).unwrap().sqrt();
            assert!(exy <= ex + ey + 1e-9, "subadditivity violated");

            // Duality: the optimal potential phi* = L^+ d / sqrt(E(d))
            // attains <d, phi> = sqrt(E(d)).
            let ed = demand_energy(&fact, &x).unwrap();
            if ed > 1e-12 {
                let phi = fact.solve(&x).unwrap();
                let scale = 1.0 / ed.sqrt();
                let attained: f64 = x.iter().zip(&phi).map(|(a, b)| a * b * scale).sum();
                assert!((attained - ed.sqrt()).abs() <= 1e-8 * ed.sqrt().max(1.0));
            }

            // Monotonicity under uniform shrinking r' <= alpha r.
            let alpha = 1.0 + rng.next_f64() * 3.0;
            let r2: Vec<f64> = r.iter().map(|&v| v / alpha).collect();
            let lap2 = Laplacian::new(inst.n, inst.edges.clone(), r2);
            let fact2 = lap2.factor().unwrap();
            let e2 = demand_energy(&fact2, &x).unwrap();
            assert!(e2 <= demand_energy(&fact, &x).unwrap() / alpha + 1e-9);
        }
    }

    #[test]
    fn cholesky_block_formula_reconstructs_pseudoinverse() {
        // L^+ applied through the block factorization (eliminate F, solve the
        // Schur complement on C, back-substitute) must match the grounded
        // solve.
        let mut rng = RngStream::new(12, "linalg/block");
        for _ in 0..5 {
            let inst = random_connected_instance(10, 20, 5, 5, &mut rng);
            let n = inst.n;
            let r: Vec<f64> = (0..inst.m()).map(|_| 0.3 + rng.next_f64() * 2.0).collect();
            let lap = Laplacian::from_instance(&inst, &r);
            let fact = lap.factor().unwrap();
            let c: Vec<usize> = (0..n).step_by(2).collect();
            let in_c: Vec<bool> = (0..n).map(|v| c.contains(&v)).collect();
            let f: Vec<usize> = (0..n).filter(|&v| !in_c[v]).collect();
            let dense = lap.dense();
            let nf = f.len();
            let mut lff = vec![0.0; nf * nf];
            for (i, &v) in f.iter().enumerate() {
                for (j, &w) in f.iter().enumerate() {
                    lff[i * nf + j] = dense[v * n + w];
                }
            }
            let ff = DenseChol::new(lff, nf).unwrap();
            let k = c.len();
            let sc = schur_complement(&lap, &c).unwrap();
            let sc_lap = laplacian_from_dense(&sc, k);
            let sc_fact = sc_lap.factor().unwrap();

            let mut b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
            let mean = b.iter().sum::<f64>() / n as f64;
            for x in &mut b {
                *x -= mean;
            }
            // Block route: y_F = L_FF^{-1} b_F ; rhs_C = b_C - L_CF y_F ;
            // x_C = SC^+ rhs_C ; x_F = y_F - L_FF^{-1} L_FC x_C.
            let bf: Vec<f64> = f.iter().map(|&v| b[v]).collect();
            let yf = ff.solve(&bf);
            let mut rhs_c: Vec<f64> = c.iter().map(|&v| b[v]).collect();
            for (i, &v) in c.iter().enumerate() {
                for (p, &w) in f.iter().enumerate() {
                    rhs_c[i] -= dense[v * n + w] * yf[p];
                }
            }
            let xc = sc_fact.solve(&rhs_c).unwrap();
            let mut lfc_xc = vec![0.0; nf];
            for (p, &w) in f.iter().enumerate() {
                for (i, &v) in c.iter().enumerate() {
                    lfc_xc[p] += dense[w * n + v] * xc[i];
                }
            }
            let corr = ff.solve(&lfc_xc);
            let mut x = vec![0.0; n];
            for (i, &v) in c.iter().enumerate() {
                x[v] = xc[i];
            }
            for (p, &w) in f.iter().enumerate() {
                x[w] = yf[p] - corr[p];
            }
            let mean = x.iter().sum::<f64>() / n as f64;
            for v in &mut x {
                *v -= mean;
            }
            let direct = fact.solve(&b).unwrap();
            let scale = norm2(&direct).max(1.0);
            for v in 0..n {
                assert!(
                    (x[v] - direct[v]).abs() <= 1e-8 * scale,
                    "block route deviates at {v}"
                );
            }
        }
    }

}
