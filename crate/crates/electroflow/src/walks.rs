//! Weighted random walks, hitting probabilities, congestion reduction
//! subsets, and the precomputed walk pool consumed by the demand projectors.

use crate::error::{Error, Result};
use crate::linalg::Laplacian;
use crate::projection::exact_projection;
use crate::rng::RngStream;

/// Hard cap on the length of a single walk; exceeding it means the target
/// set is unreachable (or the graph is pathological) and we fail loudly
/// instead of hanging.
pub const WALK_STEP_CAP: usize = 10_000_000;

/// Adjacency structure for walk simulation: for each vertex, incident edges
/// with cumulative conductance for inverse-resistance transition sampling.
#[derive(Debug, Clone)]
pub struct WalkGraph {
    pub n: usize,
    /// (neighbor, edge id) per incidence.
    adj: Vec<Vec<(usize, usize)>>,
    /// Cumulative conductances aligned with `adj`.
    cum: Vec<Vec<f64>>,
}

impl WalkGraph {
    pub fn new(n: usize, edges: &[(usize, usize)], r: &[f64]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (e, &(a, b)) in edges.iter().enumerate() {
            if a != b {
                adj[a].push((b, e));
                adj[b].push((a, e));
            }
        }
        let cum = adj
            .iter()
            .map(|list| {
                let mut acc = 0.0;
                list.iter()
                    .map(|&(_, e)| {
                        acc += 1.0 / r[e];
                        acc
                    })
                    .collect()
            })
            .collect();
        WalkGraph { n, adj, cum }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// One step from `v`, choosing each incident edge with probability
    /// proportional to its conductance 1/r.
    pub fn step(&self, v: usize, rng: &mut RngStream) -> Option<usize> {
        let cum = &self.cum[v];
        let total = *cum.last()?;
        let t = rng.next_f64() * total;
        let idx = cum.partition_point(|&x| x <= t).min(cum.len() - 1);
        Some(self.adj[v][idx].0)
    }
}

/// Walk from `u` to its first hit in `C` (inclusive of both endpoints).
/// A start inside C yields the trivial walk [u].
pub fn sample_walk(
    g: &WalkGraph,
    u: usize,
    in_c: &[bool],
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    sample_walk_capped(g, u, in_c, rng, WALK_STEP_CAP)
}

pub fn sample_walk_capped(
    g: &WalkGraph,
    u: usize,
    in_c: &[bool],
    rng: &mut RngStream,
    cap: usize,
) -> Result<Vec<usize>> {
    let mut walk = vec![u];
    if in_c[u] {
        return Ok(walk);
    }
    let mut v = u;
    for _ in 0..cap {
        let Some(w) = g.step(v, rng) else {
            return Err(Error::WalkCapExceeded { cap });
        };
        walk.push(w);
        if in_c[w] {
            return Ok(walk);
        }
        v = w;
    }
    Err(Error::WalkCapExceeded { cap })
}

/// Exact hitting distribution: `p_v^{C,r}(u)` for all v, via the projection
/// identity `p^C(u) = pi^C(1_u)`. Returns a full-length vector supported
/// on C.
pub fn hitting_probabilities_exact(lap: &Laplacian, c: &[usize], u: usize) -> Result<Vec<f64>> {
    let mut d = vec![0.0; lap.n];
    d[u] = 1.0;
    exact_projection(lap, c, &d)
}

/// Tunable constants for subset construction and verification; the theory
/// leaves them inside soft-O's.
#[derive(Debug, Clone)]
pub struct CongestionConfig {
    /// Visit-load threshold is `load_const * beta^-2 * ln(n)^load_log_pow`.
    pub load_const: f64,
    pub load_log_pow: i32,
    /// Distinct-vertex budget for the hitting property is
    /// `hit_const * beta^-1 * ln n`.
    pub hit_const: f64,
    /// |C| is considered small enough if `|C| <= size_const * beta * m`.
    pub size_const: f64,
    /// Correction rounds in the construction loop.
    pub max_rounds: usize,
}

impl Default for CongestionConfig {
    fn default() -> Self {
        CongestionConfig {
            load_const: 4.0,
            load_log_pow: 2,
            hit_const: 4.0,
            size_const: 4.0,
            max_rounds: 8,
        }
    }
}

impl CongestionConfig {
    pub fn load_threshold(&self, beta: f64, n: usize) -> f64 {
        let ln = (n.max(3) as f64).ln();
        self.load_const * beta.powi(-2) * ln.powi(self.load_log_pow)
    }

    pub fn distinct_budget(&self, beta: f64, n: usize) -> usize {
        ((self.hit_const * (n.max(3) as f64).ln() / beta).ceil() as usize).max(2)
    }
}

#[derive(Debug, Clone)]
pub struct CongestionReductionSubset {
    pub verts: Vec<usize>,
    pub beta: f64,
    /// Edges whose endpoints seeded the subset (uniform sample).
    pub sampled_edges: Vec<usize>,
    /// Vertices added by the load-correction loop.
    pub corrected: Vec<usize>,
}

/// Builds a beta-congestion reduction subset: endpoints of ~beta*m uniformly
/// sampled edges, plus a correction loop that simulates deg(u) walks per
/// vertex and promotes any vertex absorbing more walk-prefix visits than the
/// load threshold.
pub fn build_congestion_reduction_subset(
    lap: &Laplacian,
    beta: f64,
    cfg: &CongestionConfig,
    rng: &mut RngStream,
) -> Result<CongestionReductionSubset> {
    let n = lap.n;
    let m = lap.m();
    if !(0.0..=1.0).contains(&beta) || beta <= 0.0 {
        return Err(Error::InvalidArgument("beta must be in (0,1]".into()));
    }
    // The degenerate full subset: every vertex is a terminal and no walk
    // machinery is needed at all.
    if beta >= 0.999 {
        return Ok(CongestionReductionSubset {
            verts: (0..n).collect(),
            beta,
            sampled_edges: (0..m).collect(),
            corrected: Vec::new(),
        });
    }
    let k = ((beta * m as f64).ceil() as usize).max(1);
    if k > m {
        return Err(Error::InvalidArgument("beta m exceeds edge count".into()));
    }
    let mut in_c = vec![false; n];
    let mut verts = Vec::new();
    let mut sampled = Vec::with_capacity(k);
    for _ in 0..k {
        let e = rng.gen_range(m);
        sampled.push(e);
        let (a, b) = lap.edges[e];
        for v in [a, b] {
            if !in_c[v] {
                in_c[v] = true;
                verts.push(v);
            }
        }
    }

    let g = WalkGraph::new(n, &lap.edges, &lap.r);
    let threshold = cfg.load_threshold(beta, n);
    let mut corrected = Vec::new();
    for _ in 0..cfg.max_rounds {
        if verts.len() == n {
            break;
        }
        let mut visits = vec![0usize; n];
        for u in 0..n {
            if in_c[u] {
                continue;
            }
            for _ in 0..g.degree(u) {
                let walk = sample_walk(&g, u, &in_c, rng)?;
                let mut seen = std::collections::HashSet::new();
                for &v in walk.iter().take(walk.len().saturating_sub(1)) {
                    if seen.insert(v) {
                        visits[v] += 1;
                    }
                }
            }
        }
        let mut offenders: Vec<usize> = (0..n)
            .filter(|&v| !in_c[v] && visits[v] as f64 > threshold)
            .collect();
        if offenders.is_empty() {
            break;
        }
        offenders.sort();
        for v in offenders {
            in_c[v] = true;
            verts.push(v);
            corrected.push(v);
        }
    }
    Ok(CongestionReductionSubset {
        verts,
        beta,
        sampled_edges: sampled,
        corrected,
    })
}

#[derive(Debug, Clone)]
pub struct CongestionReport {
    pub subset_size: usize,
    pub size_bound: f64,
    pub size_ok: bool,
    /// Fraction of sampled walks that failed to hit C within the
    /// distinct-vertex budget.
    pub hitting_miss_fraction: f64,
    pub hitting_ok: bool,
    /// Max over sampled v of sum_u deg(u) p_v^{C+v}(u), computed exactly.
    pub max_visit_load: f64,
    pub load_threshold: f64,
    pub load_ok: bool,
}

impl CongestionReport {
    pub fn all_ok(&self) -> bool {
        self.size_ok && self.hitting_ok && self.load_ok
    }
}

/// Verifies the three defining properties of a congestion reduction subset.
/// Used by tests; the solver itself never needs it.
pub fn check_congestion_reduction(
    lap: &Laplacian,
    c: &[usize],
    beta: f64,
    cfg: &CongestionConfig,
    walk_samples: usize,
    rng: &mut RngStream,
) -> Result<CongestionReport> {
    let n = lap.n;
    let m = lap.m();
    let mut in_c = vec![false; n];
    for &v in c {
        in_c[v] = true;
    }
    let size_bound = cfg.size_const * beta * m as f64;
    let size_ok = (c.len() as f64) <= size_bound.max(2.0);

    // Hitting property by Monte Carlo: walks from random starts must reach C
    // before visiting more than `budget` distinct vertices.
    let g = WalkGraph::new(n, &lap.edges, &lap.r);
    let budget = cfg.distinct_budget(beta, n);
    let mut misses = 0usize;
    for _ in 0..walk_samples {
        let u = rng.gen_range(n);
        if in_c[u] {
            continue;
        }
        let mut distinct = std::collections::HashSet::new();
        distinct.insert(u);
        let mut v = u;
        let mut hit = false;
        // The distinct-vertex budget bounds the walk even when C is empty.
        for _ in 0..WALK_STEP_CAP {
            match g.step(v, rng) {
                Some(w) => {
                    if in_c[w] {
                        hit = true;
                        break;
                    }
                    distinct.insert(w);
                    if distinct.len() > budget {
                        break;
                    }
                    v = w;
                }
                None => break,
            }
        }
        if !hit {
            misses += 1;
        }
    }
    let hitting_miss_fraction = misses as f64 / walk_samples.max(1) as f64;
    let hitting_ok = hitting_miss_fraction <= 0.05;

    // Visit-load property, exactly: sum_u deg(u) p_v^{C+v}(u) equals the
    // v-entry of the projection of the degree vector onto C+v.
    let deg: Vec<f64> = (0..n).map(|v| g.degree(v) as f64).collect();
    let threshold = cfg.load_threshold(beta, n);
    let mut max_load: f64 = 0.0;
    for v in 0..n {
        if in_c[v] {
            continue;
        }
        let mut cv: Vec<usize> = c.to_vec();
        cv.push(v);
        cv.sort_unstable();
        let proj = exact_projection(lap, &cv, &deg)?;
        max_load = max_load.max(proj[v]);
    }
    let load_ok = max_load <= threshold;

    Ok(CongestionReport {
        subset_size: c.len(),
        size_bound,
        size_ok,
        hitting_miss_fraction,
        hitting_ok,
        max_visit_load: max_load,
        load_threshold: threshold,
        load_ok,
    })
}

/// Reference to a pool walk passing through a queried vertex.
#[derive(Debug, Clone, Copy)]
pub struct WalkHit {
    pub walk: u32,
    pub pos: u32,
}

/// Precomputed independent random walks from each endpoint of each
/// off-subset edge to C, with a first-occurrence index per vertex so that
/// shortcutting on terminal insertion is O(1) per affected walk.
///
/// Walk payloads are immutable; truncation state lives in `eff_len`, so the
/// pool is shared by all demand projectors of one locator.
#[derive(Debug, Clone)]
pub struct WalkPool {
    pub h: usize,
    /// walk id -> (source vertex, source edge).
    starts: Vec<(u32, u32)>,
    offsets: Vec<u32>,
    steps: Vec<u32>,
    eff_len: Vec<u32>,
    /// vertex -> (walk, first position) pairs.
    index: Vec<Vec<(u32, u32)>>,
}

impl WalkPool {
    /// Builds `h` walks for each (endpoint, edge) pair over edges outside
    /// E(C). `max_steps` caps total memory; exceeding it is a hard error
    /// reporting the shortfall.
    pub fn build(
        g: &WalkGraph,
        in_c: &[bool],
        edges: &[(usize, usize)],
        h: usize,
        max_steps: usize,
        rng: &mut RngStream,
    ) -> Result<WalkPool> {
        Self::build_capped(g, in_c, edges, h, max_steps, WALK_STEP_CAP, rng)
    }

    /// Pool construction with an explicit per-walk step cap. Callers that
    /// can recover from absorbing pockets (by growing the terminal set)
    /// pass a small cap so pathologies are detected quickly.
    pub fn build_capped(
        g: &WalkGraph,
        in_c: &[bool],
        edges: &[(usize, usize)],
        h: usize,
        max_steps: usize,
        per_walk_cap: usize,
        rng: &mut RngStream,
    ) -> Result<WalkPool> {
        let mut starts = Vec::new();
        let mut offsets = vec![0u32];
        let mut steps: Vec<u32> = Vec::new();
        let mut index = vec![Vec::new(); g.n];
        for (e, &(a, b)) in edges.iter().enumerate() {
            if in_c[a] && in_c[b] {
                continue;
            }
            for u in [a, b] {
                if in_c[u] {
                    continue;
                }
                for i in 0..h {
                    let mut wrng = rng.derive_idx("pool-walk", ((e as u64) << 24) ^ ((u as u64) << 1) ^ i as u64);
                    let walk = sample_walk_capped(g, u, in_c, &mut wrng, per_walk_cap)?;
                    if steps.len() + walk.len() > max_steps {
                        return Err(Error::Resource {
                            what: "walk pool steps".into(),
                            required: steps.len() + walk.len(),
                            available: max_steps,
                        });
                    }
                    let id = starts.len() as u32;
                    starts.push((u as u32, e as u32));
                    let mut seen = std::collections::HashSet::new();
                    for (pos, &v) in walk.iter().enumerate() {
                        steps.push(v as u32);
                        if seen.insert(v) {
                            index[v].push((id, pos as u32));
                        }
                    }
                    offsets.push(steps.len() as u32);
                }
            }
        }
        let eff_len = (0..starts.len())
            .map(|w| offsets[w + 1] - offsets[w])
            .collect();
        Ok(WalkPool {
            h,
            starts,
            offsets,
            steps,
            eff_len,
            index,
        })
    }

    pub fn walk_count(&self) -> usize {
        self.starts.len()
    }

    pub fn source(&self, walk: u32) -> (usize, usize) {
        let (u, e) = self.starts[walk as usize];
        (u as usize, e as usize)
    }

    /// Current endpoint of a (possibly truncated) walk.
    pub fn endpoint(&self, walk: u32) -> usize {
        let w = walk as usize;
        self.steps[(self.offsets[w] + self.eff_len[w] - 1) as usize] as usize
    }

    pub fn walk_vertices(&self, walk: u32) -> &[u32] {
        let w = walk as usize;
        &self.steps[self.offsets[w] as usize..(self.offsets[w] + self.eff_len[w]) as usize]
    }

    /// Walks whose live portion passes through `v`.
    pub fn collect_hits(&self, v: usize) -> Vec<WalkHit> {
        self.index[v]
            .iter()
            .filter(|&&(w, pos)| pos < self.eff_len[w as usize])
            .map(|&(walk, pos)| WalkHit { walk, pos })
            .collect()
    }

    /// Truncates every live walk at its first occurrence of `v`, making `v`
    /// an absorbing endpoint. Idempotent; commutes across distinct vertices.
    pub fn shortcut(&mut self, v: usize) {
        for &(w, pos) in &self.index[v] {
            let wl = &mut self.eff_len[w as usize];
            if pos + 1 < *wl {
                *wl = pos + 1;
            }
        }
    }

    /// Spills the pool in a length-prefixed little-endian binary format:
    /// magic "EFWPOOL1", then u64 vertex count, u64 h, u64 walk count,
    /// then per walk: u32 source vertex, u32 source edge, u32 stored
    /// length, u32 live length, and the vertex sequence as u32s.
    pub fn write_to<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"EFWPOOL1")?;
        w.write_all(&(self.index.len() as u64).to_le_bytes())?;
        w.write_all(&(self.h as u64).to_le_bytes())?;
        w.write_all(&(self.walk_count() as u64).to_le_bytes())?;
        for walk in 0..self.walk_count() {
            let (u, e) = self.starts[walk];
            let lo = self.offsets[walk] as usize;
            let hi = self.offsets[walk + 1] as usize;
            w.write_all(&u.to_le_bytes())?;
            w.write_all(&e.to_le_bytes())?;
            w.write_all(&((hi - lo) as u32).to_le_bytes())?;
            w.write_all(&self.eff_len[walk].to_le_bytes())?;
            for &v in &self.steps[lo..hi] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a pool previously written by `write_to`, including its
    /// truncation state; the per-vertex index is rebuilt.
    pub fn read_from<R: std::io::Read>(mut rd: R) -> Result<WalkPool> {
        let mut magic = [0u8; 8];
        rd.read_exact(&mut magic)?;
        if &magic != b"EFWPOOL1" {
            return Err(Error::Parse {
                line: 0,
                msg: "bad walk pool magic".into(),
            });
        }
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |rd: &mut R| -> Result<u64> {
            rd.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let n = read_u64(&mut rd)? as usize;
        let h = read_u64(&mut rd)? as usize;
        let count = read_u64(&mut rd)? as usize;
        let read_u32 = |rd: &mut R| -> Result<u32> {
            let mut b = [0u8; 4];
            rd.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        };
        let mut starts = Vec::with_capacity(count);
        let mut offsets = vec![0u32];
        let mut steps = Vec::new();
        let mut eff_len = Vec::with_capacity(count);
        let mut index = vec![Vec::new(); n];
        for walk in 0..count {
            let u = read_u32(&mut rd)?;
            let e = read_u32(&mut rd)?;
            let len = read_u32(&mut rd)? as usize;
            let live = read_u32(&mut rd)?;
            if live as usize > len || len == 0 {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!("walk {walk} has inconsistent lengths"),
                });
            }
            starts.push((u, e));
            eff_len.push(live);
            let mut seen = std::collections::HashSet::new();
            for pos in 0..len {
                let v = read_u32(&mut rd)?;
                if v as usize >= n {
                    return Err(Error::Parse {
                        line: 0,
                        msg: format!("walk {walk} leaves the vertex range"),
                    });
                }
                steps.push(v);
                if seen.insert(v) {
                    index[v as usize].push((walk as u32, pos as u32));
                }
            }
            offsets.push(steps.len() as u32);
        }
        Ok(WalkPool {
            h,
            starts,
            offsets,
            steps,
            eff_len,
            index,
        })
    }
}
