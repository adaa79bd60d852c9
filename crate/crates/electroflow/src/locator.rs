//! The congested-edge locator: maintains sketch-side demand projections,
//! an exact snapshot projection `pi_old`, the important-edge set, and a
//! dynamic Schur complement, and detects edges whose electrical-flow step
//! congestion exceeds the configured threshold.

use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use crate::linalg::{GroundedDense, Laplacian};
use crate::projection::{
    estimate_pi_c_of_point_capped, estimate_pi_v, DemandProjector,
    EstimatorConfig, EstimatorParams,
};

/// Per-walk step cap inside the locator. Walks that exceed it indicate an
/// absorbing pocket the terminal set does not cover; the caller recovers by
/// re-initializing with a denser subset.
pub const POOL_WALK_CAP: usize = 200_000;
use crate::rng::RngStream;
use crate::schur::SchurState;
use crate::sketch::{make_sketch, HeavyHitterSketch};
use crate::walks::{CongestionConfig, WalkGraph, WalkPool};

#[derive(Debug, Clone)]
pub struct LocatorConfig {
    /// Resistance window: updates must keep `r_max/alpha <= r <= alpha r_min`
    /// relative to the values since the last batch update.
    pub alpha: f64,
    /// Congestion-reduction subset density.
    pub beta: f64,
    /// Congestion detection threshold.
    pub eps: f64,
    /// Per-insertion demand-projection error.
    pub eps_hat: f64,
    pub est: EstimatorConfig,
    pub cong: CongestionConfig,
    /// Touched-edge budget is `max(32, budget_const * beta * m)`.
    pub budget_const: f64,
    /// |Z| cap is `recover_cap_const / eps^2`.
    pub recover_cap_const: f64,
    pub pool_max_steps: usize,
}

impl Default for LocatorConfig {
    fn default() -> Self {
        LocatorConfig {
            alpha: 16.0,
            beta: 0.3,
            eps: 0.1,
            eps_hat: 0.05,
            est: EstimatorConfig::default(),
            cong: CongestionConfig::default(),
            budget_const: 64.0,
            recover_cap_const: 64.0,
            pool_max_steps: 200_000_000,
        }
    }
}

/// Important-edge selection: an edge is kept when its estimated resistive
/// distance to C is at most `r_e (2 alpha / eps)^2`. With estimates within a
/// factor 4 this sandwiches S between the (eps/alpha)- and
/// (eps/(4 alpha))-important sets; edges inside E(C) always qualify.
pub fn important_edges(
    edges: &[(usize, usize)],
    r: &[f64],
    in_c: &[bool],
    reff_to_c: &[f64],
    eps: f64,
    alpha: f64,
) -> Vec<bool> {
    let thresh_factor = (2.0 * alpha / eps) * (2.0 * alpha / eps);
    edges
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| {
            // Contracting C against {a,b} gives distance zero as soon as an
            // endpoint is a terminal, so such edges always qualify; the
            // estimate min(R(C,a), R(C,b)) is within a factor 2 otherwise.
            if in_c[a] || in_c[b] {
                return true;
            }
            reff_to_c[a].min(reff_to_c[b]) <= r[e] * thresh_factor
        })
        .collect()
}

#[derive(Debug, Default, Clone)]
pub struct LocatorStats {
    pub solves: usize,
    pub updates: usize,
    pub batch_updates: usize,
    pub terminals_added: usize,
    pub self_batch_updates: usize,
}

pub struct Locator {
    pub cfg: LocatorConfig,
    n: usize,
    m: usize,
    edges: Vec<(usize, usize)>,
    cap: Vec<f64>,
    s_plus: Vec<f64>,
    s_minus: Vec<f64>,
    r: Vec<f64>,
    /// Per-edge extremes since the last batch update, for the alpha-window.
    r_min_win: Vec<f64>,
    r_max_win: Vec<f64>,
    delta: f64,
    gamma: f64,
    schur: SchurState,
    in_c: Vec<bool>,
    in_s: Vec<bool>,
    sketch: HeavyHitterSketch,
    dps: Vec<DemandProjector>,
    wg: WalkGraph,
    pool: WalkPool,
    params: EstimatorParams,
    pi_old: Vec<f64>,
    t_since_batch: usize,
    touched: usize,
    budget: usize,
    rng: RngStream,
    sc_solver: Option<(u64, GroundedDense)>,
    pub stats: LocatorStats,
}

impl Locator {
    /// Builds the full locator state from a strictly interior flow:
    /// congestion-reduction subset, dynamic Schur complement, sketch,
    /// important edges, walk pool, one demand projector per sketch row, and
    /// the exact snapshot projection.
    pub fn initialize(
        inst: &FlowInstance,
        f: &[f64],
        cfg: LocatorConfig,
        rng: &mut RngStream,
    ) -> Result<Locator> {
        let n = inst.n;
        let m = inst.m();
        if f.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: f.len(),
            });
        }
        let cap: Vec<f64> = inst.cap.iter().map(|&u| u as f64).collect();
        for e in 0..m {
            if !(f[e] > 0.0 && f[e] < cap[e]) {
                return Err(Error::InvalidArgument(format!(
                    "flow on edge {e} is not strictly inside its capacity"
                )));
            }
        }
        let s_plus: Vec<f64> = (0..m).map(|e| cap[e] - f[e]).collect();
        let s_minus: Vec<f64> = f.to_vec();
        let r: Vec<f64> = (0..m)
            .map(|e| 1.0 / (s_plus[e] * s_plus[e]) + 1.0 / (s_minus[e] * s_minus[e]))
            .collect();
        let lap = Laplacian::new(n, inst.edges.clone(), r.clone());
        let loc_rng = rng.derive("locator");
        let schur = SchurState::initialize_with_subset(
            &lap,
            &[],
            cfg.eps,
            cfg.beta,
            &cfg.cong,
            &mut loc_rng.derive("subset"),
        )?;
        let in_c = schur.terminal_mask().to_vec();
        let sketch = make_sketch(m, cfg.eps, &mut loc_rng.derive("sketch"))?;
        let gamma = cfg.eps / (4.0 * cfg.alpha);
        let params = EstimatorParams::from_eps_hat(cfg.eps_hat, cfg.beta, gamma, n, &cfg.est);
        let wg = WalkGraph::new(n, &inst.edges, &r);
        let pool = WalkPool::build_capped(
            &wg,
            &in_c,
            &inst.edges,
            params.pool_walks,
            cfg.pool_max_steps,
            POOL_WALK_CAP,
            &mut loc_rng.derive("pool"),
        )?;
        let budget = (cfg.budget_const * cfg.beta * m as f64).ceil().max(32.0) as usize;
        let delta = 1.0 / (m as f64).sqrt();
        let mut loc = Locator {
            cfg,
            n,
            m,
            edges: inst.edges.clone(),
            cap,
            s_plus,
            s_minus,
            r,
            r_min_win: Vec::new(),
            r_max_win: Vec::new(),
            delta,
            gamma,
            schur,
            in_c,
            in_s: Vec::new(),
            sketch,
            dps: Vec::new(),
            wg,
            pool,
            params,
            pi_old: Vec::new(),
            t_since_batch: 0,
            touched: 0,
            budget,
            rng: loc_rng,
            sc_solver: None,
            stats: LocatorStats::default(),
        };
        loc.refresh_snapshot()?;
        Ok(loc)
    }

    pub fn resistances(&self) -> &[f64] {
        &self.r
    }

    pub fn slacks(&self) -> (&[f64], &[f64]) {
        (&self.s_plus, &self.s_minus)
    }

    pub fn flow(&self) -> &[f64] {
        &self.s_minus
    }

    pub fn terminals(&self) -> &[usize] {
        self.schur.terminals()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn important(&self) -> &[bool] {
        &self.in_s
    }

    pub fn snapshot_projection(&self) -> &[f64] {
        &self.pi_old
    }

    pub fn updates_since_batch(&self) -> usize {
        self.t_since_batch
    }

    /// Whether a resistance value would respect the alpha-window for e.
    pub fn window_ok(&self, e: usize, r_new: f64) -> bool {
        r_new * self.cfg.alpha >= self.r_max_win[e]
            && r_new <= self.cfg.alpha * self.r_min_win[e]
    }

    pub fn window_ok_flow(&self, e: usize, f_e: f64) -> bool {
        let s_p = self.cap[e] - f_e;
        let s_m = f_e;
        if !(s_p > 0.0 && s_m > 0.0) {
            return false;
        }
        self.window_ok(e, 1.0 / (s_p * s_p) + 1.0 / (s_m * s_m))
    }

    /// Recomputes the important-edge set, re-initializes every projector
    /// exactly, recomputes `pi_old` from the current slacks, and resets the
    /// window snapshot and insertion counter.
    fn refresh_snapshot(&mut self) -> Result<()> {
        let lap = Laplacian::new(self.n, self.edges.clone(), self.r.clone());
        let reff = self.schur.reff_diagonal();
        self.in_s = important_edges(
            &self.edges,
            &self.r,
            &self.in_c,
            &reff,
            self.cfg.eps,
            self.cfg.alpha,
        );
        let c_sorted: Vec<usize> = {
            let mut c = self.schur.terminals().to_vec();
            c.sort_unstable();
            c
        };
        let ctx = crate::projection::ProjectionContext::new(&lap, &c_sorted)?;
        self.dps = (0..self.sketch.rows())
            .map(|i| {
                DemandProjector::initialize_with(&ctx, &lap, self.sketch.row(i), &self.in_s)
            })
            .collect::<Result<Vec<_>>>()?;
        // pi_old = delta * pi^C(B^T g(s)), exactly.
        let g: Vec<f64> = (0..self.m)
            .map(|e| (1.0 / self.s_plus[e] - 1.0 / self.s_minus[e]) / self.r[e])
            .collect();
        let mut btg = vec![0.0; self.n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            btg[a] += g[e];
            btg[b] -= g[e];
        }
        let mut pi = ctx.project(&lap, &btg)?;
        for x in &mut pi {
            *x *= self.delta;
        }
        self.pi_old = pi;
        self.r_min_win = self.r.clone();
        self.r_max_win = self.r.clone();
        self.t_since_batch = 0;
        Ok(())
    }

    fn charge_budget(&mut self, amount: usize) -> Result<()> {
        self.touched += amount;
        if self.touched > self.budget {
            return Err(Error::LocatorBudget {
                touched: self.touched,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Makes `v` a terminal: Schur insertion (returning the resistance
    /// estimate), demand-projector insertions off the shared pool scan and
    /// one shared fresh-walk hitting distribution, then the pool shortcut.
    fn add_terminal(&mut self, v: usize) -> Result<()> {
        if self.in_c[v] {
            return Ok(());
        }
        let r_tilde = self.schur.add_terminal(v)?;
        self.schur.commit()?;
        self.sc_solver = None;
        self.stats.terminals_added += 1;
        let hits = self.pool.collect_hits(v);
        let hitting = estimate_pi_c_of_point_capped(
            &self.wg,
            &self.in_c,
            v,
            self.params.fresh_walks,
            POOL_WALK_CAP,
            &mut self.rng,
        )?;
        for dp in &mut self.dps {
            let pi_v = estimate_pi_v(
                &hits,
                &self.pool,
                &self.edges,
                &dp.q,
                &self.in_s,
                &self.r,
                r_tilde,
                &self.params,
            );
            dp.apply_insertion(v, pi_v, &hitting);
        }
        self.pool.shortcut(v);
        self.in_c[v] = true;
        self.t_since_batch += 1;
        Ok(())
    }

    fn set_edge_flow(&mut self, e: usize, f_e: f64) -> Result<(f64, f64)> {
        if !(f_e > 0.0 && f_e < self.cap[e]) {
            return Err(Error::InvalidArgument(format!(
                "flow on edge {e} leaves the strict interior"
            )));
        }
        let s_p = self.cap[e] - f_e;
        let s_m = f_e;
        let r_new = 1.0 / (s_p * s_p) + 1.0 / (s_m * s_m);
        let r_old = self.r[e];
        self.s_plus[e] = s_p;
        self.s_minus[e] = s_m;
        self.r[e] = r_new;
        Ok((r_old, r_new))
    }

    /// Single-edge update: inserts missing endpoints as terminals, then
    /// propagates the resistance change exactly. Enforces the alpha-window
    /// and the touched-edge budget; self-triggers an empty batch update once
    /// the insertion counter exceeds `eps / (eps_hat sqrt(alpha))`.
    pub fn update(&mut self, e: usize, f_e: f64) -> Result<()> {
        self.charge_budget(1)?;
        self.stats.updates += 1;
        let (a, b) = self.edges[e];
        self.add_terminal(a)?;
        self.add_terminal(b)?;
        {
            let s_p = self.cap[e] - f_e;
            let s_m = f_e;
            if !(s_p > 0.0 && s_m > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "flow on edge {e} leaves the strict interior"
                )));
            }
            let r_new = 1.0 / (s_p * s_p) + 1.0 / (s_m * s_m);
            if !self.window_ok(e, r_new) {
                return Err(Error::Contract(format!(
                    "resistance window violated on edge {e}"
                )));
            }
        }
        let (r_old, r_new) = self.set_edge_flow(e, f_e)?;
        self.r_min_win[e] = self.r_min_win[e].min(r_new);
        self.r_max_win[e] = self.r_max_win[e].max(r_new);
        self.schur.update(e, r_new)?;
        self.schur.commit()?;
        self.sc_solver = None;
        for dp in &mut self.dps {
            dp.update(&self.edges, e, r_old, r_new, &self.in_s);
        }
        let trigger = (self.cfg.eps / (self.cfg.eps_hat * self.cfg.alpha.sqrt())).floor() as usize;
        if self.t_since_batch > trigger.max(1) {
            self.stats.self_batch_updates += 1;
            self.refresh_snapshot()?;
        }
        Ok(())
    }

    /// Refreshes S, the projectors, and `pi_old` without touching slacks;
    /// the driver calls this on its snapshot-expiry cadence and reactively
    /// under window pressure.
    pub fn batch_update_empty(&mut self) -> Result<()> {
        self.stats.batch_updates += 1;
        self.refresh_snapshot()
    }

    /// Batched update: applies the slack changes, inserts endpoints as
    /// terminals, then rebuilds S, all projectors, and `pi_old` exactly and
    /// resets the window snapshot.
    pub fn batch_update(&mut self, z: &[(usize, f64)]) -> Result<()> {
        self.charge_budget(z.len())?;
        self.stats.batch_updates += 1;
        for &(e, f_e) in z {
            let (a, b) = self.edges[e];
            for v in [a, b] {
                if !self.in_c[v] {
                    let _ = self.schur.add_terminal(v)?;
                    self.schur.commit()?;
                    self.pool.shortcut(v);
                    self.in_c[v] = true;
                    self.stats.terminals_added += 1;
                }
            }
            let (_, r_new) = self.set_edge_flow(e, f_e)?;
            self.schur.update(e, r_new)?;
            self.schur.commit()?;
        }
        self.sc_solver = None;
        self.refresh_snapshot()
    }

    /// Detects candidate congested edges of the current electrical step:
    /// solves the Schur system against `pi_old`, reads one inner product per
    /// sketch row off the demand projectors, and recovers heavy entries.
    pub fn solve(&mut self) -> Result<Vec<usize>> {
        self.stats.solves += 1;
        let version = self.schur.version();
        if self.sc_solver.as_ref().is_none_or(|(v, _)| *v != version) {
            let (order, sc) = self.schur.query();
            let k = order.len();
            let solver = GroundedDense::new(sc.to_vec(), k)?;
            self.sc_solver = Some((version, solver));
        }
        let order = self.schur.query().0.to_vec();
        let solver = &self.sc_solver.as_ref().unwrap().1;
        let mut rhs: Vec<f64> = order.iter().map(|&v| self.pi_old[v]).collect();
        // The snapshot projection is balanced; clear rounding dust so the
        // grounded solve accepts it.
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        for x in &mut rhs {
            *x -= mean;
        }
        let phi_old = solver.solve(&rhs)?;
        // Local step component delta sqrt(r) g(s): negligible
        // asymptotically but comparable to eps at desk sizes, so it is
        // measured exactly rather than dropped.
        let local: Vec<f64> = (0..self.m)
            .map(|e| {
                if self.in_s[e] {
                    self.delta * (1.0 / self.s_plus[e] - 1.0 / self.s_minus[e])
                        / self.r[e].sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let mut v = self.sketch.measure(&local);
        for (i, dp) in self.dps.iter().enumerate() {
            let pi = dp.output();
            let mut acc = 0.0;
            for (j, &vert) in order.iter().enumerate() {
                acc += pi[vert] * phi_old[j];
            }
            v[i] -= acc;
        }
        let cap = (self.cfg.recover_cap_const / (self.cfg.eps * self.cfg.eps)).floor() as usize;
        Ok(self.sketch.recover(&v, self.cfg.eps / 100.0, cap.max(1)))
    }
}
