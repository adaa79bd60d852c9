//! Central-path machinery: initialization, centrality residuals, Newton
//! steps, recentering, the batched multi-step routine driven by the locator
//! and checker, the end-to-end solver, and final rounding to an integral
//! optimal flow.

use crate::checker::{Checker, CheckerConfig};
use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use crate::linalg::Laplacian;
use crate::locator::{Locator, LocatorConfig};
use crate::projection::EstimatorConfig;
use crate::rng::RngStream;
use crate::walks::CongestionConfig;

/// A flow together with its path parameter and derived slacks/resistances.
#[derive(Debug, Clone)]
pub struct CentralState {
    pub f: Vec<f64>,
    pub mu: f64,
    pub s_plus: Vec<f64>,
    pub s_minus: Vec<f64>,
    pub r: Vec<f64>,
}

impl CentralState {
    pub fn new(inst: &FlowInstance, f: Vec<f64>, mu: f64) -> Result<CentralState> {
        let m = inst.m();
        if f.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: f.len(),
            });
        }
        let mut s_plus = vec![0.0; m];
        let mut s_minus = vec![0.0; m];
        let mut r = vec![0.0; m];
        for e in 0..m {
            let u = inst.cap[e] as f64;
            if !(f[e] > 0.0 && f[e] < u) {
                return Err(Error::InvalidArgument(format!(
                    "flow on edge {e} is not strictly inside (0, u)"
                )));
            }
            s_plus[e] = u - f[e];
            s_minus[e] = f[e];
            r[e] = 1.0 / (s_plus[e] * s_plus[e]) + 1.0 / (s_minus[e] * s_minus[e]);
        }
        Ok(CentralState {
            f,
            mu,
            s_plus,
            s_minus,
            r,
        })
    }
}

/// `g(s) = (1/s+ - 1/s-) / r` with `r = 1/(s+)^2 + 1/(s-)^2`.
pub fn g_of_s(s_plus: &[f64], s_minus: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = s_plus.len();
    let mut r = vec![0.0; m];
    let mut g = vec![0.0; m];
    for e in 0..m {
        r[e] = 1.0 / (s_plus[e] * s_plus[e]) + 1.0 / (s_minus[e] * s_minus[e]);
        g[e] = (1.0 / s_plus[e] - 1.0 / s_minus[e]) / r[e];
    }
    (r, g)
}

/// Scaled centrality residual components
/// `omega_e = (c_e/mu + 1/s+ - 1/s-) / sqrt(r_e)`, computed term by term so
/// no catastrophic cancellation occurs even at tiny mu.
fn residual_omega(inst: &FlowInstance, state: &CentralState) -> Vec<f64> {
    (0..inst.m())
        .map(|e| {
            let sq = state.r[e].sqrt();
            inst.cost[e] as f64 / (state.mu * sq) + 1.0 / (state.s_plus[e] * sq)
                - 1.0 / (state.s_minus[e] * sq)
        })
        .collect()
}

/// Centrality residual in the circulation-space norm, evaluated through the
/// Laplacian projection identity as the explicit projected vector
/// `omega - R^{-1/2} B phi` with `L phi = B^T (omega / sqrt r)`. The
/// entrywise difference form avoids the catastrophic cancellation the
/// quadratic form `|omega|^2 - q^T L^+ q` suffers near centrality. One
/// Laplacian solve; always >= 0.
pub fn residual_norm(inst: &FlowInstance, state: &CentralState) -> Result<f64> {
    let omega = residual_omega(inst, state);
    let lap = Laplacian::from_instance(inst, &state.r);
    let fact = lap.factor()?;
    let scaled: Vec<f64> = (0..inst.m())
        .map(|e| omega[e] / state.r[e].sqrt())
        .collect();
    let q = inst.incidence_transpose_apply(&scaled)?;
    let phi = fact.solve(&q)?;
    let bphi = inst.incidence_apply(&phi)?;
    Ok((0..inst.m())
        .map(|e| {
            let d = omega[e] - bphi[e] / state.r[e].sqrt();
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// The electrical step `f* = delta g(s) - delta R^{-1} B L^+ B^T g(s)`,
/// a circulation with energy at most 1.
pub fn newton_step(inst: &FlowInstance, state: &CentralState) -> Result<Vec<f64>> {
    let m = inst.m();
    let delta = 1.0 / (m as f64).sqrt();
    let (_, g) = g_of_s(&state.s_plus, &state.s_minus);
    let lap = Laplacian::from_instance(inst, &state.r);
    let fact = lap.factor()?;
    let btg = inst.incidence_transpose_apply(&g)?;
    let phi = fact.solve(&btg)?;
    let bphi = inst.incidence_apply(&phi)?;
    Ok((0..m)
        .map(|e| delta * g[e] - delta * bphi[e] / state.r[e])
        .collect())
}

pub const RECENTER_TOL: f64 = 1e-12;
/// Measured residuals lose meaning below a conditioning-dependent floor
/// once resistances span many orders of magnitude; a backtracking stall
/// underneath the caller's floor counts as converged. Path tracing uses
/// this strict default; the solver driver passes `eps_solve/32`, far below
/// the slack accuracy the multi-step analysis consumes.
pub const RECENTER_STALL_FLOOR: f64 = 1e-8;
const RECENTER_MAX_ITERS: usize = 100;

#[derive(Debug, Default, Clone, Copy)]
pub struct RecenterStats {
    pub iterations: usize,
    pub final_residual: f64,
}

/// Damped Newton recentering at fixed mu: repairs any divergence error by
/// routing it electrically (batched steps zero out unchecked edges, so
/// their input only conserves approximately), then iterates the exact
/// Newton direction with backtracking on the residual norm until the
/// residual drops below 1e-12. The caller promises slacks multiplicatively
/// close to the central ones; non-convergence within 100 iterations signals
/// a violated precondition.
pub fn recenter(inst: &FlowInstance, f: &[f64], mu: f64) -> Result<(CentralState, RecenterStats)> {
    recenter_with_floor(inst, f, mu, RECENTER_STALL_FLOOR)
}

pub fn recenter_with_floor(
    inst: &FlowInstance,
    f: &[f64],
    mu: f64,
    stall_floor: f64,
) -> Result<(CentralState, RecenterStats)> {
    let m = inst.m();
    let mut state = CentralState::new(inst, f.to_vec(), mu)?;
    let demand: Vec<f64> = inst.demand.iter().map(|&d| d as f64).collect();
    let demand_scale = demand.iter().map(|x| x.abs()).fold(1.0, f64::max);
    for _repair in 0..25 {
        let div = inst.incidence_transpose_apply(&state.f)?;
        let err: Vec<f64> = demand.iter().zip(&div).map(|(d, x)| d - x).collect();
        let worst = err.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if worst <= 1e-11 * demand_scale {
            break;
        }
        let lap = Laplacian::from_instance(inst, &state.r);
        let fact = lap.factor()?;
        let phi = fact.solve(&err)?;
        let bphi = inst.incidence_apply(&phi)?;
        let dir: Vec<f64> = (0..m).map(|e| bphi[e] / state.r[e]).collect();
        let mut t_max = f64::INFINITY;
        for e in 0..m {
            if dir[e] > 0.0 {
                t_max = t_max.min(state.s_plus[e] / dir[e]);
            } else if dir[e] < 0.0 {
                t_max = t_max.min(-state.s_minus[e] / dir[e]);
            }
        }
        let t = (0.9 * t_max).min(1.0);
        if !(t > 0.0) {
            return Err(Error::Centrality {
                iters: 0,
                residual: worst,
            });
        }
        let cand: Vec<f64> = (0..m).map(|e| state.f[e] + t * dir[e]).collect();
        state = CentralState::new(inst, cand, mu)?;
        if t == 1.0 {
            // One full electrical step routes the residual demand exactly.
            continue;
        }
    }
    {
        let div = inst.incidence_transpose_apply(&state.f)?;
        let worst = demand
            .iter()
            .zip(&div)
            .map(|(d, x)| (d - x).abs())
            .fold(0.0, f64::max);
        if worst > 1e-9 * demand_scale {
            return Err(Error::Centrality {
                iters: 0,
                residual: worst,
            });
        }
    }
    let mut resid = residual_norm(inst, &state)?;
    let mut stats = RecenterStats {
        iterations: 0,
        final_residual: resid,
    };
    for iter in 0..RECENTER_MAX_ITERS {
        if resid <= RECENTER_TOL {
            stats.iterations = iter;
            stats.final_residual = resid;
            return Ok((state, stats));
        }
        let omega = residual_omega(inst, &state);
        let lap = Laplacian::from_instance(inst, &state.r);
        let fact = lap.factor()?;
        let scaled: Vec<f64> = (0..m).map(|e| omega[e] / state.r[e].sqrt()).collect();
        let q = inst.incidence_transpose_apply(&scaled)?;
        let phi = fact.solve(&q)?;
        let bphi = inst.incidence_apply(&phi)?;
        let dir: Vec<f64> = (0..m)
            .map(|e| -omega[e] / state.r[e].sqrt() + bphi[e] / state.r[e])
            .collect();
        // Largest feasible step along the direction, with a safety margin.
        let mut t_max = f64::INFINITY;
        for e in 0..m {
            if dir[e] > 0.0 {
                t_max = t_max.min(state.s_plus[e] / dir[e]);
            } else if dir[e] < 0.0 {
                t_max = t_max.min(-state.s_minus[e] / dir[e]);
            }
        }
        let mut t = (0.99 * t_max).min(1.0);
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<f64> = (0..m).map(|e| state.f[e] + t * dir[e]).collect();
            let ok = cand
                .iter()
                .enumerate()
                .all(|(e, &fe)| fe > 0.0 && fe < inst.cap[e] as f64);
            if ok {
                let cand_state = CentralState::new(inst, cand, mu)?;
                let cand_resid = residual_norm(inst, &cand_state)?;
                if cand_resid < resid {
                    state = cand_state;
                    resid = cand_resid;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            if std::env::var("ELECTROFLOW_DEBUG_RECENTER").is_ok() {
                let smin = state
                    .s_plus
                    .iter()
                    .chain(&state.s_minus)
                    .fold(f64::INFINITY, |a, &b| a.min(b));
                let rmax = state.r.iter().fold(0.0f64, |a, &b| a.max(b));
                let rmin = state.r.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                eprintln!(
                    "recenter stall: iter={} resid={:.3e} mu={:.3e} smin={:.3e} rratio={:.3e}",
                    iter, resid, mu, smin, rmax / rmin
                );
            }
            // Backtracking stalls once the measured residual reaches the
            // floating-point floor of the residual evaluation; below the
            // caller's floor the state is central for its purposes.
            if resid <= stall_floor {
                stats.iterations = iter + 1;
                stats.final_residual = resid;
                return Ok((state, stats));
            }
            return Err(Error::Centrality {
                iters: iter + 1,
                residual: resid,
            });
        }
    }
    if resid <= stall_floor {
        stats.iterations = RECENTER_MAX_ITERS;
        stats.final_residual = resid;
        return Ok((state, stats));
    }
    Err(Error::Centrality {
        iters: RECENTER_MAX_ITERS,
        residual: resid,
    })
}

/// Mapping data from an augmented instance back to the original.
#[derive(Debug, Clone)]
pub struct AugmentInfo {
    pub orig_m: usize,
    pub orig_n: usize,
    pub aux_vertex: usize,
}

/// Builds the augmented instance the interior point method actually runs
/// on: every vertex gets a pair of opposite auxiliary arcs to one new hub
/// vertex, sized so the half-capacity seed plus the auxiliary routing is
/// exactly feasible and sits at half capacity on every arc, with auxiliary
/// costs high enough that an optimal solution never uses them. Returns the
/// instance, an exactly centered starting state, and the mapping info.
pub fn initialize_instance(inst: &FlowInstance) -> Result<(FlowInstance, CentralState, AugmentInfo)> {
    let n = inst.n;
    let m = inst.m();
    let hub = n;
    let mut edges = inst.edges.clone();
    let mut cost = inst.cost.clone();
    let mut cap = inst.cap.clone();
    // Residual demand of the half-capacity seed, in half-units so all
    // augmented capacities stay integral.
    let mut twice_rho: Vec<i64> = inst.demand.iter().map(|&d| 2 * d).collect();
    for (e, &(a, b)) in inst.edges.iter().enumerate() {
        twice_rho[a] -= inst.cap[e];
        twice_rho[b] += inst.cap[e];
    }
    let max_u = inst.cap.iter().copied().max().unwrap_or(1).max(1);
    let max_w = inst.cost.iter().map(|&c| c.abs()).max().unwrap_or(1).max(1);
    let aux_cost: i64 = 8 * (m.max(1) as i64) * max_u * max_w;
    let mut f = vec![0.0; m];
    for e in 0..m {
        f[e] = inst.cap[e] as f64 / 2.0;
    }
    for v in 0..n {
        // Net auxiliary outflow at v must equal rho_v = twice_rho[v]/2;
        // splitting as (max(rho,0)+1） out and (max(-rho,0)+1) back keeps
        // every auxiliary arc exactly at half capacity.
        let out_half = twice_rho[v].max(0) + 2; // 2*(rho^+ + 1)
        let in_half = (-twice_rho[v]).max(0) + 2;
        edges.push((v, hub));
        cap.push(out_half);
        cost.push(aux_cost);
        f.push(out_half as f64 / 2.0);
        edges.push((hub, v));
        cap.push(in_half);
        cost.push(aux_cost);
        f.push(in_half as f64 / 2.0);
    }
    let mut demand = inst.demand.clone();
    demand.push(0);
    let aug = FlowInstance::new(n + 1, edges, cost, cap, demand)?;
    debug_assert!({
        let div = aug
            .incidence_transpose_apply(&aug.incidence_apply(&vec![0.0; aug.n]).unwrap())
            .unwrap();
        div.iter().all(|&x| x == 0.0)
    });
    // The seed routes the demand exactly.
    {
        let mut div = vec![0.0; aug.n];
        for (e, &(a, b)) in aug.edges.iter().enumerate() {
            div[a] += f[e];
            div[b] -= f[e];
        }
        for v in 0..aug.n {
            let d = aug.demand[v] as f64;
            if (div[v] - d).abs() > 1e-6 * (1.0 + d.abs()) {
                return Err(Error::Init(format!(
                    "seed flow does not route the demand at vertex {v}"
                )));
            }
        }
    }
    let cu_norm: f64 = aug
        .cost
        .iter()
        .zip(&aug.cap)
        .map(|(&c, &u)| {
            let x = c as f64 * u as f64;
            x * x
        })
        .sum::<f64>()
        .sqrt();
    let mu0 = 4.0 * cu_norm.max(1.0);
    let state = CentralState::new(&aug, f, mu0)?;
    let (state, _) = match recenter(&aug, &state.f, mu0) {
        Ok(res) => res,
        Err(e) => return Err(Error::Init(format!("seed recentering failed: {e}"))),
    };
    Ok((
        aug,
        state,
        AugmentInfo {
            orig_m: m,
            orig_n: n,
            aux_vertex: hub,
        },
    ))
}

/// Rounds a near-optimal interior flow to an integral one by canceling the
/// fractional support cycle by cycle toward the cheaper orientation, then
/// certifies optimality by the absence of negative residual cycles.
pub fn round_to_integral(inst: &FlowInstance, f: &[f64]) -> Result<Vec<i64>> {
    let m = inst.m();
    let frac_tol = 1e-5;
    let mut fl: Vec<f64> = f.to_vec();
    for _ in 0..4 * m + 4 {
        let frac: Vec<usize> = (0..m)
            .filter(|&e| (fl[e] - fl[e].round()).abs() >= frac_tol)
            .collect();
        if frac.is_empty() {
            break;
        }
        // Genuinely fractional mass circulates; once no cycle is left the
        // rest is numeric dust handled by the final exact verification.
        let Some(cycle) = find_cycle(inst, &frac) else {
            break;
        };
        // Push in the non-increasing-cost direction.
        let cost: i128 = cycle
            .iter()
            .map(|&(e, dir)| dir as i128 * inst.cost[e] as i128)
            .sum();
        let cycle: Vec<(usize, i8)> = if cost > 0 {
            cycle.into_iter().map(|(e, d)| (e, -d)).collect()
        } else {
            cycle
        };
        // Largest push before some edge reaches an integer or a bound.
        let mut theta = f64::INFINITY;
        for &(e, dir) in &cycle {
            let room = if dir > 0 {
                let up = fl[e].ceil().min(inst.cap[e] as f64);
                up - fl[e]
            } else {
                fl[e] - fl[e].floor().max(0.0)
            };
            theta = theta.min(room);
        }
        if !(theta > 0.0) {
            return Err(Error::Rounding("cycle with no headroom".into()));
        }
        for &(e, dir) in &cycle {
            fl[e] += dir as f64 * theta;
            let r = fl[e].round();
            if (fl[e] - r).abs() < 1e-9 * (1.0 + r.abs()) {
                fl[e] = r;
            }
        }
    }
    // Anything still far from an integer means the path was not followed
    // far enough for unambiguous rounding.
    if let Some(bad) = (0..m).find(|&e| (fl[e] - fl[e].round()).abs() > 0.25) {
        return Err(Error::Rounding(format!(
            "edge {bad} remains ambiguously fractional ({})",
            fl[bad]
        )));
    }
    let rounded: Vec<i64> = fl.iter().map(|&x| x.round() as i64).collect();
    if !inst.is_feasible_int(&rounded) {
        return Err(Error::Rounding(
            "rounded flow is not feasible in exact arithmetic".into(),
        ));
    }
    // Optimality certificate: Bellman-Ford finds no negative residual cycle.
    if has_negative_residual_cycle(inst, &rounded) {
        return Err(Error::Rounding(
            "negative residual cycle after rounding; the path was not followed far enough".into(),
        ));
    }
    Ok(rounded)
}

/// A simple cycle within the given edge subset, as (edge, +1 tail->head /
/// -1 head->tail) pairs.
fn find_cycle(inst: &FlowInstance, edges: &[usize]) -> Option<Vec<(usize, i8)>> {
    let n = inst.n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (other, edge)
    for &e in edges {
        let (a, b) = inst.edges[e];
        if a == b {
            // Self-loop: a cycle by itself.
            return Some(vec![(e, 1)]);
        }
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    let mut visited = vec![false; n];
    let mut parent_edge: Vec<Option<(usize, usize)>> = vec![None; n]; // (from, edge)
    for start in 0..n {
        if visited[start] || adj[start].is_empty() {
            continue;
        }
        let mut stack = vec![(start, usize::MAX)];
        while let Some((v, in_edge)) = stack.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            for &(w, e) in &adj[v] {
                if e == in_edge {
                    continue;
                }
                if visited[w] {
                    // Found a cycle: walk v back up to w.
                    let mut path = vec![(e, edge_dir(inst, e, v))];
                    let mut cur = v;
                    while cur != w {
                        let (from, pe) = parent_edge[cur]?;
                        path.push((pe, edge_dir(inst, pe, from)));
                        cur = from;
                    }
                    return Some(path);
                }
                parent_edge[w] = Some((v, e));
                stack.push((w, e));
            }
        }
    }
    None
}

fn edge_dir(inst: &FlowInstance, e: usize, from: usize) -> i8 {
    if inst.edges[e].0 == from {
        1
    } else {
        -1
    }
}

fn has_negative_residual_cycle(inst: &FlowInstance, f: &[i64]) -> bool {
    let n = inst.n;
    // Residual arcs (tail, head, cost).
    let mut arcs: Vec<(usize, usize, i128)> = Vec::new();
    for (e, &(a, b)) in inst.edges.iter().enumerate() {
        if f[e] < inst.cap[e] {
            arcs.push((a, b, inst.cost[e] as i128));
        }
        if f[e] > 0 {
            arcs.push((b, a, -(inst.cost[e] as i128)));
        }
    }
    let mut dist = vec![0i128; n];
    for round in 0..n {
        let mut improved = false;
        for &(a, b, c) in &arcs {
            if dist[a] + c < dist[b] {
                dist[b] = dist[a] + c;
                improved = true;
            }
        }
        if !improved {
            return false;
        }
        if round == n - 1 {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamMode {
    Faithful,
    Practical,
}

/// Solver parameters. Faithful mode pins the step/solve/detection errors to
/// the analysis formulas for a given k; practical mode uses coarse values
/// whose correctness is anchored by the checker and by final rounding.
#[derive(Debug, Clone)]
pub struct SolveParams {
    pub mode: ParamMode,
    pub k: usize,
    pub eps_step: f64,
    pub eps_solve: f64,
    pub eps: f64,
    pub eps_hat: f64,
    pub alpha: f64,
    pub beta: f64,
    pub beta_chk: f64,
    pub t_hat: usize,
    pub est: EstimatorConfig,
    pub cong: CongestionConfig,
    /// Touched-edge budget multiplier passed through to the locator;
    /// infinite in faithful mode where every edge moves every round.
    pub budget_const: f64,
}

impl SolveParams {
    pub fn faithful(k: usize) -> SolveParams {
        let kf = k as f64;
        let eps_step = 1e-5 * kf.powi(-3);
        let eps = 1e-6 * kf.powi(-6);
        SolveParams {
            mode: ParamMode::Faithful,
            k,
            eps_step,
            eps_solve: eps_step,
            eps,
            eps_hat: eps / 2.0,
            alpha: 4.0,
            beta: 1.0,
            beta_chk: 1.0,
            t_hat: 8,
            est: EstimatorConfig::default(),
            cong: CongestionConfig::default(),
            budget_const: f64::INFINITY,
        }
    }

    pub fn practical() -> SolveParams {
        SolveParams {
            mode: ParamMode::Practical,
            k: 4,
            eps_step: 0.05,
            eps_solve: 0.05,
            eps: 0.01,
            eps_hat: 0.005,
            alpha: 16.0,
            beta: 0.1,
            beta_chk: 0.25,
            t_hat: 8,
            est: EstimatorConfig {
                pool_cap: 256,
                fresh_cap: 256,
                ..EstimatorConfig::default()
            },
            cong: CongestionConfig::default(),
            budget_const: 1e9,
        }
    }

    pub fn rounds(&self) -> usize {
        ((self.k as f64 / self.eps_step).ceil() as usize).max(1)
    }

    pub fn locator_config(&self) -> LocatorConfig {
        LocatorConfig {
            alpha: self.alpha,
            beta: self.beta,
            eps: self.eps,
            eps_hat: self.eps_hat,
            est: self.est.clone(),
            cong: self.cong.clone(),
            budget_const: self.budget_const,
            ..LocatorConfig::default()
        }
    }

    pub fn checker_config(&self) -> CheckerConfig {
        CheckerConfig {
            eps: self.eps,
            beta: self.beta_chk,
            cong: self.cong.clone(),
            budget_const: self.budget_const,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct MultiStepOutcome {
    pub rounds: usize,
    pub z_total: usize,
    pub z_max: usize,
    pub nonzero_checks: usize,
    pub recenter: RecenterStats,
}

/// Makes progress equivalent to k interior point steps: each round asks the
/// locator for candidate congested edges, verifies them through the
/// checker, accumulates the verified steps (seeding each edge from the
/// exactly central flow on its first nonzero step), then recenters at the
/// advanced path parameter. Locator resistances are restored afterwards and
/// all checker updates are rolled back.
pub fn multi_step(
    inst: &FlowInstance,
    state: &CentralState,
    locator: &mut Locator,
    checker_template: &Checker,
    params: &SolveParams,
) -> Result<(CentralState, MultiStepOutcome)> {
    let m = inst.m();
    let delta = 1.0 / (m as f64).sqrt();
    let rounds = params.rounds();
    let mut work = checker_template.clone();
    let f_loc_orig = locator.flow().to_vec();
    let mut w = f_loc_orig.clone();
    let mut accum = vec![0.0; m];
    let mut seeded = vec![false; m];
    let mut touched: Vec<usize> = Vec::new();
    let mut outcome = MultiStepOutcome {
        rounds,
        ..MultiStepOutcome::default()
    };
    for _round in 0..rounds {
        let z = locator.solve()?;
        outcome.z_total += z.len();
        outcome.z_max = outcome.z_max.max(z.len());
        for &e in &z {
            let step = work.check(e)?;
            if step == 0.0 {
                continue;
            }
            outcome.nonzero_checks += 1;
            if !seeded[e] {
                seeded[e] = true;
                touched.push(e);
            }
            accum[e] += step;
            let new_f = state.f[e] + params.eps_step * accum[e];
            if !(new_f > 0.0 && new_f < inst.cap[e] as f64) {
                return Err(Error::Contract(format!(
                    "accumulated step pushed edge {e} out of the interior"
                )));
            }
            locator_set_flow(locator, e, new_f)?;
            work.temporary_update(e, new_f)?;
            w[e] = new_f;
        }
    }
    let mu_next = state.mu / (1.0 + params.eps_step * delta).powi(rounds as i32);
    let driver_floor = (params.eps_solve / 32.0).max(RECENTER_STALL_FLOOR);
    let (next, rstats) = recenter_with_floor(inst, &w, mu_next, driver_floor)?;
    outcome.recenter = rstats;
    // Restore the locator to its pre-multistep resistances. A batched
    // update sidesteps window constraints for edges that drifted far.
    let restore: Vec<(usize, f64)> = touched
        .iter()
        .map(|&e| (e, f_loc_orig[e]))
        .filter(|&(e, fe)| w[e] != fe)
        .collect();
    if !restore.is_empty() {
        locator.batch_update(&restore)?;
    }
    work.rollback_all()?;
    Ok((next, outcome))
}

#[derive(Debug, Clone)]
pub struct LogRow {
    pub iteration: usize,
    pub mu: f64,
    pub rounds: usize,
    pub z_total: usize,
    pub z_max: usize,
    pub nonzero_checks: usize,
    pub residual: f64,
    pub locator_inits: usize,
    pub wall_ms: f64,
}

/// Structured per-multistep run log; rendered as CSV by the harness.
#[derive(Debug, Default, Clone)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub const HEADER: &'static str =
        "iteration,mu,rounds,z_total,z_max,nonzero_checks,residual,locator_inits";

    /// Deterministic log: identical (config, seed) gives identical bytes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{},{},{},{},{:.3e},{}\n",
                r.iteration,
                r.mu,
                r.rounds,
                r.z_total,
                r.z_max,
                r.nonzero_checks,
                r.residual,
                r.locator_inits,
            ));
        }
        out
    }

    /// Same rows with wall-clock timings appended; not byte-reproducible.
    pub fn to_csv_with_timings(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push_str(",wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6e},{},{},{},{},{:.3e},{},{:.3}\n",
                r.iteration,
                r.mu,
                r.rounds,
                r.z_total,
                r.z_max,
                r.nonzero_checks,
                r.residual,
                r.locator_inits,
                r.wall_ms
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub flow: Vec<i64>,
    pub cost: i128,
    pub iterations: usize,
    pub locator_inits: usize,
    pub z_total: usize,
    pub log: RunLog,
}

/// End-to-end minimum cost flow: augment and center the instance, walk the
/// central path with locator-guided multi-steps until `mu <= m^{-10}`, then
/// round to an integral optimal flow and map it back. Infeasible instances
/// surface as nonzero optimal auxiliary flow.
pub fn min_cost_flow(inst: &FlowInstance, params: &SolveParams, seed: u64) -> Result<Solution> {
    inst.validate()?;
    if inst.m() == 0 {
        return if inst.demand.iter().all(|&d| d == 0) {
            Ok(Solution {
                flow: Vec::new(),
                cost: 0,
                iterations: 0,
                locator_inits: 0,
                z_total: 0,
                log: RunLog::default(),
            })
        } else {
            Err(Error::Infeasible)
        };
    }
    let rng = RngStream::new(seed, "ipm/solve");
    let (aug, mut state, info) = initialize_instance(inst)?;
    let m = aug.m() as f64;
    let mu_end = m.powi(-10);
    let kf = params.k as f64;
    let loc_init_every =
        ((params.eps_solve * (params.beta * m).sqrt() / kf).floor() as usize).max(1);
    let chk_init_every =
        ((params.eps_solve * (params.beta_chk * m).sqrt() / kf).floor() as usize).max(1);
    let batch_empty_every = ((0.5 * params.alpha.powf(0.25) / kf - 1.0).floor() as usize).max(1);
    let pi_refresh_every = (params.k.pow(4)).max(1);
    let mut locator: Option<Locator> = None;
    let mut checker: Option<Checker> = None;
    let mut log = RunLog::default();
    let mut locator_inits = 0;
    let mut z_total = 0;
    let mut i = 0usize;
    // Live subset densities: escalated toward 1 (the exact, walk-free
    // regime) whenever a random walk gets stuck in a conductance pocket
    // the subsets fail to cover.
    let mut beta_live = params.beta;
    let mut beta_chk_live = params.beta_chk;
    let mut walk_retries = 0usize;
    // The negative-residual-cycle certificate makes rounded flows
    // self-evidently optimal, so the loop exits through that verified door
    // as soon as cycle cancellation certifies -- the duality gap bound
    // 2 m mu < 1 only guarantees this eventually happens (by mu <= 1/(4m)
    // at the latest, far before the m^{-10} bound, whose slack ratios
    // exceed double precision at desk sizes).
    while state.mu > mu_end {
        if i > 0 {
            if let Ok(rounded) = round_to_integral(&aug, &state.f) {
                return finish_solution(
                    inst,
                    &info,
                    rounded,
                    i,
                    locator_inits,
                    z_total,
                    log,
                );
            }
        }
        let t0 = std::time::Instant::now();
        let iteration = (|| -> Result<(CentralState, MultiStepOutcome)> {
            if locator.is_none() || i % loc_init_every == 0 {
                let mut cfg = params.locator_config();
                cfg.beta = beta_live;
                locator = Some(Locator::initialize(
                    &aug,
                    &state.f,
                    cfg,
                    &mut rng.derive_idx("locator", (i + 1000 * walk_retries) as u64),
                )?);
                locator_inits += 1;
            }
            if checker.is_none() || i % chk_init_every == 0 {
                let mut cfg = params.checker_config();
                cfg.beta = beta_chk_live;
                checker = Some(Checker::initialize(
                    &aug,
                    &state.f,
                    cfg,
                    &mut rng.derive_idx("checker", (i + 1000 * walk_retries) as u64),
                )?);
            }
            let loc = locator.as_mut().unwrap();
            let chk = checker.as_mut().unwrap();
            if i > 0 && i % batch_empty_every == 0 {
                loc.batch_update_empty()?;
            }
            if i > 0 && i % pi_refresh_every == 0 {
                chk.refresh_pi_old()?;
            }
            multi_step(&aug, &state, loc, chk, params)
        })();
        let (next, outcome) = match iteration {
            Ok(res) => res,
            Err(Error::WalkCapExceeded { .. }) if beta_live < 1.0 && walk_retries < 8 => {
                beta_live = (beta_live * 4.0).min(1.0);
                beta_chk_live = (beta_chk_live * 4.0).min(1.0);
                walk_retries += 1;
                locator = None;
                checker = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        state = next;
        z_total += outcome.z_total;
        let loc = locator.as_mut().unwrap();
        let chk = checker.as_mut().unwrap();
        // Synchronize drifted slacks with the new central flow.
        let tol = if i % params.t_hat == 0 {
            1.0 + params.eps_solve / 16.0
        } else {
            1.0 + params.eps_solve / 8.0
        };
        let (ls_plus, ls_minus) = {
            let (p, m_) = loc.slacks();
            (p.to_vec(), m_.to_vec())
        };
        let mut drifted: Vec<(usize, f64)> = Vec::new();
        for e in 0..aug.m() {
            let ok = ratio_within(ls_plus[e], state.s_plus[e], tol)
                && ratio_within(ls_minus[e], state.s_minus[e], tol);
            if !ok {
                drifted.push((e, state.f[e]));
            }
        }
        if !drifted.is_empty() {
            for &(e, fe) in &drifted {
                chk.update(e, fe)?;
            }
            if i % params.t_hat == 0 {
                loc.batch_update(&drifted)?;
            } else {
                for &(e, fe) in &drifted {
                    locator_set_flow(loc, e, fe)?;
                }
            }
        }
        log.rows.push(LogRow {
            iteration: i,
            mu: state.mu,
            rounds: outcome.rounds,
            z_total: outcome.z_total,
            z_max: outcome.z_max,
            nonzero_checks: outcome.nonzero_checks,
            residual: outcome.recenter.final_residual,
            locator_inits,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        i += 1;
    }
    let rounded = round_to_integral(&aug, &state.f)?;
    finish_solution(inst, &info, rounded, i, locator_inits, z_total, log)
}

fn finish_solution(
    inst: &FlowInstance,
    info: &AugmentInfo,
    rounded: Vec<i64>,
    iterations: usize,
    locator_inits: usize,
    z_total: usize,
    log: RunLog,
) -> Result<Solution> {
    // Auxiliary arcs must be empty at an optimum of a feasible instance.
    if rounded[info.orig_m..].iter().any(|&fe| fe != 0) {
        return Err(Error::Infeasible);
    }
    let flow: Vec<i64> = rounded[..info.orig_m].to_vec();
    if !inst.is_feasible_int(&flow) {
        return Err(Error::Rounding(
            "mapped-back flow infeasible on the original instance".into(),
        ));
    }
    Ok(Solution {
        cost: inst.flow_cost_int(&flow),
        flow,
        iterations,
        locator_inits,
        z_total,
        log,
    })
}

fn ratio_within(a: f64, b: f64, tol: f64) -> bool {
    a <= b * tol && b <= a * tol
}

/// Applies a flow change through the cheap single-edge path when it fits
/// the locator's resistance window, falling back to a batched update (which
/// resets the window) when it does not. At desk scale single steps can move
/// an edge's resistance past any fixed alpha near the capacity bounds.
fn locator_set_flow(loc: &mut Locator, e: usize, f_e: f64) -> Result<()> {
    if loc.window_ok_flow(e, f_e) {
        loc.update(e, f_e)
    } else {
        loc.batch_update(&[(e, f_e)])
    }
}

/// Exact central path trace: states at mu0, mu0/(1+1/sqrt m), ... on the
/// augmented instance, each recentered to the 1e-12 residual tolerance.
/// Small instances only; this is the stability-lemma test harness.
pub fn trace_central_path(
    inst: &FlowInstance,
    steps: usize,
    mu_start: Option<f64>,
) -> Result<(FlowInstance, Vec<CentralState>)> {
    if inst.m() > 200 {
        return Err(Error::InvalidArgument(
            "central path tracing is limited to m <= 200".into(),
        ));
    }
    let (aug, mut state, _) = initialize_instance(inst)?;
    let delta = 1.0 / (aug.m() as f64).sqrt();
    if let Some(mu0) = mu_start {
        if mu0 < state.mu {
            // Walk down to the requested start in multiplicative hops small
            // enough for recentering.
            while state.mu > mu0 * (1.0 + delta) {
                let mu_next = (state.mu / (1.0 + delta)).max(mu0);
                let (s, _) = recenter(&aug, &state.f, mu_next)?;
                state = s;
            }
            let (s, _) = recenter(&aug, &state.f, mu0)?;
            state = s;
        }
    }
    let mut states = vec![state];
    for _ in 0..steps {
        let prev = states.last().unwrap();
        let mu_next = prev.mu / (1.0 + delta);
        let (s, _) = recenter(&aug, &prev.f, mu_next)?;
        states.push(s);
    }
    Ok((aug, states))
}
