//! The checker: verifies per-edge step values for candidate congested
//! edges. Temporarily promotes the queried edge's endpoints to terminals,
//! solves the Schur system against the snapshot projection, and thresholds
//! the result. With the exact Schur backend the output is deterministic and
//! the checker doubles as a perfect checker with the same error parameter.

use crate::error::{Error, Result};
use crate::graph::FlowInstance;
use crate::linalg::{GroundedDense, Laplacian};
use crate::projection::exact_projection;
use crate::rng::RngStream;
use crate::schur::SchurState;
use crate::walks::CongestionConfig;

#[derive(Debug, Clone)]
pub struct CheckerConfig {
    pub eps: f64,
    pub beta: f64,
    pub cong: CongestionConfig,
    /// Permanent update budget is `max(32, budget_const * beta * m)`.
    pub budget_const: f64,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        CheckerConfig {
            eps: 0.1,
            beta: 0.5,
            cong: CongestionConfig::default(),
            budget_const: 64.0,
        }
    }
}

#[derive(Debug, Clone)]
struct TempRecord {
    e: usize,
    s_plus: f64,
    s_minus: f64,
    r: f64,
    /// Number of Schur journal entries to roll back for this record.
    schur_ops: usize,
}

#[derive(Debug)]
pub struct Checker {
    pub cfg: CheckerConfig,
    m: usize,
    edges: Vec<(usize, usize)>,
    cap: Vec<f64>,
    s_plus: Vec<f64>,
    s_minus: Vec<f64>,
    r: Vec<f64>,
    delta: f64,
    schur: SchurState,
    /// delta-scaled snapshot projection, supported on the terminal set it
    /// was computed against (a subset of the current one).
    pi_old: Vec<f64>,
    pi_epoch: u64,
    temp_stack: Vec<TempRecord>,
    perm_updates: usize,
    budget: usize,
    /// Cached Schur solution keyed by (schur version, pi_old epoch): checks
    /// against an unchanged state reuse one factorization and one solve.
    phi_cache: Option<(u64, u64, Vec<f64>)>,
}

impl Clone for Checker {
    fn clone(&self) -> Self {
        // SchurState is not Clone (journals hold undo data); rebuild the
        // clone from scratch at the current committed state. Only templates
        // with no live temporaries are cloned.
        assert!(
            self.temp_stack.is_empty(),
            "cannot clone a checker with live temporary updates"
        );
        let schur = SchurState::initialize(
            self.schur.n,
            self.edges.clone(),
            self.r.clone(),
            self.schur.terminals(),
            self.cfg.eps,
            self.cfg.beta,
        )
        .expect("re-initializing a valid checker state cannot fail");
        Checker {
            cfg: self.cfg.clone(),
            m: self.m,
            edges: self.edges.clone(),
            cap: self.cap.clone(),
            s_plus: self.s_plus.clone(),
            s_minus: self.s_minus.clone(),
            r: self.r.clone(),
            delta: self.delta,
            schur,
            pi_old: self.pi_old.clone(),
            pi_epoch: self.pi_epoch,
            temp_stack: Vec::new(),
            perm_updates: self.perm_updates,
            budget: self.budget,
            phi_cache: None,
        }
    }
}

impl Checker {
    pub fn initialize(
        inst: &FlowInstance,
        f: &[f64],
        cfg: CheckerConfig,
        rng: &mut RngStream,
    ) -> Result<Checker> {
        let m = inst.m();
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
        let lap = Laplacian::new(inst.n, inst.edges.clone(), r.clone());
        let schur = SchurState::initialize_with_subset(
            &lap,
            &[],
            cfg.eps,
            cfg.beta,
            &cfg.cong,
            &mut rng.derive("checker-subset"),
        )?;
        let budget = (cfg.budget_const * cfg.beta * m as f64).ceil().max(32.0) as usize;
        let mut chk = Checker {
            cfg,
            m,
            edges: inst.edges.clone(),
            cap,
            s_plus,
            s_minus,
            r,
            delta: 1.0 / (m as f64).sqrt(),
            schur,
            pi_old: Vec::new(),
            pi_epoch: 0,
            temp_stack: Vec::new(),
            perm_updates: 0,
            budget,
            phi_cache: None,
        };
        chk.refresh_pi_old()?;
        Ok(chk)
    }

    pub fn resistances(&self) -> &[f64] {
        &self.r
    }

    pub fn flow(&self) -> &[f64] {
        &self.s_minus
    }

    pub fn terminals(&self) -> &[usize] {
        self.schur.terminals()
    }

    /// Recomputes the delta-scaled snapshot projection
    /// `pi_old = delta pi^C(B^T g(s))` exactly at the current slacks.
    pub fn refresh_pi_old(&mut self) -> Result<()> {
        if !self.temp_stack.is_empty() {
            return Err(Error::Contract(
                "refresh with live temporary updates".into(),
            ));
        }
        let n = self.schur.n;
        let lap = Laplacian::new(n, self.edges.clone(), self.r.clone());
        let mut btg = vec![0.0; n];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let g = (1.0 / self.s_plus[e] - 1.0 / self.s_minus[e]) / self.r[e];
            btg[a] += g;
            btg[b] -= g;
        }
        let mut c_sorted = self.schur.terminals().to_vec();
        c_sorted.sort_unstable();
        let mut pi = exact_projection(&lap, &c_sorted, &btg)?;
        for x in &mut pi {
            *x *= self.delta;
        }
        self.pi_old = pi;
        self.pi_epoch += 1;
        self.phi_cache = None;
        Ok(())
    }

    fn set_edge_flow(&mut self, e: usize, f_e: f64) -> Result<f64> {
        if !(f_e > 0.0 && f_e < self.cap[e]) {
            return Err(Error::InvalidArgument(format!(
                "flow on edge {e} leaves the strict interior"
            )));
        }
        self.s_plus[e] = self.cap[e] - f_e;
        self.s_minus[e] = f_e;
        let r_new = 1.0 / (self.s_plus[e] * self.s_plus[e])
            + 1.0 / (self.s_minus[e] * self.s_minus[e]);
        self.r[e] = r_new;
        Ok(r_new)
    }

    /// Permanent slack/resistance update.
    pub fn update(&mut self, e: usize, f_e: f64) -> Result<()> {
        if !self.temp_stack.is_empty() {
            return Err(Error::Contract(
                "permanent update while temporary updates are live".into(),
            ));
        }
        self.perm_updates += 1;
        if self.perm_updates > self.budget {
            return Err(Error::LocatorBudget {
                touched: self.perm_updates,
                budget: self.budget,
            });
        }
        let (a, b) = self.edges[e];
        for v in [a, b] {
            if !self.schur.is_terminal(v) {
                let _ = self.schur.add_terminal(v)?;
            }
        }
        let r_new = self.set_edge_flow(e, f_e)?;
        self.schur.update(e, r_new)?;
        self.schur.commit()?;
        Ok(())
    }

    /// Temporary update; rolled back in LIFO order by `rollback`.
    pub fn temporary_update(&mut self, e: usize, f_e: f64) -> Result<()> {
        let (a, b) = self.edges[e];
        let mut schur_ops = 0;
        for v in [a, b] {
            if !self.schur.is_terminal(v) {
                self.schur.temporary_add_terminals(&[v])?;
                schur_ops += 1;
            }
        }
        let record = TempRecord {
            e,
            s_plus: self.s_plus[e],
            s_minus: self.s_minus[e],
            r: self.r[e],
            schur_ops: schur_ops + 1,
        };
        let r_new = self.set_edge_flow(e, f_e)?;
        self.schur.update(e, r_new)?;
        self.temp_stack.push(record);
        Ok(())
    }

    /// Rolls back the most recent temporary update.
    pub fn rollback(&mut self) -> Result<()> {
        let Some(rec) = self.temp_stack.pop() else {
            return Err(Error::EmptyJournal);
        };
        for _ in 0..rec.schur_ops {
            self.schur.rollback()?;
        }
        self.s_plus[rec.e] = rec.s_plus;
        self.s_minus[rec.e] = rec.s_minus;
        self.r[rec.e] = rec.r;
        Ok(())
    }

    pub fn rollback_all(&mut self) -> Result<()> {
        while !self.temp_stack.is_empty() {
            self.rollback()?;
        }
        Ok(())
    }

    /// Approximate step value for edge e: temporarily adds its endpoints as
    /// terminals, solves the Schur system for `phi = -SC^+ pi_old`, and
    /// returns `delta g_e(s) + (phi_u - phi_w)/r_e`, thresholded to zero
    /// below eps/2 in congestion units. Output is independent of prior
    /// checks (all side effects are rolled back before returning).
    pub fn check(&mut self, e: usize) -> Result<f64> {
        let (a, b) = self.edges[e];
        // Base solution phi = -SC^+ pi_old on the permanent terminal set;
        // cached until the base Schur state or pi_old changes.
        let version = self.schur.version();
        if self
            .phi_cache
            .as_ref()
            .is_none_or(|(v, ep, _)| *v != version || *ep != self.pi_epoch)
        {
            let (order, sc) = self.schur.query();
            let k = order.len();
            let solver = GroundedDense::new(sc.to_vec(), k)?;
            let mut rhs: Vec<f64> = order.iter().map(|&v| -self.pi_old[v]).collect();
            let mean = rhs.iter().sum::<f64>() / k as f64;
            for x in &mut rhs {
                *x -= mean;
            }
            self.phi_cache = Some((version, self.pi_epoch, solver.solve(&rhs)?));
        }
        // Temporarily promote missing endpoints. The snapshot projection
        // carries no mass on them, so eliminating them from the extended
        // Schur complement gives back the base system: the base potentials
        // are unchanged and the new vertices take their harmonic extension,
        // read off the extended system's border rows.
        let mut temp_added = Vec::new();
        for v in [a, b] {
            if !self.schur.is_terminal(v) && !temp_added.contains(&v) {
                self.schur.temporary_add_terminals(&[v])?;
                temp_added.push(v);
            }
        }
        let result = self.check_extended(e, a, b, &temp_added);
        for _ in 0..temp_added.len() {
            self.schur.rollback()?;
        }
        result
    }

    fn check_extended(&self, e: usize, a: usize, b: usize, temp_added: &[usize]) -> Result<f64> {
        let phi_base = &self.phi_cache.as_ref().unwrap().2;
        let (order, sc) = self.schur.query();
        let k = order.len();
        let kb = k - temp_added.len();
        debug_assert_eq!(&order[kb..], temp_added);
        let potential = |v: usize, border: &[f64]| -> f64 {
            let pos = order
                .iter()
                .position(|&w| w == v)
                .expect("endpoint is a terminal");
            if pos < kb {
                phi_base[pos]
            } else {
                border[pos - kb]
            }
        };
        // Harmonic extension of the base potentials to the border vertices.
        let border: Vec<f64> = match temp_added.len() {
            0 => Vec::new(),
            1 => {
                let x = kb;
                let mut rx = 0.0;
                for j in 0..kb {
                    rx -= sc[x * k + j] * phi_base[j];
                }
                vec![rx / sc[x * k + x]]
            }
            2 => {
                let (x, y) = (kb, kb + 1);
                let mut rx = 0.0;
                let mut ry = 0.0;
                for j in 0..kb {
                    rx -= sc[x * k + j] * phi_base[j];
                    ry -= sc[y * k + j] * phi_base[j];
                }
                let (dx, dy) = (sc[x * k + x], sc[y * k + y]);
                let c = sc[x * k + y];
                let det = dx * dy - c * c;
                if !(det.abs() > 0.0) {
                    return Err(Error::SingularLaplacian);
                }
                vec![(rx * dy - c * ry) / det, (dx * ry - c * rx) / det]
            }
            _ => unreachable!("at most two border vertices per check"),
        };
        let g_e = (1.0 / self.s_plus[e] - 1.0 / self.s_minus[e]) / self.r[e];
        let step = if a == b {
            self.delta * g_e
        } else {
            self.delta * g_e
                + (potential(a, &border) - potential(b, &border)) / self.r[e]
        };
        if self.r[e].sqrt() * step.abs() < self.cfg.eps / 2.0 {
            Ok(0.0)
        } else {
            Ok(step)
        }
    }
}
