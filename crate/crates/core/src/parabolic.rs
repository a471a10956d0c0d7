//! The initial-boundary blow-up problem
//! `u_t - Δ_p u + b(x,t) f(u) = 0` with `u = ∞` on the parabolic boundary.
//!
//! The minimal solution is the limit of backward-Euler solutions of the
//! capped problem (`u = n` initially and on the boundary) along a cap
//! ladder. The maximal solution is the limit, as `ε → 0`, of minimal
//! solutions on `{d > ε} × (ε, T)`; those are solved on the reference nodes
//! inside the shrunk domain so both fields share nodes.

use std::sync::Arc;

use crate::elliptic::relative_change;
use crate::error::{Error, Result};
use crate::fv::{newton, Boundary, Line, NewtonOptions, NodalSystem};
use crate::geometry::Domain;
use crate::karamata::{AbsorptionWeight, SpaceTimeFn};
use crate::nonlinearity::{Nonlinearity, ScalarFn};

/// Default ratio between the solved window `t*` and the horizon `T`.
pub const DEFAULT_WINDOW: f64 = 0.9;

/// Data on the parabolic boundary.
#[derive(Clone)]
pub enum ParabolicData {
    /// `u = n` at `t = 0` and on the lateral boundary.
    Cap(f64),
    /// `u = ∞`, reached through cap ladders.
    BlowUp,
    /// Prescribed initial profile (a function of `d`) and lateral values
    /// (a function of `t`).
    Given { initial: ScalarFn, lateral: ScalarFn },
    /// Prescribed initial profile, zero flux at the boundary.
    Insulated { initial: ScalarFn },
}

impl std::fmt::Debug for ParabolicData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParabolicData::Cap(n) => write!(f, "Cap({n})"),
            ParabolicData::BlowUp => write!(f, "BlowUp"),
            ParabolicData::Given { .. } => write!(f, "Given"),
            ParabolicData::Insulated { .. } => write!(f, "Insulated"),
        }
    }
}

#[derive(Clone)]
pub struct ParabolicProblem {
    pub domain: Domain,
    pub p: f64,
    pub nl: Nonlinearity,
    pub weight: AbsorptionWeight,
    /// Horizon `T`.
    pub horizon: f64,
    /// End of the solved window `t*`.
    pub t_star: f64,
    pub data: ParabolicData,
    /// Optional right-hand side `s(d, t)`.
    pub source: Option<SpaceTimeFn>,
    /// Added to the boundary distance when evaluating `b`; nonzero for
    /// shrunk domains.
    pub distance_offset: f64,
    /// Added to the time when evaluating `b`.
    pub time_offset: f64,
}

impl std::fmt::Debug for ParabolicProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParabolicProblem")
            .field("domain", &self.domain)
            .field("p", &self.p)
            .field("nl", &self.nl)
            .field("weight", &self.weight)
            .field("horizon", &self.horizon)
            .field("t_star", &self.t_star)
            .field("data", &self.data)
            .field("distance_offset", &self.distance_offset)
            .field("time_offset", &self.time_offset)
            .finish()
    }
}

impl ParabolicProblem {
    /// Blow-up problem on `(0, T)` with the window `t* = 0.9 T`.
    pub fn new(domain: Domain, p: f64, nl: Nonlinearity, weight: AbsorptionWeight, horizon: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::config(format!("p must exceed 1, got {p}")));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config(format!("horizon must be positive and finite, got {horizon}")));
        }
        Ok(ParabolicProblem {
            domain,
            p,
            nl,
            weight,
            horizon,
            t_star: DEFAULT_WINDOW * horizon,
            data: ParabolicData::BlowUp,
            source: None,
            distance_offset: 0.0,
            time_offset: 0.0,
        })
    }

    /// Sets `t*`. Windows beyond `0.9 T` need `full_horizon`, which asserts
    /// that `β` stays positive and continuous up to `T`.
    pub fn with_window(mut self, t_star: f64, full_horizon: bool) -> Result<Self> {
        let limit = if full_horizon { self.horizon } else { DEFAULT_WINDOW * self.horizon };
        if !(t_star > 0.0) || t_star > limit * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "solved window t* = {t_star} must lie in (0, {limit}]{}",
                if full_horizon { "" } else { "; set full_horizon to allow t* up to T" }
            )));
        }
        let samples: Vec<f64> = (0..=32).map(|k| self.domain.inradius() * k as f64 / 32.0).collect();
        for j in 0..=32 {
            let t = t_star * j as f64 / 32.0;
            let (lo, hi) = self.weight.time_factors(t, &samples);
            if !(lo > 0.0) || !hi.is_finite() {
                return Err(Error::config(format!("beta must stay positive and finite on [0, t*], fails at t = {t}")));
            }
        }
        self.t_star = t_star;
        Ok(self)
    }

    pub fn with_cap(&self, n: f64) -> Self {
        ParabolicProblem { data: ParabolicData::Cap(n), ..self.clone() }
    }

    pub fn with_data(mut self, data: ParabolicData) -> Self {
        self.data = data;
        self
    }

    pub fn with_source(mut self, source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(source));
        self
    }

    /// The problem on `{d > eps} × (eps, T)` in shifted variables.
    pub fn shrunk(&self, eps: f64) -> Result<Self> {
        Ok(ParabolicProblem {
            domain: self.domain.shrink(eps)?,
            distance_offset: self.distance_offset + eps,
            time_offset: self.time_offset + eps,
            ..self.clone()
        })
    }

    /// `b` at the nodes of `line` at local time `t`; 0 on a Dirichlet
    /// boundary node.
    pub fn weights(&self, line: &Line, t: f64) -> Vec<f64> {
        let m = line.boundary_index();
        let insulated = matches!(self.data, ParabolicData::Insulated { .. });
        line.d
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                if i == m && !insulated {
                    0.0
                } else {
                    self.weight.eval(d + self.distance_offset, t + self.time_offset, self.p)
                }
            })
            .collect()
    }

    fn source_at(&self, line: &Line, t: f64) -> Option<Vec<f64>> {
        self.source.as_ref().map(|s| line.d.iter().map(|&d| s(d, t)).collect())
    }

    fn boundary_at(&self, t: f64) -> Result<Boundary> {
        match &self.data {
            ParabolicData::Cap(n) => Ok(Boundary::Dirichlet(*n)),
            ParabolicData::Given { lateral, .. } => Ok(Boundary::Dirichlet(lateral(t))),
            ParabolicData::Insulated { .. } => Ok(Boundary::Insulated),
            ParabolicData::BlowUp => Err(Error::domain("infinite data must be approached through a cap ladder")),
        }
    }

    fn initial(&self, line: &Line) -> Result<Vec<f64>> {
        match &self.data {
            ParabolicData::Cap(n) => {
                if !(*n > 0.0) || !n.is_finite() {
                    return Err(Error::domain(format!("cap must be positive and finite, got {n}")));
                }
                Ok(vec![*n; line.len()])
            }
            ParabolicData::Given { initial, .. } | ParabolicData::Insulated { initial } => {
                Ok(line.d.iter().map(|&d| initial(d)).collect())
            }
            ParabolicData::BlowUp => Err(Error::domain("infinite data must be approached through a cap ladder")),
        }
    }

    fn cap(&self) -> Option<f64> {
        match self.data {
            ParabolicData::Cap(n) => Some(n),
            _ => None,
        }
    }
}

/// Time levels of a backward-Euler run with the subset of levels whose
/// states are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
    pub stored: Vec<bool>,
}

impl TimeGrid {
    /// `t_j = t_end (j/M)^power`, all levels stored.
    pub fn graded(t_end: f64, steps: usize, power: f64) -> Result<Self> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::domain(format!("time grid end must be positive, got {t_end}")));
        }
        if steps == 0 || !(power >= 1.0) {
            return Err(Error::domain("time grid needs at least one step and grading power >= 1"));
        }
        let m = steps as f64;
        let times: Vec<f64> = (0..=steps).map(|j| t_end * (j as f64 / m).powf(power)).collect();
        let stored = vec![true; times.len()];
        Ok(TimeGrid { times, stored })
    }

    /// Inserts the given times as stored levels, dropping grid levels closer
    /// than a quarter step to them.
    pub fn with_checkpoints(self, checkpoints: &[f64]) -> Result<Self> {
        let t_end = *self.times.last().unwrap();
        let mut levels: Vec<(f64, bool)> = self.times.iter().copied().zip(self.stored.iter().copied()).collect();
        for &c in checkpoints {
            if !(c > 0.0) || c > t_end {
                return Err(Error::domain(format!("checkpoint {c} outside (0, {t_end}]")));
            }
            let k = levels.partition_point(|&(t, _)| t < c);
            if k < levels.len() && levels[k].0 == c {
                levels[k].1 = true;
                continue;
            }
            let lo = levels[k - 1].0;
            let hi = levels[k].0;
            let close = 0.25 * (hi - lo);
            if hi - c < close && k + 1 < levels.len() {
                levels[k] = (c, true);
            } else if c - lo < close && k > 1 {
                levels[k - 1] = (c, true);
            } else {
                levels.insert(k, (c, true));
            }
        }
        Ok(TimeGrid { times: levels.iter().map(|l| l.0).collect(), stored: levels.iter().map(|l| l.1).collect() })
    }

    /// Keeps every `k`-th level plus the first, the last and any level
    /// already marked by a checkpoint when `keep_marked` is set.
    pub fn store_every(mut self, k: usize, keep_marked: bool) -> Self {
        let last = self.times.len() - 1;
        for (j, s) in self.stored.iter_mut().enumerate() {
            *s = j == 0 || j == last || (k > 0 && j % k == 0) || (keep_marked && *s);
        }
        self
    }

    /// Stored levels only.
    pub fn stored_times(&self) -> Vec<f64> {
        self.times.iter().zip(&self.stored).filter(|(_, &s)| s).map(|(&t, _)| t).collect()
    }

    /// Grid for the problem started at `eps`: levels `t - eps` of this grid
    /// with `t > eps`, preceded by `lead` quadratically graded levels.
    pub fn shifted(&self, eps: f64, lead: usize) -> Result<Self> {
        let first = self.times.iter().position(|&t| t > eps * (1.0 + 1e-9));
        let Some(first) = first else {
            return Err(Error::domain(format!("time grid ends before the shift {eps}")));
        };
        let s0 = self.times[first] - eps;
        let mut times = vec![0.0];
        let mut stored = vec![true];
        for k in 1..lead.max(1) {
            times.push(s0 * (k as f64 / lead as f64).powi(2));
            stored.push(false);
        }
        for j in first..self.times.len() {
            times.push(self.times[j] - eps);
            stored.push(self.stored[j]);
        }
        Ok(TimeGrid { times, stored })
    }
}

/// How a field was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    /// The cap `n` of the field, or of the last ladder rung.
    pub cap: Option<f64>,
    /// Set for limits of cap ladders.
    pub blow_up: bool,
    /// Shrinking of the domain and start time.
    pub shrink: f64,
}

/// Nodal values on a half line at the stored time levels. Entries outside
/// the region where the field is defined (for shrunk-domain solutions) are
/// `+∞`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    pub line: Arc<Line>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl SpaceTimeField {
    /// Index of the stored level at `t` (relative match within 1e-9).
    pub fn level(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1e-300))
    }

    /// Values at the stored level `t`.
    pub fn at(&self, t: f64) -> Result<&[f64]> {
        self.level(t)
            .map(|j| self.values[j].as_slice())
            .ok_or_else(|| Error::domain(format!("time {t} is not a stored level")))
    }

    /// `(t, u)` at node `i` over the stored levels.
    pub fn trajectory(&self, i: usize) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.values).map(|(&t, row)| (t, row[i])).collect()
    }

    /// Node with boundary distance closest to `d`.
    pub fn node_near(&self, d: f64) -> usize {
        let mut best = 0;
        for (i, &di) in self.line.d.iter().enumerate() {
            if (di - d).abs() < (self.line.d[best] - d).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicOptions {
    pub n_cells: usize,
    pub grading: f64,
    /// Gradient regularisation; the smallest mesh spacing when absent.
    pub eps_reg: Option<f64>,
    pub newton: NewtonOptions,
    /// Step halvings allowed after a failed Newton solve.
    pub max_halvings: usize,
}

impl Default for ParabolicOptions {
    fn default() -> Self {
        ParabolicOptions { n_cells: 400, grading: 3.0, eps_reg: None, newton: NewtonOptions::default(), max_halvings: 8 }
    }
}

impl ParabolicOptions {
    pub fn line(&self, domain: &Domain) -> Result<Arc<Line>> {
        Ok(Arc::new(Line::new(domain, self.n_cells, self.grading)?))
    }
}

/// Work done by one accepted step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    pub newton_iterations: usize,
    /// Sub-steps taken after halvings (1 when the step went through).
    pub substeps: usize,
    pub projections: usize,
}

/// One backward-Euler step from `state` at time `t` to `t + dt`:
/// `(u - state)/dt - Δ_p u + b(·, t + dt) f(u) = s(·, t + dt)`.
/// A failed Newton solve is retried as two half steps, at most
/// `opts.max_halvings` levels deep.
pub fn step_implicit(
    prob: &ParabolicProblem,
    line: &Line,
    state: &[f64],
    t: f64,
    dt: f64,
    opts: &ParabolicOptions,
) -> Result<(Vec<f64>, StepReport)> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    if state.len() != line.len() || state.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::domain("state must be positive at every node of the line"));
    }
    let eps_reg = opts.eps_reg.unwrap_or_else(|| line.min_spacing());
    let mut report = StepReport::default();
    let values = step_rec(prob, line, state, t, dt, eps_reg, opts, 0, &mut report)?;
    Ok((values, report))
}

#[allow(clippy::too_many_arguments)]
fn step_rec(
    prob: &ParabolicProblem,
    line: &Line,
    state: &[f64],
    t: f64,
    dt: f64,
    eps_reg: f64,
    opts: &ParabolicOptions,
    depth: usize,
    report: &mut StepReport,
) -> Result<Vec<f64>> {
    let t1 = t + dt;
    let weight = prob.weights(line, t1);
    let source = prob.source_at(line, t1);
    let sys = NodalSystem {
        line,
        p: prob.p,
        eps_reg,
        nl: &prob.nl,
        weight: &weight,
        source: source.as_deref(),
        mass: 1.0 / dt,
        prev: Some(state),
        boundary: prob.boundary_at(t1)?,
    };
    match newton(&sys, state.to_vec(), &opts.newton) {
        Ok((u, rep)) => {
            report.newton_iterations += rep.iterations;
            report.projections += rep.projections;
            report.substeps += 1;
            Ok(u)
        }
        Err(e) if depth >= opts.max_halvings => Err(Error::solver(format!(
            "step from t = {t:e} rejected after {depth} halvings (dt = {dt:e}): {e}"
        ))),
        Err(_) => {
            let half = step_rec(prob, line, state, t, 0.5 * dt, eps_reg, opts, depth + 1, report)?;
            step_rec(prob, line, &half, t + 0.5 * dt, 0.5 * dt, eps_reg, opts, depth + 1, report)
        }
    }
}

/// Backward-Euler trajectory on a prepared line.
pub fn solve_on(prob: &ParabolicProblem, line: &Arc<Line>, grid: &TimeGrid, opts: &ParabolicOptions) -> Result<SpaceTimeField> {
    if grid.times.len() < 2 || grid.times[0] != 0.0 || grid.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time grid must increase strictly from 0"));
    }
    let mut u = prob.initial(line)?;
    if let Boundary::Dirichlet(v) = prob.boundary_at(0.0)? {
        let m = line.boundary_index();
        u[m] = v;
    }
    let mut times = vec![0.0];
    let mut values = vec![u.clone()];
    for j in 1..grid.times.len() {
        let t0 = grid.times[j - 1];
        let (next, _) = step_implicit(prob, line, &u, t0, grid.times[j] - t0, opts)?;
        u = next;
        if grid.stored[j] {
            times.push(grid.times[j]);
            values.push(u.clone());
        }
    }
    Ok(SpaceTimeField {
        line: line.clone(),
        times,
        values,
        provenance: Provenance { cap: prob.cap(), blow_up: false, shrink: prob.distance_offset },
    })
}

/// Solution of the problem with `u = n` initially and on the boundary.
pub fn solve_capped(prob: &ParabolicProblem, grid: &TimeGrid, opts: &ParabolicOptions) -> Result<SpaceTimeField> {
    if prob.cap().is_none() {
        return Err(Error::domain("capped solve requires finite cap data"));
    }
    let line = opts.line(&prob.domain)?;
    solve_on(prob, &line, grid, opts)
}

/// Stopping rule for ladders over space-time fields: the largest relative
/// nodal change between consecutive rungs over stored levels `t ≥ t_min`
/// and nodes with `d ≥ d_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeStabilization {
    pub tol: f64,
    pub d_min: f64,
    pub t_min: f64,
}

/// Relative change between two fields on the same nodes and levels,
/// ignoring entries that are infinite in either.
pub fn field_change(a: &SpaceTimeField, b: &SpaceTimeField, d_min: f64, t_min: f64) -> f64 {
    let line = &a.line;
    let m = line.boundary_index();
    a.times
        .iter()
        .zip(a.values.iter().zip(&b.values))
        .filter(|(&t, _)| t >= t_min)
        .map(|(_, (ra, rb))| {
            relative_change(ra, rb, |i| i < m && line.d[i] >= d_min && ra[i].is_finite() && rb[i].is_finite())
        })
        .fold(0.0, f64::max)
}

/// Limit of a ladder of solves together with the ladder history.
#[derive(Debug, Clone)]
pub struct LadderSolution {
    pub field: SpaceTimeField,
    /// Ladder parameters solved, in order.
    pub rungs: Vec<f64>,
    /// Relative change entering each rung after the first.
    pub changes: Vec<f64>,
}

fn minimal_on(
    prob: &ParabolicProblem,
    line: &Arc<Line>,
    n_ladder: &[f64],
    grid: &TimeGrid,
    opts: &ParabolicOptions,
    stab: &SpaceTimeStabilization,
) -> Result<LadderSolution> {
    if n_ladder.len() < 2 || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("cap ladder must be increasing with at least two rungs"));
    }
    let mut prev: Option<SpaceTimeField> = None;
    let mut rungs = Vec::new();
    let mut changes = Vec::new();
    for &n in n_ladder {
        let field = solve_on(&prob.with_cap(n), line, grid, opts)?;
        rungs.push(n);
        if let Some(p) = &prev {
            let change = field_change(p, &field, stab.d_min, stab.t_min);
            changes.push(change);
            if change < stab.tol {
                let mut field = field;
                field.provenance.blow_up = true;
                return Ok(LadderSolution { field, rungs, changes });
            }
        }
        prev = Some(field);
    }
    Err(Error::solver(format!(
        "cap ladder exhausted at n = {:e} without stabilization on d >= {}, t >= {} (last change {:.3e} > {:e})",
        rungs.last().unwrap(),
        stab.d_min,
        stab.t_min,
        changes.last().copied().unwrap_or(f64::NAN),
        stab.tol
    )))
}

/// Minimal solution: limit of capped solutions along `n_ladder`.
pub fn minimal_solution(
    prob: &ParabolicProblem,
    n_ladder: &[f64],
    grid: &TimeGrid,
    opts: &ParabolicOptions,
    stab: &SpaceTimeStabilization,
) -> Result<LadderSolution> {
    let line = opts.line(&prob.domain)?;
    minimal_on(prob, &line, n_ladder, grid, opts, stab)
}

/// Minimal solution on `{d > eps} × (eps, T)`, read back on the reference
/// nodes and stored levels; `+∞` where `d` or `t` does not exceed `eps`.
pub fn shrunk_minimal_solution(
    prob: &ParabolicProblem,
    line: &Arc<Line>,
    eps: f64,
    n_ladder: &[f64],
    grid: &TimeGrid,
    opts: &ParabolicOptions,
    stab: &SpaceTimeStabilization,
) -> Result<LadderSolution> {
    let (sub, keep) = line.restricted(eps)?;
    let sub = Arc::new(sub);
    let sub_prob = prob.shrunk(eps)?;
    let sub_grid = grid.shifted(eps, 16)?;
    let sub_stab = SpaceTimeStabilization {
        tol: stab.tol,
        d_min: (stab.d_min - eps).max(0.0),
        // the shifted initial level carries the cap itself and never settles
        t_min: (stab.t_min - eps).max(eps),
    };
    let sol = minimal_on(&sub_prob, &sub, n_ladder, &sub_grid, opts, &sub_stab)?;
    let times = grid.stored_times();
    let values = times
        .iter()
        .map(|&t| {
            let mut row = vec![f64::INFINITY; line.len()];
            if let Some(j) = sol.field.level(t - eps).filter(|_| t > eps * (1.0 + 1e-9)) {
                row[..keep].copy_from_slice(&sol.field.values[j][..keep]);
            }
            row
        })
        .collect();
    let field = SpaceTimeField {
        line: line.clone(),
        times,
        values,
        provenance: Provenance { cap: sol.field.provenance.cap, blow_up: true, shrink: prob.distance_offset + eps },
    };
    Ok(LadderSolution { field, rungs: sol.rungs, changes: sol.changes })
}

#[derive(Debug, Clone)]
pub struct MaximalSolution {
    pub field: SpaceTimeField,
    /// Shrink parameters solved, in order.
    pub eps: Vec<f64>,
    /// Relative change entering each `ε` rung after the first.
    pub changes: Vec<f64>,
    /// Cap reached at each `ε`.
    pub caps: Vec<f64>,
}

/// Maximal solution: for each `ε` of the decreasing `eps_ladder`, the
/// minimal solution on the shrunk cylinder; the ladder stops once
/// consecutive fields agree to `eps_tol` on the stabilization region, and
/// with no `eps_tol` the last rung is returned.
#[allow(clippy::too_many_arguments)]
pub fn maximal_solution(
    prob: &ParabolicProblem,
    eps_ladder: &[f64],
    n_ladder: &[f64],
    grid: &TimeGrid,
    opts: &ParabolicOptions,
    stab: &SpaceTimeStabilization,
    eps_tol: Option<f64>,
) -> Result<MaximalSolution> {
    if eps_ladder.is_empty() || eps_ladder.windows(2).any(|w| w[1] >= w[0]) || !(eps_ladder[eps_ladder.len() - 1] > 0.0) {
        return Err(Error::domain("shrink ladder must be positive and strictly decreasing"));
    }
    let line = opts.line(&prob.domain)?;
    let mut eps_done = Vec::new();
    let mut changes = Vec::new();
    let mut caps = Vec::new();
    let mut prev: Option<SpaceTimeField> = None;
    for &eps in eps_ladder {
        let sol = shrunk_minimal_solution(prob, &line, eps, n_ladder, grid, opts, stab)?;
        eps_done.push(eps);
        caps.push(*sol.rungs.last().unwrap());
        if let Some(p) = &prev {
            let change = field_change(p, &sol.field, stab.d_min, stab.t_min);
            changes.push(change);
            if eps_tol.is_some_and(|tol| change < tol) {
                return Ok(MaximalSolution { field: sol.field, eps: eps_done, changes, caps });
            }
        }
        prev = Some(sol.field);
    }
    if let Some(tol) = eps_tol {
        if eps_ladder.len() > 1 {
            return Err(Error::solver(format!(
                "shrink ladder exhausted at eps = {:e} (last change {:.3e} > {tol:e})",
                eps_done.last().unwrap(),
                changes.last().copied().unwrap_or(f64::NAN)
            )));
        }
    }
    Ok(MaximalSolution { field: prev.unwrap(), eps: eps_done, changes, caps })
}

/// Outcome of a space-time ordering check `u₁ ≥ u₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeVerdict {
    pub passed: bool,
    /// Largest `(u₂ - u₁) / max(|u₁|, |u₂|, 1)`, clipped at 0.
    pub max_violation: f64,
    pub at_d: f64,
    pub at_t: f64,
}

/// Nodal ordering `u₁ ≥ u₂ - tol` over all shared levels; infinite entries
/// are skipped.
pub fn parabolic_comparison_check(u1: &SpaceTimeField, u2: &SpaceTimeField, tol: f64) -> Result<SpaceTimeVerdict> {
    if u1.line.d != u2.line.d || u1.times.len() != u2.times.len() {
        return Err(Error::domain("compared fields live on different grids"));
    }
    let mut out = SpaceTimeVerdict { passed: true, max_violation: 0.0, at_d: f64::NAN, at_t: f64::NAN };
    for ((&t, &s), (r1, r2)) in u1.times.iter().zip(&u2.times).zip(u1.values.iter().zip(&u2.values)) {
        if (t - s).abs() > 1e-9 * t.abs().max(1e-300) {
            return Err(Error::domain("compared fields have different time levels"));
        }
        let v = crate::elliptic::ordering(r1, r2, &u1.line.d, tol);
        if v.max_violation > out.max_violation {
            out.max_violation = v.max_violation;
            out.at_d = v.at;
            out.at_t = t;
        }
    }
    out.passed = out.max_violation <= tol;
    Ok(out)
}

/// Smooth test field `φ(d, t)` with its partial derivatives.
#[derive(Clone)]
pub struct TestField {
    pub phi: SpaceTimeFn,
    pub phi_d: SpaceTimeFn,
    pub phi_t: SpaceTimeFn,
}

impl TestField {
    pub fn zero() -> Self {
        let z: SpaceTimeFn = Arc::new(|_, _| 0.0);
        TestField { phi: z.clone(), phi_d: z.clone(), phi_t: z }
    }

    /// `φ = ψ(d) χ(t)`.
    pub fn separable(psi: ScalarFn, dpsi: ScalarFn, chi: ScalarFn, dchi: ScalarFn) -> Self {
        let (p1, c1) = (psi.clone(), chi.clone());
        let (p2, c2) = (psi.clone(), dchi);
        let (p3, c3) = (dpsi, chi);
        TestField {
            phi: Arc::new(move |d, t| p1(d) * c1(t)),
            phi_t: Arc::new(move |d, t| p2(d) * c2(t)),
            phi_d: Arc::new(move |d, t| p3(d) * c3(t)),
        }
    }
}

const GAUSS3: [(f64, f64); 3] = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
const GAUSS2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];

/// Weak-form residual at the last stored level `t`:
/// `∫ u φ(t) + ∫₀ᵗ∫ (|∇u|^{p-2}∇u·∇φ + b f(u) φ - s φ - u φ_t)` over the
/// half line with measure `r^{N-1}`, for `u` piecewise linear in `d` and in
/// `t` between stored levels. Nonpositive for lower solutions, nonnegative
/// for upper solutions. `φ` must be nonnegative and vanish at `t = 0` and
/// on the last two nodes.
pub fn weak_form_residual(u: &SpaceTimeField, prob: &ParabolicProblem, test: &TestField) -> Result<f64> {
    let line = &u.line;
    let m = line.boundary_index();
    let levels = u.times.len();
    if levels < 2 || m < 2 {
        return Err(Error::domain("weak residual needs at least two levels and two interior nodes"));
    }
    for &t in &u.times {
        for i in 0..=m {
            let v = (test.phi)(line.d[i], t);
            if !(v >= 0.0) {
                return Err(Error::domain(format!("test field is negative or undefined at d = {}, t = {t}", line.d[i])));
            }
            if i + 1 >= m && v != 0.0 {
                return Err(Error::domain(format!("test field must vanish near the boundary, φ({}, {t}) = {v}", line.d[i])));
            }
        }
    }
    if line.d.iter().any(|&d| (test.phi)(d, u.times[0]) != 0.0) {
        return Err(Error::domain("test field must vanish on the first time level"));
    }
    let radius = |d: f64| match line.mesh.domain {
        Domain::Interval { .. } => 1.0,
        Domain::Ball { radius, dim } => (radius - d).powi(dim as i32 - 1),
    };
    let eps2 = 0.0;
    let p = prob.p;
    // cells between nodes e and e+1, the last cell is skipped
    let space = |row: &[f64], t: f64, with_time: bool| -> f64 {
        let mut acc = 0.0;
        for e in 0..m - 1 {
            let (d0, d1) = (line.d[e], line.d[e + 1]);
            let (u0, u1) = (row[e], row[e + 1]);
            let h = d0 - d1;
            let slope = (u0 - u1) / h;
            let mid = 0.5 * (d0 + d1);
            for (xi, w) in GAUSS3 {
                let d = mid + 0.5 * h * xi;
                let uq = u1 + slope * (d - d1);
                let phi = (test.phi)(d, t);
                let vol = 0.5 * h * w * radius(d);
                if !with_time {
                    acc += vol * uq * phi;
                    continue;
                }
                let (flux, _) = crate::fv::flux(p, eps2, slope);
                let b = prob.weight.eval(d + prob.distance_offset, t + prob.time_offset, p);
                let src = prob.source.as_ref().map_or(0.0, |s| s(d, t));
                let react = if phi == 0.0 { 0.0 } else { (b * prob.nl.eval(uq) - src) * phi };
                acc += vol * (flux * (test.phi_d)(d, t) + react - uq * (test.phi_t)(d, t));
            }
        }
        acc
    };
    let last = levels - 1;
    let mut total = space(&u.values[last], u.times[last], false);
    let mut row = vec![0.0; m + 1];
    for j in 1..levels {
        let (ta, tb) = (u.times[j - 1], u.times[j]);
        let dt = tb - ta;
        for (xi, w) in GAUSS2 {
            let theta = 0.5 * (1.0 + xi);
            let t = ta + theta * dt;
            for i in 0..=m {
                row[i] = (1.0 - theta) * u.values[j - 1][i] + theta * u.values[j][i];
            }
            total += 0.5 * dt * w * space(&row, t, true);
        }
    }
    if !total.is_finite() {
        return Err(Error::Numeric { at: u.times[last], message: "weak residual is not finite".into() });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::karamata::WeightKernel;

    fn unit(beta: f64) -> ParabolicProblem {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let w = AbsorptionWeight::constant(WeightKernel::constant(2.0).unwrap(), beta).unwrap();
        ParabolicProblem::new(dom, 2.0, Nonlinearity::power(2.0).unwrap(), w, 1.0).unwrap()
    }

    fn opts(n: usize) -> ParabolicOptions {
        ParabolicOptions { n_cells: n, ..Default::default() }
    }

    #[test]
    fn constant_state_follows_scalar_backward_euler() {
        let u0 = 5.0;
        let prob = unit(1.0).with_data(ParabolicData::Insulated { initial: Arc::new(move |_| u0) });
        let line = Line::new(&prob.domain, 20, 1.0).unwrap();
        for dt in [0.1, 0.05, 0.025] {
            let (u, _) = step_implicit(&prob, &line, &vec![u0; line.len()], 0.0, dt, &opts(20)).unwrap();
            // root of dt u^2 + u - u0 = 0
            let exact = (-1.0 + (1.0 + 4.0 * dt * u0).sqrt()) / (2.0 * dt);
            for v in &u {
                assert!((v - exact).abs() < 1e-7 * exact);
            }
            let ode = u0 / (1.0 + dt * u0);
            assert!((u[0] - ode).abs() < 2.0 * (dt * u0).powi(2) * u0);
        }
    }

    #[test]
    fn constant_state_is_fixed_without_absorption() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let nl = Nonlinearity::power(2.0).unwrap();
        let w = AbsorptionWeight::new(WeightKernel::constant(2.0).unwrap(), "0", |_, _| 0.0);
        let prob = ParabolicProblem::new(dom, 3.0, nl, w, 1.0).unwrap().with_data(ParabolicData::Given {
            initial: Arc::new(|_| 2.0),
            lateral: Arc::new(|_| 2.0),
        });
        let line = Line::new(&dom, 30, 2.0).unwrap();
        let (u, _) = step_implicit(&prob, &line, &vec![2.0; line.len()], 0.0, 0.1, &opts(30)).unwrap();
        assert!(u.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn steps_from_the_steady_state_do_not_move() {
        use crate::elliptic::{solve_elliptic_capped, EllipticOptions, EllipticProblem};
        let prob = unit(1.0);
        let eprob = EllipticProblem::new(prob.domain, 2.0, prob.nl.clone(), prob.weight.clone()).unwrap().with_cap(50.0);
        let z = solve_elliptic_capped(&eprob, &EllipticOptions { n_cells: 60, ..Default::default() }).unwrap();
        let pprob = prob.with_cap(50.0);
        let (u, _) = step_implicit(&pprob, &z.line, &z.values, 0.0, 0.01, &opts(60)).unwrap();
        let change = relative_change(&z.values, &u, |_| true);
        assert!(change < 1e-8, "{change}");
    }

    #[test]
    fn graded_grid_with_checkpoints() {
        let g = TimeGrid::graded(1.0, 10, 2.0).unwrap().with_checkpoints(&[0.1, 0.5]).unwrap().store_every(5, true);
        assert!(g.times.windows(2).all(|w| w[1] > w[0]));
        let st = g.stored_times();
        assert!(st.contains(&0.1) && st.contains(&0.5) && st.contains(&1.0) && st.contains(&0.0));
        assert!((g.times[1] - 0.01).abs() < 1e-15);
        let s = g.shifted(0.05, 4).unwrap();
        assert_eq!(s.times[0], 0.0);
        assert!(s.times.windows(2).all(|w| w[1] > w[0]));
        assert!(s.times.iter().any(|&t| (t - 0.45).abs() < 1e-15));
        assert!(TimeGrid::graded(1.0, 0, 2.0).is_err());
        assert!(TimeGrid::graded(1.0, 4, 2.0).unwrap().with_checkpoints(&[2.0]).is_err());
    }

    #[test]
    fn capped_solution_is_monotone_in_time_and_cap() {
        let grid = TimeGrid::graded(0.2, 100, 2.0).unwrap().with_checkpoints(&[0.1]).unwrap();
        let u100 = solve_capped(&unit(1.0).with_cap(100.0), &grid, &opts(40)).unwrap();
        let u200 = solve_capped(&unit(1.0).with_cap(200.0), &grid, &opts(40)).unwrap();
        assert!(u100.values[0].iter().all(|&v| v == 100.0));
        let m = u100.line.boundary_index();
        for w in u100.values.windows(2) {
            for i in 0..=m {
                assert!(w[1][i] <= w[0][i] * (1.0 + 1e-10));
            }
        }
        assert!(parabolic_comparison_check(&u200, &u100, 1e-10).unwrap().passed);
        assert!(!parabolic_comparison_check(&u100, &u200, 1e-10).unwrap().passed);
        // centre below the blow-down curve 1/t plus the boundary cap influence
        let c = u100.at(0.1).unwrap()[0];
        assert!(c < 100.0 && c > 1.0 / 0.1 * 0.9);
        let weak = solve_capped(&unit(4.0).with_cap(100.0), &grid, &opts(40)).unwrap();
        assert!(parabolic_comparison_check(&u100, &weak, 1e-10).unwrap().passed);
    }

    #[test]
    fn window_is_validated() {
        assert!(unit(1.0).with_window(0.95, false).is_err());
        assert!(unit(1.0).with_window(0.95, true).is_ok());
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let w = AbsorptionWeight::new(WeightKernel::constant(2.0).unwrap(), "1-t", |_, t| 1.0 - t);
        let prob = ParabolicProblem::new(dom, 2.0, Nonlinearity::power(2.0).unwrap(), w, 1.0).unwrap();
        assert!(prob.clone().with_window(0.5, false).is_ok());
        assert!(prob.with_window(1.0, true).is_err());
    }

    #[test]
    fn maximal_dominates_minimal_and_shrink_order() {
        let prob = unit(1.0);
        let grid = TimeGrid::graded(0.3, 300, 2.0).unwrap().with_checkpoints(&[0.1, 0.2]).unwrap().store_every(50, true);
        let o = opts(60);
        let stab = SpaceTimeStabilization { tol: 1e-3, d_min: 0.1, t_min: 0.1 };
        let ladder: Vec<f64> = (0..40).map(|j| 10.0 * 2f64.powi(j)).collect();
        let low = minimal_solution(&prob, &ladder, &grid, &o, &stab).unwrap();
        let line = o.line(&prob.domain).unwrap();
        let e1 = shrunk_minimal_solution(&prob, &line, 0.02, &ladder, &grid, &o, &stab).unwrap();
        let e2 = shrunk_minimal_solution(&prob, &line, 0.01, &ladder, &grid, &o, &stab).unwrap();
        assert!(parabolic_comparison_check(&e1.field, &e2.field, 1e-3).unwrap().passed);
        assert!(parabolic_comparison_check(&e2.field, &low.field, 1e-3).unwrap().passed);
        let max = maximal_solution(&prob, &[0.02, 0.01], &ladder, &grid, &o, &stab, None).unwrap();
        assert_eq!(max.eps, vec![0.02, 0.01]);
        assert!(max.field.values[0].iter().all(|v| v.is_infinite()));
        assert!(maximal_solution(&prob, &[0.01, 0.02], &ladder, &grid, &o, &stab, None).is_err());
    }

    #[test]
    fn weak_residual_rejects_bad_support_and_vanishes_for_zero_test() {
        let grid = TimeGrid::graded(0.1, 20, 1.0).unwrap();
        let prob = unit(1.0).with_cap(10.0);
        let u = solve_capped(&prob, &grid, &opts(20)).unwrap();
        assert_eq!(weak_form_residual(&u, &prob, &TestField::zero()).unwrap(), 0.0);
        let one: ScalarFn = Arc::new(|_| 1.0);
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let ident: ScalarFn = Arc::new(|t| t);
        let bad = TestField::separable(one.clone(), zero.clone(), ident, one.clone());
        assert!(matches!(weak_form_residual(&u, &prob, &bad), Err(Error::Domain(_))));
        let bump: ScalarFn = Arc::new(|d| if d > 0.2 { (d - 0.2).powi(2) } else { 0.0 });
        let late = TestField::separable(bump, zero, one.clone(), zero_fn());
        assert!(matches!(weak_form_residual(&u, &prob, &late), Err(Error::Domain(_))));
    }

    fn zero_fn() -> ScalarFn {
        Arc::new(|_| 0.0)
    }
}
