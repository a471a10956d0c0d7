//! The companion elliptic problem `Δ_p z = b(x) f(z)` with finite boundary
//! caps, its blow-up limit along a cap ladder, and the nodal comparison
//! oracle.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fv::{newton, Boundary, Line, NewtonOptions, NewtonReport, NodalSystem};
use crate::geometry::Domain;
use crate::karamata::AbsorptionWeight;
use crate::nonlinearity::{Nonlinearity, ScalarFn};

/// Boundary data: a finite cap `n`, or `+∞` reached through a cap ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMarker {
    Cap(f64),
    /// Limit of a cap ladder; `last_cap` is the cap of the returned field.
    BlowUp { last_cap: f64 },
}

/// Nodal values on a half line.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub line: Arc<Line>,
    pub values: Vec<f64>,
    pub marker: BoundaryMarker,
}

impl GridFunction {
    /// Interior nodes (all but the boundary node).
    pub fn interior(&self) -> std::ops::Range<usize> {
        0..self.line.boundary_index()
    }
}

#[derive(Clone)]
pub struct EllipticProblem {
    pub domain: Domain,
    pub p: f64,
    pub nl: Nonlinearity,
    /// `b = β(d) k^p(d)`, with `β` read at `t = 0`.
    pub weight: AbsorptionWeight,
    /// Optional right-hand side as a function of the boundary distance.
    pub source: Option<ScalarFn>,
    pub boundary: BoundaryMarker,
}

impl std::fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("domain", &self.domain)
            .field("p", &self.p)
            .field("nl", &self.nl)
            .field("weight", &self.weight)
            .field("boundary", &self.boundary)
            .finish()
    }
}

impl EllipticProblem {
    pub fn new(domain: Domain, p: f64, nl: Nonlinearity, weight: AbsorptionWeight) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::config(format!("p must exceed 1, got {p}")));
        }
        Ok(EllipticProblem { domain, p, nl, weight, source: None, boundary: BoundaryMarker::BlowUp { last_cap: f64::NAN } })
    }

    pub fn with_cap(&self, n: f64) -> Self {
        EllipticProblem { boundary: BoundaryMarker::Cap(n), ..self.clone() }
    }

    pub fn with_source(mut self, source: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.source = Some(Arc::new(source));
        self
    }

    fn weights(&self, line: &Line) -> Vec<f64> {
        let m = line.boundary_index();
        line.d
            .iter()
            .enumerate()
            .map(|(i, &d)| if i == m { 0.0 } else { self.weight.eval(d, 0.0, self.p) })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticOptions {
    pub n_cells: usize,
    pub grading: f64,
    /// Gradient regularisation; the smallest mesh spacing when absent.
    pub eps_reg: Option<f64>,
    pub newton: NewtonOptions,
    /// Cap continuation restarts after a failed Newton solve.
    pub max_restarts: usize,
}

impl Default for EllipticOptions {
    fn default() -> Self {
        EllipticOptions { n_cells: 2000, grading: 3.0, eps_reg: None, newton: NewtonOptions::default(), max_restarts: 2 }
    }
}

impl EllipticOptions {
    pub fn line(&self, domain: &Domain) -> Result<Arc<Line>> {
        Ok(Arc::new(Line::new(domain, self.n_cells, self.grading)?))
    }
}

/// Discrete capped solve on a prepared line, from `guess` (or the constant
/// cap, an upper solution when there is no source).
pub fn solve_capped_on(
    prob: &EllipticProblem,
    line: &Arc<Line>,
    opts: &EllipticOptions,
    guess: Option<Vec<f64>>,
) -> Result<(GridFunction, NewtonReport)> {
    let BoundaryMarker::Cap(n) = prob.boundary else {
        return Err(Error::domain("capped solve requires a finite boundary cap"));
    };
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain(format!("cap must be positive and finite, got {n}")));
    }
    let weight = prob.weights(line);
    let source: Option<Vec<f64>> = prob.source.as_ref().map(|s| line.d.iter().map(|&d| s(d)).collect());
    let eps_reg = opts.eps_reg.unwrap_or_else(|| line.min_spacing());
    let solve = |cap: f64, guess: Vec<f64>| {
        let sys = NodalSystem {
            line,
            p: prob.p,
            eps_reg,
            nl: &prob.nl,
            weight: &weight,
            source: source.as_deref(),
            mass: 0.0,
            prev: None,
            boundary: Boundary::Dirichlet(cap),
        };
        newton(&sys, guess, &opts.newton)
    };
    let first = solve(n, guess.unwrap_or_else(|| vec![n; line.len()]));
    let mut last_err = match first {
        Ok((values, rep)) => return Ok((GridFunction { line: line.clone(), values, marker: prob.boundary }, rep)),
        Err(e) => e,
    };
    // Restart by continuation in the cap from a much smaller value.
    for restart in 1..=opts.max_restarts {
        let steps = 10 * restart;
        let mut cap = n / 2f64.powi(steps as i32);
        let mut u = vec![cap; line.len()];
        let mut total = NewtonReport::default();
        let mut ok = true;
        for _ in 0..=steps {
            match solve(cap, u.clone()) {
                Ok((v, rep)) => {
                    total.iterations += rep.iterations;
                    total.projections += rep.projections;
                    total.residual = rep.residual;
                    u = v;
                }
                Err(e) => {
                    last_err = e;
                    ok = false;
                    break;
                }
            }
            cap = (2.0 * cap).min(n);
            let m = line.boundary_index();
            u[m] = cap;
        }
        if ok {
            return Ok((GridFunction { line: line.clone(), values: u, marker: prob.boundary }, total));
        }
    }
    Err(Error::solver(format!(
        "capped elliptic solve failed for n = {n:e} after {} restarts: {last_err}",
        opts.max_restarts
    )))
}

/// `Δ_p w = b f(w)` with `w = n` on the boundary.
pub fn solve_elliptic_capped(prob: &EllipticProblem, opts: &EllipticOptions) -> Result<GridFunction> {
    let line = opts.line(&prob.domain)?;
    Ok(solve_capped_on(prob, &line, opts, None)?.0)
}

/// `10 · 2^j`, `j = 0..count`.
pub fn default_cap_ladder(count: usize) -> Vec<f64> {
    (0..count).map(|j| 10.0 * 2f64.powi(j as i32)).collect()
}

/// Stopping rule for cap ladders: the largest relative nodal change between
/// consecutive rungs, over nodes at boundary distance at least `d_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub tol: f64,
    pub d_min: f64,
}

pub(crate) fn relative_change(a: &[f64], b: &[f64], mask: impl Fn(usize) -> bool) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(i, _)| mask(*i))
        .map(|(_, (x, y))| ((y - x) / y.abs().max(f64::MIN_POSITIVE)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct BlowupSolution {
    pub field: GridFunction,
    /// Caps solved, in order.
    pub caps: Vec<f64>,
    /// Relative change entering each rung after the first.
    pub changes: Vec<f64>,
}

/// Monotone limit of capped solutions along an increasing cap ladder.
pub fn solve_elliptic_blowup(
    prob: &EllipticProblem,
    n_ladder: &[f64],
    opts: &EllipticOptions,
    stab: &Stabilization,
) -> Result<BlowupSolution> {
    if n_ladder.len() < 2 || n_ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("cap ladder must be increasing with at least two rungs"));
    }
    let line = opts.line(&prob.domain)?;
    let mask = |i: usize| i < line.boundary_index() && line.d[i] >= stab.d_min;
    let mut prev: Option<GridFunction> = None;
    let mut caps = Vec::new();
    let mut changes = Vec::new();
    for &n in n_ladder {
        let (field, _) = solve_capped_on(&prob.with_cap(n), &line, opts, None)?;
        caps.push(n);
        if let Some(p) = &prev {
            let change = relative_change(&p.values, &field.values, mask);
            changes.push(change);
            if change < stab.tol {
                let field = GridFunction { marker: BoundaryMarker::BlowUp { last_cap: n }, ..field };
                return Ok(BlowupSolution { field, caps, changes });
            }
        }
        prev = Some(field);
    }
    Err(Error::solver(format!(
        "cap ladder exhausted at n = {:e} without interior stabilization (last change {:.3e} > {:e}); \
         increase the mesh grading or extend the ladder",
        caps.last().unwrap(),
        changes.last().copied().unwrap_or(f64::NAN),
        stab.tol
    )))
}

/// Outcome of a nodal ordering check `u₁ ≥ u₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonVerdict {
    pub passed: bool,
    /// Largest `(u₂ - u₁) / max(|u₁|, |u₂|, 1)` over the compared nodes,
    /// clipped at 0.
    pub max_violation: f64,
    /// Boundary distance of the worst node.
    pub at: f64,
}

pub(crate) fn ordering(u1: &[f64], u2: &[f64], d: &[f64], tol: f64) -> ComparisonVerdict {
    let mut worst = 0.0;
    let mut at = f64::NAN;
    for ((a, b), &di) in u1.iter().zip(u2).zip(d) {
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        let v = (b - a) / a.abs().max(b.abs()).max(1.0);
        if v > worst {
            worst = v;
            at = di;
        }
    }
    ComparisonVerdict { passed: worst <= tol, max_violation: worst, at }
}

/// Nodal ordering `u₁ ≥ u₂ - tol` of an upper and a lower solution.
pub fn elliptic_comparison_check(u1: &GridFunction, u2: &GridFunction, tol: f64) -> Result<ComparisonVerdict> {
    if u1.values.len() != u2.values.len() || u1.line.d != u2.line.d {
        return Err(Error::domain("compared fields live on different meshes"));
    }
    Ok(ordering(&u1.values, &u2.values, &u1.line.d, tol))
}

/// Spread of independent blow-up solves of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessSpread {
    /// Largest `(max - min)/min` across the solves at nodes with `d ≥ d_min`.
    pub spread: f64,
    /// Uniqueness is only claimed for `p = 2` with `ℓ ≠ 0`; elsewhere the
    /// spread is reported without a verdict.
    pub asserted: bool,
    pub note: String,
}

/// Compare blow-up solutions obtained independently (different cap ladders,
/// say) on a common mesh.
pub fn elliptic_uniqueness_spread(prob: &EllipticProblem, solves: &[GridFunction], d_min: f64) -> Result<UniquenessSpread> {
    let Some(first) = solves.first() else {
        return Err(Error::domain("no solutions to compare"));
    };
    if solves.iter().any(|u| u.line.d != first.line.d) {
        return Err(Error::domain("compared fields live on different meshes"));
    }
    let mut spread = 0.0_f64;
    for i in first.interior().filter(|&i| first.line.d[i] >= d_min) {
        let (lo, hi) = solves.iter().map(|u| u.values[i]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        spread = spread.max((hi - lo) / lo.abs().max(f64::MIN_POSITIVE));
    }
    let ell = prob.weight.kernel.ell;
    let asserted = prob.p == 2.0 && ell != 0.0;
    let note = if asserted {
        "p = 2: uniqueness asserted".to_string()
    } else {
        format!("p = {}: spread reported, uniqueness not asserted", prob.p)
    };
    Ok(UniquenessSpread { spread, asserted, note })
}

/// Signed residual `-Δ_p u + b f(u) - src` per interior node, divided by the
/// magnitude of its terms; nonnegative for upper solutions.
pub fn scaled_residual(prob: &EllipticProblem, u: &GridFunction, eps_reg: Option<f64>) -> Vec<f64> {
    let line = &u.line;
    let weight = prob.weights(line);
    let source: Option<Vec<f64>> = prob.source.as_ref().map(|s| line.d.iter().map(|&d| s(d)).collect());
    let m = line.boundary_index();
    let sys = NodalSystem {
        line,
        p: prob.p,
        eps_reg: eps_reg.unwrap_or_else(|| line.min_spacing()),
        nl: &prob.nl,
        weight: &weight,
        source: source.as_deref(),
        mass: 0.0,
        prev: None,
        boundary: Boundary::Dirichlet(u.values[m]),
    };
    let raw = sys.residual(&u.values);
    let mag = sys.scaled_residual(&u.values);
    raw.iter().zip(mag).map(|(r, s)| if *r == 0.0 { 0.0 } else { r.signum() * s }).collect()
}
