//! Conservative finite-volume discretisation of the 1D / radial p-Laplacian
//! and the damped Newton solver shared by the elliptic and parabolic solvers.
//!
//! Solutions are symmetric, so only the half line from the symmetry point
//! (index 0, zero flux) to the boundary (last index) is stored. The edge
//! flux is `m_e (g² + ε²)^{(p-2)/2} g` with `g` the difference quotient and
//! `m_e = r_e^{N-1}` at the edge midpoint.

use crate::error::{Error, Result};
use crate::geometry::{build_graded_mesh, Domain, Mesh};
use crate::nonlinearity::Nonlinearity;
use crate::numerics::solve_tridiagonal;

/// Half line from the symmetry point to the boundary.
#[derive(Debug, Clone)]
pub struct Line {
    /// Full mesh of the solved domain.
    pub mesh: Mesh,
    /// Metric dimension `N` (1 for intervals).
    pub dim: usize,
    /// Boundary distance per node, decreasing to 0 at the last node.
    pub d: Vec<f64>,
    /// `x` (left half of an interval) or `r`.
    pub coord: Vec<f64>,
    /// `h[e] = d[e] - d[e+1]`.
    pub h: Vec<f64>,
    /// `r^{N-1}` at edge midpoints.
    pub metric: Vec<f64>,
    /// Control volumes `∫ r^{N-1}` over each dual cell; the last one is the
    /// boundary half cell.
    pub volume: Vec<f64>,
}

/// `(b^N - a^N)/N` without cancellation for `a ≈ b`.
fn shell(a: f64, b: f64, n: usize) -> f64 {
    let sum: f64 = (0..n).map(|k| b.powi((n - 1 - k) as i32) * a.powi(k as i32)).sum();
    (b - a) * sum / n as f64
}

impl Line {
    /// Half line of a graded mesh; interval meshes get an even cell count so
    /// the midpoint is a node.
    pub fn new(domain: &Domain, n_cells: usize, grading: f64) -> Result<Self> {
        let n = match domain {
            Domain::Interval { .. } => n_cells + n_cells % 2,
            Domain::Ball { .. } => n_cells,
        };
        Line::from_mesh(build_graded_mesh(domain, n, grading)?)
    }

    pub fn from_mesh(mesh: Mesh) -> Result<Self> {
        let (d, coord, dim) = match mesh.domain {
            Domain::Interval { a, b } => {
                let mid = 0.5 * (a + b);
                let half: Vec<f64> = mesh.nodes.iter().copied().filter(|&x| x <= mid).collect();
                if (half.last().copied().unwrap_or(a) - mid).abs() > 1e-14 * (b - a) {
                    return Err(Error::domain("interval mesh has no node at the midpoint"));
                }
                let coord: Vec<f64> = half.iter().rev().copied().collect();
                let d: Vec<f64> = coord.iter().map(|&x| x - a).collect();
                (d, coord, 1)
            }
            Domain::Ball { radius, dim } => {
                let d: Vec<f64> = mesh.nodes.iter().map(|&r| radius - r).collect();
                (d, mesh.nodes.clone(), dim)
            }
        };
        let m = d.len() - 1;
        let h: Vec<f64> = d.windows(2).map(|w| w[0] - w[1]).collect();
        if h.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::domain("mesh nodes are not strictly ordered"));
        }
        let r = |i: usize| coord_radius(&coord, &d, i, dim);
        let faces: Vec<f64> = (0..m).map(|e| 0.5 * (r(e) + r(e + 1))).collect();
        let metric: Vec<f64> = faces.iter().map(|&f| f.powi(dim as i32 - 1)).collect();
        let volume: Vec<f64> = (0..=m)
            .map(|i| {
                let lo = if i == 0 { r(0) } else { faces[i - 1] };
                let hi = if i == m { r(m) } else { faces[i] };
                if dim == 1 {
                    (hi - lo).abs()
                } else {
                    shell(lo.min(hi), hi.max(lo), dim)
                }
            })
            .collect();
        Ok(Line { mesh, dim, d, coord, h, metric, volume })
    }

    /// Half line of `{d > eps}` that reuses the nodes of `self` lying
    /// clearly inside it and regrades the layer next to the new boundary
    /// with as many cells as `self` has between that layer and its own
    /// boundary. Returns the line and the count `k` of shared nodes: node
    /// `i < k` of the result is node `i` of `self`.
    pub fn restricted(&self, eps: f64) -> Result<(Self, usize)> {
        let m = self.boundary_index();
        let keep = (0..m).take_while(|&i| self.d[i] - eps > 0.25 * self.h[i]).count();
        if keep < 2 {
            return Err(Error::domain(format!("shrinking by {eps} leaves fewer than two interior nodes")));
        }
        let top = self.d[keep - 1] - eps;
        let cells = m + 1 - keep;
        let g = self.mesh.grading;
        // boundary distances in the shrunk domain, centre first
        let mut d: Vec<f64> = (0..keep).map(|i| self.d[i] - eps).collect();
        d.extend((1..cells).rev().map(|k| top * (k as f64 / cells as f64).powf(g)));
        d.push(0.0);
        let domain = self.mesh.domain.shrink(eps)?;
        let nodes: Vec<f64> = match domain {
            Domain::Interval { a, .. } => {
                let left: Vec<f64> = d.iter().rev().map(|&x| a + x).collect();
                let mid = left[left.len() - 1];
                left.iter().copied().chain(left.iter().rev().skip(1).map(|&x| 2.0 * mid - x)).collect()
            }
            Domain::Ball { radius, .. } => d.iter().map(|&x| radius - x).collect(),
        };
        let boundary_nodes = match domain {
            Domain::Interval { .. } => vec![0, nodes.len() - 1],
            Domain::Ball { .. } => vec![nodes.len() - 1],
        };
        Ok((Line::from_mesh(Mesh { domain, nodes, grading: g, boundary_nodes })?, keep))
    }

    /// Number of nodes on the half line.
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn boundary_index(&self) -> usize {
        self.d.len() - 1
    }

    pub fn min_spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Spacing around node `i` relative to its boundary distance.
    pub fn relative_spacing(&self, i: usize) -> f64 {
        let left = if i > 0 { self.h[i - 1] } else { 0.0 };
        let right = if i < self.h.len() { self.h[i] } else { 0.0 };
        left.max(right) / self.d[i]
    }
}

/// Radial variable measured from the symmetry point.
fn coord_radius(coord: &[f64], d: &[f64], i: usize, dim: usize) -> f64 {
    if dim == 1 {
        // distance from the midpoint; only differences matter
        d[0] - d[i]
    } else {
        coord[i]
    }
}

/// Condition at the last node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Dirichlet(f64),
    /// Zero flux, used for sanity checks without boundary forcing.
    Insulated,
}

/// One nonlinear system `-Δ_p u + mass (u - prev) + b f(u) = src`.
#[derive(Clone, Copy)]
pub struct NodalSystem<'a> {
    pub line: &'a Line,
    pub p: f64,
    /// Gradient regularisation `ε`.
    pub eps_reg: f64,
    pub nl: &'a Nonlinearity,
    /// `b` per node (only interior values are used).
    pub weight: &'a [f64],
    pub source: Option<&'a [f64]>,
    /// `1/Δt`, zero for elliptic problems.
    pub mass: f64,
    pub prev: Option<&'a [f64]>,
    pub boundary: Boundary,
}

#[inline]
pub(crate) fn flux(p: f64, eps2: f64, g: f64) -> (f64, f64) {
    if p == 2.0 {
        return (g, 1.0);
    }
    let a = g * g + eps2;
    let f = a.powf(0.5 * (p - 2.0)) * g;
    let df = a.powf(0.5 * (p - 4.0)) * ((p - 1.0) * g * g + eps2);
    (f, df)
}

struct Assembly {
    residual: Vec<f64>,
    scale: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl NodalSystem<'_> {
    /// Unknown count: all nodes but a Dirichlet boundary.
    pub fn unknowns(&self) -> usize {
        match self.boundary {
            Boundary::Dirichlet(_) => self.line.len() - 1,
            Boundary::Insulated => self.line.len(),
        }
    }

    /// Full nodal vector with the boundary value applied.
    pub fn with_boundary(&self, mut u: Vec<f64>) -> Vec<f64> {
        if let Boundary::Dirichlet(v) = self.boundary {
            let m = self.line.boundary_index();
            u[m] = v;
        }
        u
    }

    fn assemble(&self, u: &[f64], jacobian: bool) -> Assembly {
        let line = self.line;
        let n = self.unknowns();
        let eps2 = self.eps_reg * self.eps_reg;
        let edges = line.h.len();
        let mut fl = vec![0.0; edges];
        let mut dfl = vec![0.0; edges];
        // size of the terms cancelling inside each difference quotient
        let mut mag = vec![0.0; edges];
        for e in 0..edges {
            let g = (u[e + 1] - u[e]) / line.h[e];
            let (f, df) = flux(self.p, eps2, g);
            fl[e] = line.metric[e] * f;
            dfl[e] = line.metric[e] * df / line.h[e];
            let coeff = if g == 0.0 { df } else { f / g };
            mag[e] = line.metric[e] * coeff * (u[e].abs() + u[e + 1].abs()) / line.h[e];
        }
        let mut a = Assembly {
            residual: vec![0.0; n],
            scale: vec![0.0; n],
            lower: vec![0.0; if jacobian { n } else { 0 }],
            diag: vec![0.0; if jacobian { n } else { 0 }],
            upper: vec![0.0; if jacobian { n } else { 0 }],
        };
        for i in 0..n {
            let left = if i > 0 { fl[i - 1] } else { 0.0 };
            let right = if i < edges { fl[i] } else { 0.0 };
            let v = line.volume[i];
            let b = self.weight[i];
            let ui = u[i];
            let react = b * self.nl.eval(ui);
            let src = self.source.map_or(0.0, |s| s[i]);
            let prev = self.prev.map_or(0.0, |s| s[i]);
            let mass = self.mass * (ui - prev);
            a.residual[i] = left - right + v * (mass + react - src);
            let terms = if i > 0 { mag[i - 1] } else { 0.0 } + if i < edges { mag[i] } else { 0.0 };
            a.scale[i] = terms + v * (self.mass * (ui.abs() + prev.abs()) + react.abs() + src.abs()) + f64::MIN_POSITIVE;
            if jacobian {
                let dl = if i > 0 { dfl[i - 1] } else { 0.0 };
                let dr = if i < edges { dfl[i] } else { 0.0 };
                a.lower[i] = -dl;
                a.upper[i] = -dr;
                a.diag[i] = dl + dr + v * (self.mass + b * self.nl.derivative(ui));
            }
        }
        a
    }

    /// Scaled residual per unknown: `|R_i|` over the summed magnitudes of the
    /// nodal values entering the flux differences and of the volume terms.
    pub fn scaled_residual(&self, u: &[f64]) -> Vec<f64> {
        let a = self.assemble(u, false);
        a.residual.iter().zip(&a.scale).map(|(r, s)| (r / s).abs()).collect()
    }

    /// Unscaled residual per unknown.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        self.assemble(u, false).residual
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Bound on the max-norm of the scaled residual.
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 200, max_backtracks: 12 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    /// Components pulled back after a step would have made them non-positive.
    pub projections: usize,
}

/// Damped Newton iteration from `guess` (a full nodal vector).
pub fn newton(sys: &NodalSystem<'_>, guess: Vec<f64>, opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonReport)> {
    let n = sys.unknowns();
    let mut u = sys.with_boundary(guess);
    let mut report = NewtonReport::default();
    let mut a = sys.assemble(&u, true);
    let merit = |a: &Assembly| a.residual.iter().zip(&a.scale).fold(0.0_f64, |m, (r, s)| m.max((r / s).abs()));
    let mut current = merit(&a);
    while current > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::solver(format!(
                "Newton did not converge in {} iterations (scaled residual {current:.3e})",
                opts.max_iter
            )));
        }
        report.iterations += 1;
        let rhs: Vec<f64> = a.residual.iter().map(|r| -r).collect();
        let delta = solve_tridiagonal(&a.lower, &a.diag, &a.upper, &rhs)
            .ok_or_else(|| Error::solver("singular Newton matrix"))?;
        if delta.iter().any(|x| !x.is_finite()) {
            return Err(Error::solver("non-finite Newton update"));
        }
        let trial = |lambda: f64, count: &mut usize| -> Vec<f64> {
            let mut v = u.clone();
            for i in 0..n {
                let next = u[i] + lambda * delta[i];
                v[i] = if next > 0.0 {
                    next
                } else {
                    *count += 1;
                    0.1 * u[i]
                };
            }
            v
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let mut count = 0;
            let v = trial(lambda, &mut count);
            let av = sys.assemble(&v, true);
            let m = merit(&av);
            if m.is_finite() && m < (1.0 - 1e-4 * lambda) * current {
                report.projections += count;
                accepted = Some((v, av, m));
                break;
            }
            lambda *= 0.5;
        }
        let (v, av, m) = match accepted {
            Some(x) => x,
            None => {
                // no decrease in the merit: take the full step
                let mut count = 0;
                let v = trial(1.0, &mut count);
                report.projections += count;
                let av = sys.assemble(&v, true);
                let m = merit(&av);
                if !m.is_finite() {
                    return Err(Error::solver("Newton step produced a non-finite residual"));
                }
                (v, av, m)
            }
        };
        u = v;
        a = av;
        current = m;
    }
    report.residual = current;
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restricted_line_shares_interior_nodes() {
        for dom in [Domain::interval(0.0, 1.0).unwrap(), Domain::ball(1.0, 3).unwrap()] {
            let line = Line::new(&dom, 40, 2.0).unwrap();
            let eps = 0.01;
            let (sub, keep) = line.restricted(eps).unwrap();
            let m = sub.boundary_index();
            assert_eq!(sub.d[m], 0.0);
            assert_eq!(sub.len(), line.len());
            for i in 0..keep {
                assert!((sub.d[i] + eps - line.d[i]).abs() < 1e-14);
            }
            for e in 0..keep - 1 {
                assert!((sub.metric[e] - line.metric[e]).abs() < 1e-12);
            }
            assert!(sub.h.iter().all(|&h| h > 0.0));
        }
        let line = Line::new(&Domain::interval(0.0, 1.0).unwrap(), 8, 1.0).unwrap();
        assert!(line.restricted(0.45).is_err());
    }

    fn zero() -> Nonlinearity {
        Nonlinearity::power(2.0).unwrap()
    }

    #[test]
    fn line_layout() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let line = Line::new(&dom, 8, 1.0).unwrap();
        assert_eq!(line.len(), 5);
        assert_eq!(line.d, vec![0.5, 0.375, 0.25, 0.125, 0.0]);
        let total: f64 = line.volume.iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
        let ball = Line::new(&Domain::ball(1.0, 3).unwrap(), 16, 2.0).unwrap();
        let total: f64 = ball.volume.iter().sum();
        assert!((total - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(ball.d[0], 1.0);
        assert_eq!(*ball.d.last().unwrap(), 0.0);
    }

    fn solve_linear(domain: Domain, grading: f64, src: f64) -> (Line, Vec<f64>) {
        let line = Line::new(&domain, 40, grading).unwrap();
        let nl = zero();
        let w = vec![0.0; line.len()];
        let s = vec![src; line.len()];
        let sys = NodalSystem {
            line: &line,
            p: 2.0,
            eps_reg: 0.0,
            nl: &nl,
            weight: &w,
            source: Some(&s),
            mass: 0.0,
            prev: None,
            boundary: Boundary::Dirichlet(0.0),
        };
        let (u, rep) = newton(&sys, vec![1.0; line.len()], &NewtonOptions::default()).unwrap();
        assert!(rep.iterations <= 3);
        (line, u)
    }

    #[test]
    fn quadratics_are_reproduced_exactly() {
        // -u'' = 2, u = x(1-x)
        let (line, u) = solve_linear(Domain::interval(0.0, 1.0).unwrap(), 2.0, 2.0);
        for (x, v) in line.coord.iter().zip(&u) {
            assert!((v - x * (1.0 - x)).abs() < 1e-12, "x={x}");
        }
        // -Δu = 2N, u = 1 - r²
        for n in [2, 3] {
            let (line, u) = solve_linear(Domain::ball(1.0, n).unwrap(), 1.5, 2.0 * n as f64);
            for (r, v) in line.coord.iter().zip(&u) {
                assert!((v - (1.0 - r * r)).abs() < 1e-12, "N={n} r={r}");
            }
        }
    }

    #[test]
    fn p_laplacian_flux_derivative() {
        for p in [1.5, 2.0, 3.0, 4.5] {
            for g in [-3.0, -0.2, 0.0, 0.7, 5.0] {
                let eps2 = 1e-4;
                let (_, d) = flux(p, eps2, g);
                let h = 1e-6;
                let fd = (flux(p, eps2, g + h).0 - flux(p, eps2, g - h).0) / (2.0 * h);
                assert!((fd - d).abs() < 1e-6 * d.abs().max(1.0), "p={p} g={g}");
            }
        }
    }

    #[test]
    fn newton_converges_for_p_laplacian_with_absorption() {
        let line = Line::new(&Domain::interval(0.0, 1.0).unwrap(), 64, 2.0).unwrap();
        let nl = Nonlinearity::power(4.0).unwrap();
        let w = vec![1.0; line.len()];
        let sys = NodalSystem {
            line: &line,
            p: 3.0,
            eps_reg: line.min_spacing(),
            nl: &nl,
            weight: &w,
            source: None,
            mass: 0.0,
            prev: None,
            boundary: Boundary::Dirichlet(50.0),
        };
        let (u, rep) = newton(&sys, vec![50.0; line.len()], &NewtonOptions::default()).unwrap();
        assert!(rep.residual <= 1e-10);
        assert!(u.iter().all(|&v| v > 0.0 && v <= 50.0));
        assert!(u.windows(2).all(|w| w[1] >= w[0]));
    }
}
