//! Empirical asymptotic constants of computed fields and their comparison
//! with the predicted values: boundary rates `u/φ(K(d))`, initial rates
//! `u/τ(t)`, the two-sided envelope `ξ# + φ(K(d))`, the gap between maximal
//! and minimal solutions, and the scaling of boundary constants in `β`.

use crate::blowdown::BlowdownCurve;
use crate::elliptic::{EllipticProblem, GridFunction};
use crate::error::{Error, Result};
use crate::extrapolation::extrapolate_with_floor;
use crate::fv::Line;
use crate::geometry::Domain;
use crate::karamata::{boundary_constant, capital_k, effective_absorption_fn, r_index, Monotone, PhiProfile, WeightKernel};
use crate::nonlinearity::{check_conditions, ratio_increasing, Absorption, ConditionOptions, Nonlinearity};
use crate::numerics::log_space;
use crate::parabolic::{ParabolicProblem, SpaceTimeField};

/// Default pass tolerance for constants measured on PDE fields.
pub const PDE_TOLERANCE: f64 = 0.05;
/// Default pass tolerance for constants measured by quadrature.
pub const ODE_TOLERANCE: f64 = 1e-3;

/// A measured asymptotic constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub quantity: String,
    /// Predicted constant; NaN when the theory gives none.
    pub predicted: f64,
    /// `(ladder variable, measured ratio)` in ladder order.
    pub ladder: Vec<(f64, f64)>,
    /// Last three accelerated iterates.
    pub iterates: Vec<f64>,
    pub extrapolated: f64,
    pub method: String,
    pub converged: bool,
    pub rel_error: f64,
    pub tolerance: f64,
    /// Whether the theory asserts the checked statement for these data.
    pub asserted: bool,
    pub passed: bool,
    pub note: String,
}

impl RateReport {
    fn from_ladder(quantity: &str, predicted: f64, ladder: Vec<(f64, f64)>, tolerance: f64, floor: f64) -> Self {
        let ys: Vec<f64> = ladder.iter().map(|l| l.1).collect();
        let ex = extrapolate_with_floor(&ys, floor);
        let rel_error = ((ex.limit - predicted) / predicted).abs();
        let finite = ys.iter().all(|y| y.is_finite() && *y > 0.0);
        RateReport {
            quantity: quantity.into(),
            predicted,
            ladder,
            iterates: ex.iterates,
            extrapolated: ex.limit,
            method: ex.method.to_string(),
            converged: ex.converged && finite,
            rel_error,
            tolerance,
            asserted: true,
            passed: ex.converged && finite && rel_error <= tolerance,
            note: String::new(),
        }
    }
}

/// Ladder and tolerance settings for rate extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    pub tolerance: f64,
    /// Ladder values closer than `noise_fraction · tolerance` count as
    /// converged.
    pub noise_fraction: f64,
    /// First boundary distance of the `d` ladder, as a fraction of the
    /// inradius.
    pub d_start: f64,
    /// Smallest admissible boundary distance (the stabilized region).
    pub d_end: f64,
    /// Nodes with spacing above this fraction of `d` are not used.
    pub max_rel_spacing: f64,
    /// First and smallest times of the `t` ladder.
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            tolerance: PDE_TOLERANCE,
            noise_fraction: 0.1,
            d_start: 0.16,
            d_end: 1e-3,
            max_rel_spacing: 0.1,
            t_start: 0.1,
            t_end: 1e-3,
        }
    }
}

impl RateOptions {
    fn floor(&self) -> f64 {
        self.noise_fraction * self.tolerance
    }
}

/// `φ(K(d))` for a problem's nonlinearity and kernel.
pub struct BoundaryProfile {
    profile: PhiProfile,
    kernel: WeightKernel,
}

impl BoundaryProfile {
    pub fn new(nl: &Nonlinearity, p: f64, kernel: &WeightKernel) -> Result<Self> {
        Ok(BoundaryProfile { profile: PhiProfile::new(nl, p)?, kernel: kernel.clone() })
    }

    pub fn eval(&self, d: f64) -> Result<f64> {
        self.profile.phi(capital_k(&self.kernel, d)?)
    }
}

/// Ratio `values/reference` sampled at `d_k = d_start 2^{-k}` down to
/// `d_end`, interpolated linearly in `ln d` between nodes; the ladder stops
/// where the mesh no longer resolves `d`.
fn distance_ladder(
    line: &Line,
    values: &[f64],
    reference: impl Fn(f64) -> Result<f64>,
    opts: &RateOptions,
    inradius: f64,
) -> Result<Vec<(f64, f64)>> {
    let m = line.boundary_index();
    let mut out = Vec::new();
    let mut d = opts.d_start * inradius;
    while d >= opts.d_end * (1.0 - 1e-12) {
        // nodes i+1 (closer to the boundary) and i bracket d
        let Some(i) = (0..m).find(|&i| line.d[i] >= d && line.d[i + 1] < d) else { break };
        if line.relative_spacing(i + 1).max(line.relative_spacing(i)) > opts.max_rel_spacing || i + 1 == m {
            break;
        }
        let ratio = |j: usize| -> Result<f64> { Ok(values[j] / reference(line.d[j])?) };
        let (r0, r1) = (ratio(i)?, ratio(i + 1)?);
        let w = (d.ln() - line.d[i + 1].ln()) / (line.d[i].ln() - line.d[i + 1].ln());
        out.push((d, r1 + w * (r0 - r1)));
        d *= 0.5;
    }
    if out.len() < 3 {
        return Err(Error::domain(format!(
            "only {} resolved near-boundary rungs between d = {:e} and {:e}; refine the mesh or raise its grading",
            out.len(),
            opts.d_start * inradius,
            opts.d_end
        )));
    }
    Ok(out)
}

fn predicted_boundary_constant(nl: &Nonlinearity, p: f64, kernel: &WeightKernel, beta: f64) -> Result<f64> {
    boundary_constant(nl.rho, p, kernel.ell, beta)
}

/// `z(x)/φ(K(d(x)))` as `d → 0` for an elliptic blow-up solution.
pub fn elliptic_boundary_rate(z: &GridFunction, prob: &EllipticProblem, opts: &RateOptions) -> Result<RateReport> {
    let beta = prob.weight.boundary_beta(0.0);
    let predicted = predicted_boundary_constant(&prob.nl, prob.p, &prob.weight.kernel, beta)?;
    let bp = BoundaryProfile::new(&prob.nl, prob.p, &prob.weight.kernel)?;
    let ladder = distance_ladder(&z.line, &z.values, |d| bp.eval(d), opts, prob.domain.inradius())?;
    let mut rep = RateReport::from_ladder("elliptic_boundary_rate", predicted, ladder, opts.tolerance, opts.floor());
    rep.note = format!("beta(y) = {beta}, l = {}", prob.weight.kernel.ell);
    Ok(rep)
}

/// `u(x, t₀)/φ(K(d(x)))` as `d → 0` at a stored level `t₀`.
pub fn boundary_rate(u: &SpaceTimeField, t0: f64, prob: &ParabolicProblem, opts: &RateOptions) -> Result<RateReport> {
    if !(t0 > 0.0) || t0 > prob.t_star * (1.0 + 1e-12) {
        return Err(Error::domain(format!("t0 = {t0} lies outside the solved window (0, {}]", prob.t_star)));
    }
    let beta = prob.weight.boundary_beta(t0);
    let predicted = predicted_boundary_constant(&prob.nl, prob.p, &prob.weight.kernel, beta)?;
    let bp = BoundaryProfile::new(&prob.nl, prob.p, &prob.weight.kernel)?;
    let row = u.at(t0)?;
    let ladder = distance_ladder(&u.line, row, |d| bp.eval(d), opts, prob.domain.inradius())?;
    let mut rep = RateReport::from_ladder(&format!("boundary_rate(t0={t0})"), predicted, ladder, opts.tolerance, opts.floor());
    rep.note = format!("beta(y, t0) = {beta}, l = {}", prob.weight.kernel.ell);
    Ok(rep)
}

/// `τ` with `τ' = -b(x₀, 0) f(τ)`, `τ(0) = ∞`.
pub fn tau_curve(prob: &ParabolicProblem, d0: f64) -> Result<BlowdownCurve> {
    let b0 = prob.weight.eval(d0, 0.0, prob.p);
    let f = prob.nl.absorption();
    let g = Absorption::new(format!("{b0}*{}", f.label), f.index, move |w| b0 * f.eval(w));
    BlowdownCurve::new(&g)
}

/// Whether the lower initial-rate bound is covered by the theory:
/// `p > 2N/(N+2)` with `N = 1` for intervals, and `f(s)/s` increasing.
pub fn initial_lower_bound_applies(domain: &Domain, p: f64, nl: &Nonlinearity) -> bool {
    let n = domain.metric_dim() as f64;
    p > 2.0 * n / (n + 2.0) && ratio_increasing(nl, 1.0, &log_space(1e-3, 1e8, 64), 1e-10)
}

/// `u(x₀, t)/τ(t)` as `t → 0` along `t_k = t_start 2^{-k}` (stored levels
/// only). When the lower bound is not covered by the theory only
/// `lim sup ≤ 1` is checked.
pub fn initial_rate(u: &SpaceTimeField, d0: f64, prob: &ParabolicProblem, opts: &RateOptions) -> Result<RateReport> {
    let inradius = prob.domain.inradius();
    if !(d0 >= 0.25 * inradius) || d0 > inradius * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "x0 at boundary distance {d0} is too close to the boundary (need at least {}); \
             the boundary layer would contaminate the initial layer",
            0.25 * inradius
        )));
    }
    let i = u.node_near(d0);
    let tau = tau_curve(prob, u.line.d[i])?;
    let mut ladder = Vec::new();
    let mut t = opts.t_start;
    while t >= opts.t_end * (1.0 - 1e-12) {
        let row = u.at(t)?;
        ladder.push((t, row[i] / tau.eval(t)?));
        t *= 0.5;
    }
    if ladder.len() < 3 {
        return Err(Error::domain("initial-rate ladder needs at least three stored levels"));
    }
    let mut rep = RateReport::from_ladder(&format!("initial_rate(d={:.4})", u.line.d[i]), 1.0, ladder, opts.tolerance, opts.floor());
    if !initial_lower_bound_applies(&prob.domain, prob.p, &prob.nl) {
        rep.asserted = false;
        rep.passed = rep.converged && rep.extrapolated <= 1.0 + opts.tolerance;
        rep.note = "lower bound not covered (p <= 2N/(N+2) or f(s)/s not increasing); only limsup <= 1 checked".into();
    }
    Ok(rep)
}

/// `2 u_fine - u_coarse` on the shared stored levels of two backward-Euler
/// runs whose step counts differ by a factor 2 over the same graded map.
pub fn richardson_in_time(coarse: &SpaceTimeField, fine: &SpaceTimeField) -> Result<SpaceTimeField> {
    if coarse.line.d != fine.line.d {
        return Err(Error::domain("time extrapolation needs fields on the same nodes"));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (j, &t) in coarse.times.iter().enumerate() {
        if let Some(k) = fine.level(t) {
            times.push(t);
            values.push(coarse.values[j].iter().zip(&fine.values[k]).map(|(c, f)| 2.0 * f - c).collect());
        }
    }
    if times.is_empty() {
        return Err(Error::domain("fields share no stored levels"));
    }
    Ok(SpaceTimeField { line: fine.line.clone(), times, values, provenance: fine.provenance })
}

/// Envelopes `ξ#(t) + φ(K(d))` bounding the minimal and maximal solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    /// `sup ū / (ξ_up + φ(K(d)))` over the checked region.
    pub upper_sup: f64,
    /// `inf u̲ / (ξ_low + φ(K(d)))` over the checked region.
    pub lower_inf: f64,
    /// Names of the curves used for the upper and lower envelopes.
    pub upper_curve: &'static str,
    pub lower_curve: &'static str,
    pub bounds: (f64, f64),
    pub passed: bool,
    pub points: usize,
}

impl SandwichReport {
    /// Two report rows for tabular output.
    pub fn to_rate_reports(&self) -> Vec<RateReport> {
        let row = |q: &str, v: f64, curve: &str| RateReport {
            quantity: q.into(),
            predicted: f64::NAN,
            ladder: vec![],
            iterates: vec![v],
            extrapolated: v,
            method: format!("extreme over {} points, envelope {curve} + phi(K(d))", self.points),
            converged: true,
            rel_error: f64::NAN,
            tolerance: f64::NAN,
            asserted: true,
            passed: v >= self.bounds.0 && v <= self.bounds.1,
            note: format!("bounded in [{:e}, {:e}]", self.bounds.0, self.bounds.1),
        };
        vec![
            row("sandwich_upper_sup", self.upper_sup, self.upper_curve),
            row("sandwich_lower_inf", self.lower_inf, self.lower_curve),
        ]
    }
}

/// `ξ` (`ξ' = -f(ξ)`) and `ξ*` (`ξ*' = -f*(ξ*)`) as used by the envelopes.
pub fn envelope_curves(nl: &Nonlinearity, p: f64, kernel: &WeightKernel) -> Result<(BlowdownCurve, BlowdownCurve)> {
    let xi = BlowdownCurve::new(&nl.absorption())?;
    let profile = PhiProfile::new(nl, p)?;
    let xi_star = BlowdownCurve::new(&effective_absorption_fn(&profile, kernel)?)?;
    Ok((xi, xi_star))
}

/// Checks that `ū/(ξ_up + φ(K(d)))` and `u̲/(ξ_low + φ(K(d)))` stay in
/// `bounds` over stored levels `t_min ≤ t ≤ t*` and interior nodes with
/// `d ≥ d_min`. For non-increasing `k` the upper envelope uses `ξ` and the
/// lower one `ξ*`; for non-decreasing `k` the roles swap.
pub fn sandwich_check(
    lower: &SpaceTimeField,
    upper: &SpaceTimeField,
    prob: &ParabolicProblem,
    t_star: f64,
    d_min: f64,
    t_min: f64,
    bounds: (f64, f64),
) -> Result<SandwichReport> {
    let kernel = &prob.weight.kernel;
    let (xi, xi_star) = envelope_curves(&prob.nl, prob.p, kernel)?;
    let bp = BoundaryProfile::new(&prob.nl, prob.p, kernel)?;
    let (up, low, up_name, low_name) = match kernel.monotone {
        Monotone::NonDecreasing => (&xi_star, &xi, "xi*", "xi"),
        Monotone::NonIncreasing | Monotone::Constant => (&xi, &xi_star, "xi", "xi*"),
    };
    let line = &lower.line;
    let m = line.boundary_index();
    let phis: Vec<Option<f64>> = (0..m).map(|i| if line.d[i] >= d_min { bp.eval(line.d[i]).ok() } else { None }).collect();
    let mut sup = 0.0_f64;
    let mut inf = f64::INFINITY;
    let mut points = 0;
    for (j, &t) in lower.times.iter().enumerate() {
        if t < t_min || t > t_star * (1.0 + 1e-12) {
            continue;
        }
        let k = upper.level(t).ok_or_else(|| Error::domain(format!("upper field lacks the level t = {t}")))?;
        let (xu, xl) = (up.eval(t)?, low.eval(t)?);
        for (i, phi) in phis.iter().enumerate() {
            let Some(phi) = phi else { continue };
            let (a, b) = (upper.values[k][i], lower.values[j][i]);
            if a.is_finite() {
                sup = sup.max(a / (xu + phi));
            }
            if b.is_finite() {
                inf = inf.min(b / (xl + phi));
            }
            points += 1;
        }
    }
    if points == 0 {
        return Err(Error::domain("no grid points in the sandwich region"));
    }
    let inside = |v: f64| v >= bounds.0 && v <= bounds.1;
    Ok(SandwichReport {
        upper_sup: sup,
        lower_inf: inf,
        upper_curve: up_name,
        lower_curve: low_name,
        bounds,
        passed: inside(sup) && inside(inf),
        points,
    })
}

/// `max (ū - u̲)/u̲` over a region, with whether uniqueness is asserted.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    pub asserted: bool,
    pub note: String,
}

/// Hypotheses under which the minimal and maximal solutions coincide:
/// `p = 2`, `k ≡ 1` and convex `f`.
pub fn uniqueness_hypotheses(p: f64, nl: &Nonlinearity, kernel: &WeightKernel) -> (bool, String) {
    let convex = check_conditions(nl, p, &ConditionOptions::default()).convex.passed;
    let ok = p == 2.0 && kernel.monotone == Monotone::Constant && convex;
    let note = if ok {
        "p = 2, k = 1, f convex: uniqueness asserted".to_string()
    } else {
        format!("uniqueness not asserted by the theory (p = {p}, k = {}, convex f: {convex})", kernel.key)
    };
    (ok, note)
}

/// Largest relative gap on stored levels `t ≥ t_min` and nodes `d ≥ d_min`.
pub fn uniqueness_gap(
    lower: &SpaceTimeField,
    upper: &SpaceTimeField,
    prob: &ParabolicProblem,
    d_min: f64,
    t_min: f64,
) -> Result<GapReport> {
    if lower.line.d != upper.line.d {
        return Err(Error::domain("gap needs fields on the same nodes"));
    }
    let m = lower.line.boundary_index();
    let mut gap = 0.0_f64;
    for (j, &t) in lower.times.iter().enumerate() {
        if t < t_min {
            continue;
        }
        let k = upper.level(t).ok_or_else(|| Error::domain(format!("upper field lacks the level t = {t}")))?;
        for i in 0..m {
            let (a, b) = (upper.values[k][i], lower.values[j][i]);
            if lower.line.d[i] >= d_min && a.is_finite() && b.is_finite() {
                gap = gap.max((a - b) / b);
            }
        }
    }
    let (asserted, note) = uniqueness_hypotheses(prob.p, &prob.nl, &prob.weight.kernel);
    Ok(GapReport { gap, asserted, note })
}

/// Boundary constants measured for `β` and `λβ` should differ by the factor
/// `λ^{-(r-1)/p}`; the tolerance is the sum of the two reports' tolerances.
pub fn scaling_check(base: &RateReport, scaled: &RateReport, lambda: f64, rho: f64, p: f64) -> Result<RateReport> {
    let r = r_index(rho, p)?;
    let predicted = lambda.powf(-(r - 1.0) / p);
    let measured = scaled.extrapolated / base.extrapolated;
    let tolerance = base.tolerance + scaled.tolerance;
    let rel_error = ((measured - predicted) / predicted).abs();
    let converged = base.converged && scaled.converged;
    Ok(RateReport {
        quantity: format!("scaling(lambda={lambda})"),
        predicted,
        ladder: vec![(1.0, base.extrapolated), (lambda, scaled.extrapolated)],
        iterates: vec![measured],
        extrapolated: measured,
        method: "ratio of extrapolated constants".into(),
        converged,
        rel_error,
        tolerance,
        asserted: true,
        passed: converged && rel_error <= tolerance,
        note: format!("r = {r}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::karamata::AbsorptionWeight;
    use crate::parabolic::Provenance;
    use std::sync::Arc;

    fn sq() -> Nonlinearity {
        Nonlinearity::power(2.0).unwrap()
    }

    fn line(n: usize) -> Arc<Line> {
        Arc::new(Line::new(&Domain::interval(0.0, 1.0).unwrap(), n, 3.0).unwrap())
    }

    fn unit_prob(beta: f64, kernel: WeightKernel) -> ParabolicProblem {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let w = AbsorptionWeight::constant(kernel, beta).unwrap();
        ParabolicProblem::new(dom, 2.0, sq(), w, 1.0).unwrap()
    }

    /// Field filled from a closed form.
    fn field(line: &Arc<Line>, times: &[f64], f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        SpaceTimeField {
            line: line.clone(),
            times: times.to_vec(),
            values: times.iter().map(|&t| line.d.iter().map(|&d| f(d, t)).collect()).collect(),
            provenance: Provenance { cap: None, blow_up: true, shrink: 0.0 },
        }
    }

    #[test]
    fn predicted_constants_match_examples() {
        let k = WeightKernel::constant(2.0).unwrap();
        assert!((predicted_boundary_constant(&sq(), 2.0, &k, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((predicted_boundary_constant(&sq(), 2.0, &k, 4.0).unwrap() - 0.25).abs() < 1e-14);
        let quartic = Nonlinearity::power(4.0).unwrap();
        assert!((predicted_boundary_constant(&quartic, 3.0, &k, 1.0).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_rate_of_the_exact_profile() {
        let l = line(400);
        let prob = unit_prob(1.0, WeightKernel::constant(2.0).unwrap());
        // 6/d^2 (1 + d): linear approach recovered by acceleration
        let u = field(&l, &[0.1], |d, _| 6.0 / (d * d) * (1.0 + d));
        let rep = boundary_rate(&u, 0.1, &prob, &RateOptions::default()).unwrap();
        assert!(rep.converged && rep.passed, "{rep:?}");
        assert!(rep.rel_error < 5e-3);
        let bad = field(&l, &[0.1], |d, _| 3.0 / (d * d));
        assert!(!boundary_rate(&bad, 0.1, &prob, &RateOptions::default()).unwrap().passed);
        assert!(boundary_rate(&u, 0.95, &prob, &RateOptions::default()).is_err());
        let coarse = Arc::new(Line::new(&prob.domain, 16, 1.0).unwrap());
        let u = field(&coarse, &[0.1], |d, _| 6.0 / (d * d));
        assert!(matches!(boundary_rate(&u, 0.1, &prob, &RateOptions::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn initial_rate_uses_tau_and_gates_the_lower_bound() {
        let l = line(40);
        let times: Vec<f64> = (0..8).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let prob = unit_prob(2.0, WeightKernel::constant(2.0).unwrap());
        // tau = 1/(2t)
        let u = field(&l, &times, |_, t| 1.0 / (2.0 * t) * (1.0 + t));
        let rep = initial_rate(&u, 0.5, &prob, &RateOptions::default()).unwrap();
        assert!(rep.passed && rep.asserted, "{rep:?}");
        assert!(initial_rate(&u, 0.05, &prob, &RateOptions::default()).is_err());
        let ball = Domain::ball(1.0, 3).unwrap();
        assert!(initial_lower_bound_applies(&ball, 2.0, &sq()));
        // p = 2N/(N+2) exactly: gate closed
        assert!(!initial_lower_bound_applies(&ball, 1.2, &sq()));
        assert!(!initial_lower_bound_applies(&Domain::interval(0.0, 1.0).unwrap(), 2.0 / 3.0, &sq()));
    }

    #[test]
    fn sandwich_selects_envelopes_by_monotonicity() {
        let l = line(40);
        let times = [0.05, 0.1, 0.2];
        let prob = unit_prob(1.0, WeightKernel::power(1.0, 2.0).unwrap());
        let low = field(&l, &times, |d, t| 1.0 / t + 24.0 / d.powi(4));
        let up = field(&l, &times, |d, t| 1.0 / (6.0 * t * t) + 24.0 / d.powi(4));
        let rep = sandwich_check(&low, &up, &prob, 0.2, 0.05, 0.05, (1e-3, 1e3)).unwrap();
        assert_eq!((rep.upper_curve, rep.lower_curve), ("xi*", "xi"));
        assert!((rep.upper_sup - 1.0).abs() < 1e-6 && (rep.lower_inf - 1.0).abs() < 1e-6, "{rep:?}");
        assert!(rep.passed);
        let tiny = field(&l, &times, |_, _| 1e-9);
        assert!(!sandwich_check(&tiny, &up, &prob, 0.2, 0.05, 0.05, (1e-3, 1e3)).unwrap().passed);
    }

    #[test]
    fn gap_and_its_gate() {
        let l = line(40);
        let times = [0.1, 0.2];
        let prob = unit_prob(1.0, WeightKernel::constant(2.0).unwrap());
        let u = field(&l, &times, |d, t| 1.0 / t + 6.0 / (d * d));
        let rep = uniqueness_gap(&u, &u, &prob, 0.1, 0.1).unwrap();
        assert_eq!(rep.gap, 0.0);
        assert!(rep.asserted);
        let v = field(&l, &times, |d, t| 1.01 * (1.0 / t + 6.0 / (d * d)));
        assert!((uniqueness_gap(&u, &v, &prob, 0.1, 0.1).unwrap().gap - 0.01).abs() < 1e-12);
        let mut p3 = prob.clone();
        p3.p = 3.0;
        let rep = uniqueness_gap(&u, &v, &p3, 0.1, 0.1).unwrap();
        assert!(!rep.asserted && rep.note.contains("not asserted"));
    }

    #[test]
    fn scaling_relation_for_quadratic_absorption() {
        let mk = |v: f64| RateReport {
            quantity: "x".into(),
            predicted: v,
            ladder: vec![],
            iterates: vec![],
            extrapolated: v,
            method: String::new(),
            converged: true,
            rel_error: 0.0,
            tolerance: 0.02,
            asserted: true,
            passed: true,
            note: String::new(),
        };
        let rep = scaling_check(&mk(1.0), &mk(0.251), 4.0, 2.0, 2.0).unwrap();
        assert!((rep.predicted - 0.25).abs() < 1e-14);
        assert!(rep.passed && rep.tolerance == 0.04);
        assert!(!scaling_check(&mk(1.0), &mk(0.5), 4.0, 2.0, 2.0).unwrap().passed);
    }

    #[test]
    fn time_richardson_removes_first_order_error() {
        let l = line(20);
        let times = [0.1, 0.2];
        let coarse = field(&l, &times, |_, t| 1.0 / t + 0.02);
        let fine = field(&l, &times, |_, t| 1.0 / t + 0.01);
        let r = richardson_in_time(&coarse, &fine).unwrap();
        assert!((r.values[0][0] - 10.0).abs() < 1e-12);
    }
}
