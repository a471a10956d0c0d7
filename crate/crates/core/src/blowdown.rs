//! Blow-down curves `w' = -g(w)`, `w(0) = ∞`.
//!
//! A curve is never time-stepped. It is the inverse of its first integral
//! `G(w) = ∫_w^∞ ds/g(s)`, evaluated by tail quadrature and inverted in log
//! variables.

use crate::error::{Error, Result};
use crate::extrapolation::{extrapolate, Extrapolation};
use crate::nonlinearity::Absorption;
use crate::numerics::{invert_decreasing, tail_integral};

#[derive(Debug, Clone)]
pub struct BlowdownCurve {
    pub g: Absorption,
    /// Magnitude used for the initial guess `w ≈ ((γ-1) c t)^{-1/(γ-1)}`.
    scale: f64,
}

impl BlowdownCurve {
    pub fn new(g: &Absorption) -> Result<Self> {
        if !(g.index > 1.0) {
            return Err(Error::config(format!(
                "1/g is not integrable at infinity for {} (index {} <= 1)",
                g.label, g.index
            )));
        }
        let at_one = g.eval(1.0);
        let scale = if at_one.is_finite() && at_one > 0.0 { at_one } else { 1.0 };
        Ok(BlowdownCurve { g: g.clone(), scale })
    }

    /// `G(w) = ∫_w^∞ ds/g(s)`.
    pub fn first_integral(&self, w: f64) -> Result<f64> {
        tail_integral(|s| 1.0 / self.g.eval(s), w, self.g.index)
    }

    /// `w(t) = G^{-1}(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("blow-down time must be positive, got {t}")));
        }
        let e = self.g.index - 1.0;
        let guess = (e * self.scale * t).powf(-1.0 / e);
        invert_decreasing(|w| self.first_integral(w), t, guess, e).map_err(|err| match err {
            Error::Domain(_) => Error::domain(format!(
                "t = {t:e} is beyond the range of G for {}; the curve leaves the positive axis",
                self.g.label
            )),
            other => other,
        })
    }

    /// `|w'(t) + g(w(t))| / g(w(t))` by a central difference of relative
    /// step `h`.
    pub fn relative_residual(&self, t: f64, h: f64) -> Result<f64> {
        let dt = h * t;
        let slope = (self.eval(t + dt)? - self.eval(t - dt)?) / (2.0 * dt);
        let rhs = self.g.eval(self.eval(t)?);
        Ok(((slope + rhs) / rhs).abs())
    }
}

/// `w(t)` for `w' = -g(w)`, `w(0) = ∞`.
pub fn solve_blowdown(g: &Absorption, t: f64) -> Result<f64> {
    BlowdownCurve::new(g)?.eval(t)
}

/// Ratio of two blow-down curves along a ladder `t → 0⁺`.
#[derive(Debug, Clone)]
pub struct RatioEvidence {
    /// `(t, ratio)` per rung.
    pub ladder: Vec<(f64, f64)>,
    pub extrapolation: Extrapolation,
    pub min: f64,
    pub max: f64,
}

impl RatioEvidence {
    fn from_ladder(ladder: Vec<(f64, f64)>) -> Self {
        let ys: Vec<f64> = ladder.iter().map(|(_, r)| *r).collect();
        let min = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        RatioEvidence { extrapolation: extrapolate(&ys), ladder, min, max }
    }

    /// Every ratio lies in `[lo, hi]` up to a relative slack.
    pub fn within(&self, lo: f64, hi: f64, slack: f64) -> bool {
        self.min >= lo * (1.0 - slack) && self.max <= hi * (1.0 + slack)
    }
}

fn check_ladder(t_ladder: &[f64]) -> Result<()> {
    if t_ladder.is_empty() || t_ladder.iter().any(|&t| !(t > 0.0)) || t_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("time ladder must be positive and strictly decreasing"));
    }
    Ok(())
}

/// `v(t)/w(t)` with `v' = -g(v)` and `w' = -h(w)`, on a decreasing ladder.
pub fn equivalence_check(g: &Absorption, h: &Absorption, t_ladder: &[f64]) -> Result<RatioEvidence> {
    check_ladder(t_ladder)?;
    let (v, w) = (BlowdownCurve::new(g)?, BlowdownCurve::new(h)?);
    let ladder = t_ladder
        .iter()
        .map(|&t| Ok((t, v.eval(t)? / w.eval(t)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioEvidence::from_ladder(ladder))
}

/// Band containing `liminf`/`limsup` of `w/v` when `g/h → c`:
/// `[c^{1/ν}, 1]` for `c ≤ 1`, `[1, c^{1/ν}]` for `c > 1`, `0 < ν < γ-1`.
pub fn equivalence_band(c: f64, nu: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) || !(nu > 0.0 && nu < gamma - 1.0) {
        return Err(Error::domain(format!("band needs c > 0 and 0 < nu < gamma - 1, got c = {c}, nu = {nu}")));
    }
    let edge = c.powf(1.0 / nu);
    Ok(if c <= 1.0 { (edge, 1.0) } else { (1.0, edge) })
}

/// `w/v` for `v' = -g(cv) h(v)` and `w' = -g(w) h(w)`, on a decreasing
/// ladder; both curves share the index `θ + γ`.
pub fn two_scale_equivalence(g: &Absorption, h: &Absorption, c: f64, t_ladder: &[f64]) -> Result<RatioEvidence> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("scale factor must be positive, got {c}")));
    }
    check_ladder(t_ladder)?;
    let index = g.index + h.index;
    let (g1, h1, g2, h2) = (g.clone(), h.clone(), g.clone(), h.clone());
    let scaled = Absorption::new(format!("{}(c v)*{}", g.label, h.label), index, move |v| g1.eval(c * v) * h1.eval(v));
    let plain = Absorption::new(format!("{}*{}", g.label, h.label), index, move |w| g2.eval(w) * h2.eval(w));
    let (v, w) = (BlowdownCurve::new(&scaled)?, BlowdownCurve::new(&plain)?);
    let ladder = t_ladder
        .iter()
        .map(|&t| Ok((t, w.eval(t)? / v.eval(t)?)))
        .collect::<Result<Vec<_>>>()?;
    let ev = RatioEvidence::from_ladder(ladder);
    if !(ev.min > 0.0 && ev.max.is_finite()) {
        return Err(Error::Numeric { at: t_ladder[0], message: "two-scale ratio degenerated".into() });
    }
    Ok(ev)
}
