//! Weight kernels `k ∈ K_ℓ`, the boundary profile `φ`, the effective
//! absorption `f*` and the exponent bookkeeping (`r`, `q`) that ties them to
//! the blow-up rates.
//!
//! `φ` is defined through its tail integral
//! `T(y) = ∫_y^∞ (p' F(s))^{-1/p} ds`, so that `φ = T^{-1}` and
//! `φ^{-1} = T`. The free functions [`phi`] and [`phi_inverse`] always go
//! through quadrature; [`PhiProfile`] caches the problem data and switches to
//! the closed form when `f` is an exact power.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::extrapolation::extrapolate;
use crate::geometry::{split_call, Domain};
use crate::nonlinearity::{Absorption, Nonlinearity, ScalarFn};
use crate::numerics::{integrate_from_zero, invert_decreasing, tail_integral};
use crate::variation::geometric_ladder;

/// Agreement required between a declared `ℓ` and its extrapolated value.
pub const ELL_TOL: f64 = 1e-3;

/// Margin applied to the open endpoints of the admissible `ς` window.
pub const WINDOW_MARGIN: f64 = 1e-9;

/// `p' = p/(p-1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `r = (ρ+1)/(ρ+1-p)`, the exponent of `φ ∈ NRVZ_{1-r}`.
pub fn r_index(rho: f64, p: f64) -> Result<f64> {
    if !(rho + 1.0 > p) {
        return Err(Error::config(format!("r is undefined for rho = {rho}, p = {p} (need rho > p - 1)")));
    }
    Ok((rho + 1.0) / (rho + 1.0 - p))
}

/// Lower bound `max{1, p-1, p-1-(p-2)/ℓ}` that `ρ` must exceed.
pub fn index_gate(p: f64, ell: f64) -> f64 {
    1.0_f64.max(p - 1.0).max(p - 1.0 - (p - 2.0) / ell)
}

/// `q = ρ - (ρ-p+1)(1-ℓ)`, the index of `f*`.
pub fn q_index(rho: f64, p: f64, ell: f64) -> Result<f64> {
    if !(p > 1.0) || !(ell > 0.0) || !ell.is_finite() {
        return Err(Error::config(format!("q needs p > 1 and 0 < l < inf, got p = {p}, l = {ell}")));
    }
    let gate = index_gate(p, ell);
    if !(rho > gate) {
        return Err(Error::config(format!(
            "rho = {rho} does not exceed max(1, p-1, p-1-(p-2)/l) = {gate} (p = {p}, l = {ell})"
        )));
    }
    let q = rho - (rho - p + 1.0) * (1.0 - ell);
    let floor = 1.0_f64.max(p - 1.0);
    if !(q > floor) {
        return Err(Error::config(format!("q = {q} does not exceed max(1, p-1) = {floor}")));
    }
    Ok(q)
}

/// Predicted limit of `u / φ(K(d))` at a boundary point with weight `β`:
/// `((r+ℓ-1)/(rβ))^{(r-1)/p}`.
pub fn boundary_constant(rho: f64, p: f64, ell: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("boundary weight must be positive and finite, got {beta}")));
    }
    let r = r_index(rho, p)?;
    Ok(((r + ell - 1.0) / (r * beta)).powf((r - 1.0) / p))
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("profile argument must be positive, got {t}")));
    }
    Ok(())
}

fn tail_decay(nl: &Nonlinearity, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::config(format!("p must exceed 1, got {p}")));
    }
    let decay = (nl.rho + 1.0) / p;
    if !(decay > 1.0) {
        return Err(Error::config(format!(
            "F^(-1/p) is not integrable at infinity for {} with p = {p}",
            nl.key
        )));
    }
    Ok(decay)
}

fn tail_numeric(nl: &Nonlinearity, p: f64, decay: f64, y: f64) -> Result<f64> {
    let pc = conjugate(p);
    tail_integral(|s| (pc * nl.primitive_unchecked(s)).powf(-1.0 / p), y, decay)
}

/// `(A, e)` with `T(y) = A y^{-e}` for `f(u) = u^ρ`.
fn power_tail(rho: f64, p: f64) -> (f64, f64) {
    let a = (rho + 1.0) / p;
    let c = (conjugate(p) / (rho + 1.0)).powf(-1.0 / p);
    (c / (a - 1.0), a - 1.0)
}

/// `φ^{-1}(s) = ∫_s^∞ (p' F)^{-1/p}`, by quadrature.
pub fn phi_inverse(nl: &Nonlinearity, p: f64, s: f64) -> Result<f64> {
    let decay = tail_decay(nl, p)?;
    check_t(s)?;
    tail_numeric(nl, p, decay, s)
}

/// `φ(t)`: the root of `T(φ) = t`, by quadrature and bracketed inversion.
pub fn phi(nl: &Nonlinearity, p: f64, t: f64) -> Result<f64> {
    let decay = tail_decay(nl, p)?;
    check_t(t)?;
    let (a, e) = power_tail(nl.rho, p);
    let guess = (a / t).powf(1.0 / e);
    invert_decreasing(|y| tail_numeric(nl, p, decay, y), t, guess, e)
}

/// `φ` for fixed `(f, p)`, with the power-law closed form when it applies.
#[derive(Clone, Debug)]
pub struct PhiProfile {
    pub nl: Nonlinearity,
    pub p: f64,
    decay: f64,
    closed: Option<(f64, f64)>,
}

impl PhiProfile {
    pub fn new(nl: &Nonlinearity, p: f64) -> Result<Self> {
        let decay = tail_decay(nl, p)?;
        let closed = nl.power_exponent().map(|rho| power_tail(rho, p));
        Ok(PhiProfile { nl: nl.clone(), p, decay, closed })
    }

    /// Same profile with the closed form disabled.
    pub fn numeric(mut self) -> Self {
        self.closed = None;
        self
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed.is_some()
    }

    /// `T(s) = φ^{-1}(s)`.
    pub fn tail(&self, s: f64) -> Result<f64> {
        check_t(s)?;
        match self.closed {
            Some((a, e)) => Ok(a * s.powf(-e)),
            None => tail_numeric(&self.nl, self.p, self.decay, s),
        }
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        let (a, e) = self.closed.unwrap_or_else(|| power_tail(self.nl.rho, self.p));
        let guess = (a / t).powf(1.0 / e);
        if self.closed.is_some() {
            return Ok(guess);
        }
        invert_decreasing(|y| tail_numeric(&self.nl, self.p, self.decay, y), t, guess, e)
    }

    /// `φ'(t) = -(p' F(φ(t)))^{1/p}`.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        let v = self.phi(t)?;
        Ok(-(conjugate(self.p) * self.nl.primitive_unchecked(v)).powf(1.0 / self.p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    NonIncreasing,
    NonDecreasing,
    /// Both classes at once (`k` constant).
    Constant,
}

#[derive(Clone)]
enum KernelKind {
    Power { gamma: f64 },
    Custom { eval: ScalarFn, primitive: Option<ScalarFn> },
}

/// A positive monotone kernel `k` on `(0, μ)` with `(K/k)'(0⁺) = ℓ`.
#[derive(Clone)]
pub struct WeightKernel {
    kind: KernelKind,
    pub mu: f64,
    pub ell: f64,
    pub monotone: Monotone,
    pub key: String,
}

impl fmt::Debug for WeightKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightKernel({}, mu = {}, l = {})", self.key, self.mu, self.ell)
    }
}

/// `μ = 2 diam(Ω)`.
pub fn kernel_support(domain: &Domain) -> f64 {
    2.0 * domain.diameter()
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::config(format!("kernel support must be positive, got {mu}")));
    }
    Ok(())
}

impl WeightKernel {
    /// `k ≡ 1`.
    pub fn constant(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(WeightKernel { kind: KernelKind::Power { gamma: 0.0 }, mu, ell: 1.0, monotone: Monotone::Constant, key: "const".into() })
    }

    /// `k(s) = s^γ`, `γ > -1`.
    pub fn power(gamma: f64, mu: f64) -> Result<Self> {
        check_mu(mu)?;
        if !(gamma > -1.0) || !gamma.is_finite() {
            return Err(Error::config(format!("power kernel exponent must exceed -1, got {gamma}")));
        }
        if gamma == 0.0 {
            return WeightKernel::constant(mu);
        }
        let monotone = if gamma > 0.0 { Monotone::NonDecreasing } else { Monotone::NonIncreasing };
        Ok(WeightKernel {
            kind: KernelKind::Power { gamma },
            mu,
            ell: 1.0 / (gamma + 1.0),
            monotone,
            key: format!("power({gamma})"),
        })
    }

    /// In-process kernel. The declared `ℓ` is checked against the
    /// extrapolated limit and against the monotonicity class.
    pub fn custom(
        label: impl Into<String>,
        mu: f64,
        ell: f64,
        monotone: Monotone,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: Option<ScalarFn>,
    ) -> Result<Self> {
        check_mu(mu)?;
        let kernel = WeightKernel { kind: KernelKind::Custom { eval: Arc::new(eval), primitive }, mu, ell, monotone, key: label.into() };
        let class_ok = match monotone {
            Monotone::NonDecreasing => ell > 0.0 && ell <= 1.0,
            Monotone::NonIncreasing => ell >= 1.0 && ell.is_finite(),
            Monotone::Constant => ell == 1.0,
        };
        if !class_ok {
            return Err(Error::config(format!("l = {ell} is incompatible with a {monotone:?} kernel")));
        }
        let measured = ell_limit(&kernel)?;
        if (measured - ell).abs() > ELL_TOL {
            return Err(Error::config(format!(
                "declared l = {ell} of kernel {} disagrees with extrapolated {measured:.6}",
                kernel.key
            )));
        }
        Ok(kernel)
    }

    /// Parse `const` or `power(γ)`; `μ` is fixed from the domain.
    pub fn parse(key: &str, domain: &Domain) -> Result<Self> {
        let key = key.trim();
        let mu = kernel_support(domain);
        if key == "const" {
            return WeightKernel::constant(mu);
        }
        let bad = || Error::config(format!("unknown kernel '{key}'"));
        let (name, args) = split_call(key).ok_or_else(bad)?;
        match (name, args.as_slice()) {
            ("power", [g]) => WeightKernel::power(g.trim().parse().map_err(|_| bad())?, mu),
            _ => Err(bad()),
        }
    }

    /// `Some(γ)` for `k(s) = s^γ`.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            KernelKind::Power { gamma } => Some(gamma),
            KernelKind::Custom { .. } => None,
        }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match &self.kind {
            KernelKind::Power { gamma } => {
                if *gamma == 0.0 {
                    1.0
                } else {
                    s.powf(*gamma)
                }
            }
            KernelKind::Custom { eval, .. } => eval(s),
        }
    }

    pub(crate) fn primitive_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            KernelKind::Power { gamma } => s.powf(gamma + 1.0) / (gamma + 1.0),
            KernelKind::Custom { primitive: Some(p), .. } => p(s),
            KernelKind::Custom { eval, .. } => integrate_from_zero(|x| eval(x), s),
        }
    }

    /// `K^{-1}(y)`. Power kernels use the closed form on all of `(0, ∞)`;
    /// other kernels are inverted on `(0, μ)`.
    pub fn inverse_primitive(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::domain(format!("K^-1 argument must be positive, got {y}")));
        }
        match self.kind {
            KernelKind::Power { gamma } => Ok(((gamma + 1.0) * y).powf(1.0 / (gamma + 1.0))),
            KernelKind::Custom { .. } => {
                if y >= self.primitive_unchecked(self.mu) {
                    return Err(Error::domain(format!("{y:e} is outside the range of K on (0, mu)")));
                }
                let s = invert_decreasing(|s| Ok(1.0 / self.primitive_unchecked(s)), 1.0 / y, 0.5 * self.mu, 1.0 / self.ell)?;
                Ok(s)
            }
        }
    }
}

/// `K(s) = ∫_0^s k`, for `0 < s < μ`.
pub fn capital_k(kernel: &WeightKernel, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < kernel.mu) {
        return Err(Error::domain(format!("K({s}) requested outside (0, {})", kernel.mu)));
    }
    Ok(kernel.primitive_unchecked(s))
}

/// Extrapolated `lim_{s→0⁺} (K/k)'(s)` from central differences on the
/// ladder `μ/8 · 2^{-j}`.
pub fn ell_limit(kernel: &WeightKernel) -> Result<f64> {
    let ratio = |s: f64| kernel.primitive_unchecked(s) / kernel.eval(s);
    let h = 1e-3;
    let ladder = geometric_ladder(kernel.mu / 8.0, 0.5, 14);
    let seq: Vec<f64> = ladder
        .iter()
        .map(|&s| (ratio(s * (1.0 + h)) - ratio(s * (1.0 - h))) / (2.0 * h * s))
        .collect();
    if seq.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { at: ladder[0], message: "(K/k)' is not finite on the ladder".into() });
    }
    let ex = extrapolate(&seq);
    if !ex.converged || !ex.limit.is_finite() {
        return Err(Error::Numeric {
            at: *ladder.last().unwrap(),
            message: format!("(K/k)' does not settle: last iterates {:?}", ex.iterates),
        });
    }
    Ok(ex.limit)
}

/// `f*(s) = (k ∘ K^{-1} ∘ φ^{-1}(s))^p f(s)`, with `φ^{-1}` by quadrature.
pub fn effective_absorption(nl: &Nonlinearity, kernel: &WeightKernel, p: f64, s: f64) -> Result<f64> {
    let t = phi_inverse(nl, p, s)?;
    let x = kernel.inverse_primitive(t)?;
    Ok(kernel.eval(x).powf(p) * nl.eval(s))
}

/// `f*` as a blow-down right-hand side with index `q`, built on a
/// [`PhiProfile`]. Evaluations outside the kernel's range return NaN.
pub fn effective_absorption_fn(profile: &PhiProfile, kernel: &WeightKernel) -> Result<Absorption> {
    let q = q_index(profile.nl.rho, profile.p, kernel.ell)?;
    let (prof, ker) = (profile.clone(), kernel.clone());
    let p = profile.p;
    Ok(Absorption::new(format!("f*[{}; {}]", profile.nl.key, kernel.key), q, move |s| {
        match prof.tail(s).and_then(|t| ker.inverse_primitive(t)) {
            Ok(x) => ker.eval(x).powf(p) * prof.nl.eval(s),
            Err(_) => f64::NAN,
        }
    }))
}

/// Admissible `ς` window `(p(1-ℓ)/(r-1), ρ-1)`, shrunk by [`WINDOW_MARGIN`].
pub fn ratio_decay_window(rho: f64, p: f64, ell: f64) -> Result<(f64, f64)> {
    let r = r_index(rho, p)?;
    let lo = p * (1.0 - ell) / (r - 1.0) + WINDOW_MARGIN;
    let hi = rho - 1.0 - WINDOW_MARGIN;
    if !(lo < hi) {
        return Err(Error::config(format!("empty window for varsigma: ({lo}, {hi})")));
    }
    Ok((lo, hi))
}

/// `φ^{-ς}(K(s)) / k^p(s)` along a decreasing ladder.
#[derive(Debug, Clone)]
pub struct RatioDecayEvidence {
    pub window: (f64, f64),
    pub varsigma: f64,
    /// `(s, ratio)` per rung.
    pub ladder: Vec<(f64, f64)>,
    /// Ratios strictly decrease along the ladder.
    pub decreasing: bool,
    /// Smallest decrease factor per decade of `s` between consecutive rungs.
    pub min_decay_per_decade: f64,
}

pub fn weight_ratio_decay(
    kernel: &WeightKernel,
    nl: &Nonlinearity,
    p: f64,
    varsigma: f64,
    s_ladder: &[f64],
) -> Result<RatioDecayEvidence> {
    let window = ratio_decay_window(nl.rho, p, kernel.ell)?;
    if !(varsigma > window.0 && varsigma < window.1) {
        return Err(Error::config(format!(
            "varsigma = {varsigma} lies outside the admissible window ({}, {})",
            window.0, window.1
        )));
    }
    if s_ladder.len() < 2 || s_ladder.windows(2).any(|w| w[1] >= w[0]) || s_ladder.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::domain("s ladder must be positive and strictly decreasing with at least two rungs"));
    }
    let profile = PhiProfile::new(nl, p)?;
    let mut ladder = Vec::with_capacity(s_ladder.len());
    for &s in s_ladder {
        let v = profile.phi(capital_k(kernel, s)?)?;
        ladder.push((s, v.powf(-varsigma) / kernel.eval(s).powf(p)));
    }
    let decreasing = ladder.windows(2).all(|w| w[1].1 < w[0].1);
    let min_decay_per_decade = ladder
        .windows(2)
        .map(|w| (w[0].1 / w[1].1).powf(1.0 / (w[0].0 / w[1].0).log10()))
        .fold(f64::INFINITY, f64::min);
    Ok(RatioDecayEvidence { window, varsigma, ladder, decreasing, min_decay_per_decade })
}

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `b(x, t) = β(d(x), t) k^p(d(x))`.
#[derive(Clone)]
pub struct AbsorptionWeight {
    pub kernel: WeightKernel,
    beta: SpaceTimeFn,
    pub beta_label: String,
    /// Set when `β` is a constant.
    pub beta_constant: Option<f64>,
}

impl fmt::Debug for AbsorptionWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AbsorptionWeight({} * k^p, k = {})", self.beta_label, self.kernel.key)
    }
}

impl AbsorptionWeight {
    pub fn constant(kernel: WeightKernel, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::config(format!("beta must be positive and finite, got {beta}")));
        }
        Ok(AbsorptionWeight { kernel, beta: Arc::new(move |_, _| beta), beta_label: format!("{beta}"), beta_constant: Some(beta) })
    }

    /// `β(d, t)` given as a function of boundary distance and time.
    pub fn new(kernel: WeightKernel, label: impl Into<String>, beta: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        AbsorptionWeight { kernel, beta: Arc::new(beta), beta_label: label.into(), beta_constant: None }
    }

    #[inline]
    pub fn beta(&self, d: f64, t: f64) -> f64 {
        (self.beta)(d, t)
    }

    /// `b` at boundary distance `d > 0` and time `t`.
    #[inline]
    pub fn eval(&self, d: f64, t: f64, p: f64) -> f64 {
        self.beta(d, t) * self.kernel.eval(d).powf(p)
    }

    /// `β` continued to the boundary.
    pub fn boundary_beta(&self, t: f64) -> f64 {
        self.beta(0.0, t)
    }

    /// `(α₁(t), α₂(t))`: the extreme values of `β(·, t)` on the sampled distances.
    pub fn time_factors(&self, t: f64, distances: &[f64]) -> (f64, f64) {
        distances.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| {
            let b = self.beta(d, t);
            (lo.min(b), hi.max(b))
        })
    }

    /// `λ b`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let inner = self.beta.clone();
        AbsorptionWeight {
            kernel: self.kernel.clone(),
            beta: Arc::new(move |d, t| lambda * inner(d, t)),
            beta_label: format!("{lambda}*({})", self.beta_label),
            beta_constant: self.beta_constant.map(|b| lambda * b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variation::index_at_zero;

    fn sq() -> Nonlinearity {
        Nonlinearity::power(2.0).unwrap()
    }

    #[test]
    fn capital_k_examples() {
        let c = WeightKernel::constant(4.0).unwrap();
        assert!((capital_k(&c, 0.4).unwrap() - 0.4).abs() < 1e-15);
        let lin = WeightKernel::power(1.0, 4.0).unwrap();
        assert!((capital_k(&lin, 0.4).unwrap() - 0.08).abs() < 1e-15);
        let inv = WeightKernel::power(-0.5, 4.0).unwrap();
        assert!((capital_k(&inv, 0.25).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(capital_k(&c, 5.0), Err(Error::Domain(_))));
        assert!(matches!(capital_k(&c, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn ell_examples() {
        for (gamma, ell) in [(0.0, 1.0), (1.0, 0.5), (-0.5, 2.0)] {
            let k = WeightKernel::power(gamma, 4.0).unwrap();
            assert_eq!(k.ell, ell);
            assert!((ell_limit(&k).unwrap() - ell).abs() < ELL_TOL, "gamma={gamma}");
        }
    }

    #[test]
    fn custom_kernel_is_checked_against_its_limit() {
        // k(s) = s (1 + s): K/k -> s/2 near zero
        let ok = WeightKernel::custom("s(1+s)", 4.0, 0.5, Monotone::NonDecreasing, |s| s * (1.0 + s), None);
        assert!(ok.is_ok(), "{ok:?}");
        let k = ok.unwrap();
        let exact = 0.3f64.powi(2) / 2.0 + 0.3f64.powi(3) / 3.0;
        assert!((capital_k(&k, 0.3).unwrap() - exact).abs() < 1e-12);
        let back = k.inverse_primitive(exact).unwrap();
        assert!((back - 0.3).abs() < 1e-10);
        let wrong = WeightKernel::custom("s(1+s)", 4.0, 0.4, Monotone::NonDecreasing, |s| s * (1.0 + s), None);
        assert!(matches!(wrong, Err(Error::Config(_))));
        let class = WeightKernel::custom("s", 4.0, 2.0, Monotone::NonDecreasing, |s| s, None);
        assert!(matches!(class, Err(Error::Config(_))));
    }

    #[test]
    fn phi_examples() {
        assert!((phi(&sq(), 2.0, 1.0).unwrap() - 6.0).abs() < 6e-9);
        assert!((phi(&sq(), 2.0, 2.0).unwrap() - 1.5).abs() < 1.5e-9);
        let quartic = Nonlinearity::power(4.0).unwrap();
        let c = (10.0f64 / 3.0).sqrt() * 1.5f64.powf(1.5);
        assert!((phi(&quartic, 3.0, 1.0).unwrap() - c).abs() < 1e-8 * c);
        assert!((c - 3.354).abs() < 1e-3);
        assert!(matches!(phi(&sq(), 2.0, 0.0), Err(Error::Domain(_))));
        let weak = Nonlinearity::power(0.5).unwrap();
        assert!(matches!(phi(&weak, 2.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn phi_inverse_examples() {
        assert!((phi_inverse(&sq(), 2.0, 6.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((phi_inverse(&sq(), 2.0, 1.5).unwrap() - 2.0).abs() < 1e-10);
        for t in [0.1, 1.0, 10.0] {
            let s = phi(&sq(), 2.0, t).unwrap();
            assert!((phi_inverse(&sq(), 2.0, s).unwrap() - t).abs() < 1e-8 * t);
        }
        assert!(matches!(phi_inverse(&sq(), 2.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn profile_closed_form_matches_quadrature() {
        for (rho, p) in [(2.0, 2.0), (4.0, 3.0), (1.5, 1.5), (3.0, 2.5)] {
            let nl = Nonlinearity::power(rho).unwrap();
            let fast = PhiProfile::new(&nl, p).unwrap();
            assert!(fast.is_closed_form());
            let slow = fast.clone().numeric();
            for t in [1e-3, 0.3, 7.0] {
                let (a, b) = (fast.phi(t).unwrap(), slow.phi(t).unwrap());
                assert!(((a - b) / a).abs() < 1e-9, "rho={rho} p={p} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_solves_its_ode() {
        for nl in [sq(), Nonlinearity::power_log(2.0).unwrap()] {
            let prof = PhiProfile::new(&nl, 2.0).unwrap();
            for t in [0.05, 0.5, 2.0] {
                let h = 1e-4 * t;
                let fd = (prof.phi(t + h).unwrap() - prof.phi(t - h).unwrap()) / (2.0 * h);
                let rhs = prof.derivative(t).unwrap();
                assert!(((fd - rhs) / rhs).abs() < 1e-6, "{}: t={t} fd={fd} rhs={rhs}", nl.key);
            }
        }
    }

    #[test]
    fn profile_indices_at_zero() {
        let ladder = geometric_ladder(1e-2, 0.5, 8);
        for (rho, p) in [(2.0, 2.0), (4.0, 3.0)] {
            let prof = PhiProfile::new(&Nonlinearity::power(rho).unwrap(), p).unwrap().numeric();
            let r = r_index(rho, p).unwrap();
            let est = index_at_zero(|t| prof.phi(t).unwrap(), &ladder).unwrap();
            assert!(((est.index - (1.0 - r)) / (1.0 - r)).abs() < 0.02);
        }
    }

    #[test]
    fn effective_absorption_examples() {
        let c = WeightKernel::constant(4.0).unwrap();
        assert!((effective_absorption(&sq(), &c, 2.0, 3.0).unwrap() - 9.0).abs() < 1e-12);
        let lin = WeightKernel::power(1.0, 4.0).unwrap();
        let two_root6 = 2.0 * 6f64.sqrt();
        assert!((effective_absorption(&sq(), &lin, 2.0, 1.0).unwrap() - two_root6).abs() < 1e-8);
        assert!((effective_absorption(&sq(), &lin, 2.0, 4.0).unwrap() - 8.0 * two_root6).abs() < 1e-7);
        let prof = PhiProfile::new(&sq(), 2.0).unwrap();
        let fstar = effective_absorption_fn(&prof, &lin).unwrap();
        assert_eq!(fstar.index, 1.5);
        assert!((fstar.eval(4.0) - 8.0 * two_root6).abs() < 1e-9);
    }

    #[test]
    fn q_examples() {
        assert_eq!(q_index(2.0, 2.0, 1.0).unwrap(), 2.0);
        assert_eq!(q_index(2.0, 2.0, 0.5).unwrap(), 1.5);
        assert_eq!(q_index(4.0, 3.0, 1.0).unwrap(), 4.0);
        assert!(matches!(q_index(2.0, 4.0, 1.0), Err(Error::Config(_))));
        assert_eq!(index_gate(4.0, 1.0), 3.0);
    }

    #[test]
    fn boundary_constants() {
        assert!((boundary_constant(2.0, 2.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((boundary_constant(2.0, 2.0, 1.0, 4.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((boundary_constant(4.0, 3.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((boundary_constant(2.0, 2.0, 0.5, 1.0).unwrap() - 2.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weight_ratio_decay_example() {
        let c = WeightKernel::constant(4.0).unwrap();
        let ev = weight_ratio_decay(&c, &sq(), 2.0, 0.5, &[0.1, 0.01]).unwrap();
        assert!((ev.window.0 - 0.0).abs() < 1e-8 && (ev.window.1 - 1.0).abs() < 1e-8);
        assert!((ev.ladder[0].1 - 0.1 / 6f64.sqrt()).abs() < 1e-12);
        assert!((ev.ladder[1].1 - 0.01 / 6f64.sqrt()).abs() < 1e-13);
        assert!(ev.decreasing);
        assert!((ev.min_decay_per_decade - 10.0).abs() < 1e-9);
        assert!(matches!(weight_ratio_decay(&c, &sq(), 2.0, 1.5, &[0.1, 0.01]), Err(Error::Config(_))));
    }

    #[test]
    fn kernel_parse() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let k = WeightKernel::parse("power(1)", &d).unwrap();
        assert_eq!(k.mu, 2.0);
        assert_eq!(k.monotone, Monotone::NonDecreasing);
        assert_eq!(WeightKernel::parse("const", &d).unwrap().monotone, Monotone::Constant);
        assert!(WeightKernel::parse("cubic", &d).is_err());
        assert!(WeightKernel::parse("power(-1)", &d).is_err());
    }

    #[test]
    fn weight_factors() {
        let w = AbsorptionWeight::new(WeightKernel::power(1.0, 4.0).unwrap(), "1+d", |d, _| 1.0 + d);
        assert_eq!(w.eval(0.5, 0.0, 2.0), 1.5 * 0.25);
        assert_eq!(w.time_factors(0.0, &[0.1, 0.5]), (1.1, 1.5));
        assert_eq!(w.scaled(4.0).boundary_beta(0.0), 4.0);
    }
}
