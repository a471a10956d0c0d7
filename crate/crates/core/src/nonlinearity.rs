//! The absorption `f`, its primitive `F`, its index of regular variation, and
//! sample-based checks of the structural conditions placed on it.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::split_call;
use crate::numerics::{integrate_from_zero, log_space, tail_integral};
use crate::variation::{geometric_ladder, index_at_infinity};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Declared-versus-estimated index mismatch that is treated as a
/// configuration error.
pub const INDEX_MISMATCH_TOL: f64 = 1e-2;

/// A positive function regularly varying at infinity with a declared index;
/// the right-hand side of blow-down equations `w' = -g(w)`.
#[derive(Clone)]
pub struct Absorption {
    eval: ScalarFn,
    pub index: f64,
    pub label: String,
}

impl Absorption {
    pub fn new(label: impl Into<String>, index: f64, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Absorption { eval: Arc::new(eval), index, label: label.into() }
    }

    /// `g(w) = c w^γ`.
    pub fn power(coefficient: f64, exponent: f64) -> Self {
        Absorption::new(format!("{coefficient}*w^{exponent}"), exponent, move |w| coefficient * w.powf(exponent))
    }

    #[inline]
    pub fn eval(&self, w: f64) -> f64 {
        (self.eval)(w)
    }

    /// `c · g(w)`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        Absorption {
            eval: Arc::new(move |w| c * inner(w)),
            index: self.index,
            label: format!("{c}*({})", self.label),
        }
    }
}

impl fmt::Debug for Absorption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Absorption").field("label", &self.label).field("index", &self.index).finish()
    }
}

#[derive(Clone)]
enum Kind {
    Power,
    PowerLog,
    Custom { eval: ScalarFn, derivative: ScalarFn, primitive: Option<ScalarFn> },
}

/// The absorption nonlinearity `f` with `f(0) = 0`, `f' > 0`.
#[derive(Clone)]
pub struct Nonlinearity {
    kind: Kind,
    /// Declared index of regular variation at infinity.
    pub rho: f64,
    pub key: String,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.key)
    }
}

impl Nonlinearity {
    /// `f(u) = u^ρ`.
    pub fn power(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::config(format!("power exponent must be positive, got {rho}")));
        }
        Ok(Nonlinearity { kind: Kind::Power, rho, key: format!("power({rho})") })
    }

    /// `f(u) = u^ρ log(1 + u)`, regularly varying with index `ρ`.
    pub fn power_log(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::config(format!("power_log exponent must be nonnegative, got {rho}")));
        }
        Ok(Nonlinearity { kind: Kind::PowerLog, rho, key: format!("power_log({rho})") })
    }

    /// In-process nonlinearity. The declared index is checked against the
    /// measured one.
    pub fn custom(
        label: impl Into<String>,
        rho: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let nl = Nonlinearity {
            kind: Kind::Custom { eval: Arc::new(eval), derivative: Arc::new(derivative), primitive: None },
            rho,
            key: label.into(),
        };
        nl.verify_declared_index()?;
        Ok(nl)
    }

    /// Attach a closed-form primitive to a custom nonlinearity.
    pub fn with_primitive(mut self, primitive: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        if let Kind::Custom { primitive: p, .. } = &mut self.kind {
            *p = Some(Arc::new(primitive));
        }
        self
    }

    /// Parse `power(ρ)` or `power_log(ρ)`.
    pub fn parse(key: &str) -> Result<Self> {
        let key = key.trim();
        let bad = || Error::config(format!("unknown nonlinearity '{key}'"));
        let (name, args) = split_call(key).ok_or_else(bad)?;
        let [arg] = args.as_slice() else { return Err(bad()) };
        let rho: f64 = arg.trim().parse().map_err(|_| bad())?;
        match name {
            "power" => Nonlinearity::power(rho),
            "power_log" => Nonlinearity::power_log(rho),
            _ => Err(bad()),
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            Kind::Power => u.powf(self.rho),
            Kind::PowerLog => u.powf(self.rho) * u.ln_1p(),
            Kind::Custom { eval, .. } => eval(u),
        }
    }

    #[inline]
    pub fn derivative(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            Kind::Power => {
                if u == 0.0 {
                    if self.rho == 1.0 {
                        1.0
                    } else if self.rho > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    self.rho * u.powf(self.rho - 1.0)
                }
            }
            Kind::PowerLog => {
                if u == 0.0 {
                    return 0.0;
                }
                self.rho * u.powf(self.rho - 1.0) * u.ln_1p() + u.powf(self.rho) / (1.0 + u)
            }
            Kind::Custom { derivative, .. } => derivative(u),
        }
    }

    /// `F(u) = ∫_0^u f(s) ds`: closed form when known, adaptive quadrature
    /// otherwise.
    pub fn primitive(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::domain(format!("primitive requires u >= 0, got {u}")));
        }
        Ok(self.primitive_unchecked(u))
    }

    pub(crate) fn primitive_unchecked(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Power => u.powf(self.rho + 1.0) / (self.rho + 1.0),
            Kind::Custom { primitive: Some(p), .. } => p(u),
            _ => integrate_from_zero(|s| self.eval(s), u),
        }
    }

    /// `Some(ρ)` when `f(u) = u^ρ` exactly.
    pub fn power_exponent(&self) -> Option<f64> {
        matches!(self.kind, Kind::Power).then_some(self.rho)
    }

    pub fn has_closed_primitive(&self) -> bool {
        matches!(self.kind, Kind::Power | Kind::Custom { primitive: Some(_), .. })
    }

    /// `f` as a blow-down right-hand side.
    pub fn absorption(&self) -> Absorption {
        let me = self.clone();
        Absorption::new(self.key.clone(), self.rho, move |u| me.eval(u))
    }

    /// Estimate of the regular-variation index `ρ`.
    pub fn rv_index_estimate(&self, xi: f64, ladder: &[f64]) -> Result<f64> {
        Ok(index_at_infinity(|u| self.eval(u), xi, ladder)?.index)
    }

    /// Measured index on the default ladder (2^k up to 1e8, probe 2).
    pub fn measured_index(&self) -> Result<f64> {
        self.rv_index_estimate(2.0, &default_index_ladder())
    }

    /// Fails when the declared and measured indices differ by more than
    /// [`INDEX_MISMATCH_TOL`].
    pub fn verify_declared_index(&self) -> Result<f64> {
        let measured = self.measured_index()?;
        if (measured - self.rho).abs() > INDEX_MISMATCH_TOL {
            return Err(Error::config(format!(
                "declared index {} of {} disagrees with measured index {measured:.6}",
                self.rho, self.key
            )));
        }
        Ok(measured)
    }

    /// Index of the slowly varying factor `L(u) = f(u) / u^ρ`.
    pub fn slowly_varying_index(&self) -> Result<f64> {
        let rho = self.rho;
        Ok(index_at_infinity(|u| self.eval(u) / u.powf(rho), 2.0, &default_index_ladder())?.index)
    }
}

/// `1e8 / 2^k`, twelve rungs, increasing.
pub fn default_index_ladder() -> Vec<f64> {
    geometric_ladder(1e8 / 2f64.powi(11), 2.0, 12)
}

/// Sample grid and tolerance under which the conditions are checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOptions {
    pub grid: Vec<f64>,
    /// Tolerance on monotonicity differences, relative to the compared values.
    pub tolerance: f64,
    /// Exponent `l` of condition (C); the declared index when absent.
    pub l: Option<f64>,
    /// Contraction factors `ε ∈ (0,1)` sampled for condition (C).
    pub eps_samples: Vec<f64>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            grid: log_space(1e-3, 1e8, 64),
            tolerance: 1e-10,
            l: None,
            eps_samples: vec![0.5, 0.1, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionFlag {
    pub passed: bool,
    /// Measured quantity backing the flag (index, exponent, integral value).
    pub value: Option<f64>,
    pub detail: String,
}

/// Results of the structural-condition checks on a documented grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub p: f64,
    pub grid: Vec<f64>,
    pub tolerance: f64,
    /// `f ∈ RV_ρ` with `ρ > p - 1`.
    pub f1: ConditionFlag,
    /// `s ↦ s^{-(p-1)} f(s)` increasing.
    pub f2: ConditionFlag,
    /// `f(u) ≥ ε^{-l} f(εu)` for small `ε`, with `l > max{1, p-1}`.
    pub c: ConditionFlag,
    /// `∫_1^∞ F^{-1/p} < ∞`.
    pub f3: ConditionFlag,
    pub convex: ConditionFlag,
    /// `f(s)/s` increasing (used by the lower initial-rate bound).
    pub f_over_s_increasing: ConditionFlag,
}

fn increasing_on(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] - w[0] >= -tol * w[0].abs().max(w[1].abs()))
}

/// `u ↦ f(u)/u^l` increasing on the grid.
pub fn ratio_increasing(nl: &Nonlinearity, l: f64, grid: &[f64], tol: f64) -> bool {
    let vals: Vec<f64> = grid.iter().map(|&s| nl.eval(s) / s.powf(l)).collect();
    increasing_on(&vals, tol)
}

/// Sample-based verification of (F1), (F2), (C), (F3) and convexity. Failures
/// are recorded in the report.
pub fn check_conditions(nl: &Nonlinearity, p: f64, opts: &ConditionOptions) -> ConditionReport {
    let grid = &opts.grid;
    let tol = opts.tolerance;

    let f1 = match nl.measured_index() {
        Ok(rho) => ConditionFlag {
            passed: rho > p - 1.0,
            value: Some(rho),
            detail: format!("measured index {rho:.6} vs p-1 = {}", p - 1.0),
        },
        Err(e) => ConditionFlag { passed: false, value: None, detail: e.to_string() },
    };

    let f2_vals: Vec<f64> = grid.iter().map(|&s| nl.eval(s) / s.powf(p - 1.0)).collect();
    let f2_ok = increasing_on(&f2_vals, tol) && f2_vals.windows(2).any(|w| w[1] > w[0]);
    let f2 = ConditionFlag {
        passed: f2_ok,
        value: None,
        detail: format!("s^-(p-1) f(s) monotone on {} samples", grid.len()),
    };

    let l = opts.l.unwrap_or(nl.rho);
    let l_ok = l > 1.0_f64.max(p - 1.0);
    let ineq_ok = grid.iter().all(|&u| {
        let fu = nl.eval(u);
        opts.eps_samples.iter().all(|&e| {
            let rhs = nl.eval(e * u) / e.powf(l);
            fu - rhs >= -tol * fu.abs().max(rhs.abs())
        })
    });
    let c = ConditionFlag {
        passed: l_ok && ineq_ok,
        value: Some(l),
        detail: format!(
            "l = {l} {} max(1, p-1); inequality {} on sampled eps",
            if l_ok { ">" } else { "<=" },
            if ineq_ok { "holds" } else { "fails" }
        ),
    };

    let decay = (nl.rho + 1.0) / p;
    let f3 = match tail_integral(|s| nl.primitive_unchecked(s).powf(-1.0 / p), 1.0, decay) {
        Ok(v) if decay > 1.0 => ConditionFlag {
            passed: true,
            value: Some(v),
            detail: format!("integrand index -{decay:.4}; tail integral {v:.6e}"),
        },
        Ok(_) | Err(_) => ConditionFlag {
            passed: false,
            value: None,
            detail: format!("integrand index -{decay:.4} is not integrable at infinity"),
        },
    };

    let slopes: Vec<f64> = grid
        .windows(2)
        .map(|w| (nl.eval(w[1]) - nl.eval(w[0])) / (w[1] - w[0]))
        .collect();
    let convex = ConditionFlag {
        passed: increasing_on(&slopes, tol),
        value: None,
        detail: "secant slopes nondecreasing".into(),
    };

    let fos = ConditionFlag {
        passed: ratio_increasing(nl, 1.0, grid, tol),
        value: None,
        detail: "f(s)/s monotone".into(),
    };

    ConditionReport { p, grid: grid.clone(), tolerance: tol, f1, f2, c, f3, convex, f_over_s_increasing: fos }
}
