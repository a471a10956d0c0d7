//! Scalar numerical kernels shared by the Karamata, blow-down and PDE modules:
//! relative-accuracy quadrature on wide ranges, semi-infinite tail integrals of
//! regularly varying integrands, monotone inversion in log variables, and the
//! tridiagonal solve used by every Newton step.

use crate::error::{Error, Result};
use roots::{find_root_brent, SimpleConvergency};

/// Width (in natural-log units) of one chunk of a log-variable quadrature.
const LOG_CHUNK: f64 = 2.0;

/// Tail integrals switch from quadrature to the power-law remainder this many
/// e-folds (scaled by the decay excess) past the lower limit.
const TAIL_EFOLDS: f64 = 40.0;
const TAIL_MAX_LOG_SPAN: f64 = 60.0;

/// Integrate `f` over the finite interval `[a, b]` with the double-exponential
/// rule. The integrand is normalised by a sample magnitude so the absolute
/// target of the underlying rule behaves like a relative one.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b == a {
        return 0.0;
    }
    let width = b - a;
    let probes = [0.5, 0.25, 0.75, 0.1, 0.9];
    let scale = probes
        .iter()
        .map(|&s| f(a + s * width).abs())
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        * width.abs();
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    // The double-exponential rule bottoms out near 1e-13 relative; asking for
    // more only adds levels and round-off.
    let out = quadrature::integrate(|x| f(x) / scale, a, b, 1e-12);
    out.integral * scale
}

/// Integrate a positive-argument integrand over `[a, b]`, `0 < a < b`, in the
/// variable `v = ln s`, splitting the range into chunks of bounded log-width.
/// Suitable for integrands that vary over many decades.
pub fn integrate_log<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b >= a);
    let (la, lb) = (a.ln(), b.ln());
    let chunks = ((lb - la) / LOG_CHUNK).ceil().max(1.0) as usize;
    let step = (lb - la) / chunks as f64;
    (0..chunks)
        .map(|c| {
            let lo = la + step * c as f64;
            let hi = if c + 1 == chunks { lb } else { lo + step };
            integrate(
                |v| {
                    let s = v.exp();
                    f(s) * s
                },
                lo,
                hi,
            )
        })
        .sum()
}

/// `∫_0^b f`, treating `[0, min(b,1)]` linearly and the rest in log variables.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: F, b: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    if b <= 1.0 {
        return integrate(&f, 0.0, b);
    }
    integrate(&f, 0.0, 1.0) + integrate_log(&f, 1.0, b)
}

/// `∫_y^∞ h(s) ds` for an integrand regularly varying at infinity with index
/// `-decay`, `decay > 1`. Quadrature in log variables up to a switch point
/// `U*`, then the power-law remainder `h(U*) U* / (decay - 1)`.
pub fn tail_integral<F: Fn(f64) -> f64>(h: F, y: f64, decay: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(format!("tail integral lower limit {y:e} must be positive")));
    }
    if !(decay > 1.0) {
        return Err(Error::config(format!(
            "integrand decays with index {decay}, tail integral diverges (need > 1)"
        )));
    }
    let excess = decay - 1.0;
    let mut span = (TAIL_EFOLDS / excess).min(TAIL_MAX_LOG_SPAN);
    let mut switch = y * span.exp();
    // Keep the switch point where the integrand is still representable.
    let mut at_switch = h(switch);
    while !(at_switch.is_finite() && at_switch > 0.0) && span > 1.0 {
        span *= 0.5;
        switch = y * span.exp();
        at_switch = h(switch);
    }
    if !(at_switch.is_finite() && at_switch > 0.0) {
        return Err(Error::Numeric {
            at: switch,
            message: "tail integrand not representable past the lower limit".into(),
        });
    }
    let body = integrate_log(&h, y, switch);
    let remainder = at_switch * switch / excess;
    let total = body + remainder;
    if !total.is_finite() {
        return Err(Error::Numeric { at: y, message: "tail integral is not finite".into() });
    }
    Ok(total)
}

/// Solve `func(y) = target` for a strictly decreasing positive function on
/// `(0, ∞)`, working in `ln y` and `ln func`. `slope_hint` is the expected
/// magnitude of `d ln func / d ln y` and only steers the bracket search.
pub fn invert_decreasing<F>(func: F, target: f64, guess: f64, slope_hint: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::domain(format!("inversion target {target:e} must be positive")));
    }
    let ln_target = target.ln();
    let eval = |v: f64| -> Result<f64> {
        let val = func(v.exp())?;
        if val > 0.0 && val.is_finite() {
            Ok(val.ln() - ln_target)
        } else {
            Err(Error::Numeric { at: v.exp(), message: format!("inverted function returned {val:e}") })
        }
    };
    let slope = slope_hint.abs().max(1e-3);
    let mut lo = guess.max(f64::MIN_POSITIVE).ln();
    let mut g_lo = eval(lo)?;
    if g_lo == 0.0 {
        return Ok(lo.exp());
    }
    // Decreasing function: g > 0 means y is too small.
    let dir = if g_lo > 0.0 { 1.0 } else { -1.0 };
    let mut step = (g_lo.abs() / slope).max(0.5);
    let mut hi = lo;
    let mut g_hi = g_lo;
    let mut found = false;
    for _ in 0..200 {
        hi = lo + dir * step;
        if !(hi.abs() < 700.0) {
            break;
        }
        g_hi = eval(hi)?;
        if g_hi.signum() != g_lo.signum() || g_hi == 0.0 {
            found = true;
            break;
        }
        lo = hi;
        g_lo = g_hi;
        step *= 1.6;
    }
    if !found {
        return Err(Error::domain(format!(
            "value {target:e} lies outside the range of the inverted function"
        )));
    }
    if g_hi == 0.0 {
        return Ok(hi.exp());
    }
    // Absolute tolerance in ln y, kept above the spacing of doubles near the
    // bracket.
    let eps = 4.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0);
    let mut conv = SimpleConvergency { eps, max_iter: 400 };
    // The bracket is already verified; surface evaluation errors separately.
    let failure = std::cell::RefCell::new(None);
    let root = find_root_brent(lo, hi, |v| match eval(v) {
        Ok(g) => g,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    }, &mut conv);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    root.map(f64::exp)
        .map_err(|e| Error::solver(format!("bracketed inversion failed: {e:?}")))
}

/// Solve a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored. Returns `None` on a zero pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = diag[0];
    if denom == 0.0 {
        return None;
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(a > 0.0 && b > 0.0 && n >= 2);
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Piecewise-linear interpolation of `(xs, ys)` at `x` (xs increasing).
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let j = xs.partition_point(|&v| v <= x);
    if j == 0 {
        return Some(ys[0]);
    }
    if j >= xs.len() {
        return Some(ys[xs.len() - 1]);
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(ys[j - 1] * (1.0 - w) + ys[j] * w)
}
