//! Empirical indices of regular variation, at infinity and at the origin.

use crate::error::{Error, Result};
use crate::extrapolation::{extrapolate, extrapolate_polynomial, Extrapolation};

/// Index estimate along a ladder, with the per-rung values it was built from.
#[derive(Debug, Clone)]
pub struct IndexEstimate {
    pub index: f64,
    /// `(ladder point, local estimate)` per rung.
    pub rungs: Vec<(f64, f64)>,
    pub extrapolation: Extrapolation,
}

/// Estimate the index `ρ` of `f ∈ RV_ρ` from `log(f(ξu)/f(u)) / log ξ` on an
/// increasing ladder of `u > 1`. The rung estimates carry slowly varying
/// errors that are polynomial in `1/ln u`; they are extrapolated to
/// `1/ln u → 0` with three-point Neville fits.
pub fn index_at_infinity<F: Fn(f64) -> f64>(f: F, xi: f64, ladder: &[f64]) -> Result<IndexEstimate> {
    if !(xi > 0.0) || (xi - 1.0).abs() < 1e-12 {
        return Err(Error::domain(format!("probe factor must be positive and != 1, got {xi}")));
    }
    if ladder.is_empty() || ladder.iter().any(|&u| !(u > 1.0)) {
        return Err(Error::domain("index ladder must consist of points u > 1"));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("index ladder must be increasing"));
    }
    let mut rungs = Vec::with_capacity(ladder.len());
    for &u in ladder {
        let (a, b) = (f(xi * u), f(u));
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Numeric { at: u, message: format!("f(u) = {b:e}, f(ξu) = {a:e}") });
        }
        rungs.push((u, (a / b).ln() / xi.ln()));
    }
    let xs: Vec<f64> = rungs.iter().map(|(u, _)| 1.0 / u.ln()).collect();
    let ys: Vec<f64> = rungs.iter().map(|(_, e)| *e).collect();
    let extrapolation = if ys.len() >= 3 {
        let flat = extrapolate(&ys);
        if flat.method == crate::extrapolation::Method::Flat {
            flat
        } else {
            extrapolate_polynomial(&xs, &ys, 3)
        }
    } else {
        extrapolate(&ys)
    };
    Ok(IndexEstimate { index: extrapolation.limit, rungs, extrapolation })
}

/// Local index at `0⁺`: log-log secant slopes `ln(f(s)/f(s/2)) / ln 2` on a
/// decreasing ladder, accelerated with the default ladder policy.
pub fn index_at_zero<F: Fn(f64) -> f64>(f: F, ladder: &[f64]) -> Result<IndexEstimate> {
    if ladder.is_empty() || ladder.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::domain("ladder at the origin must be positive"));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain("ladder at the origin must decrease"));
    }
    let mut rungs = Vec::with_capacity(ladder.len());
    for &s in ladder {
        let (a, b) = (f(s), f(0.5 * s));
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Numeric { at: s, message: format!("f(s) = {a:e}, f(s/2) = {b:e}") });
        }
        rungs.push((s, (a / b).ln() / std::f64::consts::LN_2));
    }
    let ys: Vec<f64> = rungs.iter().map(|(_, e)| *e).collect();
    let extrapolation = extrapolate(&ys);
    Ok(IndexEstimate { index: extrapolation.limit, rungs, extrapolation })
}

/// Geometric ladder `start · ratio^k`, `k = 0..n`.
pub fn geometric_ladder(start: f64, ratio: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| start * ratio.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_at_infinity() {
        let est = index_at_infinity(|u| u.powf(1.5), 3.0, &[10.0, 100.0, 1000.0]).unwrap();
        assert!((est.index - 1.5).abs() < 1e-12);
        for (_, e) in est.rungs {
            assert!((e - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn log_factor_is_extrapolated_away() {
        let ladder = geometric_ladder(1e8 / 2f64.powi(11), 2.0, 12);
        let est = index_at_infinity(|u| u.powi(3) * (1.0 + u).ln(), 2.0, &ladder).unwrap();
        // a single rung at 1e8 is still ~0.053 off
        let last = est.rungs.last().unwrap().1;
        assert!((last - 3.0).abs() > 0.05);
        assert!((est.index - 3.0).abs() < 1e-2, "{}", est.index);
    }

    #[test]
    fn index_at_zero_of_power() {
        let ladder = geometric_ladder(0.1, 0.5, 8);
        let est = index_at_zero(|s| s.powf(-0.5), &ladder).unwrap();
        assert!((est.index + 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_probe() {
        assert!(index_at_infinity(|u| u, 1.0, &[10.0]).is_err());
        assert!(index_at_infinity(|u| u, 2.0, &[0.5, 10.0]).is_err());
        let r = index_at_infinity(|_| f64::NAN, 2.0, &[10.0]);
        assert!(matches!(r, Err(Error::Numeric { at, .. }) if at == 10.0));
    }
}
