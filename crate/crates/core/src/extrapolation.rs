//! Limits of sequences sampled on geometric ladders.
//!
//! Ladders halve (or double) the ladder variable at every rung, so a limit
//! approached like `L + c λ^k` is recovered exactly by the Aitken Δ² process
//! regardless of the unknown rate `λ`. Sequences with slowly varying errors
//! in `1/ln u` are handled by polynomial extrapolation in that variable.

/// Relative size below which successive differences count as round-off.
const NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Too few rungs: the last value is reported.
    LastValue,
    /// Ladder values agree to round-off.
    Flat,
    /// Aitken Δ² on consecutive triples.
    Aitken,
    /// Richardson elimination of a known power of the ladder variable.
    Richardson { order: f64 },
    /// Polynomial (Neville) extrapolation to zero in a transformed variable.
    Polynomial,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::LastValue => write!(f, "last-value"),
            Method::Flat => write!(f, "flat"),
            Method::Aitken => write!(f, "aitken"),
            Method::Richardson { order } => write!(f, "richardson(order={order})"),
            Method::Polynomial => write!(f, "neville"),
        }
    }
}

/// Outcome of extrapolating a ladder: the limit, the last three iterates of
/// the accelerated sequence, and whether they contract.
#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    pub iterates: Vec<f64>,
    pub method: Method,
    pub converged: bool,
}

fn is_noise(diff: f64, scale: f64) -> bool {
    diff.abs() <= NOISE_FLOOR * scale.abs().max(f64::MIN_POSITIVE)
}

/// Last three iterates shrink in successive differences (or sit at round-off).
pub fn contracting(iterates: &[f64]) -> bool {
    if iterates.len() < 3 {
        return false;
    }
    let n = iterates.len();
    let (a, b, c) = (iterates[n - 3], iterates[n - 2], iterates[n - 1]);
    let (d1, d2) = (b - a, c - b);
    d2.abs() <= d1.abs() || (is_noise(d1, c) && is_noise(d2, c))
}

/// Aitken Δ² iterates `A_k` built from `(s_k, s_{k+1}, s_{k+2})`.
pub fn aitken(seq: &[f64]) -> Vec<f64> {
    seq.windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let denom = (c - b) - (b - a);
            if is_noise(denom, c) || !denom.is_finite() {
                c
            } else {
                c - (c - b) * (c - b) / denom
            }
        })
        .collect()
}

/// Richardson iterates for a ladder whose variable shrinks by `ratio` per rung
/// and whose leading error is proportional to that variable to `order`.
pub fn richardson(seq: &[f64], ratio: f64, order: f64) -> Vec<f64> {
    let factor = ratio.powf(order);
    seq.windows(2).map(|w| (factor * w[1] - w[0]) / (factor - 1.0)).collect()
}

/// Value at `x = 0` of the interpolating polynomial through `(xs, ys)`.
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    let mut p = ys.to_vec();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

/// Default policy for a geometric ladder ordered toward the limit: flat
/// sequences are accepted as-is, otherwise Aitken Δ² is applied and its last
/// three iterates must contract.
pub fn extrapolate(seq: &[f64]) -> Extrapolation {
    let n = seq.len();
    if n == 0 {
        return Extrapolation { limit: f64::NAN, iterates: vec![], method: Method::LastValue, converged: false };
    }
    let last = seq[n - 1];
    if n < 3 {
        return Extrapolation { limit: last, iterates: seq.to_vec(), method: Method::LastValue, converged: false };
    }
    if seq.windows(2).all(|w| is_noise(w[1] - w[0], last)) {
        let tail = seq[n - 3..].to_vec();
        return Extrapolation { limit: last, iterates: tail, method: Method::Flat, converged: true };
    }
    let acc = aitken(seq);
    let tail: Vec<f64> = acc[acc.len().saturating_sub(3)..].to_vec();
    let limit = *tail.last().unwrap();
    let converged = contracting(&tail) && limit.is_finite();
    Extrapolation { limit, iterates: tail, method: Method::Aitken, converged }
}

/// As [`extrapolate`], for data carrying a known noise level: when the last
/// three values agree to `floor` (relative) the ladder counts as flat at
/// that level and converged, and Aitken steps whose second difference is
/// below the floor fall back to the newest value.
pub fn extrapolate_with_floor(seq: &[f64], floor: f64) -> Extrapolation {
    let n = seq.len();
    if n < 3 || !(floor > 0.0) {
        return extrapolate(seq);
    }
    let last = seq[n - 1];
    let tail = &seq[n - 3..];
    let spread = tail.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - tail.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if spread <= floor * last.abs() {
        return Extrapolation { limit: last, iterates: tail.to_vec(), method: Method::Flat, converged: last.is_finite() };
    }
    let acc: Vec<f64> = seq
        .windows(3)
        .map(|w| {
            let (a, b, c) = (w[0], w[1], w[2]);
            let denom = (c - b) - (b - a);
            if denom.abs() <= floor * c.abs() || !denom.is_finite() {
                c
            } else {
                c - (c - b) * (c - b) / denom
            }
        })
        .collect();
    let tail: Vec<f64> = acc[acc.len().saturating_sub(3)..].to_vec();
    let limit = *tail.last().unwrap();
    let small = tail.len() == 3 && tail.windows(2).all(|w| (w[1] - w[0]).abs() <= floor * limit.abs());
    let converged = (contracting(&tail) || small) && limit.is_finite();
    Extrapolation { limit, iterates: tail, method: Method::Aitken, converged }
}

/// Richardson policy with a known order; the iterates are the eliminated
/// sequence.
pub fn extrapolate_richardson(seq: &[f64], ratio: f64, order: f64) -> Extrapolation {
    if seq.len() < 2 {
        return extrapolate(seq);
    }
    let acc = richardson(seq, ratio, order);
    let tail: Vec<f64> = acc[acc.len().saturating_sub(3)..].to_vec();
    let limit = *tail.last().unwrap();
    Extrapolation { limit, converged: contracting(&tail), iterates: tail, method: Method::Richardson { order } }
}

/// Extrapolate `ys` sampled at transformed abscissae `xs` (tending to 0) with
/// successive Neville fits over windows of `window` points.
pub fn extrapolate_polynomial(xs: &[f64], ys: &[f64], window: usize) -> Extrapolation {
    let n = xs.len();
    if n < window || window == 0 {
        return extrapolate(ys);
    }
    let acc: Vec<f64> = (0..=n - window)
        .map(|s| neville_at_zero(&xs[s..s + window], &ys[s..s + window]))
        .collect();
    let tail: Vec<f64> = acc[acc.len().saturating_sub(3)..].to_vec();
    let limit = *tail.last().unwrap();
    Extrapolation { limit, converged: contracting(&tail) || tail.len() < 3, iterates: tail, method: Method::Polynomial }
}
