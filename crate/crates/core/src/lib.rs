//! Numerical laboratory for `u_t - Δ_p u = -b(x,t) f(u)` with infinite
//! initial and boundary data: Karamata regular-variation profiles, blow-down
//! curves, monotone cap-at-n approximation of the elliptic and parabolic
//! blow-up problems, and extraction of their asymptotic rates.

// NaN-rejecting guards read best as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blowdown;
pub mod elliptic;
pub mod error;
pub mod extrapolation;
pub mod fv;
pub mod geometry;
pub mod karamata;
pub mod nonlinearity;
pub mod numerics;
pub mod parabolic;
pub mod rates;
pub mod variation;

pub use error::{Error, Result};
