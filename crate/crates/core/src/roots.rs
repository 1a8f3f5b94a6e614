//! Safeguarded scalar root finding for increasing functions.

use crate::error::{Error, Result};

/// Relative bracket width below which Newton steps are attempted.
const NEWTON_SWITCH: f64 = 1e-2;
const MAX_ITERS: usize = 400;

/// Finds a root of an increasing function `f` inside `[lo, hi]`, where `f(lo) ≤ 0 ≤ f(hi)`.
///
/// `f` returns `(value, derivative)`. Bisection runs until the bracket is narrower than
/// [`NEWTON_SWITCH`] relative width, after which Newton steps are taken whenever they
/// stay strictly inside the current bracket. Stops when `|f| ≤ tol` or the bracket has
/// collapsed to adjacent floats, returning the evaluated point with the smallest `|f|`.
pub(crate) fn increasing_root(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Bracket(format!("invalid interval [{lo}, {hi}]")));
    }
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo:e}, {hi:e}]: f(lo) = {flo:e}, f(hi) = {fhi:e}"
        )));
    }
    let mut best = if flo.abs() <= fhi.abs() {
        (lo, flo)
    } else {
        (hi, fhi)
    };
    if best.1.abs() <= tol {
        return Ok(best.0);
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERS {
        let (fx, dfx) = f(x);
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        x = if hi - lo <= NEWTON_SWITCH * hi.abs() && dfx > 0.0 && dfx.is_finite() {
            let step = x - fx / dfx;
            if step > lo && step < hi {
                step
            } else {
                mid
            }
        } else {
            mid
        };
    }
    Ok(best.0)
}
