//! Exponential integrator for the per-mode rate equation.
//!
//! The equation `q' = -2 gamma(t) [q - g(t)]` is stiff across the grid:
//! `gamma ~ gamma0 eps^s` spans many orders of magnitude between the
//! gap-closing momentum and the zone edge. Each step freezes `gamma` and `g`
//! at the midpoint and applies the exact constant-coefficient propagator
//! `q <- g + (q - g) e^{-2 gamma h}`, which is unconditionally stable and
//! exact whenever the coefficients are constant (sudden stages, post-ramp
//! relaxation). Step size is controlled by step-doubling; the accepted value
//! is the Richardson-extrapolated combination, clamped back into the
//! invariant interval.

use crate::error::{Error, Result};

/// Minimum step relative to the span before giving up.
const MIN_STEP_FRACTION: f64 = 1e-13;

/// One frozen-coefficient step from `t` over `h`.
#[inline]
fn exp_step<F: Fn(f64) -> (f64, f64)>(q: f64, t: f64, h: f64, coeff: &F) -> f64 {
    let (gamma, g) = coeff(t + 0.5 * h);
    g + (q - g) * (-2.0 * gamma * h).exp()
}

/// Integrate `q' = -2 gamma(t) (q - g(t))` from `(t0, q0)` to `t1`.
///
/// `coeff(t) = (gamma, g)`. `tol` is the local error allowance per unit time.
/// `bounds` is the invariant interval for `q`; the extrapolated value is
/// clamped into it so occupations can never leave `[0, 1]`.
pub fn evolve_exponential<F: Fn(f64) -> (f64, f64)>(
    q0: f64,
    t0: f64,
    t1: f64,
    tol: f64,
    bounds: (f64, f64),
    coeff: &F,
    k_label: f64,
) -> Result<f64> {
    debug_assert!(t1 >= t0);
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(q0);
    }
    let mut t = t0;
    let mut q = q0;
    let mut h = span / 16.0;
    let h_min = span * MIN_STEP_FRACTION;
    while t < t1 {
        if h < h_min {
            return Err(Error::StepUnderflow { k: k_label, t });
        }
        let h_eff = h.min(t1 - t);
        let full = exp_step(q, t, h_eff, coeff);
        let half = exp_step(q, t, 0.5 * h_eff, coeff);
        let two_half = exp_step(half, t + 0.5 * h_eff, 0.5 * h_eff, coeff);
        let err = (two_half - full).abs();
        // floating-point floor: below a few ulps of the state the doubling
        // estimate is pure rounding noise and must not drive rejections
        let allow = tol * h_eff + 8.0 * f64::EPSILON * (q.abs() + 1.0);
        if err <= allow {
            // second-order method: extrapolation cancels the leading term
            let extrapolated = two_half + (two_half - full) / 3.0;
            q = extrapolated.clamp(bounds.0, bounds.1);
            t += h_eff;
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * (allow / err).powf(1.0 / 3.0)).clamp(0.2, 5.0)
            };
            h = h_eff * grow;
        } else {
            h = h_eff * (0.9 * (allow / err).powf(1.0 / 3.0)).clamp(0.1, 0.9);
        }
    }
    Ok(q)
}
