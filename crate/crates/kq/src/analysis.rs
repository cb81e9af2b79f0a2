//! Scaling analysis: log-log power-law fits, shifted power laws, decay
//! classification, peak/crossover/transition extraction, and the table of
//! predicted exponents for each quench regime.
//!
//! Sign convention: fitted slopes keep their sign (decaying data yields a
//! negative exponent); predicted exponents are stored as magnitudes and
//! comparisons are made on |slope|.

use serde::Serialize;

use crate::bath::Statistics;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitModel {
    PowerLaw,
    ShiftedPowerLaw,
    Exponential,
}

/// A fitted decay law with residual diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub model: FitModel,
    /// Slope in log space (power laws) or rate (exponential); sign preserved.
    pub exponent: f64,
    pub amplitude: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_w: Option<f64>,
    pub window: (f64, f64),
    pub n_points: usize,
    pub residual_rms: f64,
    pub r2: f64,
}

const MIN_FIT_POINTS: usize = 8;

/// Numerical floor for excess densities on an `L`-mode grid; fit windows must
/// not extend into data below it.
pub fn numerical_floor(l: usize) -> f64 {
    100.0 * l as f64 * f64::EPSILON
}

/// Latest clean decade of `xs`: the most recent decade-long window whose
/// `|ys|` stay above `floor` and follow a power law with r2 >= 0.995. On a
/// finite grid the late tail goes exponential once only the slowest discrete
/// mode survives, so the latest decade above the floor is usually not the
/// scaling window; scanning backwards for cleanliness skips past that knee.
/// Falls back to the latest decade above the floor when nothing is clean.
pub fn default_relaxation_window(xs: &[f64], ys: &[f64], floor: f64) -> Option<(f64, f64)> {
    let mag: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
    let hi_idx = xs.iter().zip(&mag).rposition(|(_, &y)| y > floor)?;
    let mut fallback = None;
    for end in (0..=hi_idx).rev() {
        let hi = xs[end];
        if hi <= 0.0 {
            break;
        }
        let lo = hi / 10.0;
        let in_window: Vec<usize> = (0..=end).filter(|&i| xs[i] >= lo).collect();
        if in_window.len() < MIN_FIT_POINTS || in_window.iter().any(|&i| mag[i] <= floor) {
            continue;
        }
        if fallback.is_none() {
            fallback = Some((lo, hi));
        }
        if let Ok(fit) = fit_power_law(xs, &mag, Some((lo, hi))) {
            if fit.r2 >= 0.9999 {
                return Some((lo, hi));
            }
        }
    }
    fallback
}

fn select_window<'a>(
    xs: &'a [f64],
    ys: &'a [f64],
    window: Option<(f64, f64)>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if xs.len() != ys.len() {
        return Err(Error::Fit("mismatched series lengths".into()));
    }
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Fit("abscissa must be strictly increasing".into()));
        }
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pairs: (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(&x, _)| x >= lo && x <= hi)
        .map(|(&x, &y)| (x, y))
        .unzip();
    if pairs.0.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "window holds {} points, need at least {MIN_FIT_POINTS}",
            pairs.0.len()
        )));
    }
    Ok(pairs)
}

// OLS of v on u; returns (slope, intercept, residual_rms, r2).
fn ols(us: &[f64], vs: &[f64]) -> (f64, f64, f64, f64) {
    let n = us.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let mut suv = 0.0;
    let mut suu = 0.0;
    let mut svv = 0.0;
    for (&u, &v) in us.iter().zip(vs) {
        suv += (u - mu) * (v - mv);
        suu += (u - mu) * (u - mu);
        svv += (v - mv) * (v - mv);
    }
    let slope = if suu > 0.0 { suv / suu } else { 0.0 };
    let intercept = mv - slope * mu;
    let mut ss_res = 0.0;
    for (&u, &v) in us.iter().zip(vs) {
        let r = v - (intercept + slope * u);
        ss_res += r * r;
    }
    let rms = (ss_res / n).sqrt();
    let r2 = if svv > 0.0 { 1.0 - ss_res / svv } else { 1.0 };
    (slope, intercept, rms, r2)
}

/// Least-squares power law `y = A x^alpha` on (log x, log y).
pub fn fit_power_law(xs: &[f64], ys: &[f64], window: Option<(f64, f64)>) -> Result<FitResult> {
    let (x, y) = select_window(xs, ys, window)?;
    if x[0] <= 0.0 {
        return Err(Error::Fit("power-law fit requires positive abscissa".into()));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("power-law fit requires positive ordinates".into()));
    }
    let us: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let vs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept, rms, r2) = ols(&us, &vs);
    Ok(FitResult {
        model: FitModel::PowerLaw,
        exponent: slope,
        amplitude: intercept.exp(),
        t_w: None,
        window: (x[0], *x.last().unwrap()),
        n_points: x.len(),
        residual_rms: rms,
        r2,
    })
}

/// Least-squares exponential `y = A e^{b x}` on (x, log y).
pub fn fit_exponential(xs: &[f64], ys: &[f64], window: Option<(f64, f64)>) -> Result<FitResult> {
    let (x, y) = select_window(xs, ys, window)?;
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("exponential fit requires positive ordinates".into()));
    }
    let vs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept, rms, r2) = ols(&x, &vs);
    Ok(FitResult {
        model: FitModel::Exponential,
        exponent: slope,
        amplitude: intercept.exp(),
        t_w: None,
        window: (x[0], *x.last().unwrap()),
        n_points: x.len(),
        residual_rms: rms,
        r2,
    })
}

// Log-space RMS of the shifted model at a trial t_w. With alpha fixed the
// amplitude is the residual mean; otherwise slope and intercept come from OLS.
fn shifted_objective(
    x: &[f64],
    logy: &[f64],
    tw: f64,
    alpha: Option<f64>,
) -> (f64, f64, f64, f64, f64) {
    let us: Vec<f64> = x.iter().map(|&v| (v + tw).ln()).collect();
    match alpha {
        Some(a) => {
            let n = us.len() as f64;
            let mean = us
                .iter()
                .zip(logy)
                .map(|(&u, &v)| v + a * u)
                .sum::<f64>()
                / n;
            let mut ss = 0.0;
            let mut svv = 0.0;
            let mv = logy.iter().sum::<f64>() / n;
            for (&u, &v) in us.iter().zip(logy) {
                let r = v - (mean - a * u);
                ss += r * r;
                svv += (v - mv) * (v - mv);
            }
            let rms = (ss / n).sqrt();
            let r2 = if svv > 0.0 { 1.0 - ss / svv } else { 1.0 };
            (rms, -a, mean, r2, tw)
        }
        None => {
            let (slope, intercept, rms, r2) = ols(&us, logy);
            (rms, slope, intercept, r2, tw)
        }
    }
}

/// Fit `y = A (x + t_w)^{-alpha}`; `alpha` (a positive magnitude) may be fixed
/// or fitted jointly. `t_w` is located by golden-section search on `[0, x_max]`.
pub fn fit_shifted_power_law(
    xs: &[f64],
    ys: &[f64],
    alpha: Option<f64>,
    window: Option<(f64, f64)>,
) -> Result<FitResult> {
    let (x, y) = select_window(xs, ys, window)?;
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Fit("shifted fit requires positive ordinates".into()));
    }
    if let Some(a) = alpha {
        if !(a > 0.0) {
            return Err(Error::Fit("fixed alpha must be a positive magnitude".into()));
        }
    }
    let logy: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let hi = *x.last().unwrap();
    let obj = |tw: f64| shifted_objective(&x, &logy, tw, alpha).0;

    // golden-section search to relative tolerance 1e-6 on [0, hi]
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut a0, mut b0) = (0.0, hi);
    let mut c = b0 - phi * (b0 - a0);
    let mut d = a0 + phi * (b0 - a0);
    let (mut fc, mut fd) = (obj(c), obj(d));
    // converge to 1e-6 relative to the bracket midpoint (1e-6 absolute when
    // the optimum sits near zero shift)
    while b0 - a0 > 1e-6 * (0.5 * (a0 + b0)).max(1.0) {
        if fc < fd {
            b0 = d;
            d = c;
            fd = fc;
            c = b0 - phi * (b0 - a0);
            fc = obj(c);
        } else {
            a0 = c;
            c = d;
            fc = fd;
            d = a0 + phi * (b0 - a0);
            fd = obj(d);
        }
    }
    let tw = 0.5 * (a0 + b0);
    // optimum pinned to the upper search boundary means the model is wrong
    if tw > hi * (1.0 - 1e-4) {
        return Err(Error::DegenerateFit(tw));
    }
    let (rms, slope, intercept, r2, tw) = shifted_objective(&x, &logy, tw, alpha);
    Ok(FitResult {
        model: FitModel::ShiftedPowerLaw,
        exponent: slope,
        amplitude: intercept.exp(),
        t_w: Some(tw),
        window: (x[0], hi),
        n_points: x.len(),
        residual_rms: rms,
        r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DecayClass {
    PowerLaw,
    Exponential,
    Ambiguous,
}

/// Decide whether a positive decaying trace is a power law or an exponential:
/// both models are fitted on the same window and the winner must beat the
/// loser's residual by a factor of 2.
pub fn classify_decay(
    xs: &[f64],
    ys: &[f64],
    window: Option<(f64, f64)>,
) -> Result<(DecayClass, FitResult)> {
    let (x, _) = select_window(xs, ys, window)?;
    if x.last().unwrap() / x[0] < 100.0 {
        return Err(Error::Fit(
            "decay classification needs at least two decades of abscissa".into(),
        ));
    }
    let pl = fit_power_law(xs, ys, window)?;
    let ex = fit_exponential(xs, ys, window)?;
    const MARGIN: f64 = 2.0;
    if pl.residual_rms * MARGIN <= ex.residual_rms {
        Ok((DecayClass::PowerLaw, pl))
    } else if ex.residual_rms * MARGIN <= pl.residual_rms {
        Ok((DecayClass::Exponential, ex))
    } else if pl.residual_rms <= ex.residual_rms {
        Ok((DecayClass::Ambiguous, pl))
    } else {
        Ok((DecayClass::Ambiguous, ex))
    }
}

/// Location of the single interior maximum of `values`, refined by a
/// quadratic vertex in log-time through the three samples around the argmax.
pub fn peak_time(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 3 {
        return Err(Error::Fit("peak extraction needs at least 3 samples".into()));
    }
    let (imax, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if imax == 0 || imax == values.len() - 1 {
        return Err(Error::Fit(format!(
            "maximum sits at the window endpoint t={}",
            times[imax]
        )));
    }
    if times[imax - 1] <= 0.0 {
        return Ok(times[imax]);
    }
    let (u0, u1, u2) = (
        times[imax - 1].ln(),
        times[imax].ln(),
        times[imax + 1].ln(),
    );
    let (v0, v1, v2) = (values[imax - 1], values[imax], values[imax + 1]);
    let da = u1 - u0;
    let db = u1 - u2;
    let num = da * da * (v1 - v2) - db * db * (v1 - v0);
    let den = da * (v1 - v2) - db * (v1 - v0);
    if den == 0.0 {
        return Ok(times[imax]);
    }
    let u_star = u1 - 0.5 * num / den;
    Ok(u_star.exp())
}

// Best decade-long window whose power-law fit has r2 >= 0.99 and slope
// closest to `target`; scanned over every sample as a window start.
fn best_decade_window(xs: &[f64], ys: &[f64], target: f64) -> Result<FitResult> {
    let mut best: Option<FitResult> = None;
    for (i, &lo) in xs.iter().enumerate() {
        if lo <= 0.0 {
            continue;
        }
        let hi = lo * 10.0;
        if *xs.last().unwrap() < hi {
            break;
        }
        let _ = i;
        let fit = match fit_power_law(xs, ys, Some((lo, hi))) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if fit.r2 < 0.99 {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => (fit.exponent - target).abs() < (b.exponent - target).abs(),
        };
        if better {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| {
        Error::Fit(format!(
            "no decade window fits a power law with slope near {target} at r2 >= 0.99"
        ))
    })
}

/// Intersection time of the two power-law regimes of a trace; each regime is
/// fitted on its own automatically chosen decade window.
pub fn crossover_time(
    times: &[f64],
    values: &[f64],
    early_exponent: f64,
    late_exponent: f64,
) -> Result<f64> {
    let early = best_decade_window(times, values, -early_exponent.abs())?;
    let late = best_decade_window(times, values, -late_exponent.abs())?;
    let ds = early.exponent - late.exponent;
    if ds == 0.0 {
        return Err(Error::Fit("regime slopes coincide; no crossover".into()));
    }
    let lt = (late.amplitude.ln() - early.amplitude.ln()) / ds;
    Ok(lt.exp())
}

/// Time of the earliest crossing of `delta` by `|trace_a - trace_b|`
/// (linear interpolation between samples).
///
/// Marks where an off-critical trace departs from the critical reference it
/// had been shadowing. Because both traces carry an overall offset set by
/// their initial states, callers comparing physical traces should normalise
/// by the reference first (divide both series by it) so that a single
/// threshold works across different gap sizes.
pub fn transition_time_offcritical(
    times: &[f64],
    trace_a: &[f64],
    trace_b: &[f64],
    delta: f64,
) -> Result<f64> {
    if times.len() != trace_a.len() || times.len() != trace_b.len() {
        return Err(Error::Fit("traces must share the sample grid".into()));
    }
    if times.is_empty() {
        return Err(Error::Fit("empty traces".into()));
    }
    if !(delta > 0.0) {
        return Err(Error::Fit("delta must be positive".into()));
    }
    let diff: Vec<f64> = trace_a
        .iter()
        .zip(trace_b)
        .map(|(&a, &b)| (a - b).abs())
        .collect();
    let Some(i) = diff.iter().position(|&d| d > delta) else {
        return Err(Error::NotReached(format!(
            "trace difference stays below delta = {delta:e}"
        )));
    };
    if i == 0 {
        // already separated at the start of the window
        return Ok(times[0]);
    }
    let (t0, d0) = (times[i - 1], diff[i - 1]);
    let (t1, d1) = (times[i], diff[i]);
    Ok(t0 + (t1 - t0) * (delta - d0) / (d1 - d0))
}

/// A predicted decay exponent (magnitude) and the regime it comes from.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryPrediction {
    pub exponent: f64,
    pub regime: String,
}

/// The physical situation a run probes, for exponent prediction.
#[derive(Debug, Clone, Copy)]
pub struct RegimeQuery {
    pub zeta: Statistics,
    pub s: f64,
    /// Dynamical exponent of the post-quench chain; `None` off criticality.
    pub z: Option<u8>,
    /// Sudden quench (relaxation in t) vs linear ramp (endpoint scaling in tau).
    pub sudden: bool,
    pub temp_i: f64,
    pub temp_f: f64,
}

/// Predicted |exponent| for the configuration, if it falls in a known regime.
///
/// Off criticality the decays turn exponential and no power law is predicted,
/// except the intrinsic `tau^{-1}` term of a ramp ending at finite temperature,
/// which survives away from the critical point.
pub fn theory_exponent(q: &RegimeQuery) -> Option<TheoryPrediction> {
    let heating = q.temp_f > q.temp_i;
    let to_zero = q.temp_f == 0.0;
    let from_zero = q.temp_i == 0.0;
    let z = match q.z {
        Some(z) => z as f64,
        None => {
            return if !q.sudden && !to_zero {
                Some(TheoryPrediction {
                    exponent: 1.0,
                    regime: "intrinsic finite-temperature ramp term (off criticality)".into(),
                })
            } else {
                None
            };
        }
    };
    let s = q.s;
    // small-k exponent of the total rate: z*s at T=0 for both statistics,
    // z*(s-1) at finite temperature for a bosonic bath
    let pred = |e: f64, label: &str| {
        Some(TheoryPrediction {
            exponent: e,
            regime: label.into(),
        })
    };
    match (q.sudden, to_zero, from_zero, heating) {
        // sudden cool to the gapless point: rate ~ k^{zs} for either bath
        (true, true, _, false) => {
            if s >= 1.0 {
                pred(1.0 / (z * s), "sudden cooling to the critical point")
            } else {
                None
            }
        }
        // sudden heat from the critical ground state to finite T
        (true, false, true, true) => match q.zeta {
            Statistics::Fermionic if s >= 1.0 => {
                pred(1.0 / (z * s), "sudden heating from the critical point")
            }
            Statistics::Bosonic if s >= 2.0 => pred(
                1.0 / (z * (s - 1.0)),
                "sudden heating from the critical point, bosonic bath",
            ),
            _ => None,
        },
        // sudden cool between finite temperatures
        (true, false, false, false) => match q.zeta {
            Statistics::Fermionic if s >= 1.0 => pred(
                (z + 1.0) / (z * s),
                "sudden cooling to finite temperature",
            ),
            Statistics::Bosonic if s >= 2.0 => pred(
                (z + 1.0) / (z * (s - 1.0)),
                "sudden cooling to finite temperature, bosonic bath",
            ),
            _ => None,
        },
        // linear cool ending at the critical point: frozen-stage scaling
        (false, true, _, false) => pred(
            1.0 / (z * (s + 1.0)),
            "linear cooling to the critical point",
        ),
        // linear heat from the critical point to finite T
        (false, false, true, true) => {
            let rate_exp = match q.zeta {
                Statistics::Fermionic => z * s,
                Statistics::Bosonic => z * (s - 1.0),
            };
            if rate_exp >= 1.0 {
                pred(1.0 / rate_exp, "linear heating from the critical point")
            } else {
                pred(
                    1.0,
                    "linear heating from the critical point, slow-rate branch",
                )
            }
        }
        // linear cool between finite temperatures
        (false, false, false, false) => {
            let (branch, rate_exp) = match q.zeta {
                Statistics::Fermionic => (z * (s - 1.0), z * s),
                Statistics::Bosonic => (z * (s - 2.0), z * (s - 1.0)),
            };
            if branch >= 1.0 {
                pred(
                    (z + 1.0) / rate_exp,
                    "linear cooling to finite temperature",
                )
            } else {
                pred(
                    1.0,
                    "linear cooling to finite temperature, slow-rate branch",
                )
            }
        }
        _ => None,
    }
}
