//! Time evolution of the momentum-mode occupations.
//!
//! Three routes are implemented and cross-validated:
//!
//! * the exact constant-rate propagator for sudden quenches,
//! * the integrating-factor quadrature for linear ramps,
//! * the midpoint-frozen exponential integrator for arbitrary temperature
//!   trajectories,
//!
//! plus the covariance (Third-Quantization) evolution in
//! [`third_quantization`] as an independent formulation.
//!
//! Temperature-only protocols leave the `+-k` symmetry intact, so the ramp
//! engines evolve one member of each symmetric pair and mirror the result.
//! Densities are always reduced with compensated summation in grid order,
//! which keeps them bit-identical across worker counts.

pub mod ode;
pub mod third_quantization;

use serde::{Deserialize, Serialize};

use crate::bath::{thermal_occupation, BathSpec, Statistics};
use crate::chain::ModeSpectrum;
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature;
use crate::schedule::QuenchSchedule;
use crate::sum::{compensated_mean, CompensatedSum};

/// Numerical tolerances, all configurable from the run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub quad_tol: f64,
    pub ode_tol: f64,
    pub delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quad_tol: 1e-12,
            ode_tol: 1e-10,
            delta: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0) || !(self.ode_tol > 0.0) || !(self.delta > 0.0) {
            return Err(Error::InvalidConfig(
                "tolerances must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-mode occupations at a single time.
#[derive(Debug, Clone)]
pub struct ModeEnsemble {
    pub p: Vec<f64>,
    pub t: f64,
}

/// Density trace. `excess` is the authoritative small quantity; `d` is
/// reconstructed as `d_th_final + excess`, so `d - d_th_final == excess`
/// holds bit-exactly.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub d: Vec<f64>,
    pub d_th_final: f64,
    pub d_th_inst: Vec<f64>,
    pub excess: Vec<f64>,
}

impl TimeSeries {
    pub fn from_excess(
        times: Vec<f64>,
        excess: Vec<f64>,
        d_th_final: f64,
        d_th_inst: Vec<f64>,
    ) -> Self {
        let d = excess.iter().map(|&e| d_th_final + e).collect();
        Self {
            times,
            d,
            d_th_final,
            d_th_inst,
            excess,
        }
    }
}

/// Excitation density `D = (1/L) sum_k P_k`, compensated, in grid order.
pub fn excitation_density(ens: &ModeEnsemble) -> f64 {
    compensated_mean(&ens.p)
}

/// Thermal quasiparticle occupations on the grid at temperature `t`.
pub fn thermal_occupations(spectrum: &ModeSpectrum, t: f64) -> Result<Vec<f64>> {
    spectrum
        .eps
        .iter()
        .map(|&e| thermal_occupation(e, t))
        .collect()
}

/// Thermal excitation density at temperature `t` (exact grid sum).
pub fn thermal_density(spectrum: &ModeSpectrum, t: f64) -> Result<f64> {
    Ok(compensated_mean(&thermal_occupations(spectrum, t)?))
}

// ---------------------------------------------------------------------------
// sudden quenches: exact constant-rate propagator
// ---------------------------------------------------------------------------

/// Precomputed rates and thermal targets for evolution at fixed temperature.
#[derive(Debug, Clone)]
pub struct ConstantPropagator {
    pub gammas: Vec<f64>,
    pub p_th: Vec<f64>,
    pub temp: f64,
}

impl ConstantPropagator {
    pub fn new(spectrum: &ModeSpectrum, bath: &BathSpec, temp: f64) -> Result<Self> {
        let gammas = spectrum
            .eps
            .iter()
            .map(|&e| bath.total_rate(e, temp))
            .collect::<Result<Vec<_>>>()?;
        let p_th = thermal_occupations(spectrum, temp)?;
        Ok(Self {
            gammas,
            p_th,
            temp,
        })
    }

    /// Deviations from the target thermal state, `q = p - p_th`.
    pub fn deviations(&self, p0: &[f64]) -> Vec<f64> {
        p0.iter().zip(&self.p_th).map(|(&p, &th)| p - th).collect()
    }

    /// Per-mode deviation at time `t`: `q_k(t) = q_k(0) e^{-2 gamma_k t}`.
    pub fn deviations_at(&self, q0: &[f64], t: f64) -> Vec<f64> {
        q0.iter()
            .zip(&self.gammas)
            .map(|(&q, &g)| q * (-2.0 * g * t).exp())
            .collect()
    }

    /// Occupations at time `t`.
    pub fn occupations_at(&self, q0: &[f64], t: f64) -> Vec<f64> {
        self.deviations_at(q0, t)
            .iter()
            .zip(&self.p_th)
            .map(|(&q, &th)| (th + q).clamp(0.0, 1.0))
            .collect()
    }

    /// Excess density `D(t) - D_th` at each sample time, parallel over times,
    /// reduced sequentially over modes in grid order.
    pub fn excess_density_series(&self, q0: &[f64], times: &[f64]) -> Vec<f64> {
        let gammas = &self.gammas;
        par::map_modes(times.len(), |j| {
            let t = times[j];
            let mut acc = CompensatedSum::new();
            for (q, g) in q0.iter().zip(gammas) {
                acc.add(q * (-2.0 * g * t).exp());
            }
            acc.value() / q0.len() as f64
        })
    }
}

/// Exact solution of the rate equation at fixed post-quench temperature.
pub fn sudden_solution(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    temp_f: f64,
    t: f64,
) -> Result<ModeEnsemble> {
    if t < 0.0 {
        return Err(Error::InvalidSchedule(format!("negative time {t}")));
    }
    let prop = ConstantPropagator::new(spectrum, bath, temp_f)?;
    let q0 = prop.deviations(p0);
    Ok(ModeEnsemble {
        p: prop.occupations_at(&q0, t),
        t,
    })
}

// ---------------------------------------------------------------------------
// linear ramps: integrating-factor quadrature
// ---------------------------------------------------------------------------

fn ramp_params(schedule: &QuenchSchedule) -> Result<f64> {
    match schedule.kind {
        crate::schedule::ScheduleKind::LinearRamp { .. }
        | crate::schedule::ScheduleKind::RampThenRelax { .. } => Ok(schedule.ramp_end_time()),
        crate::schedule::ScheduleKind::Sudden => Err(Error::InvalidSchedule(
            "quadrature solution requires a ramp schedule".into(),
        )),
    }
}

// Deviation of one mode from the final thermal state at the ramp end, for a
// fermionic bath (gamma constant along a temperature ramp):
//   q(t_f) = e^{-2 g t_f} (p0 - pth_f)
//          + int_0^{t_f} 2 g e^{-2 g (t_f - t)} [pth(T(t)) - pth_f] dt.
// Written in the deviation variable so the small excess never suffers
// cancellation against the O(1) density.
fn mode_excess_quadrature_fermionic(
    eps: f64,
    p0: f64,
    schedule: &QuenchSchedule,
    bath: &BathSpec,
    quad_tol: f64,
) -> Result<f64> {
    let t_f = ramp_params(schedule)?;
    let gamma = bath.spectral_density(eps);
    let pth_f = thermal_occupation(eps, schedule.temp_f)?;
    let decay = (-2.0 * gamma * t_f).exp();
    let mut excess = decay * (p0 - pth_f);
    if gamma > 0.0 && t_f > 0.0 {
        // substitution u = t_f - t puts the boundary layer at u = 0
        let u_max = t_f.min(60.0 / (2.0 * gamma));
        let integrand = |u: f64| {
            let temp = schedule.temperature_at(t_f - u);
            2.0 * gamma
                * (-2.0 * gamma * u).exp()
                * (crate::bath::fermi_raw(eps, temp) - pth_f)
        };
        let mut breaks = Vec::new();
        let mut u = 0.25 / (2.0 * gamma);
        while u < u_max {
            breaks.push(u);
            u *= 2.0;
        }
        excess += quadrature::adaptive_simpson_segmented(
            &integrand,
            0.0,
            u_max,
            &breaks,
            quad_tol,
            quadrature::DEFAULT_MAX_SUBDIVISIONS,
        )
        .map_err(|e| tag_mode(e, eps))?;
    }
    Ok(excess)
}

// Bosonic generalization: the rate depends on T(t), so the integrating factor
// becomes exp(-2 int gamma dt). The cumulative rate integral is tabulated
// once per mode on a uniform grid (two-point Gauss panels, smooth integrand),
// which makes the weight cheap enough for the outer adaptive quadrature.
fn mode_excess_quadrature_bosonic(
    eps: f64,
    p0: f64,
    schedule: &QuenchSchedule,
    bath: &BathSpec,
    quad_tol: f64,
) -> Result<f64> {
    let t_f = ramp_params(schedule)?;
    let pth_f = thermal_occupation(eps, schedule.temp_f)?;
    if t_f == 0.0 {
        return Ok(p0 - pth_f);
    }
    let gamma_at = |t: f64| crate::bath::total_rate_raw(bath, eps, schedule.temperature_at(t));
    const CELLS: usize = 4096;
    const GAUSS_OFF: f64 = 0.288_675_134_594_812_9; // 1/(2 sqrt 3)
    let h = t_f / CELLS as f64;
    let mut cum = Vec::with_capacity(CELLS + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for i in 0..CELLS {
        let mid = (i as f64 + 0.5) * h;
        let off = h * GAUSS_OFF;
        acc += 0.5 * h * (gamma_at(mid - off) + gamma_at(mid + off));
        cum.push(acc);
    }
    let gamma_total = cum[CELLS];
    // Gamma(t): whole cells from the table plus a partial Gauss panel
    let gamma_int = |t: f64| -> f64 {
        let i = ((t / h) as usize).min(CELLS - 1);
        let a = i as f64 * h;
        let w = t - a;
        let mid = a + 0.5 * w;
        let off = w * GAUSS_OFF;
        cum[i] + 0.5 * w * (gamma_at(mid - off) + gamma_at(mid + off))
    };
    let mut excess = (-2.0 * gamma_total).exp() * (p0 - pth_f);
    let integrand = |t: f64| {
        2.0 * gamma_at(t)
            * (-2.0 * (gamma_total - gamma_int(t)).max(0.0)).exp()
            * (crate::bath::fermi_raw(eps, schedule.temperature_at(t)) - pth_f)
    };
    let g_end = gamma_at(t_f).max(1e-300);
    let mut breaks = Vec::new();
    let mut u = 0.25 / (2.0 * g_end);
    while u < t_f {
        breaks.push(t_f - u);
        u *= 2.0;
    }
    excess += quadrature::adaptive_simpson_segmented(
        &integrand,
        0.0,
        t_f,
        &breaks,
        quad_tol,
        quadrature::DEFAULT_MAX_SUBDIVISIONS,
    )
    .map_err(|e| tag_mode(e, eps))?;
    Ok(excess)
}

// Trace variant of the fermionic quadrature: the rate is constant per mode,
// so the deviation advances across each sample segment with the exact
// integrating factor; the forcing integral only runs while the ramp drives
// the thermal target away from its final value.
fn mode_excess_trace_fermionic(
    eps: f64,
    p0: f64,
    schedule: &QuenchSchedule,
    bath: &BathSpec,
    sample_times: &[f64],
    quad_tol: f64,
) -> Result<Vec<f64>> {
    let ramp_end = schedule.ramp_end_time();
    let gamma = bath.spectral_density(eps);
    let pth_f = thermal_occupation(eps, schedule.temp_f)?;
    let mut q = p0 - pth_f;
    let mut a = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &b in sample_times {
        if b > a {
            q *= (-2.0 * gamma * (b - a)).exp();
            let drive_end = b.min(ramp_end);
            if a < drive_end && gamma > 0.0 {
                // v = b - u puts the decay kernel's boundary layer at v = v0
                let v0 = b - drive_end;
                let v_max = (b - a).min(v0 + 60.0 / (2.0 * gamma));
                let integrand = |v: f64| {
                    let temp = schedule.temperature_at(b - v);
                    2.0 * gamma
                        * (-2.0 * gamma * v).exp()
                        * (crate::bath::fermi_raw(eps, temp) - pth_f)
                };
                let mut breaks = Vec::new();
                let mut v = v0 + 0.25 / (2.0 * gamma);
                while v < v_max {
                    breaks.push(v);
                    v *= 2.0;
                }
                q += quadrature::adaptive_simpson_segmented(
                    &integrand,
                    v0,
                    v_max,
                    &breaks,
                    quad_tol,
                    quadrature::DEFAULT_MAX_SUBDIVISIONS,
                )
                .map_err(|e| tag_mode(e, eps))?;
            }
        }
        a = b;
        out.push(q);
    }
    Ok(out)
}

/// Fermionic ramp trace by per-segment integrating-factor quadrature: same
/// output as [`ramp_excess_ode`] but with error independent of the ramp
/// duration, and much cheaper on slow ramps.
pub fn ramp_excess_trace_quadrature(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    sample_times: &[f64],
    quad_tol: f64,
) -> Result<OdeTrace> {
    ramp_params(schedule)?;
    validate_sample_times(sample_times)?;
    if bath.zeta != Statistics::Fermionic {
        return Err(Error::InvalidBath(
            "per-segment quadrature traces require a temperature-independent rate \
             (fermionic bath); use the ODE route for bosonic baths"
                .into(),
        ));
    }
    let rows = map_symmetric(spectrum, p0, |i| {
        mode_excess_trace_fermionic(spectrum.eps[i], p0[i], schedule, bath, sample_times, quad_tol)
    })?;
    Ok(reduce_rows(rows, sample_times))
}

fn tag_mode(e: Error, eps: f64) -> Error {
    match e {
        Error::QuadratureNonConvergence { budget, .. } => {
            Error::QuadratureNonConvergence { k: eps, budget }
        }
        other => other,
    }
}

/// Per-mode deviation from the final thermal state at the end of a linear
/// ramp, by adaptive quadrature of the integrating-factor solution.
pub fn ramp_excess_quadrature(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    quad_tol: f64,
) -> Result<Vec<f64>> {
    ramp_params(schedule)?;
    let eval = |i: usize| -> Result<f64> {
        match bath.zeta {
            Statistics::Fermionic => {
                mode_excess_quadrature_fermionic(spectrum.eps[i], p0[i], schedule, bath, quad_tol)
            }
            Statistics::Bosonic => {
                mode_excess_quadrature_bosonic(spectrum.eps[i], p0[i], schedule, bath, quad_tol)
            }
        }
    };
    map_symmetric(spectrum, p0, eval)
}

/// Occupations at the ramp end via quadrature (`p = p_th(T_f) + excess`).
pub fn ramp_solution_quadrature(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    quad_tol: f64,
) -> Result<ModeEnsemble> {
    let excess = ramp_excess_quadrature(p0, spectrum, bath, schedule, quad_tol)?;
    let pth = thermal_occupations(spectrum, schedule.temp_f)?;
    let p = excess
        .iter()
        .zip(&pth)
        .map(|(&q, &th)| (th + q).clamp(0.0, 1.0))
        .collect();
    Ok(ModeEnsemble {
        p,
        t: schedule.ramp_end_time(),
    })
}

// ---------------------------------------------------------------------------
// general trajectories: exponential integrator
// ---------------------------------------------------------------------------

/// Output of the ODE route: per-sample excess density plus the final
/// per-mode deviations (at the last sample time).
#[derive(Debug, Clone)]
pub struct OdeTrace {
    pub times: Vec<f64>,
    pub excess_density: Vec<f64>,
    pub final_deviation: Vec<f64>,
}

/// Integrate the rate equation for every mode across `sample_times`,
/// in the deviation variable `q = p - p_th(T_f)`.
pub fn ramp_excess_ode(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    sample_times: &[f64],
    ode_tol: f64,
) -> Result<OdeTrace> {
    schedule.validate()?;
    validate_sample_times(sample_times)?;
    let rows = ramp_excess_rows(p0, spectrum, bath, schedule, sample_times, ode_tol)?;
    Ok(reduce_rows(rows, sample_times))
}

fn validate_sample_times(sample_times: &[f64]) -> Result<()> {
    if sample_times.is_empty() {
        return Err(Error::InvalidSchedule("no sample times".into()));
    }
    for w in sample_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidSchedule(
                "sample times must be strictly increasing".into(),
            ));
        }
    }
    if sample_times[0] < 0.0 {
        return Err(Error::InvalidSchedule("negative sample time".into()));
    }
    Ok(())
}

// Per-sample density (compensated, grid order) and final per-mode deviations.
fn reduce_rows(rows: Vec<Vec<f64>>, sample_times: &[f64]) -> OdeTrace {
    let l = rows.len();
    let excess_density = (0..sample_times.len())
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for row in &rows {
                acc.add(row[j]);
            }
            acc.value() / l as f64
        })
        .collect();
    let final_deviation = rows.iter().map(|r| *r.last().unwrap()).collect();
    OdeTrace {
        times: sample_times.to_vec(),
        excess_density,
        final_deviation,
    }
}

/// Snapshots of the full ensemble along the trajectory (ODE route).
pub fn ramp_solution_ode(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    sample_times: &[f64],
    ode_tol: f64,
) -> Result<Vec<ModeEnsemble>> {
    let pth_f = thermal_occupations(spectrum, schedule.temp_f)?;
    let trace_rows = ramp_excess_rows(p0, spectrum, bath, schedule, sample_times, ode_tol)?;
    Ok(sample_times
        .iter()
        .enumerate()
        .map(|(j, &t)| ModeEnsemble {
            p: trace_rows
                .iter()
                .zip(&pth_f)
                .map(|(row, &th)| (th + row[j]).clamp(0.0, 1.0))
                .collect(),
            t,
        })
        .collect())
}

// Per-mode rows of deviations at every sample time.
fn ramp_excess_rows(
    p0: &[f64],
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    schedule: &QuenchSchedule,
    sample_times: &[f64],
    ode_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let ramp_end = schedule.ramp_end_time();
    let temp_f = schedule.temp_f;
    map_symmetric(spectrum, p0, |i| -> Result<Vec<f64>> {
        let eps = spectrum.eps[i];
        let pth_f = thermal_occupation(eps, temp_f)?;
        let spectral = bath.spectral_density(eps);
        let coeff = |t: f64| {
            let temp = schedule.temperature_at(t);
            let gamma = match bath.zeta {
                Statistics::Fermionic => spectral,
                Statistics::Bosonic => crate::bath::total_rate_raw(bath, eps, temp),
            };
            (gamma, crate::bath::fermi_raw(eps, temp) - pth_f)
        };
        let bounds = (-pth_f, 1.0 - pth_f);
        let mut q = p0[i] - pth_f;
        let mut t = 0.0;
        let mut out = Vec::with_capacity(sample_times.len());
        for &ts in sample_times {
            if t < ramp_end && ts > ramp_end {
                q = ode::evolve_exponential(q, t, ramp_end, ode_tol, bounds, &coeff, eps)?;
                t = ramp_end;
            }
            q = ode::evolve_exponential(q, t, ts, ode_tol, bounds, &coeff, eps)?;
            t = ts;
            out.push(q);
        }
        Ok(out)
    })
}

// ---------------------------------------------------------------------------
// +-k symmetry
// ---------------------------------------------------------------------------

// Evolution depends on a mode only through (eps_k, p_k(0)). When both are
// mirror-symmetric (always true for temperature-only protocols, and for the
// step response, whose rotation angle is even in k), compute the positive
// half and mirror.
fn map_symmetric<T, F>(spectrum: &ModeSpectrum, p0: &[f64], eval: F) -> Result<Vec<T>>
where
    T: Clone + Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let l = spectrum.len();
    debug_assert_eq!(p0.len(), l);
    let symmetric = l % 2 == 0
        && (0..l / 2).all(|i| {
            let j = l - 1 - i;
            spectrum.eps[i] == spectrum.eps[j] && p0[i] == p0[j]
        });
    if symmetric {
        let half = par::try_map_modes(l / 2, |m| eval(l / 2 + m))?;
        let mut full = Vec::with_capacity(l);
        for i in 0..l {
            let m = if i < l / 2 { l / 2 - 1 - i } else { i - l / 2 };
            full.push(half[m].clone());
        }
        Ok(full)
    } else {
        par::try_map_modes(l, eval)
    }
}
