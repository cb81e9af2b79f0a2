//! Quench protocols: temperature trajectories and the sudden quantum-parameter
//! step response.
//!
//! Linear ramps follow `T(t) = T_i +- t/tau` and end at
//! `t_f = tau |T_i - T_f|`, after which the temperature is held at `T_f`.
//! Quantum parameters may change only as a sudden jump at `t = 0`; the
//! initial occupation then picks up the Bogoliubov rotation
//! `P(0+) = cos(2 beta^i - 2 beta^f)(P(0-) - 1/2) + 1/2`.

use serde::{Deserialize, Serialize};

use crate::bath::thermal_occupation;
use crate::chain::ModeSpectrum;
use crate::error::{Error, Result};

/// Quantum parameters before a sudden parameter jump at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreQuenchParams {
    pub mu: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Sudden,
    LinearRamp { tau: f64 },
    RampThenRelax { tau: f64, relax_duration: f64 },
}

/// A temperature trajectory plus an optional quantum-parameter jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    #[serde(rename = "T_i")]
    pub temp_i: f64,
    #[serde(rename = "T_f")]
    pub temp_f: f64,
    #[serde(flatten)]
    pub kind: ScheduleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_quench: Option<PreQuenchParams>,
}

impl QuenchSchedule {
    pub fn sudden(temp_i: f64, temp_f: f64) -> Self {
        Self {
            temp_i,
            temp_f,
            kind: ScheduleKind::Sudden,
            pre_quench: None,
        }
    }

    pub fn linear_ramp(temp_i: f64, temp_f: f64, tau: f64) -> Self {
        Self {
            temp_i,
            temp_f,
            kind: ScheduleKind::LinearRamp { tau },
            pre_quench: None,
        }
    }

    pub fn ramp_then_relax(temp_i: f64, temp_f: f64, tau: f64, relax_duration: f64) -> Self {
        Self {
            temp_i,
            temp_f,
            kind: ScheduleKind::RampThenRelax {
                tau,
                relax_duration,
            },
            pre_quench: None,
        }
    }

    pub fn with_pre_quench(mut self, mu: f64, chi: f64) -> Self {
        self.pre_quench = Some(PreQuenchParams { mu, chi });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temp_i >= 0.0) || !(self.temp_f >= 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "temperatures must be >= 0, got T_i={}, T_f={}",
                self.temp_i, self.temp_f
            )));
        }
        if !self.temp_i.is_finite() || !self.temp_f.is_finite() {
            return Err(Error::InvalidSchedule("non-finite temperature".into()));
        }
        match self.kind {
            ScheduleKind::Sudden => {}
            ScheduleKind::LinearRamp { tau } | ScheduleKind::RampThenRelax { tau, .. } => {
                if !(tau > 0.0) || !tau.is_finite() {
                    return Err(Error::InvalidSchedule(format!(
                        "ramp rate tau must be positive, got {tau}"
                    )));
                }
            }
        }
        if let ScheduleKind::RampThenRelax { relax_duration, .. } = self.kind {
            if !(relax_duration >= 0.0) {
                return Err(Error::InvalidSchedule(format!(
                    "relax_duration must be >= 0, got {relax_duration}"
                )));
            }
        }
        Ok(())
    }

    /// Time at which the driving stage ends (0 for sudden quenches).
    pub fn ramp_end_time(&self) -> f64 {
        match self.kind {
            ScheduleKind::Sudden => 0.0,
            ScheduleKind::LinearRamp { tau } | ScheduleKind::RampThenRelax { tau, .. } => {
                tau * (self.temp_i - self.temp_f).abs()
            }
        }
    }

    /// Total simulated duration (ramp plus any trailing relaxation window).
    pub fn total_time(&self) -> f64 {
        match self.kind {
            ScheduleKind::Sudden => 0.0,
            ScheduleKind::LinearRamp { .. } => self.ramp_end_time(),
            ScheduleKind::RampThenRelax { relax_duration, .. } => {
                self.ramp_end_time() + relax_duration
            }
        }
    }

    /// Temperature at absolute time `t >= 0`.
    pub fn temperature_at(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Sudden => self.temp_f,
            ScheduleKind::LinearRamp { tau } | ScheduleKind::RampThenRelax { tau, .. } => {
                let t_end = self.ramp_end_time();
                if t >= t_end {
                    self.temp_f
                } else {
                    let sign = if self.temp_f >= self.temp_i { 1.0 } else { -1.0 };
                    self.temp_i + sign * t / tau
                }
            }
        }
    }

    /// Whether the quantum parameters jump at `t = 0`.
    pub fn has_parameter_jump(&self) -> bool {
        self.pre_quench.is_some()
    }
}

/// Occupation right after `t = 0`: thermal at `(T_i, spectrum_pre)` rotated
/// by the Bogoliubov-angle mismatch between the pre- and post-quench chains.
///
/// When both spectra coincide the rotation angle is exactly zero and the
/// thermal occupations pass through unchanged.
pub fn initial_occupation(
    temp_i: f64,
    spectrum_pre: &ModeSpectrum,
    spectrum_post: &ModeSpectrum,
) -> Result<Vec<f64>> {
    if spectrum_pre.len() != spectrum_post.len() {
        return Err(Error::InvalidSchedule(
            "pre- and post-quench spectra must share the grid".into(),
        ));
    }
    let mut p = Vec::with_capacity(spectrum_pre.len());
    for i in 0..spectrum_pre.len() {
        let p_minus = thermal_occupation(spectrum_pre.eps[i], temp_i)?;
        let rot = (2.0 * spectrum_pre.beta[i] - 2.0 * spectrum_post.beta[i]).cos();
        p.push(rot * (p_minus - 0.5) + 0.5);
    }
    Ok(p)
}

/// A sweep over ramp rates (or chemical potentials) built on a base schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(taus) = &self.taus {
            if taus.is_empty() {
                return Err(Error::InvalidSchedule("empty tau sweep".into()));
            }
            for w in taus.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::InvalidSchedule(
                        "tau values must be strictly increasing".into(),
                    ));
                }
            }
            if !(taus[0] > 0.0) {
                return Err(Error::InvalidSchedule("tau values must be positive".into()));
            }
        }
        Ok(())
    }
}
