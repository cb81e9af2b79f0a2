//! Thermal bath: statistics, spectral density and per-mode jump rates.
//!
//! The bath couples to each quasiparticle mode with excitation rate
//! `gamma_+ = S(eps) f(eps)` and de-excitation rate
//! `gamma_- = S(eps) [1 - zeta f(eps)]`, where `S(eps) = gamma0 eps^s` and
//! `f` is the Fermi-Dirac (`zeta = +1`) or Bose-Einstein (`zeta = -1`)
//! occupation of the bath at temperature `T`. For a fermionic bath the total
//! rate is `gamma0 eps^s` independent of `T`; for a bosonic bath it is
//! `gamma0 eps^s coth(eps/2T)`, which grows like `2 T gamma0 eps^{s-1}` for
//! small `eps` and drives the `s -> s-1` shift in the bosonic scaling laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Temperature used to represent an "infinite temperature" initial state;
/// every relevant mode then sits at occupation 1/2 to better than 1e-9.
pub const T_CAP: f64 = 1e9;

/// Bath exchange statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermionic,
    Bosonic,
}

impl Statistics {
    /// The statistics sign `zeta`: +1 fermionic, -1 bosonic.
    pub fn zeta(&self) -> f64 {
        match self {
            Statistics::Fermionic => 1.0,
            Statistics::Bosonic => -1.0,
        }
    }
}

/// Bath specification: statistics, spectral exponent `s`, coupling `gamma0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub zeta: Statistics,
    pub s: f64,
    pub gamma0: f64,
}

impl BathSpec {
    pub fn new(zeta: Statistics, s: f64, gamma0: f64) -> Result<Self> {
        let spec = Self { zeta, s, gamma0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::InvalidBath(format!(
                "gamma0 must be positive and finite, got {}",
                self.gamma0
            )));
        }
        if !(self.s >= 0.0) || !self.s.is_finite() {
            return Err(Error::InvalidBath(format!(
                "spectral exponent s must be >= 0, got {}",
                self.s
            )));
        }
        Ok(())
    }

    /// Spectral density `S(eps) = gamma0 eps^s`.
    #[inline]
    pub fn spectral_density(&self, eps: f64) -> f64 {
        self.gamma0 * eps.powf(self.s)
    }

    /// Per-mode jump rates at energy `eps` and temperature `t`.
    pub fn rates(&self, eps: f64, t: f64) -> Result<ModeRates> {
        let f = occupation(eps, t, self.zeta)?;
        let s_eps = self.spectral_density(eps);
        let gamma_plus = s_eps * f;
        let gamma_minus = match self.zeta {
            // 1 - f and f + 1 written so the fermionic total is exactly
            // gamma0 eps^s: gamma_- = S - gamma_+.
            Statistics::Fermionic => s_eps - gamma_plus,
            Statistics::Bosonic => s_eps + gamma_plus,
        };
        Ok(ModeRates {
            gamma_plus,
            gamma_minus,
            gamma_total: gamma_plus + gamma_minus,
        })
    }

    /// Total rate `gamma_k = gamma_+ + gamma_-` only.
    #[inline]
    pub fn total_rate(&self, eps: f64, t: f64) -> Result<f64> {
        match self.zeta {
            Statistics::Fermionic => {
                if t < 0.0 {
                    return Err(Error::InvalidBath(format!("negative temperature {t}")));
                }
                Ok(self.spectral_density(eps))
            }
            Statistics::Bosonic => {
                let n = occupation(eps, t, Statistics::Bosonic)?;
                Ok(self.spectral_density(eps) * (1.0 + 2.0 * n))
            }
        }
    }
}

/// Jump-rate triple for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeRates {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_total: f64,
}

/// Bath occupation `f = 1/(e^{eps/T} + zeta)`; 0 at `T = 0`.
///
/// Evaluated via `e^{-eps/T}` so large `eps/T` underflows to 0 instead of
/// overflowing, and the fermionic `eps/T << 1` limit tends to 1/2.
pub fn occupation(eps: f64, t: f64, zeta: Statistics) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::InvalidBath(format!("negative temperature {t}")));
    }
    if eps < 0.0 {
        return Err(Error::InvalidBath(format!("negative energy {eps}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    match zeta {
        Statistics::Fermionic => {
            let em = (-eps / t).exp();
            Ok(em / (1.0 + em))
        }
        Statistics::Bosonic => {
            if eps == 0.0 {
                return Err(Error::InvalidBath(
                    "bosonic occupation diverges at eps = 0 with T > 0".into(),
                ));
            }
            let em = (-eps / t).exp();
            Ok(em / (1.0 - em))
        }
    }
}

/// Fermi-Dirac occupation of the system quasiparticles, `1/(e^{eps/T} + 1)`.
///
/// This is the stationary occupation for both bath statistics.
#[inline]
pub fn thermal_occupation(eps: f64, t: f64) -> Result<f64> {
    occupation(eps, t, Statistics::Fermionic)
}

/// `thermal_occupation` for pre-validated `eps >= 0`, `t >= 0`; used in hot
/// integrand loops where the inputs come from an already-validated schedule.
#[inline]
pub(crate) fn fermi_raw(eps: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let em = (-eps / t).exp();
    em / (1.0 + em)
}

/// `occupation` for pre-validated inputs (`eps > 0`, `t >= 0`).
#[inline]
pub(crate) fn bath_occupation_raw(eps: f64, t: f64, zeta: Statistics) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let em = (-eps / t).exp();
    match zeta {
        Statistics::Fermionic => em / (1.0 + em),
        Statistics::Bosonic => em / (1.0 - em),
    }
}

/// `BathSpec::total_rate` for pre-validated inputs (`eps > 0`, `t >= 0`).
#[inline]
pub(crate) fn total_rate_raw(spec: &BathSpec, eps: f64, t: f64) -> f64 {
    let s_eps = spec.spectral_density(eps);
    match spec.zeta {
        Statistics::Fermionic => s_eps,
        Statistics::Bosonic => {
            if t <= 0.0 {
                s_eps
            } else {
                let em = (-eps / t).exp();
                s_eps * (1.0 + em) / (1.0 - em)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_limits() {
        assert_eq!(occupation(1.0, 0.0, Statistics::Fermionic).unwrap(), 0.0);
        assert_eq!(occupation(1.0, 0.0, Statistics::Bosonic).unwrap(), 0.0);
        assert_eq!(thermal_occupation(3.2, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn high_temperature_fermi_limit() {
        let f = occupation(1.0, T_CAP, Statistics::Fermionic).unwrap();
        assert!((f - 0.5).abs() < 1e-9);
    }

    #[test]
    fn fermi_value() {
        // 1/(e^2 + 1)
        let f = occupation(2.0, 1.0, Statistics::Fermionic).unwrap();
        assert!((f - 0.11920292202211756).abs() < 1e-15);
    }

    #[test]
    fn thermal_occupation_value() {
        // 1/(e^0.8 + 1)
        let f = thermal_occupation(4.0, 5.0).unwrap();
        assert!((f - 0.31002551887238756).abs() < 1e-15);
    }

    #[test]
    fn no_overflow_at_extreme_ratio() {
        let f = occupation(1e4, 1e-6, Statistics::Fermionic).unwrap();
        assert_eq!(f, 0.0);
        let n = occupation(1e4, 1e-6, Statistics::Bosonic).unwrap();
        assert_eq!(n, 0.0);
    }

    #[test]
    fn rejections() {
        assert!(occupation(1.0, -1.0, Statistics::Fermionic).is_err());
        assert!(occupation(0.0, 2.0, Statistics::Bosonic).is_err());
        assert!(BathSpec::new(Statistics::Fermionic, 1.0, 0.0).is_err());
        assert!(BathSpec::new(Statistics::Fermionic, -0.5, 0.01).is_err());
    }

    #[test]
    fn fermionic_total_rate_is_spectral_density() {
        let spec = BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap();
        for &(eps, t) in &[(1.0, 0.0), (0.3, 2.0), (2.7, 100.0)] {
            let r = spec.rates(eps, t).unwrap();
            assert_eq!(r.gamma_total, spec.spectral_density(eps));
            assert!(r.gamma_plus >= 0.0 && r.gamma_minus >= 0.0);
        }
        // T = 0: (gamma+, gamma-, gamma) = (0, 0.01, 0.01) at eps = 1
        let r = spec.rates(1.0, 0.0).unwrap();
        assert_eq!(r.gamma_plus, 0.0);
        assert_eq!(r.gamma_minus, 0.01);
        assert_eq!(r.gamma_total, 0.01);
    }

    #[test]
    fn bosonic_total_rate_value() {
        // s=2, gamma0=0.01, eps=1, T=5: gamma = 0.01 / tanh(0.1)
        let spec = BathSpec::new(Statistics::Bosonic, 2.0, 0.01).unwrap();
        let r = spec.rates(1.0, 5.0).unwrap();
        assert!((r.gamma_total - 0.10033311132253990).abs() < 1e-15);
        assert!((r.gamma_total - spec.total_rate(1.0, 5.0).unwrap()).abs() < 1e-16);
        // T = 0 limit
        let r0 = spec.rates(1.0, 0.0).unwrap();
        assert_eq!(r0.gamma_total, 0.01);
    }

    #[test]
    fn detailed_balance_fixed_point() {
        // gamma+ / gamma_total = 1/(e^{eps/T} + 1) for both statistics.
        for zeta in [Statistics::Fermionic, Statistics::Bosonic] {
            let spec = BathSpec::new(zeta, 1.5, 0.02).unwrap();
            for &(eps, t) in &[(0.5, 0.7), (2.0, 5.0), (1e-3, 1.0), (6.0, 0.1)] {
                let r = spec.rates(eps, t).unwrap();
                let lhs = r.gamma_plus / r.gamma_total;
                let rhs = thermal_occupation(eps, t).unwrap();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300),
                    "zeta={zeta:?} eps={eps} t={t}"
                );
            }
        }
    }

    #[test]
    fn thermal_occupation_monotone_in_t() {
        let eps = 1.3;
        let mut prev = thermal_occupation(eps, 0.01).unwrap();
        for i in 1..200 {
            let t = 0.01 + 0.1 * i as f64;
            let f = thermal_occupation(eps, t).unwrap();
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn bosonic_small_energy_scaling() {
        // gamma / (2 T gamma0 eps^{s-1}) -> 1 as eps -> 0
        let spec = BathSpec::new(Statistics::Bosonic, 2.0, 0.01).unwrap();
        let eps = 1e-6;
        let t = 0.7;
        let g = spec.total_rate(eps, t).unwrap();
        let ratio = g / (2.0 * t * spec.gamma0 * eps.powf(spec.s - 1.0));
        assert!((ratio - 1.0).abs() < 1e-4, "ratio={ratio}");
    }
}
