//! Kitaev chain: parameters, antiperiodic momentum grid, quasiparticle
//! spectrum and Bogoliubov angles.
//!
//! The quasiparticle dispersion is
//! `eps_k = 2 sqrt((mu - cos k)^2 + chi^2 sin^2 k)` and the Bogoliubov angle
//! satisfies `tan(2 beta_k) = -chi sin k / (mu - cos k)`; the branch is fixed
//! with `atan2` so that the quench step response has an unambiguous sign.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Quantum parameters of the chain and the mode count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub mu: f64,
    pub chi: f64,
    #[serde(rename = "L")]
    pub l: usize,
}

impl ChainParams {
    pub fn new(mu: f64, chi: f64, l: usize) -> Result<Self> {
        let p = Self { mu, chi, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !self.chi.is_finite() {
            return Err(Error::InvalidChain(format!(
                "mu and chi must be finite, got mu={}, chi={}",
                self.mu, self.chi
            )));
        }
        if self.l < 2 || self.l % 2 != 0 {
            return Err(Error::InvalidChain(format!(
                "L must be even and >= 2, got {}",
                self.l
            )));
        }
        Ok(())
    }

    /// Same quantum parameters, different mode count.
    pub fn with_quantum(&self, mu: f64, chi: f64) -> Result<Self> {
        Self::new(mu, chi, self.l)
    }
}

/// Antiperiodic momentum grid: `k_m = +-pi (2m - 1)/L`, ascending.
///
/// Excludes `k = 0` and `k = pi` exactly, so the spectrum of a critical chain
/// never contains an exact zero mode (which would never relax).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    pub ks: Vec<f64>,
}

impl MomentumGrid {
    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }
}

/// Builds the antiperiodic grid for `params`, in ascending order.
pub fn build_grid(params: &ChainParams) -> Result<MomentumGrid> {
    params.validate()?;
    let l = params.l;
    let ks = (0..l)
        .map(|i| PI * (2.0 * i as f64 + 1.0 - l as f64) / l as f64)
        .collect();
    Ok(MomentumGrid { ks })
}

/// Per-mode energies and Bogoliubov angles on a grid.
#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    pub ks: Vec<f64>,
    pub eps: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ModeSpectrum {
    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn min_energy(&self) -> f64 {
        self.eps.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.eps.iter().copied().fold(0.0, f64::max)
    }
}

/// Energy of a single mode.
#[inline]
pub fn mode_energy(params: &ChainParams, k: f64) -> f64 {
    let a = params.mu - k.cos();
    let b = params.chi * k.sin();
    2.0 * (a * a + b * b).sqrt()
}

/// Bogoliubov angle of a single mode; `2 beta_k = atan2(-chi sin k, mu - cos k)`.
#[inline]
pub fn bogoliubov_angle(params: &ChainParams, k: f64) -> f64 {
    0.5 * f64::atan2(-params.chi * k.sin(), params.mu - k.cos())
}

/// Spectrum and angles for every grid mode.
pub fn spectrum(params: &ChainParams, grid: &MomentumGrid) -> ModeSpectrum {
    let eps = grid.ks.iter().map(|&k| mode_energy(params, k)).collect();
    let beta = grid
        .ks
        .iter()
        .map(|&k| bogoliubov_angle(params, k))
        .collect();
    ModeSpectrum {
        ks: grid.ks.clone(),
        eps,
        beta,
    }
}

/// Criticality metadata: critical iff `|mu| = 1`; the gap closes at `k = 0`
/// for `mu = 1` and `k = pi` for `mu = -1`; `z = 2` when additionally
/// `chi = 0`, else `z = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub is_critical: bool,
    pub gap_closing_k: Option<f64>,
    pub z: Option<u8>,
}

pub fn gap_info(params: &ChainParams) -> GapReport {
    if params.mu.abs() == 1.0 {
        let k_star = if params.mu > 0.0 { 0.0 } else { PI };
        let z = if params.chi == 0.0 { 2 } else { 1 };
        GapReport {
            is_critical: true,
            gap_closing_k: Some(k_star),
            z: Some(z),
        }
    } else {
        GapReport {
            is_critical: false,
            gap_closing_k: None,
            z: None,
        }
    }
}
