//! Covariance-matrix evolution of the Dirac-fermion pair `(n_k, m_k)` with
//! `n_k = <a_k^dag a_k>` and `m_k = <a_k^dag a_{-k}^dag>`:
//!
//! ```text
//! dn/dt = gamma1 + gamma2 cos2b - 2 gamma1 n - 2 eps sin2b Re(m)
//! dm/dt = i gamma2 sin2b - 2 gamma1 m + eps [sin2b (2n - 1) + 2i cos2b m]
//! ```
//!
//! with `gamma1 = gamma_+ + gamma_-` and `gamma2 = gamma_+ - gamma_-`. This is
//! a genuinely different formulation from the quasiparticle rate equation
//! (it carries the pairing coherence explicitly), so agreement between the two
//! is a strong end-to-end check. Integration is classical RK4 at a fixed step
//! capped by `0.1 / max(eps, gamma1)`, verified by rerunning at half step.

use num_complex::Complex64;

use crate::bath::{self, BathSpec, Statistics};
use crate::chain::ModeSpectrum;
use crate::error::{Error, Result};
use crate::par;
use crate::schedule::QuenchSchedule;
use crate::sum::CompensatedSum;

/// Per-mode covariance state.
#[derive(Debug, Clone)]
pub struct CovarianceEnsemble {
    pub n: Vec<f64>,
    pub m: Vec<Complex64>,
    pub t: f64,
}

impl CovarianceEnsemble {
    /// Build from quasiparticle occupations `p` with no eta-pair coherence.
    pub fn from_quasiparticle(spectrum: &ModeSpectrum, p: &[f64]) -> Self {
        let n = spectrum
            .beta
            .iter()
            .zip(p)
            .map(|(&b, &pk)| 0.5 + (2.0 * b).cos() * (pk - 0.5))
            .collect();
        let m = spectrum
            .beta
            .iter()
            .zip(p)
            .map(|(&b, &pk)| Complex64::new(0.0, (2.0 * b).sin() * (pk - 0.5)))
            .collect();
        Self { n, m, t: 0.0 }
    }

    /// Thermal covariances at temperature `temp`.
    pub fn thermal(spectrum: &ModeSpectrum, temp: f64) -> Result<Self> {
        let p = crate::dynamics::thermal_occupations(spectrum, temp)?;
        Ok(Self::from_quasiparticle(spectrum, &p))
    }

    /// Quasiparticle occupations `<eta^dag eta>` read out per mode.
    pub fn quasiparticle_occupations(&self, spectrum: &ModeSpectrum) -> Vec<f64> {
        self.n
            .iter()
            .zip(&self.m)
            .zip(&spectrum.beta)
            .map(|((&n, m), &b)| readout(n, *m, b))
            .collect()
    }

    /// Physicality of the 2x2 mode covariance: `n in [0,1]` and
    /// `n (1 - n) >= |m|^2`, up to `slack`.
    pub fn check_physical(&self, slack: f64) -> Result<()> {
        for (i, (&n, m)) in self.n.iter().zip(&self.m).enumerate() {
            if n < -slack || n > 1.0 + slack || n * (1.0 - n) + slack < m.norm_sqr() {
                return Err(Error::PhysicalityViolation {
                    k: i as f64,
                    t: self.t,
                    detail: format!("n={n}, |m|^2={}", m.norm_sqr()),
                });
            }
        }
        Ok(())
    }
}

#[inline]
fn readout(n: f64, m: Complex64, beta: f64) -> f64 {
    (2.0 * beta).cos() * (n - 0.5) + (2.0 * beta).sin() * m.im + 0.5
}

/// Density trace from the covariance route.
#[derive(Debug, Clone)]
pub struct TqTrace {
    pub times: Vec<f64>,
    pub density: Vec<f64>,
    pub final_state: CovarianceEnsemble,
    /// Largest half-step verification deviation seen in any component.
    pub max_step_error: f64,
}

#[derive(Clone, Copy)]
struct ModeCoeffs {
    eps: f64,
    cos2b: f64,
    sin2b: f64,
}

#[inline]
fn rhs(
    n: f64,
    m: Complex64,
    gamma1: f64,
    gamma2: f64,
    co: &ModeCoeffs,
) -> (f64, Complex64) {
    let dn = gamma1 + gamma2 * co.cos2b - 2.0 * gamma1 * n - 2.0 * co.eps * co.sin2b * m.re;
    let dm = Complex64::new(0.0, gamma2 * co.sin2b) - 2.0 * gamma1 * m
        + co.eps
            * (Complex64::new(co.sin2b * (2.0 * n - 1.0), 0.0)
                + Complex64::new(0.0, 2.0 * co.cos2b) * m);
    (dn, dm)
}

fn gammas(bath: &BathSpec, eps: f64, temp: f64) -> (f64, f64) {
    let s_eps = bath.spectral_density(eps);
    let f = bath::bath_occupation_raw(eps, temp, bath.zeta);
    let g_plus = s_eps * f;
    let g_minus = match bath.zeta {
        Statistics::Fermionic => s_eps - g_plus,
        Statistics::Bosonic => s_eps + g_plus,
    };
    (g_plus + g_minus, g_plus - g_minus)
}

// RK4 with `steps` uniform substeps across [t0, t1].
#[allow(clippy::too_many_arguments)]
fn rk4_span<G: Fn(f64) -> (f64, f64)>(
    mut n: f64,
    mut m: Complex64,
    t0: f64,
    t1: f64,
    steps: usize,
    co: &ModeCoeffs,
    rates_at: &G,
) -> (f64, Complex64) {
    let h = (t1 - t0) / steps as f64;
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let (g1a, g2a) = rates_at(t);
        let (g1b, g2b) = rates_at(t + 0.5 * h);
        let (g1c, g2c) = rates_at(t + h);
        let (k1n, k1m) = rhs(n, m, g1a, g2a, co);
        let (k2n, k2m) = rhs(n + 0.5 * h * k1n, m + 0.5 * h * k1m, g1b, g2b, co);
        let (k3n, k3m) = rhs(n + 0.5 * h * k2n, m + 0.5 * h * k2m, g1b, g2b, co);
        let (k4n, k4m) = rhs(n + h * k3n, m + h * k3m, g1c, g2c, co);
        n += h / 6.0 * (k1n + 2.0 * k2n + 2.0 * k3n + k4n);
        m += h / 6.0 * (k1m + 2.0 * k2m + 2.0 * k3m + k4m);
    }
    (n, m)
}

/// Evolve the covariances along `schedule` and read out the excitation
/// density at every sample time. Quantum parameters stay fixed throughout
/// (any parameter jump must already be folded into `init`).
pub fn third_quantization_evolve(
    init: &CovarianceEnsemble,
    schedule: &QuenchSchedule,
    spectrum: &ModeSpectrum,
    bath: &BathSpec,
    sample_times: &[f64],
    ode_tol: f64,
) -> Result<TqTrace> {
    schedule.validate()?;
    bath.validate()?;
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
    let slack = 10.0 * ode_tol.max(1e-12);
    init.check_physical(slack)?;
    let l = spectrum.len();
    let ramp_end = schedule.ramp_end_time();
    let temp_max = schedule.temp_i.max(schedule.temp_f);
    let rows = par::try_map_modes(l, |i| -> Result<(Vec<(f64, Complex64)>, f64)> {
        let eps = spectrum.eps[i];
        let co = ModeCoeffs {
            eps,
            cos2b: (2.0 * spectrum.beta[i]).cos(),
            sin2b: (2.0 * spectrum.beta[i]).sin(),
        };
        let rates_at = |t: f64| gammas(bath, eps, schedule.temperature_at(t));
        let (g1_max, _) = gammas(bath, eps, temp_max);
        let h_cap = 0.1 / eps.max(g1_max).max(1e-300);
        let mut state = (init.n[i], init.m[i], 0.0f64);
        let mut out = Vec::with_capacity(sample_times.len());
        let mut max_err = 0.0f64;
        let mut advance = |state: &mut (f64, Complex64, f64), to: f64| {
            let (n0, m0, t0) = *state;
            if to <= t0 {
                return;
            }
            let steps = ((to - t0) / h_cap).ceil().max(1.0) as usize;
            let (n1, m1) = rk4_span(n0, m0, t0, to, steps, &co, &rates_at);
            let (n2, m2) = rk4_span(n0, m0, t0, to, 2 * steps, &co, &rates_at);
            max_err = max_err.max((n2 - n1).abs()).max((m2 - m1).norm());
            *state = (n2, m2, to);
        };
        for &ts in sample_times {
            if state.2 < ramp_end && ts > ramp_end {
                advance(&mut state, ramp_end);
            }
            advance(&mut state, ts);
            out.push((state.0, state.1));
            let n = state.0;
            let msq = state.1.norm_sqr();
            if n < -slack || n > 1.0 + slack || n * (1.0 - n) + slack < msq {
                return Err(Error::PhysicalityViolation {
                    k: spectrum.ks[i],
                    t: ts,
                    detail: format!("n={n}, |m|^2={msq}"),
                });
            }
        }
        Ok((out, max_err))
    })?;
    let max_step_error = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let density = (0..sample_times.len())
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for (i, (row, _)) in rows.iter().enumerate() {
                let (n, m) = row[j];
                acc.add(readout(n, m, spectrum.beta[i]));
            }
            acc.value() / l as f64
        })
        .collect();
    let last = sample_times.len() - 1;
    let final_state = CovarianceEnsemble {
        n: rows.iter().map(|(r, _)| r[last].0).collect(),
        m: rows.iter().map(|(r, _)| r[last].1).collect(),
        t: sample_times[last],
    };
    Ok(TqTrace {
        times: sample_times.to_vec(),
        density,
        final_state,
        max_step_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::thermal_occupation;
    use crate::chain::{build_grid, spectrum, ChainParams};
    use crate::dynamics::{excitation_density, sudden_solution, thermal_occupations};

    fn setup(mu: f64, chi: f64, l: usize) -> (ChainParams, ModeSpectrum) {
        let p = ChainParams::new(mu, chi, l).unwrap();
        let g = build_grid(&p).unwrap();
        let s = spectrum(&p, &g);
        (p, s)
    }

    #[test]
    fn thermal_state_is_stationary() {
        let (_, s) = setup(1.0, 1.0, 32);
        let bath = BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap();
        let sched = QuenchSchedule::sudden(5.0, 5.0);
        let init = CovarianceEnsemble::thermal(&s, 5.0).unwrap();
        let times: Vec<f64> = (1..=5).map(|i| 40.0 * i as f64).collect();
        let trace =
            third_quantization_evolve(&init, &sched, &s, &bath, &times, 1e-10).unwrap();
        let d_th = crate::dynamics::thermal_density(&s, 5.0).unwrap();
        for &d in &trace.density {
            assert!((d - d_th).abs() < 1e-10, "d={d} d_th={d_th}");
        }
    }

    #[test]
    fn matches_sudden_closed_form() {
        // temperature-only sudden quench: the two formulations must agree
        let (_, s) = setup(1.0, 1.0, 64);
        let bath = BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap();
        let sched = QuenchSchedule::sudden(5.0, 1.0);
        let p0 = thermal_occupations(&s, 5.0).unwrap();
        let init = CovarianceEnsemble::from_quasiparticle(&s, &p0);
        let times = [5.0, 25.0, 125.0, 625.0];
        let trace =
            third_quantization_evolve(&init, &sched, &s, &bath, &times, 1e-10).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let ens = sudden_solution(&p0, &s, &bath, 1.0, t).unwrap();
            let d = excitation_density(&ens);
            assert!(
                (trace.density[j] - d).abs() < 1e-6,
                "t={t}: {} vs {d}",
                trace.density[j]
            );
        }
    }

    #[test]
    fn bosonic_ramp_stays_physical() {
        let (_, s) = setup(1.0, 1.0, 16);
        let bath = BathSpec::new(Statistics::Bosonic, 2.0, 0.01).unwrap();
        let sched = QuenchSchedule::linear_ramp(0.0, 5.0, 10.0);
        let p0 = thermal_occupations(&s, 0.0).unwrap();
        let init = CovarianceEnsemble::from_quasiparticle(&s, &p0);
        let trace =
            third_quantization_evolve(&init, &sched, &s, &bath, &[10.0, 50.0], 1e-10).unwrap();
        trace.final_state.check_physical(1e-9).unwrap();
        assert!(trace.max_step_error < 1e-8);
    }

    #[test]
    fn closed_system_conserves_quasiparticle_number() {
        // gamma = 0: unitary evolution, diagonal in eta, conserves <eta^dag eta>
        let co = ModeCoeffs {
            eps: 1.7,
            cos2b: (0.8f64).cos(),
            sin2b: (0.8f64).sin(),
        };
        let p = 0.37;
        let beta = 0.4;
        let n0 = 0.5 + co.cos2b * (p - 0.5);
        let m0 = Complex64::new(0.0, co.sin2b * (p - 0.5));
        let rates_at = |_t: f64| (0.0, 0.0);
        let (n, m) = rk4_span(n0, m0, 0.0, 200.0, 40_000, &co, &rates_at);
        let p_out = readout(n, m, beta);
        assert!((p_out - p).abs() < 1e-10, "p_out={p_out}");
    }

    #[test]
    fn readout_inverts_embedding() {
        let (_, s) = setup(0.7, 0.9, 48);
        let p: Vec<f64> = (0..48).map(|i| 0.01 + 0.02 * i as f64 % 1.0).collect();
        let ens = CovarianceEnsemble::from_quasiparticle(&s, &p);
        ens.check_physical(1e-12).unwrap();
        let back = ens.quasiparticle_occupations(&s);
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn detects_unphysical_input() {
        let (_, s) = setup(1.0, 1.0, 8);
        let mut ens = CovarianceEnsemble::thermal(&s, 2.0).unwrap();
        ens.m[3] = Complex64::new(0.9, 0.0);
        assert!(ens.check_physical(1e-9).is_err());
        let bath = BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap();
        let sched = QuenchSchedule::sudden(2.0, 2.0);
        assert!(
            third_quantization_evolve(&ens, &sched, &s, &bath, &[1.0], 1e-10).is_err()
        );
    }

    #[test]
    fn step_response_then_relax_matches_rate_equation() {
        // sudden parameter jump folded into the initial state, then a
        // temperature-only evolution: covariance route vs closed form
        let (pre, s_pre) = setup(2.0, 1.0, 64);
        let (_, s_post) = setup(1.0, 1.0, 64);
        let _ = pre;
        let bath = BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap();
        let p0 = crate::schedule::initial_occupation(5.0, &s_pre, &s_post).unwrap();
        let init = CovarianceEnsemble::from_quasiparticle(&s_post, &p0);
        let sched = QuenchSchedule::sudden(5.0, 5.0);
        let times = [10.0, 100.0];
        let trace =
            third_quantization_evolve(&init, &sched, &s_post, &bath, &times, 1e-10).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let ens = sudden_solution(&p0, &s_post, &bath, 5.0, t).unwrap();
            let d = excitation_density(&ens);
            assert!((trace.density[j] - d).abs() < 1e-6);
        }
    }

    #[test]
    fn thermal_occupation_embedding_consistent() {
        let (_, s) = setup(1.3, 0.6, 32);
        let ens = CovarianceEnsemble::thermal(&s, 3.0).unwrap();
        let p = ens.quasiparticle_occupations(&s);
        for (i, &pk) in p.iter().enumerate() {
            let th = thermal_occupation(s.eps[i], 3.0).unwrap();
            assert!((pk - th).abs() < 1e-14);
        }
    }
}
