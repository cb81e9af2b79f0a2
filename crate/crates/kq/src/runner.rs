//! Protocol runners shared by the CLI and the acceptance suite: build the
//! spectrum and initial state for a quench, evolve it along the schedule, and
//! reduce to density traces and sweep endpoints.

use serde::Serialize;

use crate::analysis::RegimeQuery;
use crate::bath::BathSpec;
use crate::chain::{build_grid, gap_info, spectrum, ChainParams, ModeSpectrum};
use crate::dynamics::{
    ramp_excess_ode, ramp_excess_quadrature, ramp_excess_trace_quadrature, thermal_density,
    thermal_occupations, ConstantPropagator, TimeSeries, Tolerances,
};
use crate::error::{Error, Result};
use crate::schedule::{initial_occupation, QuenchSchedule, ScheduleKind};
use crate::sum::compensated_mean;

/// A complete quench protocol: chain, bath and schedule.
#[derive(Debug, Clone)]
pub struct Protocol {
    pub chain: ChainParams,
    pub bath: BathSpec,
    pub schedule: QuenchSchedule,
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        self.chain.validate()?;
        self.bath.validate()?;
        self.schedule.validate()
    }

    /// Post-quench spectrum on the grid.
    pub fn spectrum(&self) -> Result<ModeSpectrum> {
        let grid = build_grid(&self.chain)?;
        Ok(spectrum(&self.chain, &grid))
    }

    /// Occupations at `t = 0+`: thermal at `T_i`, rotated through any sudden
    /// quantum-parameter jump.
    pub fn initial(&self, spectrum_post: &ModeSpectrum) -> Result<Vec<f64>> {
        match self.schedule.pre_quench {
            Some(pre) => {
                let chain_pre = self.chain.with_quantum(pre.mu, pre.chi)?;
                let grid = build_grid(&chain_pre)?;
                let spectrum_pre = spectrum(&chain_pre, &grid);
                initial_occupation(self.schedule.temp_i, &spectrum_pre, spectrum_post)
            }
            None => thermal_occupations(spectrum_post, self.schedule.temp_i),
        }
    }

    /// Inputs for the predicted-exponent lookup.
    pub fn regime_query(&self) -> RegimeQuery {
        RegimeQuery {
            zeta: self.bath.zeta,
            s: self.bath.s,
            z: gap_info(&self.chain).z,
            sudden: matches!(self.schedule.kind, ScheduleKind::Sudden),
            temp_i: self.schedule.temp_i,
            temp_f: self.schedule.temp_f,
        }
    }

    /// Warning when the coupling is too strong for a weak-coupling
    /// (Lindblad) description to be trustworthy.
    pub fn coupling_warning(&self, spectrum: &ModeSpectrum) -> Option<String> {
        let max_eps = spectrum.max_energy();
        let max_rate = self.bath.spectral_density(max_eps);
        if max_rate > 0.1 * max_eps {
            Some(format!(
                "coupling gamma0 = {} gives max rate {max_rate:.3e} > 0.1 x max energy \
                 {max_eps:.3e}; the weak-coupling rate equation may not be valid",
                self.bath.gamma0
            ))
        } else {
            None
        }
    }
}

/// Logarithmic sample grid with `ppd` points per decade, inclusive of ends.
pub fn log_times(t_min: f64, t_max: f64, ppd: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0) || !(t_max > t_min) || ppd == 0 {
        return Err(Error::InvalidConfig(format!(
            "invalid sampling grid: t_min={t_min}, t_max={t_max}, points_per_decade={ppd}"
        )));
    }
    let decades = (t_max / t_min).log10();
    let n = (decades * ppd as f64).ceil() as usize + 1;
    let mut out: Vec<f64> = (0..n)
        .map(|i| t_min * (t_max / t_min).powf(i as f64 / (n - 1) as f64))
        .collect();
    out.dedup();
    Ok(out)
}

/// Density trace of a protocol at the given sample times.
///
/// Sudden quenches use the exact constant-rate propagator; ramps use the
/// exponential integrator. `D_th_inst` tracks the instantaneous thermal
/// reference along `T(t)`.
pub fn relaxation_trace(
    proto: &Protocol,
    sample_times: &[f64],
    tol: &Tolerances,
) -> Result<TimeSeries> {
    proto.validate()?;
    let sp = proto.spectrum()?;
    let p0 = proto.initial(&sp)?;
    let temp_f = proto.schedule.temp_f;
    let d_th_final = thermal_density(&sp, temp_f)?;
    let excess = match proto.schedule.kind {
        ScheduleKind::Sudden => {
            let prop = ConstantPropagator::new(&sp, &proto.bath, temp_f)?;
            let q0 = prop.deviations(&p0);
            prop.excess_density_series(&q0, sample_times)
        }
        _ => match proto.bath.zeta {
            // fermionic rates don't depend on T(t): exact per-segment quadrature
            crate::bath::Statistics::Fermionic => ramp_excess_trace_quadrature(
                &p0,
                &sp,
                &proto.bath,
                &proto.schedule,
                sample_times,
                tol.quad_tol,
            )?
            .excess_density,
            crate::bath::Statistics::Bosonic => {
                ramp_excess_ode(&p0, &sp, &proto.bath, &proto.schedule, sample_times, tol.ode_tol)?
                    .excess_density
            }
        },
    };
    let d_th_inst = sample_times
        .iter()
        .map(|&t| thermal_density(&sp, proto.schedule.temperature_at(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeSeries::from_excess(
        sample_times.to_vec(),
        excess,
        d_th_final,
        d_th_inst,
    ))
}

// Per-mode deviations from the T_f thermal state at the end of the ramp, by
// the integrating-factor quadrature. For a fermionic bath the rate is
// constant along a temperature ramp and the solution applies verbatim; the
// bosonic route tabulates the cumulative rate integral. Unlike the marching
// integrator, quadrature error does not accumulate with the ramp duration,
// which matters for slow-ramp sweep endpoints.
fn ramp_endpoint_deviations(
    proto: &Protocol,
    schedule: &QuenchSchedule,
    sp: &ModeSpectrum,
    p0: &[f64],
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    ramp_excess_quadrature(p0, sp, &proto.bath, schedule, tol.quad_tol)
}

/// One endpoint of a ramp-rate sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub t_f: f64,
    pub d_final: f64,
    pub d_th_final: f64,
    pub excess: f64,
}

/// Endpoint excess density for each ramp rate in `taus`, holding everything
/// else in the protocol fixed.
pub fn kz_sweep(proto: &Protocol, taus: &[f64], tol: &Tolerances) -> Result<Vec<SweepPoint>> {
    proto.validate()?;
    let sp = proto.spectrum()?;
    let p0 = proto.initial(&sp)?;
    let d_th_final = thermal_density(&sp, proto.schedule.temp_f)?;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0) {
            return Err(Error::InvalidSchedule(format!("non-positive tau {tau}")));
        }
        let sched = QuenchSchedule {
            kind: ScheduleKind::LinearRamp { tau },
            ..proto.schedule
        };
        let dev = ramp_endpoint_deviations(proto, &sched, &sp, &p0, tol)?;
        let excess = compensated_mean(&dev);
        out.push(SweepPoint {
            tau,
            t_f: sched.ramp_end_time(),
            d_final: d_th_final + excess,
            d_th_final,
            excess,
        });
    }
    Ok(out)
}

/// Free relaxation after a linear ramp, on the relaxation clock (`t = 0` at
/// the ramp end). The post-ramp stage is at constant `T_f`, so it is
/// propagated exactly from the ramp-end state.
pub fn ramp_then_relax_trace(
    proto: &Protocol,
    tau: f64,
    relax_times: &[f64],
    tol: &Tolerances,
) -> Result<TimeSeries> {
    proto.validate()?;
    let sp = proto.spectrum()?;
    let p0 = proto.initial(&sp)?;
    let sched = QuenchSchedule {
        kind: ScheduleKind::LinearRamp { tau },
        ..proto.schedule
    };
    let q_end = ramp_endpoint_deviations(proto, &sched, &sp, &p0, tol)?;
    let prop = ConstantPropagator::new(&sp, &proto.bath, proto.schedule.temp_f)?;
    let excess = prop.excess_density_series(&q_end, relax_times);
    let d_th_final = thermal_density(&sp, proto.schedule.temp_f)?;
    let d_th_inst = vec![d_th_final; relax_times.len()];
    Ok(TimeSeries::from_excess(
        relax_times.to_vec(),
        excess,
        d_th_final,
        d_th_inst,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::Statistics;

    fn proto(schedule: QuenchSchedule) -> Protocol {
        Protocol {
            chain: ChainParams::new(1.0, 1.0, 128).unwrap(),
            bath: BathSpec::new(Statistics::Fermionic, 1.0, 0.01).unwrap(),
            schedule,
        }
    }

    #[test]
    fn log_grid_shape() {
        let ts = log_times(1.0, 1000.0, 10).unwrap();
        assert_eq!(ts.len(), 31);
        assert!((ts[0] - 1.0).abs() < 1e-12);
        assert!((ts.last().unwrap() - 1000.0).abs() < 1e-9);
        assert!(log_times(0.0, 1.0, 10).is_err());
        assert!(log_times(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn sudden_trace_decays_to_thermal() {
        let p = proto(QuenchSchedule::sudden(5.0, 1.0));
        let ts = log_times(1.0, 1e5, 10).unwrap();
        let trace = relaxation_trace(&p, &ts, &Tolerances::default()).unwrap();
        assert!(trace.excess[0] > 0.0);
        let last = *trace.excess.last().unwrap();
        assert!(last.abs() < trace.excess[0] * 1e-3);
        // instantaneous reference equals the final one for sudden quenches
        for &d in &trace.d_th_inst {
            assert_eq!(d, trace.d_th_final);
        }
    }

    #[test]
    fn kz_sweep_excess_decreases_with_tau() {
        let p = proto(QuenchSchedule::linear_ramp(0.0, 5.0, 1.0));
        let pts = kz_sweep(&p, &[4.0, 16.0, 64.0], &Tolerances::default()).unwrap();
        assert_eq!(pts.len(), 3);
        for w in pts.windows(2) {
            assert!(w[1].excess.abs() < w[0].excess.abs());
        }
        for pt in &pts {
            assert_eq!(pt.d_final, pt.d_th_final + pt.excess);
            assert!((pt.t_f - pt.tau * 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relax_after_ramp_continuity() {
        // the relax trace at t=0 equals the ramp endpoint excess
        let p = proto(QuenchSchedule::linear_ramp(10.0, 5.0, 4.0));
        let tol = Tolerances::default();
        let pts = kz_sweep(&p, &[4.0], &tol).unwrap();
        let trace = ramp_then_relax_trace(&p, 4.0, &[0.0, 1.0, 10.0], &tol).unwrap();
        assert!((trace.excess[0] - pts[0].excess).abs() < 1e-12);
        assert!(trace.excess[2].abs() < trace.excess[0].abs());
    }

    #[test]
    fn step_response_feeds_initial_state() {
        let mut p = proto(QuenchSchedule::sudden(5.0, 5.0));
        p.schedule = p.schedule.with_pre_quench(2.0, 1.0);
        let sp = p.spectrum().unwrap();
        let p0 = p.initial(&sp).unwrap();
        let th = thermal_occupations(&sp, 5.0).unwrap();
        // rotated occupations differ from thermal but stay in bounds
        let mut differs = false;
        for (a, b) in p0.iter().zip(&th) {
            assert!((0.0..=1.0).contains(a));
            if (a - b).abs() > 1e-6 {
                differs = true;
            }
        }
        assert!(differs);
    }

    #[test]
    fn coupling_warning_threshold() {
        let p = proto(QuenchSchedule::sudden(5.0, 1.0));
        let sp = p.spectrum().unwrap();
        assert!(p.coupling_warning(&sp).is_none());
        let strong = Protocol {
            bath: BathSpec::new(Statistics::Fermionic, 1.0, 0.5).unwrap(),
            ..p
        };
        assert!(strong.coupling_warning(&sp).is_some());
    }

    #[test]
    fn regime_query_reflects_protocol() {
        let p = proto(QuenchSchedule::linear_ramp(0.0, 5.0, 64.0));
        let q = p.regime_query();
        assert_eq!(q.z, Some(1));
        assert!(!q.sudden);
        let off = Protocol {
            chain: ChainParams::new(0.5, 1.0, 128).unwrap(),
            ..p
        };
        assert_eq!(off.regime_query().z, None);
    }
}
