//! Cross-oracle self-test: the four evolution routes (closed form,
//! integrating-factor quadrature, exponential integrator, covariance matrix)
//! must agree on the density of randomized temperature-only protocols.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bath::{BathSpec, Statistics};
use crate::chain::{build_grid, spectrum, ChainParams};
use crate::dynamics::third_quantization::{third_quantization_evolve, CovarianceEnsemble};
use crate::dynamics::{
    excitation_density, ramp_excess_ode, ramp_excess_quadrature, sudden_solution,
    thermal_density, thermal_occupations,
};
use crate::error::{Error, Result};
use crate::schedule::QuenchSchedule;
use crate::sum::compensated_mean;

pub const AGREEMENT_TOL: f64 = 1e-6;
const GRID_SIZE: usize = 128;

/// Outcome of one randomized cross-check case.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub description: String,
    pub max_deviation: f64,
}

/// Run `n_cases` randomized temperature-only protocols on an `L = 128` grid
/// and compare all applicable evolution routes pairwise on `D(t)`.
/// Returns the per-case reports; errs if any pair deviates beyond 1e-6.
pub fn oracle_triangle(n_cases: usize, seed: u64) -> Result<Vec<CaseReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(n_cases);
    for case in 0..n_cases {
        let mu = [0.5, 1.0, 1.3][rng.gen_range(0..3)];
        let chi = rng.gen_range(0.2..1.5);
        let zeta = if rng.gen_bool(0.5) {
            Statistics::Fermionic
        } else {
            Statistics::Bosonic
        };
        let s = [0.0, 1.0, 2.0, 3.0][rng.gen_range(0..4)];
        let temp_i = rng.gen_range(0.0..10.0);
        let temp_f = rng.gen_range(0.0..10.0);
        let sudden = rng.gen_bool(0.5);

        let chain = ChainParams::new(mu, chi, GRID_SIZE)?;
        let bath = BathSpec::new(zeta, s, 0.01)?;
        let grid = build_grid(&chain)?;
        let sp = spectrum(&chain, &grid);
        let p0 = thermal_occupations(&sp, temp_i)?;
        let d_th_f = thermal_density(&sp, temp_f)?;

        let (schedule, times): (QuenchSchedule, Vec<f64>) = if sudden {
            (
                QuenchSchedule::sudden(temp_i, temp_f),
                vec![1.0, 10.0, 100.0],
            )
        } else {
            let tau = rng.gen_range(0.5..20.0);
            let sched = QuenchSchedule::linear_ramp(temp_i, temp_f, tau);
            let end = sched.ramp_end_time().max(1e-6);
            (sched, vec![0.25 * end, 0.5 * end, end])
        };

        let mut max_dev: f64 = 0.0;
        let mut track = |a: f64, b: f64| {
            max_dev = max_dev.max((a - b).abs());
        };

        // route 1: exponential integrator
        let ode = ramp_excess_ode(&p0, &sp, &bath, &schedule, &times, 1e-11)?;
        // route 2: covariance evolution
        let init = CovarianceEnsemble::from_quasiparticle(&sp, &p0);
        let tq = third_quantization_evolve(&init, &schedule, &sp, &bath, &times, 1e-10)?;
        for j in 0..times.len() {
            track(d_th_f + ode.excess_density[j], tq.density[j]);
        }
        if sudden {
            // route 3: exact closed form
            for (j, &t) in times.iter().enumerate() {
                let exact = excitation_density(&sudden_solution(&p0, &sp, &bath, temp_f, t)?);
                track(exact, d_th_f + ode.excess_density[j]);
                track(exact, tq.density[j]);
            }
        } else if schedule.ramp_end_time() > 0.0 {
            // route 3: integrating-factor quadrature at the ramp end
            let quad = ramp_excess_quadrature(&p0, &sp, &bath, &schedule, 1e-12)?;
            let d_quad = d_th_f + compensated_mean(&quad);
            let last = times.len() - 1;
            track(d_quad, d_th_f + ode.excess_density[last]);
            track(d_quad, tq.density[last]);
        }

        let description = format!(
            "case {case}: {zeta:?} s={s} mu={mu} chi={chi:.3} T {temp_i:.3}->{temp_f:.3} {}",
            if sudden { "sudden".into() } else { format!("{:?}", schedule.kind) }
        );
        if max_dev > AGREEMENT_TOL {
            return Err(Error::Fit(format!(
                "oracle disagreement {max_dev:.3e} > {AGREEMENT_TOL:.0e} in {description}"
            )));
        }
        reports.push(CaseReport {
            description,
            max_deviation: max_dev,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_oracle_triangle_passes() {
        let reports = oracle_triangle(4, 7).unwrap();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert!(r.max_deviation <= AGREEMENT_TOL, "{}", r.description);
        }
    }
}
