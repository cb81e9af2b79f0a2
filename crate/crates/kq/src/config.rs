//! JSON run configuration for the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bath::BathSpec;
use crate::chain::ChainParams;
use crate::dynamics::Tolerances;
use crate::error::{Error, Result};
use crate::schedule::{QuenchSchedule, SweepSpec};

pub const FORMAT_VERSION: u32 = 1;

/// Logarithmic sampling grid for traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampling {
    pub points_per_decade: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            points_per_decade: 60,
            t_min: 1.0,
            t_max: 1e6,
        }
    }
}

impl Sampling {
    pub fn validate(&self) -> Result<()> {
        if self.points_per_decade == 0 {
            return Err(Error::InvalidConfig(
                "points_per_decade must be positive".into(),
            ));
        }
        if !(self.t_min > 0.0) || !(self.t_max > self.t_min) {
            return Err(Error::InvalidConfig(format!(
                "sampling window must satisfy 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        Ok(())
    }
}

/// Full run description; every field mirrors a CLI flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_format_version")]
    pub format_version: u32,
    pub chain: ChainParams,
    pub bath: BathSpec,
    pub schedule: QuenchSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_format_version() -> u32 {
    FORMAT_VERSION
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_prefix() -> String {
    "kq".into()
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.chain.validate()?;
        self.bath.validate()?;
        self.schedule.validate()?;
        if let Some(sweep) = &self.sweep {
            sweep.validate()?;
        }
        self.sampling.validate()?;
        self.tolerances.validate()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::Statistics;
    use crate::schedule::ScheduleKind;

    fn sample_json() -> &'static str {
        r#"{
            "chain": {"mu": 1.0, "chi": 1.0, "L": 10000},
            "bath": {"zeta": "fermionic", "s": 1.0, "gamma0": 0.01},
            "schedule": {"T_i": 0.0, "T_f": 5.0, "kind": "linear_ramp", "tau": 128.0},
            "sweep": {"taus": [128.0, 256.0, 512.0]},
            "sampling": {"points_per_decade": 40, "t_min": 1.0, "t_max": 100000.0}
        }"#
    }

    #[test]
    fn parses_full_config() {
        let cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.chain.l, 10_000);
        assert_eq!(cfg.bath.zeta, Statistics::Fermionic);
        assert!(matches!(
            cfg.schedule.kind,
            ScheduleKind::LinearRamp { tau } if tau == 128.0
        ));
        assert_eq!(cfg.sweep.unwrap().taus.unwrap().len(), 3);
        assert_eq!(cfg.format_version, FORMAT_VERSION);
        assert_eq!(cfg.prefix, "kq");
    }

    #[test]
    fn round_trips_through_json() {
        let cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.chain, cfg.chain);
        assert_eq!(back.schedule, cfg.schedule);
        assert_eq!(back.sampling, cfg.sampling);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        cfg.sampling.t_min = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        cfg.format_version = 99;
        assert!(cfg.validate().is_err());
        let mut cfg: RunConfig = serde_json::from_str(sample_json()).unwrap();
        cfg.tolerances.quad_tol = 0.0;
        assert!(cfg.validate().is_err());
    }
}
