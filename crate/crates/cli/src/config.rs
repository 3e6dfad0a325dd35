//! Versioned JSON run configuration. Every section is optional and defaults
//! to the nominal constants, so `{}` is a complete config.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gcpim::compiler::{CompileOptions, RowBudget};
use gcpim::montecarlo::{CalibrationOptions, VariationConfig};
use gcpim::{ModelConfigF64, TimingEnergyConfigF64};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompilerSection {
    pub max_arity: usize,
    pub rows: RowBudget,
}

impl Default for CompilerSection {
    fn default() -> Self {
        CompilerSection {
            max_arity: 2,
            rows: RowBudget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    /// Worst-case single-'1' success rate to hit.
    pub target: f64,
    pub trials: usize,
    pub tolerance: f64,
    pub fine_tolerance: f64,
    /// Lower bound on the common sigma scale.
    pub min_scale: f64,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        let d = CalibrationOptions::<f64>::default();
        CalibrationSection {
            target: 0.995,
            trials: d.trials,
            tolerance: d.tolerance,
            fine_tolerance: d.fine_tolerance,
            min_scale: d.min_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelConfigF64,
    pub timing: TimingEnergyConfigF64,
    /// Absent until calibrated or given explicitly; Monte Carlo needs it.
    pub variation: Option<VariationConfig<f64>>,
    pub compiler: CompilerSection,
    pub calibration: CalibrationSection,
    pub subarrays: usize,
    pub trials: usize,
    pub seed: u64,
    /// Minimum per-combination success rate for `mc` to exit cleanly.
    pub floor: f64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            model: ModelConfigF64::nominal(),
            timing: TimingEnergyConfigF64::nominal(),
            variation: None,
            compiler: CompilerSection::default(),
            calibration: CalibrationSection::default(),
            subarrays: 4,
            trials: 1000,
            seed: CalibrationOptions::<f64>::default().seed,
            floor: 0.99,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(gcpim::Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.model.validate()?;
        self.timing.validate()?;
        self.compiler.rows.validate()?;
        if let Some(v) = &self.variation {
            v.validate()?;
        }
        if self.subarrays == 0 || self.trials == 0 {
            bail!(gcpim::Error::Config("subarrays and trials must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            bail!(gcpim::Error::Config(format!("floor {} outside [0, 1]", self.floor)));
        }
        Ok(())
    }

    pub fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            max_arity: self.compiler.max_arity,
            rows: self.compiler.rows,
            drt_logic_ns: self.model.drt_logic_ns,
        }
    }

    pub fn calibration_options(&self) -> CalibrationOptions<f64> {
        CalibrationOptions {
            trials: self.calibration.trials,
            seed: self.seed,
            tolerance: self.calibration.tolerance,
            fine_tolerance: self.calibration.fine_tolerance,
            min_scale: self.calibration.min_scale,
            ..CalibrationOptions::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sead": 1}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"compiler": {"arity": 3}}"#).is_err());
    }

    #[test]
    fn bad_version_rejected() {
        let c: RunConfig = serde_json::from_str(r#"{"version": 7}"#).unwrap();
        assert!(c.validate().is_err());
    }
}
