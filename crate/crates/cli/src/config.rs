//! Run configuration: a flat TOML table with explicit units in the key names.
//! Keys ending in `_freq_MHz` are ordinary frequencies; they are converted to
//! angular frequencies (rad/μs) internally.

use std::path::Path;

use ioncrystal::trap::TrapConfig;
use ioncrystal::units::mhz_to_angular;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "dc_voltage_V")]
    pub dc_voltage: f64,
    #[serde(rename = "rf_voltage_V")]
    pub rf_voltage: f64,
    #[serde(rename = "rf_freq_MHz")]
    pub rf_freq: f64,
    #[serde(rename = "electrode_size_um")]
    pub electrode_size: f64,
    pub anisotropy: f64,
    #[serde(rename = "ion_mass_u")]
    pub ion_mass: f64,
    #[serde(rename = "ion_charge_e", default = "unit_charge")]
    pub ion_charge: f64,
    pub n_ions: usize,
    #[serde(rename = "seed_spacing_um")]
    pub seed_spacing: f64,
    /// Cooling rate (rad/μs) under which weakly unstable homogeneous motion
    /// still decays; 0 demands strict Mathieu stability.
    #[serde(rename = "cooling_rate_per_us", default)]
    pub cooling_rate: f64,
}

fn unit_charge() -> f64 {
    1.0
}

impl RunConfig {
    /// The 127-ion ¹⁷¹Yb⁺ crystal at U₀ = −1.1 V, V₀ = 90 V, Ω_T/2π = 50 MHz.
    pub fn reference() -> Self {
        Self {
            dc_voltage: -1.1,
            rf_voltage: 90.0,
            rf_freq: 50.0,
            electrode_size: 200.0,
            anisotropy: 0.01,
            ion_mass: 171.0,
            ion_charge: 1.0,
            n_ions: 127,
            seed_spacing: 7.0,
            cooling_rate: 0.0,
        }
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serialises")
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.seed_spacing > 0.0) {
            return Err(CliError::Config("seed_spacing_um must be positive".into()));
        }
        if !(self.cooling_rate >= 0.0) {
            return Err(CliError::Config(
                "cooling_rate_per_us must be non-negative".into(),
            ));
        }
        self.trap()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn trap(&self) -> TrapConfig<f64> {
        TrapConfig {
            dc_voltage: self.dc_voltage,
            rf_voltage: self.rf_voltage,
            rf_omega: mhz_to_angular(self.rf_freq),
            electrode_size: self.electrode_size,
            anisotropy: self.anisotropy,
            ion_mass: self.ion_mass,
            ion_charge: self.ion_charge,
            n_ions: self.n_ions,
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serialises")
                .as_bytes(),
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
