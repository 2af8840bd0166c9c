//! Run configuration loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::DENSE_QUBIT_CAP;
use crate::error::{Error, Result};
use crate::overhead::{CLASSICAL_BASELINE, DISTILLATION_CLIFFORDS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lp_gap_tolerance: f64,
    pub reconstruction_tolerance: f64,
    /// Largest register the dense oracle may be asked to handle.
    pub dense_qubit_cap: usize,
    pub classical_baseline: f64,
    pub distillation_cliffords: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lp_gap_tolerance: 1e-9,
            reconstruction_tolerance: 1e-10,
            dense_qubit_cap: DENSE_QUBIT_CAP,
            classical_baseline: CLASSICAL_BASELINE,
            distillation_cliffords: DISTILLATION_CLIFFORDS,
            seed: 0,
            out_dir: PathBuf::from("."),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.lp_gap_tolerance > 0.0) || !(self.reconstruction_tolerance > 0.0) {
            return Err(Error::param("tolerances must be positive"));
        }
        if self.dense_qubit_cap == 0 || self.dense_qubit_cap > DENSE_QUBIT_CAP {
            return Err(Error::param(format!(
                "dense_qubit_cap must lie in 1..={DENSE_QUBIT_CAP}, got {}",
                self.dense_qubit_cap
            )));
        }
        if !(self.classical_baseline > 0.0) {
            return Err(Error::param("classical_baseline must be positive"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let c = Config::from_toml_str("seed = 9\nclassical_baseline = 1.5\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.dense_qubit_cap, DENSE_QUBIT_CAP);
        let j = Config::from_json_str(r#"{"seed": 9, "classical_baseline": 1.5}"#).unwrap();
        assert_eq!(c, j);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml_str("dense_qubit_cap = 13").is_err());
        assert!(Config::from_toml_str("lp_gap_tolerance = 0.0").is_err());
        assert!(Config::from_toml_str("unknown = 1").is_err());
    }
}
