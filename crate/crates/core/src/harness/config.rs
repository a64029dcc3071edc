//! Experiment configuration in TOML.
//!
//! ```toml
//! T = 1.0
//! n_schedule = [4, 8, 16, 32, 64, 128, 256]
//! engines = ["weak", "strong", "pde"]
//! seed = 7
//! bound_mode = "relaxed"
//! out = "call_d1.csv"
//!
//! [uncertainty]
//! dim = 1
//! kind = "interval"
//! r = 1.0
//! R = 4.0
//!
//! [payoff]
//! kind = "terminal"
//! function = "call"
//! strike = 0.0
//! ```
//!
//! Optional tables: `[grid]` (`h`, `radius`, `min_knots_per_atom`),
//! `[family]` (`refinement`, `rotations`), `[strong]` (`refinement`) and
//! `[pde]` (`points_per_sd`). Top-level `paths` sets the Monte Carlo size
//! and `timings = true` fills the `runtime_ms` column.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dp::GridConfig;
use crate::error::{Error, Result};
use crate::payoffs::{PathPayoff, PayoffConfig};
use crate::strong_walk::StrongConfig;
use crate::uncertainty_set::{UncertaintyConfig, UncertaintySet};
use crate::weak_dp::{BoundMode, FamilyConfig, WeakDpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Weak,
    Strong,
    Pde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongSection {
    /// Dyadic refinement of the control set.
    pub refinement: u32,
}

impl Default for StrongSection {
    fn default() -> Self {
        Self { refinement: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    /// Grid points per `sqrt(R T)`.
    pub points_per_sd: f64,
}

impl Default for PdeSection {
    fn default() -> Self {
        Self { points_per_sd: 100.0 }
    }
}

fn default_engines() -> Vec<Engine> {
    vec![Engine::Weak, Engine::Strong, Engine::Pde]
}

fn default_paths() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_schedule: Vec<usize>,
    #[serde(default = "default_engines")]
    pub engines: Vec<Engine>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bound_mode: BoundMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub timings: bool,
    pub uncertainty: UncertaintyConfig,
    pub payoff: PayoffConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub strong: StrongSection,
    #[serde(default)]
    pub pde: PdeSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) {
            return Err(Error::Config("`T` must be positive".into()));
        }
        if self.n_schedule.is_empty() || self.n_schedule[0] == 0 {
            return Err(Error::Config("`n_schedule` must be nonempty and positive".into()));
        }
        if self.n_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("`n_schedule` must be strictly increasing".into()));
        }
        if self.engines.is_empty() {
            return Err(Error::Config("at least one engine is required".into()));
        }
        self.uncertainty_set()?;
        self.payoff()?;
        Ok(())
    }

    pub fn uncertainty_set(&self) -> Result<UncertaintySet> {
        UncertaintySet::from_config(&self.uncertainty)
    }

    pub fn payoff(&self) -> Result<PathPayoff> {
        PathPayoff::from_config(&self.payoff, self.uncertainty.dim)
    }

    pub fn runs(&self, engine: Engine) -> bool {
        self.engines.contains(&engine)
    }

    /// Weak settings. The candidate family is at least as fine as the strong
    /// control set so that every strong step law is also a weak candidate.
    pub fn weak_config(&self, store_policy: bool) -> WeakDpConfig {
        WeakDpConfig {
            bound_mode: self.bound_mode,
            grid: self.grid,
            family: FamilyConfig {
                refinement: self.family.refinement.max(self.strong.refinement),
                ..self.family
            },
            store_policy,
        }
    }

    pub fn strong_config(&self, store_policy: bool) -> StrongConfig {
        StrongConfig {
            grid: self.grid,
            refinement: self.strong.refinement,
            store_policy,
        }
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).unwrap_or_default();
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
T = 1.0
n_schedule = [4, 8]
[uncertainty]
dim = 1
kind = "interval"
r = 1.0
R = 4.0
[payoff]
kind = "terminal"
function = "square"
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(cfg.engines, default_engines());
        assert_eq!(cfg.bound_mode, BoundMode::Relaxed);
        assert_eq!(cfg.paths, 10_000);
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_schedules_and_fields() {
        let bad = BASE.replace("[4, 8]", "[8, 4]");
        assert!(matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))));
        let unknown = format!("colour = 3\n{BASE}");
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
        let call = BASE.replace("\"square\"", "\"call\"");
        assert!(ExperimentConfig::from_toml_str(&call).is_err());
    }
}
