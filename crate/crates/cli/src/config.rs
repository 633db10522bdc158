//! Experiment files: TOML, written with dotted `section.key = value` lines.
//!
//! ```toml
//! engine = "cm_exact"
//! beta = 2.0
//! output = "out/fig3"
//! initial_state = "uniform_superposition"
//! model.n_sites = 2
//! collision.g = 1.0
//! collision.ts = 1.0
//! collision.steps = 20
//! ```

use std::path::{Path, PathBuf};

use qcollide::model::SpinChainParams;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    CmExact,
    CmSecondOrder,
    McTrajectories,
    McAveraged,
    Compare,
    RatioScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedState {
    UniformSuperposition,
    Ground,
    Gibbs,
}

/// A named state or a list of eigenstate occupations.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(NamedState),
    Diagonal(Vec<f64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named(NamedState::UniformSuperposition)
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "two")]
    pub n_sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "one")]
    pub field: f64,
    #[serde(default = "one")]
    pub anisotropy: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n_sites: 2,
            coupling: 1.0,
            field: 1.0,
            anisotropy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSection {
    pub g: f64,
    #[serde(default = "one")]
    pub dt: f64,
    #[serde(default)]
    pub ts: f64,
    pub steps: usize,
    #[serde(default = "yes")]
    pub free_evolution: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub steps: usize,
    #[serde(default)]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub n_sites: Vec<usize>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CompareMc {
    #[default]
    Trajectories,
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default)]
    pub mc: CompareMc,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub engine: Engine,
    pub beta: Option<f64>,
    pub output: PathBuf,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub model: ModelSection,
    pub collision: Option<CollisionSection>,
    pub mc: Option<McSection>,
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub compare: CompareSection,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse(e.to_string()))
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::ConfigParse(format!("{}: {e}", path.display())))?;
        let config = Self::parse(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn params(&self) -> Result<SpinChainParams, CliError> {
        let m = &self.model;
        Ok(SpinChainParams::new(m.n_sites, m.coupling, m.field, m.anisotropy)?)
    }

    pub fn beta(&self) -> Result<f64, CliError> {
        match self.beta {
            Some(b) if b.is_finite() && b >= 0.0 => Ok(b),
            Some(b) => Err(invalid(format!("beta must be finite and non-negative, got {b}"))),
            None => Err(invalid("beta is required for this engine")),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.output.as_os_str().is_empty() {
            return Err(invalid("output directory is empty"));
        }
        let params = self.params()?;
        match self.engine {
            Engine::RatioScan => {
                let scan = self.scan.as_ref().ok_or_else(|| invalid("ratio_scan needs a [scan] section"))?;
                if scan.n_sites.is_empty() || scan.betas.is_empty() {
                    return Err(invalid("scan.n_sites and scan.betas must be non-empty"));
                }
                for &n in &scan.n_sites {
                    SpinChainParams { n_sites: n, ..params }.validate()?;
                }
                if let Some(b) = scan.betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
                    return Err(invalid(format!("scan beta must be finite and non-negative, got {b}")));
                }
                return Ok(());
            }
            Engine::CmExact | Engine::CmSecondOrder => {
                let c = self.collision.as_ref().ok_or_else(|| invalid("collisional engines need collision.* keys"))?;
                self.collision_config(c)?.validate()?;
            }
            Engine::McTrajectories | Engine::McAveraged | Engine::Compare => {
                let mc = self.mc.as_ref().ok_or_else(|| invalid("Monte Carlo engines need mc.* keys"))?;
                let trajectories = match self.engine {
                    Engine::McTrajectories => true,
                    Engine::Compare => self.compare.mc == CompareMc::Trajectories,
                    _ => false,
                };
                if trajectories && mc.runs == 0 {
                    return Err(invalid("mc.runs must be positive"));
                }
            }
        }
        self.beta()?;
        if let InitialState::Diagonal(pops) = &self.initial_state {
            if pops.len() != params.dim() {
                return Err(invalid(format!(
                    "initial_state has {} occupations, the chain has {} eigenstates",
                    pops.len(),
                    params.dim()
                )));
            }
            qcollide::states::diagonal(pops)?;
        }
        Ok(())
    }

    pub fn collision_config(&self, c: &CollisionSection) -> Result<qcollide::CollisionConfig, CliError> {
        Ok(qcollide::CollisionConfig {
            g: c.g,
            dt: c.dt,
            ts: c.ts,
            beta: self.beta()?,
            steps: c.steps,
            include_free_evolution: c.free_evolution,
        })
    }

    /// Applies `--seed` / `--runs`.
    pub fn override_mc(&mut self, seed: Option<u64>, runs: Option<usize>) -> Result<(), CliError> {
        if seed.is_none() && runs.is_none() {
            return Ok(());
        }
        let mc = self
            .mc
            .as_mut()
            .ok_or_else(|| invalid("--seed and --runs only apply to configs with mc.* keys"))?;
        if let Some(s) = seed {
            mc.seed = s;
        }
        if let Some(r) = runs {
            mc.runs = r;
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3: &str = r#"
engine = "cm_exact"
beta = 2.0
output = "out"
model.n_sites = 2
collision.g = 1.0
collision.ts = 1.0
collision.steps = 20
"#;

    #[test]
    fn parses_dotted_keys_with_defaults() {
        let c = ExperimentConfig::parse(FIG3).unwrap();
        c.validate().unwrap();
        assert_eq!(c.engine, Engine::CmExact);
        assert_eq!(c.model, ModelSection::default());
        let col = c.collision.as_ref().unwrap();
        assert_eq!((col.dt, col.free_evolution), (1.0, true));
        assert_eq!(c.initial_state, InitialState::Named(NamedState::UniformSuperposition));
    }

    #[test]
    fn initial_state_forms() {
        let c = ExperimentConfig::parse(&format!("{FIG3}\ninitial_state = \"gibbs\"")).unwrap();
        assert_eq!(c.initial_state, InitialState::Named(NamedState::Gibbs));
        let c = ExperimentConfig::parse(&format!("{FIG3}\ninitial_state = [0.5, 0.5, 0.0, 0.0]")).unwrap();
        c.validate().unwrap();
        let c = ExperimentConfig::parse(&format!("{FIG3}\ninitial_state = [0.5, 0.4, 0.0, 0.0]")).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Validation(_))));
        let c = ExperimentConfig::parse(&format!("{FIG3}\ninitial_state = [1.0]")).unwrap();
        assert!(matches!(c.validate(), Err(CliError::Validation(_))));
    }

    #[test]
    fn parse_and_validation_errors_are_distinct() {
        assert!(matches!(ExperimentConfig::parse("engine = "), Err(CliError::ConfigParse(_))));
        assert!(matches!(
            ExperimentConfig::parse(&FIG3.replace("cm_exact", "cm_magic")),
            Err(CliError::ConfigParse(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse(&format!("{FIG3}\ncollision.gg = 1")),
            Err(CliError::ConfigParse(_))
        ));

        let missing = ExperimentConfig::parse(&FIG3.replace("engine = \"cm_exact\"", "engine = \"mc_averaged\"")).unwrap();
        assert!(matches!(missing.validate(), Err(CliError::Validation(_))));
        let cold = ExperimentConfig::parse(&FIG3.replace("beta = 2.0", "beta = -1.0")).unwrap();
        assert!(matches!(cold.validate(), Err(CliError::Validation(_))));
        let big = ExperimentConfig::parse(&FIG3.replace("n_sites = 2", "n_sites = 40")).unwrap();
        assert!(matches!(big.validate(), Err(CliError::Validation(_))));
    }

    #[test]
    fn overrides_apply_to_mc_only() {
        let text = r#"
engine = "mc_trajectories"
beta = 2.0
output = "out"
mc.steps = 5
mc.runs = 10
"#;
        let mut c = ExperimentConfig::parse(text).unwrap();
        c.override_mc(Some(9), Some(20)).unwrap();
        assert_eq!(c.mc.as_ref().map(|m| (m.seed, m.runs)), Some((9, 20)));
        assert!(c.override_mc(None, Some(0)).is_err());

        let mut cm = ExperimentConfig::parse(FIG3).unwrap();
        assert!(cm.override_mc(Some(1), None).is_err());
        cm.override_mc(None, None).unwrap();
    }

    #[test]
    fn ratio_scan_needs_no_beta() {
        let text = r#"
engine = "ratio_scan"
output = "out"
scan.n_sites = [2, 3]
scan.betas = [0.0, 20.0]
"#;
        ExperimentConfig::parse(text).unwrap().validate().unwrap();
        let bad = ExperimentConfig::parse(&text.replace("[2, 3]", "[]")).unwrap();
        assert!(bad.validate().is_err());
    }
}
