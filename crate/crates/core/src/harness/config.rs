use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oct::{OctMethod, DEFAULT_BUDGET, DEFAULT_RESTARTS, DEFAULT_SEGMENTS};
use crate::rl::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Stirap,
    Oct,
    Rl,
    Sweep,
}

/// A dimensionless `(Tγ, TΩ_max)` pair, written `[t_gamma, t_omega_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct GridPoint {
    pub t_gamma: f64,
    pub t_omega_max: f64,
}

impl From<(f64, f64)> for GridPoint {
    fn from((t_gamma, t_omega_max): (f64, f64)) -> Self {
        GridPoint { t_gamma, t_omega_max }
    }
}

impl From<GridPoint> for (f64, f64) {
    fn from(p: GridPoint) -> Self {
        (p.t_gamma, p.t_omega_max)
    }
}

impl GridPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_gamma >= 0.0 && self.t_gamma.is_finite()) {
            return Err(Error::Config(format!("t_gamma must be >= 0, got {}", self.t_gamma)));
        }
        if !(self.t_omega_max > 0.0 && self.t_omega_max.is_finite()) {
            return Err(Error::Config(format!("t_omega_max must be > 0, got {}", self.t_omega_max)));
        }
        Ok(())
    }
}

/// The default sweep: `TΩ_max ∈ {5, 7.4, 10, 13.8, 20, 40, 70, 100}` for
/// each `Tγ ∈ {0, 1, 5, 10}`.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for t_gamma in [0.0, 1.0, 5.0, 10.0] {
        for t_omega_max in [5.0, 7.4, 10.0, 13.8, 20.0, 40.0, 70.0, 100.0] {
            grid.push(GridPoint { t_gamma, t_omega_max });
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OctOptions {
    pub segments: usize,
    pub method: OctMethod,
    pub restarts: usize,
    pub budget: usize,
}

impl Default for OctOptions {
    fn default() -> Self {
        OctOptions {
            segments: DEFAULT_SEGMENTS,
            method: OctMethod::Lbfgsb,
            restarts: DEFAULT_RESTARTS,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlOptions {
    pub preset: Preset,
    pub episodes: Option<usize>,
    pub steps: Option<usize>,
    pub patience: Option<usize>,
}

impl Default for RlOptions {
    fn default() -> Self {
        RlOptions {
            preset: Preset::ReinforceSgd,
            episodes: None,
            steps: None,
            patience: None,
        }
    }
}

/// Pulse shape in units of `T`; unset fields take the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StirapOptions {
    pub tau: Option<f64>,
    pub width: Option<f64>,
    pub segments: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: Vec<GridPoint>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub oct: OctOptions,
    #[serde(default)]
    pub rl: RlOptions,
    #[serde(default)]
    pub stirap: StirapOptions,
}

impl ExperimentConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        ExperimentConfig {
            mode,
            seed,
            grid: default_grid(),
            out: None,
            oct: OctOptions::default(),
            rl: RlOptions::default(),
            stirap: StirapOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for point in &self.grid {
            point.validate()?;
        }
        if self.oct.segments == 0 {
            return Err(Error::Config("oct.segments must be >= 1".into()));
        }
        if self.oct.restarts == 0 {
            return Err(Error::Config("oct.restarts must be >= 1".into()));
        }
        if self.rl.steps == Some(0) {
            return Err(Error::Config("rl.steps must be >= 1".into()));
        }
        if let Some(tau) = self.stirap.tau {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("stirap.tau must be > 0, got {tau}")));
            }
        }
        if let Some(width) = self.stirap.width {
            if !(width > 0.0) {
                return Err(Error::Config(format!("stirap.width must be > 0, got {width}")));
            }
        }
        if self.stirap.segments.is_some_and(|n| n < 2) {
            return Err(Error::Config("stirap.segments must be >= 2".into()));
        }
        Ok(())
    }
}

/// Parses and validates a TOML config. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse_config("mode = \"sweep\"\nseed = 3\n").unwrap();
        assert_eq!(c.grid.len(), 32);
        assert_eq!(c.oct, OctOptions::default());
        assert_eq!(c.rl.preset, Preset::ReinforceSgd);
    }

    #[test]
    fn full_config() {
        let text = r#"
mode = "oct"
seed = 11
grid = [[5.0, 7.4], [0.0, 100.0]]
out = "results"

[oct]
segments = 12
method = "nelder-mead"
restarts = 2

[rl]
preset = "reinforce-adam"
episodes = 10

[stirap]
tau = 0.2
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.grid[0], GridPoint { t_gamma: 5.0, t_omega_max: 7.4 });
        assert_eq!(c.oct.method, OctMethod::NelderMead);
        assert_eq!(c.oct.budget, DEFAULT_BUDGET);
        assert_eq!(c.rl.episodes, Some(10));
        assert_eq!(c.stirap.tau, Some(0.2));
        let back = parse_config(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejections() {
        let missing_seed = parse_config("mode = \"sweep\"\n").unwrap_err();
        assert!(missing_seed.to_string().contains("seed"), "{missing_seed}");
        let negative = parse_config("mode = \"sweep\"\nseed = 1\ngrid = [[-1.0, 5.0]]\n").unwrap_err();
        assert!(negative.to_string().contains("t_gamma"));
        let unknown = parse_config("mode = \"sweep\"\nseed = 1\ncolour = 2\n").unwrap_err();
        assert!(unknown.to_string().contains("colour"));
        let nested = parse_config("mode = \"sweep\"\nseed = 1\n[oct]\nmethd = \"powell\"\n").unwrap_err();
        assert!(nested.to_string().contains("methd"));
        let malformed = parse_config("mode = \"sweep\"\nseed = \n").unwrap_err();
        assert!(malformed.to_string().contains("line 2"), "{malformed}");
        assert!(parse_config("mode = \"sweep\"\nseed = 1\ngrid = [[1.0, 0.0]]\n").is_err());
    }
}
