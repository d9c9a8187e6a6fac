use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControllerConfig;
use crate::design::{choose_turns_ratio, linear_grid, search_design, Centering, Series};
use crate::sim::{Load, LoadProfile, LoadStep};
use crate::steady_state::PopMethod;
use crate::tank::{load_resistance, DesignRequirements, TankParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Grid used when a config names neither `(ln, qe)` nor a tank.
pub const SEARCH_LN: (f64, f64, usize) = (1.5, 8.0, 27);
pub const SEARCH_QE: (f64, f64, usize) = (0.1, 1.0, 19);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub schema_version: u32,
    pub requirements: DesignRequirements,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default)]
    pub series: Option<Series>,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Explicit design choices. A full `tank` wins over `(n, ln, qe)`; without
/// `ln` and `qe` the grid search picks them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub n: Option<f64>,
    pub centering: Option<Centering>,
    pub ln: Option<f64>,
    pub qe: Option<f64>,
    pub tank: Option<TankParams>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Defaults to the nominal input.
    pub vin: Option<f64>,
    /// Fixed switching frequency; when absent it is solved from the
    /// first-harmonic gain for the nominal output.
    pub fsw: Option<f64>,
    /// Defaults to a resistor drawing full load at nominal output.
    pub load: Option<LoadProfile>,
    /// Transient length (s); default 5 ms.
    pub t_end: Option<f64>,
    /// Soft-start ramp for transients (s); default 2 ms, 0 disables.
    pub soft_start: Option<f64>,
    pub dt_max: Option<f64>,
    pub sample_interval: Option<f64>,
    pub method: Option<PopMethod>,
}

/// Load-step scenario: piecewise-constant load breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub steps: Vec<LoadStep>,
    pub t_end: f64,
    #[serde(default)]
    pub vin: Option<f64>,
}

impl Scenario {
    pub fn load_profile(&self) -> Result<LoadProfile, ConfigError> {
        LoadProfile::new(self.steps.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    /// Parse failure with the JSON path of the offending field.
    #[error("{origin}: {field}: {message}")]
    Parse {
        origin: String,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Parses a config, reporting the field path and position of any error.
pub fn parse_config(text: &str, origin: &str) -> Result<ProjectConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ProjectConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        ConfigError::Parse {
            origin: origin.to_string(),
            field,
            message: e.into_inner().to_string(),
        }
    })?;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ProjectConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_scenario(text: &str, origin: &str) -> Result<Vec<LoadStep>, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
        origin: origin.to_string(),
        field: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Design inputs after defaults and the grid search have been applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResolvedDesign {
    Normalized { n: f64, ln: f64, qe: f64 },
    Tank(TankParams),
}

impl ProjectConfig {
    pub fn reference() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            requirements: DesignRequirements::reference_48v_to_12v(),
            overrides: Overrides {
                n: Some(1.83),
                ln: Some(2.05),
                qe: Some(0.36),
                ..Overrides::default()
            },
            series: Some(Series::E12),
            sim: SimSettings::default(),
            controller: None,
            scenario: None,
            output_dir: None,
        }
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.requirements
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("requirements: {e}")))?;
        if let Some(t) = &self.overrides.tank {
            t.validate()
                .map_err(|e| ConfigError::Invalid(format!("overrides.tank: {e}")))?;
        }
        if self.overrides.ln.is_some() != self.overrides.qe.is_some() {
            return Err(ConfigError::Invalid(
                "overrides: give both ln and qe, or neither".into(),
            ));
        }
        if let Some(c) = &self.controller {
            c.validate()
                .map_err(|e| ConfigError::Invalid(format!("controller: {e}")))?;
        }
        if let Some(s) = &self.scenario {
            s.load_profile()?;
        }
        Ok(())
    }

    pub fn turns_ratio(&self) -> f64 {
        match (self.overrides.tank, self.overrides.n) {
            (Some(t), _) => t.n,
            (None, Some(n)) => n,
            (None, None) => choose_turns_ratio(
                &self.requirements,
                self.overrides.centering.unwrap_or(Centering::AtResonance),
            ),
        }
    }

    pub fn resolve_design(&self) -> Result<ResolvedDesign, ConfigError> {
        if let Some(t) = self.overrides.tank {
            return Ok(ResolvedDesign::Tank(t));
        }
        let n = self.turns_ratio();
        if let (Some(ln), Some(qe)) = (self.overrides.ln, self.overrides.qe) {
            return Ok(ResolvedDesign::Normalized { n, ln, qe });
        }
        let result = search_design(
            &self.requirements,
            n,
            &linear_grid(SEARCH_LN.0, SEARCH_LN.1, SEARCH_LN.2),
            &linear_grid(SEARCH_QE.0, SEARCH_QE.1, SEARCH_QE.2),
        );
        let best = result
            .best
            .ok_or_else(|| ConfigError::Invalid("grid search found no feasible (ln, qe)".into()))?;
        Ok(ResolvedDesign::Normalized {
            n,
            ln: best.ln,
            qe: best.qe,
        })
    }

    pub fn vin(&self) -> f64 {
        self.sim.vin.unwrap_or(self.requirements.vin_nom)
    }

    pub fn load_profile(&self) -> LoadProfile {
        self.sim.load.clone().unwrap_or_else(|| {
            let r = &self.requirements;
            LoadProfile::constant(Load::Resistance(load_resistance(r.vout_nom, r.iout_max)))
        })
    }
}
