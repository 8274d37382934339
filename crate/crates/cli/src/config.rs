//! Run configuration shared by every subcommand. TOML and JSON files use
//! the same schema.

use std::f64::consts::PI;
use std::path::Path;

use bidomain::bidomain::BidomainOperator;
use bidomain::config::{ConductivityConfig, FieldInit, GridConfig};
use bidomain::elliptic::SolverConfig;
use bidomain::ionic::IonicConfig;
use bidomain::probe::{SectorSpec, SLOPE_TOL};
use bidomain::simulate::{SimulationConfig, StimulusConfig};
use bidomain::spectral::PowerSign;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const BUNDLED: &[(&str, &str)] = &[
    ("small-torus", include_str!("../configs/small-torus.toml")),
    ("theorem23-desk", include_str!("../configs/theorem23-desk.toml")),
    ("fhn-pulse", include_str!("../configs/fhn-pulse.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub sigma_i: ConductivityConfig,
    pub sigma_e: ConductivityConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub check: CheckSection,
    #[serde(default)]
    pub sector: Option<SectorSpec>,
    #[serde(default)]
    pub probe: ProbeSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub fractional: FractionalSection,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub adjoint_trials: usize,
    pub symmetry_tol: f64,
    pub eigen_tol: f64,
    pub pseudo_pairs: usize,
    pub pseudo_trials: usize,
    pub pseudo_tol: f64,
    /// Half-opening of the excluded cone around the negative axis.
    pub epsilon: f64,
    pub resolvent_tol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            adjoint_trials: 50,
            symmetry_tol: 1e-9,
            eigen_tol: 1e-9,
            pseudo_pairs: 5,
            pseudo_trials: 20,
            pseudo_tol: 1e-7,
            epsilon: PI / 4.0,
            resolvent_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    /// Random smooth sources in addition to the constant one.
    pub random_sources: usize,
    pub slope_tol: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self { random_sources: 10, slope_tol: SLOPE_TOL }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    /// Angle of the dual problem, in `(-pi, pi)`.
    pub theta: f64,
    /// `[re, im]` pairs.
    pub lambdas: Vec<[f64; 2]>,
    pub sources: usize,
    pub tol: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self { theta: 0.0, lambdas: vec![[1.0, 0.0], [0.0, 50.0], [-700.0, 700.0]], sources: 5, tol: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FractionalSection {
    pub alpha: f64,
    pub a: f64,
    pub sign: PowerSign,
    pub field: FieldInit,
    pub tol: f64,
}

impl Default for FractionalSection {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            a: 1.0,
            sign: PowerSign::Positive,
            field: FieldInit::Random { amplitude: 1.0 },
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub ionic: IonicConfig,
    #[serde(default)]
    pub initial_u: FieldInit,
    #[serde(default = "default_w0")]
    pub initial_w: Vec<f64>,
    #[serde(default)]
    pub stimuli: Vec<StimulusConfig>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub trust_radius: Option<f64>,
    #[serde(default)]
    pub front_level: Option<f64>,
    #[serde(default)]
    pub z_alpha: Option<f64>,
    /// Integrability index paired with `z_alpha` when reporting whether
    /// `d / (2p) < alpha <= 1`.
    #[serde(default = "default_z_p")]
    pub z_p: f64,
    /// Write field dumps for every stored state.
    #[serde(default = "default_true")]
    pub dump_fields: bool,
}

fn default_w0() -> Vec<f64> {
    vec![0.0]
}

fn default_stride() -> usize {
    1
}

fn default_z_p() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Load from a path (format by extension) or a bundled config name.
    pub fn load(spec: Option<&str>) -> Result<Self, CliError> {
        let spec = spec.unwrap_or("small-torus");
        let path = Path::new(spec);
        if !path.exists() {
            if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == spec) {
                return Self::parse_toml(text);
            }
            return Err(CliError::Config(format!("config {spec} not found (bundled: {})", bundled_names())));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {spec}: {e}")))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{spec}: {e}"))),
            Some("toml") | None => Self::parse_toml(&text),
            Some(other) => Err(CliError::Config(format!("unknown config extension .{other}"))),
        }
    }

    fn parse_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn operator(&self) -> bidomain::Result<BidomainOperator> {
        bidomain::config::build_operator(&self.grid, &self.sigma_i, &self.sigma_e, self.solver)
    }

    pub fn sector_spec(&self) -> bidomain::Result<SectorSpec> {
        match &self.sector {
            Some(s) => {
                s.validate()?;
                Ok(s.clone())
            }
            None => SectorSpec::desk(PI / 4.0),
        }
    }

    pub fn simulation(&self) -> Result<(SimulationConfig, &SimulationSection), CliError> {
        let s = self.simulation.as_ref().ok_or_else(|| CliError::Config("config has no [simulation] section".into()))?;
        let cfg = SimulationConfig {
            grid: self.grid.clone(),
            sigma_i: self.sigma_i.clone(),
            sigma_e: self.sigma_e.clone(),
            ionic: s.ionic,
            initial_u: s.initial_u.clone(),
            initial_w: s.initial_w.clone(),
            stimuli: s.stimuli.clone(),
            dt: s.dt,
            t_end: s.t_end,
            stride: s.stride,
            trust_radius: s.trust_radius,
            front_level: s.front_level,
            z_alpha: s.z_alpha,
            solver: self.solver,
        };
        Ok((cfg, s))
    }
}

pub fn bundled_names() -> String {
    BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
}
