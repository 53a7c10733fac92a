//! Run configuration file: which scenario, which optimizer, which targets,
//! and where results go.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use crate::error::{CadreError, Result};
use crate::metrics::select_targets;
use crate::persist::{config_hash, ArchiveMeta};
use crate::qd::emitter::EmitterConfig;
use crate::qd::{run_cadre, CadreConfig, MeasureSpec, OarConfig, RunOutput, DEFAULT_BATCH_SIZE};
use crate::scenario::{PerturbationBounds, Scenario};
use crate::sim::{EgoPolicyConfig, SteeringMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cadre,
    Random,
    Cmaes,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Cadre => "cadre",
            Method::Random => "random",
            Method::Cmaes => "cmaes",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CadreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cadre" => Ok(Method::Cadre),
            "random" => Ok(Method::Random),
            "cmaes" | "cma-es" => Ok(Method::Cmaes),
            _ => Err(CadreError::InvalidConfig(format!(
                "unknown method {s:?}; expected cadre, random or cmaes"
            ))),
        }
    }
}

/// Which background vehicles to perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSelection {
    Index(usize),
    /// The `k` vehicles nearest the ego on average; serialised as `"auto-top-k"`.
    AutoTop(usize),
}

impl Default for TargetSelection {
    fn default() -> Self {
        TargetSelection::AutoTop(5)
    }
}

impl fmt::Display for TargetSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSelection::Index(i) => write!(f, "{i}"),
            TargetSelection::AutoTop(k) => write!(f, "auto-top-{k}"),
        }
    }
}

impl FromStr for TargetSelection {
    type Err = CadreError;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = || {
            CadreError::InvalidConfig(format!(
                "invalid target {s:?}; expected an index or auto-top-K"
            ))
        };
        match s.strip_prefix("auto-top-") {
            Some(k) => k
                .parse()
                .map(TargetSelection::AutoTop)
                .map_err(|_| invalid()),
            None => s.parse().map(TargetSelection::Index).map_err(|_| invalid()),
        }
    }
}

impl Serialize for TargetSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TargetSelection::Index(i) => s.serialize_u64(*i as u64),
            TargetSelection::AutoTop(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for TargetSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Index(usize),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Index(i) => Ok(TargetSelection::Index(i)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Everything `generate` needs. Relative paths resolve against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub method: Method,
    pub target: TargetSelection,
    pub budget: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub measures: MeasureSpec,
    pub oar: OarConfig,
    pub bounds: PerturbationBounds,
    pub output_dir: PathBuf,
    pub ego: EgoPolicyConfig,
    pub emitter: EmitterConfig,
    pub steering_measure: SteeringMeasure,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: PathBuf::new(),
            method: Method::Cadre,
            target: TargetSelection::default(),
            budget: 20_000,
            batch_size: DEFAULT_BATCH_SIZE,
            seed: 0,
            measures: MeasureSpec::default(),
            oar: OarConfig::default(),
            bounds: PerturbationBounds::default(),
            output_dir: PathBuf::from("out"),
            ego: EgoPolicyConfig::default(),
            emitter: EmitterConfig::default(),
            steering_measure: SteeringMeasure::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CadreError::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text).map_err(|e| CadreError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.scenario.is_relative() && !config.scenario.as_os_str().is_empty() {
            config.scenario = base.join(&config.scenario);
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.as_os_str().is_empty() {
            return Err(CadreError::InvalidConfig("scenario path is empty".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(CadreError::InvalidConfig(
                "output directory is empty".into(),
            ));
        }
        if matches!(self.target, TargetSelection::AutoTop(0)) {
            return Err(CadreError::InvalidConfig(
                "auto target selection needs k >= 1".into(),
            ));
        }
        self.ego.validate()?;
        match self.method {
            Method::Cadre => self.cadre_config().validate(),
            Method::Random | Method::Cmaes => self.baseline_config().validate(),
        }
    }

    pub fn cadre_config(&self) -> CadreConfig {
        CadreConfig {
            budget: self.budget,
            batch_size: self.batch_size,
            measures: self.measures,
            oar: self.oar,
            bounds: self.bounds,
            seed: self.seed,
            emitter: self.emitter,
            ego: self.ego,
            steering_measure: self.steering_measure,
        }
    }

    pub fn baseline_config(&self) -> BaselineConfig {
        let method = match self.method {
            Method::Cmaes => BaselineMethod::CmaEs,
            _ => BaselineMethod::Random,
        };
        BaselineConfig {
            method,
            budget: self.budget,
            batch_size: self.batch_size,
            seed: self.seed,
            bounds: self.bounds,
            measures: self.measures,
            ego: self.ego,
            steering_measure: self.steering_measure,
        }
    }

    /// Resolve the target selection against a scenario.
    pub fn targets(&self, scenario: &Scenario) -> Result<Vec<usize>> {
        match self.target {
            TargetSelection::Index(i) => {
                scenario.check_target(i)?;
                Ok(vec![i])
            }
            TargetSelection::AutoTop(k) => Ok(select_targets(scenario, k)),
        }
    }

    /// Run the configured method against one target.
    pub fn run(&self, scenario: &Scenario, target: usize) -> Result<RunOutput> {
        match self.method {
            Method::Cadre => run_cadre(scenario, target, &self.cadre_config()),
            Method::Random | Method::Cmaes => {
                run_baseline(scenario, target, &self.baseline_config())
            }
        }
    }

    /// Provenance header for an archive produced by [`RunConfig::run`].
    /// The hash covers every setting that influences the result, not the paths.
    pub fn archive_meta(&self, scenario: &Scenario, target: usize) -> ArchiveMeta {
        let hashed = RunConfig {
            scenario: PathBuf::new(),
            output_dir: PathBuf::new(),
            target: TargetSelection::Index(target),
            ..self.clone()
        };
        ArchiveMeta {
            method: self.method.name().into(),
            scenario_id: scenario.id.clone(),
            target,
            bounds: self.bounds,
            ego: self.ego,
            steering_measure: self.steering_measure,
            config_hash: config_hash(&(&hashed, &scenario.id)),
        }
    }
}
