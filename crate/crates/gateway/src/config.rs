use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rescuesim_core::detection::{id_to_group, IllnessGroup};
use rescuesim_core::graph::{load_graph, validate, GraphError, TreatmentGraph, Violation};
use rescuesim_core::vitals::{load_scenario, synth_scenario, FeedError, Profile, Scenario};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: GraphError },
    #[error("{path}: {} validation error(s), first: {}", .violations.len(), .violations[0])]
    Invalid { path: PathBuf, violations: Vec<Violation> },
    #[error("{path}: {source}")]
    Scenario { path: PathBuf, source: FeedError },
    #[error("bad graph argument '{0}': {1}")]
    GraphArg(String, String),
    #[error("bad synthetic scenario '{0}': {1}")]
    Synth(String, String),
    #[error("speed must be positive and finite, got {0}")]
    Speed(f64),
    #[error("at least one graph is required")]
    NoGraph,
}

/// A graph file, optionally tagged with the illness group it treats
/// (`path=sdr`).
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSource {
    pub path: PathBuf,
    pub group: Option<IllnessGroup>,
}

impl FromStr for GraphSource {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once('=') {
            Some((path, code)) => {
                let group = id_to_group(code).map_err(|e| ConfigError::GraphArg(s.into(), e.to_string()))?;
                Ok(GraphSource {
                    path: path.into(),
                    group: Some(group),
                })
            }
            None => Ok(GraphSource {
                path: s.into(),
                group: None,
            }),
        }
    }
}

/// Scenario file, or `synth:<profile>[:<seed>[:<seconds>]]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Synth { profile: Profile, seed: u64, secs: u32 },
}

impl FromStr for ScenarioSource {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(spec) = s.strip_prefix("synth:") else {
            return Ok(ScenarioSource::File(s.into()));
        };
        let bad = |msg: String| ConfigError::Synth(s.into(), msg);
        let mut parts = spec.split(':');
        let profile = parts.next().unwrap_or_default().parse::<Profile>().map_err(bad)?;
        let seed = parts
            .next()
            .map_or(Ok(1), str::parse)
            .map_err(|e| bad(format!("seed: {e}")))?;
        let secs = parts
            .next()
            .map_or(Ok(120), str::parse)
            .map_err(|e| bad(format!("seconds: {e}")))?;
        if parts.next().is_some() {
            return Err(bad("expected synth:<profile>[:<seed>[:<seconds>]]".into()));
        }
        Ok(ScenarioSource::Synth { profile, seed, secs })
    }
}

impl ScenarioSource {
    pub fn load(&self) -> Result<Scenario, ConfigError> {
        match self {
            ScenarioSource::File(path) => {
                let text = read(path)?;
                load_scenario(&text).map_err(|source| ConfigError::Scenario {
                    path: path.clone(),
                    source,
                })
            }
            ScenarioSource::Synth { profile, seed, secs } => Ok(synth_scenario(*seed, *secs, *profile)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// The first graph is active at start; all are listed as paths.
    pub graphs: Vec<GraphSource>,
    pub scenario: ScenarioSource,
    /// Logical seconds per wall second.
    pub speed: f64,
    pub port: u16,
    pub headless: bool,
    pub script: Option<PathBuf>,
    pub log: Option<PathBuf>,
    /// Battery percent lost per logical hour.
    pub battery_drain: f64,
}

impl RunConfig {
    pub fn new(graph: impl Into<PathBuf>, scenario: ScenarioSource) -> Self {
        RunConfig {
            graphs: vec![GraphSource {
                path: graph.into(),
                group: None,
            }],
            scenario,
            speed: 1.0,
            port: DEFAULT_PORT,
            headless: false,
            script: None,
            log: None,
            battery_drain: 12.0,
        }
    }

    /// Reads and validates every referenced file.
    pub fn load(&self) -> Result<Loaded, ConfigError> {
        if !(self.speed.is_finite() && self.speed > 0.0) {
            return Err(ConfigError::Speed(self.speed));
        }
        if self.graphs.is_empty() {
            return Err(ConfigError::NoGraph);
        }
        let graphs = self
            .graphs
            .iter()
            .map(|g| load_valid_graph(&g.path).map(|graph| (Arc::new(graph), g.group)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Loaded {
            graphs,
            scenario: self.scenario.load()?,
            config: self.clone(),
        })
    }
}

/// A configuration whose files have been read and checked.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub graphs: Vec<(Arc<TreatmentGraph>, Option<IllnessGroup>)>,
    pub scenario: Scenario,
    pub config: RunConfig,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_valid_graph(path: &Path) -> Result<TreatmentGraph, ConfigError> {
    let graph = load_graph(&read(path)?).map_err(|source| ConfigError::Graph {
        path: path.to_path_buf(),
        source,
    })?;
    let violations = validate(&graph);
    if !violations.is_empty() {
        return Err(ConfigError::Invalid {
            path: path.to_path_buf(),
            violations,
        });
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sources() {
        let g: GraphSource = "a/b.json=sdr".parse().unwrap();
        assert_eq!(g.group, Some(IllnessGroup::Reanimation));
        assert!("x.json=zzz".parse::<GraphSource>().is_err());
        assert_eq!(
            "synth:arrest:7".parse::<ScenarioSource>().unwrap(),
            ScenarioSource::Synth {
                profile: Profile::Arrest,
                seed: 7,
                secs: 120
            }
        );
        assert!("synth:calm".parse::<ScenarioSource>().is_err());
        assert_eq!(
            "calm.scenario".parse::<ScenarioSource>().unwrap(),
            ScenarioSource::File("calm.scenario".into())
        );
    }

    #[test]
    fn missing_graph_is_config_error() {
        let cfg = RunConfig::new("/nonexistent/graph.json", "synth:stable".parse().unwrap());
        assert!(matches!(cfg.load(), Err(ConfigError::Read { .. })));
        let cfg = RunConfig { speed: 0.0, ..cfg };
        assert!(matches!(cfg.load(), Err(ConfigError::Speed(_))));
    }
}
