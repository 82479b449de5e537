//! Experiment configuration read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [scenario]
//! n_packets = 5000
//! attack_intensity = 0.25
//! l_total = 10
//! l_valid = 2
//! [scenario.bob]
//! delays = [0, 2, 5, 9]
//! decay = 0.25
//!
//! [preprocess]
//! m_red = 48
//! window = 5
//!
//! [gridsearch]
//! families = ["SGD", "LDA"]
//! subsample = 200
//! [gridsearch.grids.LDA]
//! solver = ["lsqr"]
//!
//! [sweep]
//! variables = ["TrainSize"]
//! train_size = [2, 4, 6, 8, 10]
//! classifiers = ["LDA solver=lsqr shrinkage=auto"]
//! ```
//!
//! Every key is optional; omitted keys take the defaults of the desk-scale
//! setup.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use super::sweep::SweepVariable;
use crate::channel::{ChannelError, LinkModel, ScenarioConfig, TrainGuard};
use crate::classifiers::{reference_specs, ClassifierError, ClassifierSpec, Family};
use crate::gridsearch::{GridError, HyperGrid};
use crate::preprocess::{PreprocessConfig, Reduction};
use crate::rng::derive_seed;
use crate::trace::PartitionPolicy;

/// Packets per trace with `--full-scale`.
pub const FULL_SCALE_PACKETS: usize = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub delays: Vec<usize>,
    /// Exponential power decay per sample of delay; ignored when `powers`
    /// is given.
    pub decay: f64,
    pub powers: Option<Vec<f64>>,
    pub rho: f64,
    pub seed: u64,
}

impl LinkSection {
    fn bob() -> Self {
        Self {
            delays: vec![0, 2, 5, 9],
            decay: 0.25,
            powers: None,
            rho: 1.0,
            seed: 0xB0B,
        }
    }

    fn eve() -> Self {
        Self {
            delays: vec![0, 3, 7, 12, 15],
            decay: 0.15,
            powers: None,
            rho: 1.0,
            seed: 0xE7E,
        }
    }

    fn model(&self, seed: u64) -> Result<LinkModel, ChannelError> {
        match &self.powers {
            Some(p) => LinkModel::new(self.delays.clone(), p.clone(), self.rho, seed),
            None => LinkModel::exponential(self.delays.clone(), self.decay, self.rho, seed),
        }
    }
}

impl Default for LinkSection {
    fn default() -> Self {
        Self::bob()
    }
}

fn default_bob() -> LinkSection {
    LinkSection::bob()
}

fn default_eve() -> LinkSection {
    LinkSection::eve()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    pub n_packets: usize,
    pub attack_intensity: f64,
    pub noise_std: f64,
    pub m_subcarriers: usize,
    pub fft_size: usize,
    pub packet_period_ms: f64,
    pub l_total: usize,
    pub l_valid: usize,
    /// `ordered` or `shuffle`.
    pub partition: String,
    #[serde(default = "default_bob")]
    pub bob: LinkSection,
    #[serde(default = "default_eve")]
    pub eve: LinkSection,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_packets: 5000,
            attack_intensity: 0.25,
            noise_std: 0.05,
            m_subcarriers: 48,
            fft_size: 64,
            packet_period_ms: 10.0,
            l_total: 10,
            l_valid: 2,
            partition: "ordered".into(),
            bob: LinkSection::bob(),
            eve: LinkSection::eve(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub m_red: usize,
    pub reduction: String,
    pub window: usize,
    pub n_train: usize,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let d = PreprocessConfig::default();
        Self {
            m_red: d.m_red,
            reduction: d.reduction.to_string(),
            window: d.window,
            n_train: d.n_train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub families: Vec<String>,
    /// Keep about this many configurations per family (deterministic stride).
    pub subsample: Option<usize>,
    /// Per-family replacement option lists, keyed by family then parameter.
    pub grids: BTreeMap<String, BTreeMap<String, Vec<toml::Value>>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            families: Family::ALL.iter().map(|f| f.name().to_string()).collect(),
            subsample: None,
            grids: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub variables: Vec<String>,
    pub repetitions: usize,
    /// Classifier spec strings; the reference optima when absent.
    pub classifiers: Option<Vec<String>>,
    pub attack_intensity: Vec<f64>,
    pub feature_dim: Vec<usize>,
    pub train_size: Vec<usize>,
    pub window_size: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        let ints = |v: SweepVariable| v.default_values().iter().map(|&x| x as usize).collect();
        Self {
            variables: SweepVariable::ALL
                .iter()
                .map(|v| v.name().to_string())
                .collect(),
            repetitions: 3,
            classifiers: None,
            attack_intensity: SweepVariable::AttackIntensity.default_values(),
            feature_dim: ints(SweepVariable::FeatureDim),
            train_size: ints(SweepVariable::TrainSize),
            window_size: ints(SweepVariable::WindowSize),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub preprocess: PreprocessSection,
    pub gridsearch: GridSection,
    pub sweep: SweepSection,
}

fn value_text(v: &toml::Value) -> Result<String, ConfigError> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(ConfigError::Invalid(format!(
            "unsupported grid value {other}"
        ))),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked without data.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if s.l_total == 0 || s.l_valid >= s.l_total {
            return Err(ConfigError::Invalid(format!(
                "l_valid={} must be below l_total={}",
                s.l_valid, s.l_total
            )));
        }
        self.partition_policy()?;
        self.preprocess_config()?;
        self.scenario_for(0)?.validate()?;
        for family in self.families()? {
            self.grid_for(family)?;
        }
        self.sweep_variables()?;
        if self.sweep.repetitions == 0 {
            return Err(ConfigError::Invalid(
                "sweep.repetitions must be at least 1".into(),
            ));
        }
        self.sweep_classifiers()?;
        Ok(())
    }

    pub fn partition_policy(&self) -> Result<PartitionPolicy, ConfigError> {
        match self.scenario.partition.as_str() {
            "ordered" => Ok(PartitionPolicy::Ordered),
            "shuffle" => Ok(PartitionPolicy::SeededShuffle(self.seed)),
            other => Err(ConfigError::Invalid(format!(
                "partition must be ordered or shuffle, got {other:?}"
            ))),
        }
    }

    pub fn preprocess_config(&self) -> Result<PreprocessConfig, ConfigError> {
        let p = &self.preprocess;
        let reduction: Reduction = p
            .reduction
            .parse()
            .map_err(|e: crate::preprocess::PreprocessError| ConfigError::Invalid(e.to_string()))?;
        if p.m_red == 0 || p.n_train < 2 {
            return Err(ConfigError::Invalid(
                "m_red must be positive and n_train at least 2".into(),
            ));
        }
        Ok(PreprocessConfig {
            m_red: p.m_red,
            reduction,
            window: p.window,
            n_train: p.n_train,
        })
    }

    /// Packet ranges holding the training rows of every configured
    /// (window, training size) combination.
    pub fn train_guards(&self) -> Vec<TrainGuard> {
        let p = &self.preprocess;
        let mut pairs = vec![(p.window, p.n_train)];
        let variables = self.sweep_variables().unwrap_or_default();
        if variables.contains(&SweepVariable::TrainSize) {
            pairs.extend(self.sweep.train_size.iter().map(|&n| (p.window, n)));
        }
        if variables.contains(&SweepVariable::WindowSize) {
            pairs.extend(self.sweep.window_size.iter().map(|&w| (w, p.n_train)));
        }
        let mut guards: Vec<TrainGuard> = Vec::new();
        for (w, n) in pairs {
            let g = TrainGuard { offset: w, len: n };
            if n >= 2 && w + n <= self.scenario.n_packets && !guards.contains(&g) {
                guards.push(g);
            }
        }
        guards
    }

    /// Scenario of dataset `index`: each dataset gets its own link geometry
    /// and schedule, derived from the configured seeds.
    pub fn scenario_for(&self, index: usize) -> Result<ScenarioConfig, ConfigError> {
        let s = &self.scenario;
        let i = index as u64;
        Ok(ScenarioConfig {
            name: format!("{}-{index:02}", s.name),
            m_subcarriers: s.m_subcarriers,
            fft_size: s.fft_size,
            n_packets: s.n_packets,
            attack_intensity: s.attack_intensity,
            noise_std: s.noise_std,
            bob_link: s.bob.model(derive_seed(s.bob.seed, i))?,
            eve_link: s.eve.model(derive_seed(s.eve.seed, i))?,
            packet_period_ms: s.packet_period_ms,
            seed: derive_seed(self.seed, i),
            train_guards: self.train_guards(),
        })
    }

    pub fn families(&self) -> Result<Vec<Family>, ConfigError> {
        self.gridsearch
            .families
            .iter()
            .map(|f| f.parse().map_err(ConfigError::from))
            .collect()
    }

    /// The reference grid of `family` with configured axes replaced.
    pub fn grid_for(&self, family: Family) -> Result<HyperGrid, ConfigError> {
        let mut grid = HyperGrid::default_for(family);
        let overrides = self
            .gridsearch
            .grids
            .iter()
            .filter(|(k, _)| k.parse::<Family>().ok() == Some(family));
        for (_, axes) in overrides {
            for (name, values) in axes {
                let options = values
                    .iter()
                    .map(value_text)
                    .collect::<Result<Vec<_>, _>>()?;
                match grid.axes.iter_mut().find(|(n, _)| n == name) {
                    Some(axis) => axis.1 = options,
                    None => grid.axes.push((name.clone(), options)),
                }
            }
        }
        for key in self.gridsearch.grids.keys() {
            key.parse::<Family>()?;
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn sweep_variables(&self) -> Result<Vec<SweepVariable>, ConfigError> {
        self.sweep
            .variables
            .iter()
            .map(|v| v.parse().map_err(ConfigError::Invalid))
            .collect()
    }

    pub fn sweep_values(&self, variable: SweepVariable) -> Vec<f64> {
        let ints = |v: &[usize]| v.iter().map(|&x| x as f64).collect();
        match variable {
            SweepVariable::AttackIntensity => self.sweep.attack_intensity.clone(),
            SweepVariable::FeatureDim => ints(&self.sweep.feature_dim),
            SweepVariable::TrainSize => ints(&self.sweep.train_size),
            SweepVariable::WindowSize => ints(&self.sweep.window_size),
        }
    }

    pub fn sweep_classifiers(&self) -> Result<Vec<ClassifierSpec>, ConfigError> {
        match &self.sweep.classifiers {
            None => Ok(reference_specs()),
            Some(list) => {
                let specs = list
                    .iter()
                    .map(|s| s.parse::<ClassifierSpec>())
                    .collect::<Result<Vec<_>, _>>()?;
                for s in &specs {
                    s.validate()?;
                }
                if specs.is_empty() {
                    return Err(ConfigError::Invalid("sweep.classifiers is empty".into()));
                }
                Ok(specs)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.scenario.l_total, 10);
        assert_eq!(
            cfg.preprocess_config().unwrap(),
            PreprocessConfig::default()
        );
        assert_eq!(cfg.sweep_classifiers().unwrap().len(), 7);
        assert_eq!(cfg.families().unwrap().len(), 8);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            seed = 9
            [scenario]
            n_packets = 300
            l_total = 4
            l_valid = 1
            [scenario.eve]
            delays = [0, 1]
            powers = [0.5, 0.5]
            [preprocess]
            reduction = "sample"
            window = 2
            [gridsearch]
            families = ["LDA"]
            [gridsearch.grids.LDA]
            solver = ["lsqr"]
            tol = [1e-5, 0.1]
            [sweep]
            variables = ["TrainSize"]
            train_size = [2, 6]
            classifiers = ["GNB"]
            "#,
        )
        .unwrap();
        let s = cfg.scenario_for(1).unwrap();
        assert_eq!(s.n_packets, 300);
        assert_eq!(s.eve_link.tap_powers, vec![0.5, 0.5]);
        assert_ne!(s.seed, cfg.scenario_for(2).unwrap().seed);
        assert_ne!(s.bob_link.seed, cfg.scenario_for(2).unwrap().bob_link.seed);
        let grid = cfg.grid_for(Family::Lda).unwrap();
        assert_eq!(
            grid.axes[0],
            ("solver".to_string(), vec!["lsqr".to_string()])
        );
        assert_eq!(
            grid.axes[1].1,
            vec!["0.00001".to_string(), "0.1".to_string()]
        );
        assert_eq!(grid.size(), 4);
        assert_eq!(
            cfg.train_guards(),
            vec![
                TrainGuard { offset: 2, len: 10 },
                TrainGuard { offset: 2, len: 2 },
                TrainGuard { offset: 2, len: 6 }
            ]
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "[scenario]\nl_valid = 10",
            "[scenario]\npartition = \"random\"",
            "[preprocess]\nreduction = \"median\"",
            "[gridsearch]\nfamilies = [\"Boosting\"]",
            "[gridsearch.grids.SVC]\ngamma = [1]",
            "[sweep]\nvariables = [\"Temperature\"]",
            "[sweep]\nclassifiers = [\"SGD loss=cubic\"]",
            "[sweep]\nrepetitions = 0",
            "unknown_key = 1",
            "[scenario]\nattack_intensity = 1.5",
            "seed = \"abc\"",
        ] {
            assert!(ExperimentConfig::from_toml(text).is_err(), "{text}");
        }
    }
}
