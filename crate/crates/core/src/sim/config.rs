//! Scenario files.
//!
//! TOML or JSON, chosen by extension (`.json` is JSON, anything else TOML).
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackPlan;
use crate::privacy::DpConfig;
use crate::robust_agg::{ReputationConfig, SelectionConfig};
use crate::secure_agg::KemSuite;
use crate::trainer::{ModelSpec, TrainConfig};
use crate::vectors::QuantizationConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Per-client updates reach the server in the clear.
    #[default]
    Plaintext,
    /// The server sees only the masked sum; reputations stay frozen.
    Masked,
    /// The masked sum updates the model; a simulation-only oracle channel
    /// hands per-client updates to the reputation engine.
    Hybrid,
}

impl Mode {
    pub fn is_masked(self) -> bool {
        matches!(self, Mode::Masked | Mode::Hybrid)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plaintext" => Ok(Mode::Plaintext),
            "masked" => Ok(Mode::Masked),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Reputation,
    Fedavg,
    Median,
    Krum,
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reputation" => Ok(Aggregator::Reputation),
            "fedavg" => Ok(Aggregator::Fedavg),
            "median" => Ok(Aggregator::Median),
            "krum" => Ok(Aggregator::Krum),
            other => Err(format!("unknown aggregator {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationConfig {
    pub clients: usize,
    pub rounds: u64,
    pub cohort: usize,
    pub mode: Mode,
    pub aggregator: Aggregator,
    pub seed: u64,
    /// Worker threads for client work; 0 uses the rayon default.
    pub threads: usize,
    pub kem: KemSuite,
    /// Byzantine count assumed by Krum; defaults to `floor(beta * cohort)`.
    pub krum_f: Option<usize>,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            clients: 50,
            rounds: 100,
            cohort: 20,
            mode: Mode::Plaintext,
            aggregator: Aggregator::Reputation,
            seed: 0,
            threads: 0,
            kem: KemSuite::MlKem1024,
            krum_f: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let spec = ModelSpec::full(1);
        ModelConfig {
            hidden: spec.hidden,
            dropout: spec.dropout,
        }
    }
}

impl ModelConfig {
    pub fn spec(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            input_dim,
            hidden: self.hidden.clone(),
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    #[default]
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Synthetic sample count, before the test split.
    pub samples: usize,
    /// Synthetic feature count.
    pub features: usize,
    /// Distance between the synthetic class means.
    pub separation: f64,
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub categorical: Vec<String>,
    pub test_fraction: f64,
    pub dirichlet_alpha: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: DataSource::Synthetic,
            samples: 2000,
            features: 10,
            separation: 3.0,
            path: None,
            label_column: "label".into(),
            categorical: Vec::new(),
            test_fraction: 0.2,
            dirichlet_alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Adaptive clipping of client updates; off means `C = inf`.
    pub clip: bool,
    pub data: DataConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingConfig {
            learning_rate: t.learning_rate,
            local_epochs: t.local_epochs,
            batch_size: t.batch_size,
            clip: true,
            data: DataConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub top_fraction: f64,
    pub random_fraction: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        let s = SelectionConfig::default();
        SelectionSection {
            top_fraction: s.top_fraction,
            random_fraction: s.random_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShamirSection {
    /// Tolerated dropouts `D` per round.
    pub max_dropouts: usize,
}

impl Default for ShamirSection {
    fn default() -> Self {
        ShamirSection { max_dropouts: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropoutEvent {
    pub round: u64,
    pub clients: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DropoutConfig {
    pub schedule: Vec<DropoutEvent>,
    /// Per-member drop probability per round, on top of the schedule and
    /// capped at `D` drops per round.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub federation: FederationConfig,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub reputation: ReputationConfig,
    pub selection: SelectionSection,
    pub quantization: QuantizationConfig,
    pub privacy: DpConfig,
    pub shamir: ShamirSection,
    pub attack: AttackPlan,
    pub dropouts: DropoutConfig,
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
        .map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let mut cfg = cfg;
        if let Some(p) = cfg.training.data.path.as_mut() {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn selection(&self) -> SelectionConfig {
        let baseline = self.federation.aggregator != Aggregator::Reputation;
        SelectionConfig {
            cohort_size: self.federation.cohort,
            top_fraction: if baseline { 0.0 } else { self.selection.top_fraction },
            random_fraction: if baseline { 1.0 } else { self.selection.random_fraction },
            seed: self.federation.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fed = &self.federation;
        if fed.clients < 2 {
            return Err(invalid("federation.clients", "need at least 2 clients"));
        }
        if fed.clients > u32::MAX as usize {
            return Err(invalid("federation.clients", "too many clients"));
        }
        if fed.cohort == 0 || fed.cohort > fed.clients {
            return Err(invalid(
                "federation.cohort",
                format!("must be in 1..={}, got {}", fed.clients, fed.cohort),
            ));
        }
        if fed.mode.is_masked() && !matches!(fed.aggregator, Aggregator::Reputation | Aggregator::Fedavg) {
            return Err(invalid(
                "federation.aggregator",
                format!("{:?} needs per-client updates and cannot run in {:?} mode", fed.aggregator, fed.mode),
            ));
        }
        if let Some(f) = fed.krum_f {
            if fed.aggregator == Aggregator::Krum && fed.cohort < f + 3 {
                return Err(invalid("federation.krum_f", format!("cohort {} < krum_f + 3", fed.cohort)));
            }
        }
        if self.model.hidden.iter().any(|&h| h == 0) {
            return Err(invalid("model.hidden", "layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.model.dropout) {
            return Err(invalid("model.dropout", "must be in [0, 1)"));
        }
        self.training
            .train_config(0)
            .validate()
            .map_err(|e| invalid("training", e.to_string()))?;
        self.validate_data()?;
        self.reputation
            .validate()
            .map_err(|e| invalid("reputation", e.to_string()))?;
        self.selection()
            .validate(fed.clients)
            .map_err(|e| invalid("selection", e.to_string()))?;
        self.quantization
            .validate(fed.cohort)
            .map_err(|e| invalid("quantization", e.to_string()))?;
        self.privacy.validate().map_err(|e| invalid("privacy", e.to_string()))?;
        if self.privacy.enabled && !self.training.clip {
            return Err(invalid("privacy.enabled", "noise calibration needs training.clip = true"));
        }
        if self.shamir.max_dropouts >= fed.cohort {
            return Err(invalid(
                "shamir.max_dropouts",
                format!("must be below the cohort size {}", fed.cohort),
            ));
        }
        self.attack.validate().map_err(|e| invalid("attack", e.to_string()))?;
        self.validate_dropouts()
    }

    fn validate_data(&self) -> Result<(), ConfigError> {
        let data = &self.training.data;
        if !(data.test_fraction > 0.0 && data.test_fraction < 1.0) {
            return Err(invalid("training.data.test_fraction", "must be in (0, 1)"));
        }
        if !(data.dirichlet_alpha.is_finite() && data.dirichlet_alpha > 0.0) {
            return Err(invalid("training.data.dirichlet_alpha", "must be positive"));
        }
        match data.source {
            DataSource::Synthetic => {
                if data.features == 0 {
                    return Err(invalid("training.data.features", "must be positive"));
                }
                let train = data.samples as f64 * (1.0 - data.test_fraction);
                if train < self.federation.clients as f64 || data.samples < 2 {
                    return Err(invalid(
                        "training.data.samples",
                        format!("{} samples cannot cover {} clients", data.samples, self.federation.clients),
                    ));
                }
                if !data.separation.is_finite() {
                    return Err(invalid("training.data.separation", "must be finite"));
                }
            }
            DataSource::Csv => {
                if data.path.is_none() {
                    return Err(invalid("training.data.path", "required when source = \"csv\""));
                }
            }
        }
        Ok(())
    }

    fn validate_dropouts(&self) -> Result<(), ConfigError> {
        let d = &self.dropouts;
        if !(0.0..=1.0).contains(&d.probability) {
            return Err(invalid("dropouts.probability", "must be in [0, 1]"));
        }
        for (i, event) in d.schedule.iter().enumerate() {
            let field = format!("dropouts.schedule[{i}]");
            let distinct: BTreeSet<u32> = event.clients.iter().copied().collect();
            if distinct.len() != event.clients.len() {
                return Err(invalid(&field, "duplicate client ids"));
            }
            if event.clients.len() > self.shamir.max_dropouts {
                return Err(invalid(
                    &field,
                    format!("{} dropouts exceed shamir.max_dropouts = {}", event.clients.len(), self.shamir.max_dropouts),
                ));
            }
            if let Some(&c) = event.clients.iter().find(|&&c| c as usize >= self.federation.clients) {
                return Err(invalid(&field, format!("client {c} does not exist")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.federation.clients, 50);
        assert_eq!(cfg.federation.rounds, 100);
        assert_eq!(cfg.federation.cohort, 20);
        assert_eq!(cfg.model.hidden, vec![128, 64, 32]);
        assert_eq!(ScenarioConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn toml_sections() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            [federation]
            clients = 10
            cohort = 10
            mode = "hybrid"
            kem = "mock"
            [model]
            hidden = [32, 16]
            [training.data]
            samples = 500
            [attack]
            kind = "gradient_flip"
            fraction = 0.2
            [[dropouts.schedule]]
            round = 3
            clients = [1, 2]
            "#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.federation.mode, Mode::Hybrid);
        assert_eq!(cfg.federation.kem, KemSuite::MockKem);
        assert_eq!(cfg.dropouts.schedule[0].clients, vec![1, 2]);
    }

    #[test]
    fn json_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_toml("[federation]\nclient = 3\n").is_err());
        assert!(ScenarioConfig::from_toml("[nonsense]\n").is_err());
        assert!(ScenarioConfig::from_toml("[attack]\nkind = \"laser\"\n").is_err());
    }

    fn field_of(cfg: &ScenarioConfig) -> String {
        match cfg.validate() {
            Err(ConfigError::Invalid { field, .. }) => field,
            other => panic!("expected a field error, got {other:?}"),
        }
    }

    #[test]
    fn field_level_diagnostics() {
        let mut cfg = ScenarioConfig::default();
        cfg.federation.cohort = 60;
        assert_eq!(field_of(&cfg), "federation.cohort");

        let mut cfg = ScenarioConfig::default();
        cfg.federation.mode = Mode::Masked;
        cfg.federation.aggregator = Aggregator::Krum;
        assert_eq!(field_of(&cfg), "federation.aggregator");

        let mut cfg = ScenarioConfig::default();
        cfg.dropouts.schedule.push(DropoutEvent {
            round: 0,
            clients: vec![1, 2, 3],
        });
        assert_eq!(field_of(&cfg), "dropouts.schedule[0]");

        let mut cfg = ScenarioConfig::default();
        cfg.quantization.bound = 1000.0;
        assert_eq!(field_of(&cfg), "quantization");

        let mut cfg = ScenarioConfig::default();
        cfg.attack.fraction = 0.6;
        assert_eq!(field_of(&cfg), "attack");

        let mut cfg = ScenarioConfig::default();
        cfg.privacy.enabled = true;
        cfg.training.clip = false;
        assert_eq!(field_of(&cfg), "privacy.enabled");
    }

    #[test]
    fn baselines_select_uniformly() {
        let mut cfg = ScenarioConfig::default();
        assert_eq!(cfg.selection().top_count(), 14);
        cfg.federation.aggregator = Aggregator::Median;
        assert_eq!(cfg.selection().top_count(), 0);
    }
}
