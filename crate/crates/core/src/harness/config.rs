//! Line-oriented experiment configuration: `section.key = value` pairs with a
//! `schema = 1` header. Every key has a default at paper scale; the effective
//! config serializes canonically and is hashed for provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{CircuitPreset, StimulusTarget, EDGES};
use crate::decoder::train::TrainConfig;
use crate::heuristics::Policy;
use crate::robot::{Position, WorldMap};
use crate::synth::ClassifierProfile;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    BadLine { line: usize, text: String },
    #[error("config must declare `schema = {SCHEMA_VERSION}`")]
    MissingSchema,
    #[error("unsupported schema version {0}")]
    BadSchema(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("invalid world map: {0}")]
    BadWorld(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Experiment approaches of the condition grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    GroundTruth,
    Heuristics,
    Neuro,
}

impl Approach {
    pub fn token(self) -> &'static str {
        match self {
            Approach::GroundTruth => "ground_truth",
            Approach::Heuristics => "heuristics",
            Approach::Neuro => "neuro",
        }
    }

    fn from_token(s: &str) -> Option<Approach> {
        match s {
            "ground_truth" => Some(Approach::GroundTruth),
            "heuristics" => Some(Approach::Heuristics),
            "neuro" => Some(Approach::Neuro),
            _ => None,
        }
    }
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub profiles: Vec<ClassifierProfile>,
    pub presets: Vec<CircuitPreset>,
    pub approaches: Vec<Approach>,
    pub policies: Vec<Policy>,
    pub train: TrainConfig,
    pub folds: usize,
    /// Train on every n-th segment of each session (1 = all 66).
    pub train_stride: usize,
    pub world: WorldMap,
    pub carry_over: bool,
    pub initial_position: Position,
    /// Write per-episode `t,decision,command,location,carried` trace logs.
    pub write_traces: bool,
    pub workers: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            profiles: vec![ClassifierProfile::imu_ambient(), ClassifierProfile::video()],
            presets: vec![CircuitPreset::rat(), CircuitPreset::marmoset()],
            approaches: vec![Approach::GroundTruth, Approach::Heuristics, Approach::Neuro],
            policies: vec![Policy::Window, Policy::Exponential],
            train: TrainConfig::default(),
            folds: 8,
            train_stride: 1,
            world: WorldMap::default(),
            carry_over: true,
            initial_position: Position::Dock,
            write_traces: false,
            workers: 0,
        }
    }
}

const TRAVEL_KEYS: [(&str, Position, Position); 6] = [
    ("dock_shelf1", Position::Dock, Position::Shelf1),
    ("dock_shelf2", Position::Dock, Position::Shelf2),
    ("dock_table", Position::Dock, Position::Table),
    ("shelf1_shelf2", Position::Shelf1, Position::Shelf2),
    ("shelf1_table", Position::Shelf1, Position::Table),
    ("shelf2_table", Position::Shelf2, Position::Table),
];

fn edge_key(i: usize) -> String {
    let (src, dst, _) = EDGES[i];
    format!("w_{}_{}", src.token().to_lowercase(), dst.token().to_lowercase())
}

impl Config {
    /// Parses a config file over the defaults.
    pub fn from_file(path: &Path) -> Result<Config, ConfigError> {
        Config::from_str_overrides(&std::fs::read_to_string(path)?)
    }

    pub fn from_str_overrides(text: &str) -> Result<Config, ConfigError> {
        let mut pairs = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::BadLine {
                line: i + 1,
                text: raw.to_string(),
            })?;
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        match pairs.remove("schema") {
            Some(v) if v == SCHEMA_VERSION.to_string() => {}
            Some(v) => return Err(ConfigError::BadSchema(v)),
            None => return Err(ConfigError::MissingSchema),
        }
        Config::from_pairs(pairs)
    }

    fn from_pairs(mut pairs: BTreeMap<String, String>) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();

        fn take_parse<T: std::str::FromStr>(
            pairs: &mut BTreeMap<String, String>,
            key: &str,
            into: &mut T,
        ) -> Result<(), ConfigError> {
            if let Some(v) = pairs.remove(key) {
                *into = v.parse().map_err(|_| ConfigError::BadValue {
                    key: key.to_string(),
                    reason: format!("cannot parse `{v}`"),
                })?;
            }
            Ok(())
        }

        // Profile list first, then per-profile keys.
        if let Some(v) = pairs.remove("synth.profiles") {
            let mut profiles = Vec::new();
            for name in v.split_whitespace() {
                profiles.push(match name {
                    "imu_ambient" => ClassifierProfile::imu_ambient(),
                    "video" => ClassifierProfile::video(),
                    "clean" => ClassifierProfile::clean(),
                    custom => ClassifierProfile {
                        name: custom.to_string(),
                        target_accuracy: 0.9,
                        confusion_bias: 0.5,
                        temporal_smoothing: 0.5,
                    },
                });
            }
            cfg.profiles = profiles;
        }
        for i in 0..cfg.profiles.len() {
            let name = cfg.profiles[i].name.clone();
            take_parse(
                &mut pairs,
                &format!("profile.{name}.target_accuracy"),
                &mut cfg.profiles[i].target_accuracy,
            )?;
            take_parse(
                &mut pairs,
                &format!("profile.{name}.confusion_bias"),
                &mut cfg.profiles[i].confusion_bias,
            )?;
            take_parse(
                &mut pairs,
                &format!("profile.{name}.temporal_smoothing"),
                &mut cfg.profiles[i].temporal_smoothing,
            )?;
        }

        if let Some(v) = pairs.remove("circuit.presets") {
            let mut presets = Vec::new();
            for name in v.split_whitespace() {
                presets.push(match name {
                    "rat" => CircuitPreset::rat(),
                    "marmoset" => CircuitPreset::marmoset(),
                    other => {
                        return Err(ConfigError::BadValue {
                            key: "circuit.presets".into(),
                            reason: format!("unknown preset `{other}`"),
                        })
                    }
                });
            }
            cfg.presets = presets;
        }
        for i in 0..cfg.presets.len() {
            let name = cfg.presets[i].name.clone();
            let p = &mut cfg.presets[i];
            take_parse(
                &mut pairs,
                &format!("circuit.{name}.neurons_per_population"),
                &mut p.neurons_per_population,
            )?;
            take_parse(
                &mut pairs,
                &format!("circuit.{name}.connection_probability"),
                &mut p.connection_probability,
            )?;
            take_parse(&mut pairs, &format!("circuit.{name}.bias_th"), &mut p.bias_th)?;
            take_parse(&mut pairs, &format!("circuit.{name}.bias_gpe"), &mut p.bias_gpe)?;
            take_parse(&mut pairs, &format!("circuit.{name}.bias_gpi"), &mut p.bias_gpi)?;
            take_parse(
                &mut pairs,
                &format!("circuit.{name}.noise_sigma"),
                &mut p.noise_sigma,
            )?;
            take_parse(
                &mut pairs,
                &format!("circuit.{name}.stimulus_gain"),
                &mut p.stimulus_gain,
            )?;
            if let Some(v) = pairs.remove(&format!("circuit.{name}.stimulus_target")) {
                p.stimulus_target =
                    StimulusTarget::from_token(&v).ok_or_else(|| ConfigError::BadValue {
                        key: format!("circuit.{name}.stimulus_target"),
                        reason: format!("expected d1|d2|both, got `{v}`"),
                    })?;
            }
            for e in 0..EDGES.len() {
                take_parse(
                    &mut pairs,
                    &format!("circuit.{name}.{}", edge_key(e)),
                    &mut p.edge_weights[e],
                )?;
            }
        }

        if let Some(v) = pairs.remove("experiment.approaches") {
            let mut approaches = Vec::new();
            for tok in v.split_whitespace() {
                approaches.push(Approach::from_token(tok).ok_or_else(|| ConfigError::BadValue {
                    key: "experiment.approaches".into(),
                    reason: format!("unknown approach `{tok}`"),
                })?);
            }
            cfg.approaches = approaches;
        }
        if let Some(v) = pairs.remove("experiment.policies") {
            let mut policies = Vec::new();
            for tok in v.split_whitespace() {
                policies.push(Policy::from_token(tok).ok_or_else(|| ConfigError::BadValue {
                    key: "experiment.policies".into(),
                    reason: format!("unknown policy `{tok}`"),
                })?);
            }
            cfg.policies = policies;
        }
        take_parse(&mut pairs, "experiment.workers", &mut cfg.workers)?;

        take_parse(&mut pairs, "decoder.epochs", &mut cfg.train.epochs)?;
        take_parse(&mut pairs, "decoder.batch_size", &mut cfg.train.batch_size)?;
        take_parse(&mut pairs, "decoder.learning_rate", &mut cfg.train.learning_rate)?;
        take_parse(&mut pairs, "decoder.folds", &mut cfg.folds)?;
        take_parse(&mut pairs, "decoder.train_stride", &mut cfg.train_stride)?;
        if cfg.train_stride == 0 {
            return Err(ConfigError::BadValue {
                key: "decoder.train_stride".into(),
                reason: "must be at least 1".into(),
            });
        }

        let mut max_seconds = cfg.world.max_seconds;
        take_parse(&mut pairs, "robot.max_seconds", &mut max_seconds)?;
        let mut edges = Vec::new();
        for (key, a, b) in TRAVEL_KEYS {
            let mut t = cfg.world.travel(a, b);
            take_parse(&mut pairs, &format!("robot.travel.{key}"), &mut t)?;
            edges.push((a, b, t));
        }
        cfg.world =
            WorldMap::new(&edges, max_seconds).map_err(|e| ConfigError::BadWorld(e.to_string()))?;
        take_parse(&mut pairs, "robot.carry_over", &mut cfg.carry_over)?;
        take_parse(&mut pairs, "robot.write_traces", &mut cfg.write_traces)?;
        if let Some(v) = pairs.remove("robot.initial_position") {
            cfg.initial_position =
                Position::from_token(&v).ok_or_else(|| ConfigError::BadValue {
                    key: "robot.initial_position".into(),
                    reason: format!("unknown position `{v}`"),
                })?;
        }

        if let Some((key, _)) = pairs.into_iter().next() {
            return Err(ConfigError::UnknownKey(key));
        }
        Ok(cfg)
    }

    /// Canonical serialization of the effective config: every key, sorted.
    pub fn canonical(&self) -> String {
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        pairs.insert("schema".into(), SCHEMA_VERSION.to_string());
        pairs.insert(
            "synth.profiles".into(),
            self.profiles
                .iter()
                .map(|p| p.name.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
        for p in &self.profiles {
            pairs.insert(
                format!("profile.{}.target_accuracy", p.name),
                format!("{}", p.target_accuracy),
            );
            pairs.insert(
                format!("profile.{}.confusion_bias", p.name),
                format!("{}", p.confusion_bias),
            );
            pairs.insert(
                format!("profile.{}.temporal_smoothing", p.name),
                format!("{}", p.temporal_smoothing),
            );
        }
        pairs.insert(
            "circuit.presets".into(),
            self.presets
                .iter()
                .map(|p| p.name.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
        for p in &self.presets {
            pairs.insert(
                format!("circuit.{}.neurons_per_population", p.name),
                p.neurons_per_population.to_string(),
            );
            pairs.insert(
                format!("circuit.{}.connection_probability", p.name),
                format!("{}", p.connection_probability),
            );
            pairs.insert(format!("circuit.{}.bias_th", p.name), format!("{}", p.bias_th));
            pairs.insert(format!("circuit.{}.bias_gpe", p.name), format!("{}", p.bias_gpe));
            pairs.insert(format!("circuit.{}.bias_gpi", p.name), format!("{}", p.bias_gpi));
            pairs.insert(
                format!("circuit.{}.noise_sigma", p.name),
                format!("{}", p.noise_sigma),
            );
            pairs.insert(
                format!("circuit.{}.stimulus_gain", p.name),
                format!("{}", p.stimulus_gain),
            );
            pairs.insert(
                format!("circuit.{}.stimulus_target", p.name),
                p.stimulus_target.token().to_string(),
            );
            for e in 0..EDGES.len() {
                pairs.insert(
                    format!("circuit.{}.{}", p.name, edge_key(e)),
                    format!("{}", p.edge_weights[e]),
                );
            }
        }
        pairs.insert(
            "experiment.approaches".into(),
            self.approaches
                .iter()
                .map(|a| a.token())
                .collect::<Vec<_>>()
                .join(" "),
        );
        pairs.insert(
            "experiment.policies".into(),
            self.policies
                .iter()
                .map(|p| p.token())
                .collect::<Vec<_>>()
                .join(" "),
        );
        pairs.insert("experiment.workers".into(), self.workers.to_string());
        pairs.insert("decoder.epochs".into(), self.train.epochs.to_string());
        pairs.insert("decoder.batch_size".into(), self.train.batch_size.to_string());
        pairs.insert(
            "decoder.learning_rate".into(),
            format!("{}", self.train.learning_rate),
        );
        pairs.insert("decoder.folds".into(), self.folds.to_string());
        pairs.insert("decoder.train_stride".into(), self.train_stride.to_string());
        pairs.insert("robot.max_seconds".into(), self.world.max_seconds.to_string());
        for (key, a, b) in TRAVEL_KEYS {
            pairs.insert(
                format!("robot.travel.{key}"),
                format!("{}", self.world.travel(a, b)),
            );
        }
        pairs.insert("robot.carry_over".into(), self.carry_over.to_string());
        pairs.insert("robot.write_traces".into(), self.write_traces.to_string());
        pairs.insert(
            "robot.initial_position".into(),
            self.initial_position.token().to_string(),
        );

        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical().as_bytes());
        hex_digest(&hasher.finalize())
    }

    pub fn profile(&self, name: &str) -> Option<&ClassifierProfile> {
        self.profiles.iter().find(|p| p.name == name)
    }

    pub fn preset(&self, name: &str) -> Option<&CircuitPreset> {
        self.presets.iter().find(|p| p.name == name)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_canonical_text() {
        let cfg = Config::default();
        let text = format!("{}", cfg.canonical());
        let back = Config::from_str_overrides(&text).unwrap();
        assert_eq!(cfg.canonical(), back.canonical());
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn overrides_apply_and_change_hash() {
        let base = Config::default();
        let cfg = Config::from_str_overrides(
            "schema = 1\ndecoder.epochs = 3\ncircuit.rat.noise_sigma = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.preset("rat").unwrap().noise_sigma, 0.5);
        assert_ne!(cfg.hash(), base.hash());
    }

    #[test]
    fn schema_is_required() {
        assert!(matches!(
            Config::from_str_overrides("decoder.epochs = 3\n"),
            Err(ConfigError::MissingSchema)
        ));
        assert!(matches!(
            Config::from_str_overrides("schema = 9\n"),
            Err(ConfigError::BadSchema(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Config::from_str_overrides("schema = 1\nnonsense.key = 1\n"),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn bad_world_is_rejected() {
        let err = Config::from_str_overrides("schema = 1\nrobot.travel.shelf2_table = 500\n");
        assert!(matches!(err, Err(ConfigError::BadWorld(_))));
    }

    #[test]
    fn profile_grid_is_configurable() {
        let cfg = Config::from_str_overrides(
            "schema = 1\nsynth.profiles = clean video\nprofile.video.temporal_smoothing = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.profiles.len(), 2);
        assert_eq!(cfg.profiles[0].name, "clean");
        assert_eq!(cfg.profile("video").unwrap().temporal_smoothing, 0.5);
    }
}
