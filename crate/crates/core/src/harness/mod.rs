//! Experiment orchestration: the condition grid, staged pipeline execution
//! over persisted artifacts, content-hash caching and report generation.
//!
//! Artifacts live under `<out>/seed_<seed>/`, one subdirectory per stage, so
//! that every stage reads only files written by the stage before it and any
//! stage can be rerun in isolation. The report aggregates across all seed
//! directories present in the output root.

pub mod cache;
pub mod config;
pub mod kv;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::circuit::{self, CircuitPreset};
use crate::decoder::{self, train::TrainConfig, DecoderModel};
use crate::heuristics::{self, Policy};
use crate::rates::{self, RateMatrix, Segment};
use crate::robot::{self, BatteryResult};
use crate::seeds;
use crate::synth::{self, Behaviour, Session};

pub use config::{Approach, Config, ConfigError};

pub const N_CHANNELS: usize = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("stage {stage}: missing {what}; run the `{hint}` stage first")]
    MissingArtifact {
        stage: &'static str,
        what: String,
        hint: &'static str,
    },
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    GroundTruth,
    Heuristic { profile: String, policy: Policy },
    Neuro { profile: String, preset: String },
}

impl Condition {
    pub fn token(&self) -> String {
        match self {
            Condition::GroundTruth => "ground_truth".into(),
            Condition::Heuristic { profile, policy } => {
                format!("heuristics_{profile}_{}", policy.token())
            }
            Condition::Neuro { profile, preset } => format!("neuro_{profile}_{preset}"),
        }
    }

    pub fn approach(&self) -> Approach {
        match self {
            Condition::GroundTruth => Approach::GroundTruth,
            Condition::Heuristic { .. } => Approach::Heuristics,
            Condition::Neuro { .. } => Approach::Neuro,
        }
    }
}

/// The full condition grid implied by a config.
pub fn conditions(cfg: &Config) -> Vec<Condition> {
    let mut out = Vec::new();
    for approach in &cfg.approaches {
        match approach {
            Approach::GroundTruth => out.push(Condition::GroundTruth),
            Approach::Heuristics => {
                for profile in &cfg.profiles {
                    for policy in &cfg.policies {
                        out.push(Condition::Heuristic {
                            profile: profile.name.clone(),
                            policy: *policy,
                        });
                    }
                }
            }
            Approach::Neuro => {
                for profile in &cfg.profiles {
                    for preset in &cfg.presets {
                        out.push(Condition::Neuro {
                            profile: profile.name.clone(),
                            preset: preset.name.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Path layout for one (output root, seed) run.
#[derive(Debug, Clone)]
pub struct Layout {
    pub out: PathBuf,
    pub seed: u64,
}

impl Layout {
    pub fn new(out: &Path, seed: u64) -> Layout {
        Layout {
            out: out.to_path_buf(),
            seed,
        }
    }

    pub fn seed_dir(&self) -> PathBuf {
        self.out.join(format!("seed_{}", self.seed))
    }

    pub fn corpus_manifest(&self) -> PathBuf {
        self.seed_dir().join("synth").join("corpus.kv")
    }

    pub fn synth_manifest(&self, profile: &str) -> PathBuf {
        self.seed_dir().join("synth").join(profile).join("manifest.kv")
    }

    pub fn prediction_file(&self, profile: &str, session: u32) -> PathBuf {
        self.seed_dir()
            .join("synth")
            .join(profile)
            .join(format!("session_{session:03}.csv"))
    }

    pub fn spikes_file(&self, profile: &str, preset: &str, session: u32) -> PathBuf {
        self.seed_dir()
            .join("circuit")
            .join(format!("{profile}_{preset}"))
            .join(format!("session_{session:03}.spikes"))
    }

    pub fn rates_file(&self, profile: &str, preset: &str, session: u32) -> PathBuf {
        self.seed_dir()
            .join("rates")
            .join(format!("{profile}_{preset}"))
            .join(format!("session_{session:03}.rates"))
    }

    pub fn decoder_dir(&self, profile: &str, preset: &str) -> PathBuf {
        self.seed_dir().join("decoder").join(format!("{profile}_{preset}"))
    }

    pub fn checkpoint_file(&self, profile: &str, preset: &str, fold: usize) -> PathBuf {
        self.decoder_dir(profile, preset).join(format!("fold_{fold}.ckpt"))
    }

    pub fn decoder_metrics(&self, profile: &str, preset: &str) -> PathBuf {
        self.decoder_dir(profile, preset).join("metrics.kv")
    }

    pub fn decisions_file(&self, condition: &str, session: u32) -> PathBuf {
        self.seed_dir()
            .join("decisions")
            .join(condition)
            .join(format!("session_{session:03}.txt"))
    }

    pub fn trace_file(&self, condition: &str, session: u32) -> PathBuf {
        self.seed_dir()
            .join("robot")
            .join("traces")
            .join(condition)
            .join(format!("session_{session:03}.txt"))
    }

    pub fn fragment_file(&self, condition: &str) -> PathBuf {
        self.seed_dir().join("robot").join(format!("{condition}.kv"))
    }
}

/// Runs `f` inside a rayon pool of `workers` threads (0 = all cores).
pub fn with_pool<T: Send>(
    workers: usize,
    f: impl FnOnce() -> Result<T, PipelineError> + Send,
) -> Result<T, PipelineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(stage_err("pipeline"))?;
    pool.install(f)
}

/// Neuro (profile, preset) pairs of the grid.
pub fn neuro_pairs(cfg: &Config) -> Vec<(String, String)> {
    if !cfg.approaches.contains(&Approach::Neuro) {
        return Vec::new();
    }
    let mut pairs = Vec::new();
    for profile in &cfg.profiles {
        for preset in &cfg.presets {
            pairs.push((profile.name.clone(), preset.name.clone()));
        }
    }
    pairs
}

fn preset_fingerprint(preset: &CircuitPreset) -> String {
    format!("{preset:?}")
}

fn train_fingerprint(train: &TrainConfig, folds: usize, stride: usize) -> String {
    format!("{train:?}/folds={folds}/stride={stride}")
}

/// Writes the resolved config and its hash into the output root.
pub fn write_effective_config(cfg: &Config, out: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(out)?;
    let mut text = cfg.canonical();
    text.push_str(&format!("# hash = {}\n", cfg.hash()));
    std::fs::write(out.join("config.kv"), text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

/// Generates the corpus manifest and every profile's prediction files.
pub fn stage_synth(cfg: &Config, layout: &Layout) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);

    let mut manifest = BTreeMap::new();
    manifest.insert("n_sessions".to_string(), corpus.len().to_string());
    manifest.insert("seed".to_string(), layout.seed.to_string());
    for s in &corpus {
        manifest.insert(format!("session.{:03}.subject", s.id), s.subject.to_string());
        manifest.insert(
            format!("session.{:03}.activity", s.id),
            s.activity.id().to_string(),
        );
    }
    kv::write_kv(&layout.corpus_manifest(), &manifest)?;

    for profile in &cfg.profiles {
        let dir = layout.prediction_file(&profile.name, 0);
        std::fs::create_dir_all(dir.parent().unwrap())?;
        let gain = synth::calibrated_gain(profile, layout.seed).map_err(stage_err("synth"))?;
        let mut m = BTreeMap::new();
        m.insert("profile".into(), profile.name.clone());
        m.insert("target_accuracy".into(), format!("{}", profile.target_accuracy));
        m.insert("confusion_bias".into(), format!("{}", profile.confusion_bias));
        m.insert(
            "temporal_smoothing".into(),
            format!("{}", profile.temporal_smoothing),
        );
        m.insert("calibrated_gain".into(), format!("{gain}"));
        m.insert("seed".into(), layout.seed.to_string());
        kv::write_kv(&layout.synth_manifest(&profile.name), &m)?;
        corpus.par_iter().try_for_each(|session| -> Result<(), PipelineError> {
            let series = synth::generate_predictions(session, profile, layout.seed)
                .map_err(stage_err("synth"))?;
            synth::write_prediction_file(
                &layout.prediction_file(&profile.name, session.id),
                session,
                &series,
            )
            .map_err(stage_err("synth"))?;
            Ok(())
        })?;
    }
    Ok(())
}

/// Runs the spiking circuit for every (profile, preset, session) triple.
pub fn stage_circuit(
    cfg: &Config,
    layout: &Layout,
    pairs: &[(String, String)],
) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    for (profile_name, preset_name) in pairs {
        let preset = cfg.preset(preset_name).ok_or_else(|| PipelineError::Stage {
            stage: "circuit",
            message: format!("preset {preset_name} not in config"),
        })?;
        let build_seed = seeds::mix(layout.seed, &[seeds::tag("build"), seeds::tag(preset_name)]);
        let circuit = circuit::build_circuit(preset, N_CHANNELS, build_seed);
        let fingerprint = preset_fingerprint(preset);

        std::fs::create_dir_all(
            layout
                .spikes_file(profile_name, preset_name, 0)
                .parent()
                .unwrap(),
        )?;
        corpus.par_iter().try_for_each(|session| -> Result<(), PipelineError> {
            let pred_path = layout.prediction_file(profile_name, session.id);
            if !pred_path.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: "circuit",
                    what: format!("prediction file {}", pred_path.display()),
                    hint: "synth",
                });
            }
            let sim_seed = seeds::mix(
                layout.seed,
                &[
                    seeds::tag("sim"),
                    seeds::tag(profile_name),
                    seeds::tag(preset_name),
                    session.id as u64,
                ],
            );
            let out_path = layout.spikes_file(profile_name, preset_name, session.id);
            let key = cache::cache_key(
                &[
                    "circuit",
                    &fingerprint,
                    &sim_seed.to_string(),
                    &build_seed.to_string(),
                ],
                &[&pred_path],
            )?;
            if cache::is_fresh(&out_path, &key) {
                return Ok(());
            }
            let (_, series) =
                synth::read_prediction_file(&pred_path).map_err(stage_err("circuit"))?;
            let record = circuit::run_simulation(&circuit, &series, sim_seed)
                .map_err(stage_err("circuit"))?;
            circuit::write_spike_file(&out_path, &record).map_err(stage_err("circuit"))?;
            cache::mark(&out_path, &key)?;
            Ok(())
        })?;
    }
    Ok(())
}

/// Bins every spike record into a rate matrix file.
pub fn stage_rates(
    _cfg: &Config,
    layout: &Layout,
    pairs: &[(String, String)],
) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    for (profile_name, preset_name) in pairs {
        std::fs::create_dir_all(
            layout
                .rates_file(profile_name, preset_name, 0)
                .parent()
                .unwrap(),
        )?;
        corpus.par_iter().try_for_each(|session| -> Result<(), PipelineError> {
            let spikes_path = layout.spikes_file(profile_name, preset_name, session.id);
            if !spikes_path.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: "rates",
                    what: format!("spike record {}", spikes_path.display()),
                    hint: "circuit",
                });
            }
            let out_path = layout.rates_file(profile_name, preset_name, session.id);
            let key =
                cache::cache_key(&["rates", &rates::BIN_MS.to_string()], &[&spikes_path])?;
            if cache::is_fresh(&out_path, &key) {
                return Ok(());
            }
            let record = circuit::read_spike_file(&spikes_path).map_err(stage_err("rates"))?;
            let matrix =
                rates::firing_rates(&record, rates::BIN_MS).map_err(stage_err("rates"))?;
            rates::write_rate_file(&out_path, &matrix).map_err(stage_err("rates"))?;
            cache::mark(&out_path, &key)?;
            Ok(())
        })?;
    }
    Ok(())
}

/// Loads one session's cortex rate matrix.
fn load_cortex(
    layout: &Layout,
    stage: &'static str,
    profile: &str,
    preset: &str,
    session: u32,
) -> Result<RateMatrix, PipelineError> {
    let path = layout.rates_file(profile, preset, session);
    if !path.exists() {
        return Err(PipelineError::MissingArtifact {
            stage,
            what: format!("rate matrix {}", path.display()),
            hint: "rates",
        });
    }
    let matrix = rates::read_rate_file(&path).map_err(stage_err(stage))?;
    Ok(rates::select_cortex(&matrix))
}

fn session_segments(cortex: &RateMatrix, session: &Session) -> Result<Vec<Segment>, PipelineError> {
    rates::segment(
        cortex,
        rates::SEGMENT_WIDTH,
        rates::SEGMENT_STRIDE,
        session.id,
        session.behaviour(),
    )
    .map_err(stage_err("train-decoder"))
}

/// Cross-subject fold training of the decoder for every (profile, preset).
pub fn stage_train(
    cfg: &Config,
    layout: &Layout,
    pairs: &[(String, String)],
) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    let folds =
        synth::fold_assignments(&corpus, cfg.folds).map_err(stage_err("train-decoder"))?;
    let fingerprint = train_fingerprint(&cfg.train, cfg.folds, cfg.train_stride);

    for (profile_name, preset_name) in pairs {
        let rate_paths: Vec<PathBuf> = corpus
            .iter()
            .map(|s| layout.rates_file(profile_name, preset_name, s.id))
            .collect();
        for p in &rate_paths {
            if !p.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: "train-decoder",
                    what: format!("rate matrix {}", p.display()),
                    hint: "rates",
                });
            }
        }
        let upstream: Vec<&Path> = rate_paths.iter().map(|p| p.as_path()).collect();
        let key = cache::cache_key(
            &["train", &fingerprint, &layout.seed.to_string()],
            &upstream,
        )?;
        let metrics_path = layout.decoder_metrics(profile_name, preset_name);
        if cache::is_fresh(&metrics_path, &key) {
            continue;
        }

        // All 66 segments per session, shared across folds.
        let segments: Vec<Arc<Vec<Segment>>> = corpus
            .par_iter()
            .map(|session| {
                let cortex =
                    load_cortex(layout, "train-decoder", profile_name, preset_name, session.id)?;
                Ok(Arc::new(session_segments(&cortex, session)?))
            })
            .collect::<Result<_, PipelineError>>()?;

        let fold_metrics: Vec<(usize, decoder::Metrics)> = folds
            .par_iter()
            .map(|fold| {
                let train_segments: Vec<Segment> = fold
                    .train
                    .iter()
                    .flat_map(|&i| {
                        segments[i]
                            .iter()
                            .step_by(cfg.train_stride)
                            .cloned()
                            .collect::<Vec<_>>()
                    })
                    .collect();
                let test_segments: Vec<Segment> = fold
                    .test
                    .iter()
                    .flat_map(|&i| segments[i].to_vec())
                    .collect();
                let train_seed = seeds::mix(
                    layout.seed,
                    &[
                        seeds::tag("decoder"),
                        seeds::tag(profile_name),
                        seeds::tag(preset_name),
                        fold.index as u64,
                    ],
                );
                let (model, _report) =
                    decoder::train::train::<f32>(&train_segments, &cfg.train, train_seed)
                        .map_err(stage_err("train-decoder"))?;
                let metrics = decoder::evaluate(&model, &test_segments)
                    .map_err(stage_err("train-decoder"))?;
                decoder::save_checkpoint(
                    &layout.checkpoint_file(profile_name, preset_name, fold.index),
                    &model,
                )
                .map_err(stage_err("train-decoder"))?;
                Ok((fold.index, metrics))
            })
            .collect::<Result<_, PipelineError>>()?;

        let mut m = BTreeMap::new();
        m.insert("profile".into(), profile_name.clone());
        m.insert("preset".into(), preset_name.clone());
        m.insert("seed".into(), layout.seed.to_string());
        let mut acc_sum = 0.0;
        let mut f1_sum = 0.0;
        for (fold, metrics) in &fold_metrics {
            m.insert(format!("fold.{fold}.accuracy"), format!("{}", metrics.accuracy));
            m.insert(format!("fold.{fold}.macro_f1"), format!("{}", metrics.macro_f1));
            m.insert(format!("fold.{fold}.n"), metrics.n.to_string());
            let flat: Vec<String> = metrics
                .confusion
                .iter()
                .flatten()
                .map(|c| c.to_string())
                .collect();
            m.insert(format!("fold.{fold}.confusion"), flat.join(" "));
            acc_sum += metrics.accuracy;
            f1_sum += metrics.macro_f1;
        }
        let k = fold_metrics.len() as f64;
        m.insert("mean.accuracy".into(), format!("{}", acc_sum / k));
        m.insert("mean.macro_f1".into(), format!("{}", f1_sum / k));
        kv::write_kv(&metrics_path, &m)?;
        cache::mark(&metrics_path, &key)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Decision streams
// ---------------------------------------------------------------------------

pub fn write_decision_file(path: &Path, decisions: &[Behaviour]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut out = String::with_capacity(decisions.len() * 6 + 16);
    out.push_str("t,decision\n");
    for (t, d) in decisions.iter().enumerate() {
        out.push_str(&format!("{t},{}\n", d.token()));
    }
    std::fs::write(path, out)
}

pub fn read_decision_file(path: &Path) -> Result<Vec<Behaviour>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let token = line.split(',').nth(1).ok_or_else(|| PipelineError::Stage {
            stage: "robot",
            message: format!("bad decision line `{line}` in {}", path.display()),
        })?;
        out.push(
            Behaviour::from_token(token).ok_or_else(|| PipelineError::Stage {
                stage: "robot",
                message: format!("unknown decision `{token}` in {}", path.display()),
            })?,
        );
    }
    Ok(out)
}

/// Maps the decoder's per-second decisions (session seconds 4..=69) onto the
/// 140-second robot timeline: wait during the first eight seconds, then hold
/// each decision for two robot seconds.
pub fn neuro_robot_stream(decisions: &[Behaviour]) -> Vec<Behaviour> {
    let robot_seconds = robot::DEFAULT_MAX_SECONDS as usize;
    (0..robot_seconds)
        .map(|r| {
            if r < 8 {
                Behaviour::NoAction
            } else {
                let session_second = r / 2; // 4..=69
                decisions
                    .get(session_second - 4)
                    .copied()
                    .unwrap_or(Behaviour::NoAction)
            }
        })
        .collect()
}

/// Produces one decision stream file per (condition, session).
pub fn stage_decide(
    cfg: &Config,
    layout: &Layout,
    conds: &[Condition],
) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    let folds = synth::fold_assignments(&corpus, cfg.folds).map_err(stage_err("decide"))?;

    for cond in conds {
        let token = cond.token();
        match cond {
            Condition::GroundTruth => {
                for session in &corpus {
                    let d = heuristics::ground_truth_decision(session);
                    let stream = vec![d; cfg.world.max_seconds as usize];
                    write_decision_file(&layout.decisions_file(&token, session.id), &stream)?;
                }
            }
            Condition::Heuristic { profile, policy } => {
                corpus.par_iter().try_for_each(|session| -> Result<(), PipelineError> {
                    let pred_path = layout.prediction_file(profile, session.id);
                    if !pred_path.exists() {
                        return Err(PipelineError::MissingArtifact {
                            stage: "decide",
                            what: format!("prediction file {}", pred_path.display()),
                            hint: "synth",
                        });
                    }
                    let (_, series) =
                        synth::read_prediction_file(&pred_path).map_err(stage_err("decide"))?;
                    let stream = heuristics::decision_stream(&series.rows, *policy);
                    write_decision_file(&layout.decisions_file(&token, session.id), &stream)?;
                    Ok(())
                })?;
            }
            Condition::Neuro { profile, preset } => {
                // One trained model per fold; sessions decode with the model
                // that held their subject out of training.
                let mut models: Vec<Option<Arc<DecoderModel<f32>>>> = vec![None; folds.len()];
                for fold in &folds {
                    let path = layout.checkpoint_file(profile, preset, fold.index);
                    if !path.exists() {
                        return Err(PipelineError::MissingArtifact {
                            stage: "decide",
                            what: format!("checkpoint {}", path.display()),
                            hint: "train-decoder",
                        });
                    }
                    models[fold.index] =
                        Some(Arc::new(decoder::load_checkpoint(&path).map_err(stage_err("decide"))?));
                }
                let fold_of_session: Vec<usize> = {
                    let mut map = vec![usize::MAX; corpus.len()];
                    for fold in &folds {
                        for &i in &fold.test {
                            map[i] = fold.index;
                        }
                    }
                    map
                };
                corpus.par_iter().enumerate().try_for_each(|(i, session)| -> Result<(), PipelineError> {
                    let model = models[fold_of_session[i]].as_ref().unwrap();
                    let cortex = load_cortex(layout, "decide", profile, preset, session.id)?;
                    let segments = session_segments(&cortex, session)?;
                    let qs = decoder::decode_segments(model.as_ref(), &segments)
                        .map_err(stage_err("decide"))?;
                    let decisions: Vec<Behaviour> = qs.iter().map(decoder::decode).collect();
                    let stream = neuro_robot_stream(&decisions);
                    write_decision_file(&layout.decisions_file(&token, session.id), &stream)?;
                    Ok(())
                })?;
            }
        }
    }
    Ok(())
}

/// Runs the 144-episode battery for every condition and writes fragments.
pub fn stage_robot(
    cfg: &Config,
    layout: &Layout,
    conds: &[Condition],
) -> Result<(), PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    for cond in conds {
        let token = cond.token();
        let mut streams = Vec::with_capacity(corpus.len());
        for session in &corpus {
            let path = layout.decisions_file(&token, session.id);
            if !path.exists() {
                return Err(PipelineError::MissingArtifact {
                    stage: "robot",
                    what: format!("decision stream {}", path.display()),
                    hint: "decide",
                });
            }
            streams.push((session.behaviour(), read_decision_file(&path)?));
        }
        let result = if cfg.write_traces {
            let mut io_err = None;
            let result = robot::run_battery_traced(
                &streams,
                &cfg.world,
                cfg.initial_position,
                cfg.carry_over,
                |episode, rows| {
                    let path = layout.trace_file(&token, corpus[episode].id);
                    let mut text = String::from("t,decision,command,location,carried\n");
                    for row in rows {
                        text.push_str(&row.to_line());
                        text.push('\n');
                    }
                    if let Some(parent) = path.parent() {
                        let _ = std::fs::create_dir_all(parent);
                    }
                    if let Err(e) = std::fs::write(&path, text) {
                        io_err = Some(e);
                    }
                },
            );
            if let Some(e) = io_err {
                return Err(e.into());
            }
            result
        } else {
            robot::run_battery(&streams, &cfg.world, cfg.initial_position, cfg.carry_over)
        };
        write_fragment(layout, cond, &result)?;
    }
    Ok(())
}

fn write_fragment(
    layout: &Layout,
    cond: &Condition,
    result: &BatteryResult,
) -> Result<(), PipelineError> {
    let mut m = BTreeMap::new();
    let n = result.outcomes.len();
    m.insert("condition".into(), cond.token());
    m.insert("approach".into(), cond.approach().token().to_string());
    match cond {
        Condition::GroundTruth => {}
        Condition::Heuristic { profile, policy } => {
            m.insert("profile".into(), profile.clone());
            m.insert("policy".into(), policy.token().to_string());
        }
        Condition::Neuro { profile, preset } => {
            m.insert("profile".into(), profile.clone());
            m.insert("preset".into(), preset.clone());
        }
    }
    m.insert("seed".into(), layout.seed.to_string());
    m.insert("episodes".into(), n.to_string());
    m.insert("correct".into(), result.correct.to_string());
    m.insert("incorrect".into(), result.incorrect.to_string());
    m.insert("unfinished".into(), result.unfinished.to_string());
    if let (Some(mean), Some(std)) = (result.elapsed_mean, result.elapsed_std) {
        m.insert("elapsed_mean".into(), format!("{mean}"));
        m.insert("elapsed_std".into(), format!("{std}"));
        let elapsed_n = result
            .outcomes
            .iter()
            .filter(|o| o.verdict == robot::Verdict::Correct && o.elapsed_to_completion.is_some())
            .count();
        m.insert("elapsed_n".into(), elapsed_n.to_string());
    }
    kv::write_kv(&layout.fragment_file(&cond.token()), &m)?;
    Ok(())
}

/// Per-behaviour completion-time means under one condition, recomputed from
/// the persisted decision streams.
pub fn battery_times_by_behaviour(
    cfg: &Config,
    layout: &Layout,
    cond: &Condition,
) -> Result<BTreeMap<Behaviour, (f64, usize)>, PipelineError> {
    let corpus = synth::generate_corpus(layout.seed);
    let token = cond.token();
    let mut streams = Vec::with_capacity(corpus.len());
    for session in &corpus {
        streams.push((
            session.behaviour(),
            read_decision_file(&layout.decisions_file(&token, session.id))?,
        ));
    }
    let result = robot::run_battery(&streams, &cfg.world, cfg.initial_position, cfg.carry_over);
    let mut sums: BTreeMap<Behaviour, (f64, usize)> = BTreeMap::new();
    for (outcome, (expected, _)) in result.outcomes.iter().zip(streams.iter()) {
        if outcome.verdict == robot::Verdict::Correct {
            if let Some(t) = outcome.elapsed_to_completion {
                let e = sums.entry(*expected).or_insert((0.0, 0));
                e.0 += t as f64;
                e.1 += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|(b, (sum, count))| (b, (sum / count.max(1) as f64, count)))
        .collect())
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Runs the full pipeline for one seed, then refreshes the report.
pub fn run_all(cfg: &Config, out: &Path, seed: u64) -> Result<(), PipelineError> {
    let layout = Layout::new(out, seed);
    write_effective_config(cfg, out)?;
    let pairs = neuro_pairs(cfg);
    let conds = conditions(cfg);
    with_pool(cfg.workers, || {
        stage_synth(cfg, &layout)?;
        stage_circuit(cfg, &layout, &pairs)?;
        stage_rates(cfg, &layout, &pairs)?;
        stage_train(cfg, &layout, &pairs)?;
        stage_decide(cfg, &layout, &conds)?;
        stage_robot(cfg, &layout, &conds)?;
        Ok(())
    })?;
    report::stage_report(cfg, out)?;
    Ok(())
}

/// Runs the pipeline slice needed by a single condition.
pub fn run_condition(
    cfg: &Config,
    out: &Path,
    seed: u64,
    cond: &Condition,
) -> Result<(), PipelineError> {
    let layout = Layout::new(out, seed);
    write_effective_config(cfg, out)?;
    let conds = std::slice::from_ref(cond).to_vec();
    with_pool(cfg.workers, || {
        stage_synth(cfg, &layout)?;
        if let Condition::Neuro { profile, preset } = cond {
            let pairs = vec![(profile.clone(), preset.clone())];
            stage_circuit(cfg, &layout, &pairs)?;
            stage_rates(cfg, &layout, &pairs)?;
            stage_train(cfg, &layout, &pairs)?;
        }
        stage_decide(cfg, &layout, &conds)?;
        stage_robot(cfg, &layout, &conds)?;
        Ok(())
    })?;
    report::stage_report(cfg, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_grid_matches_config() {
        let cfg = Config::default();
        let conds = conditions(&cfg);
        // ground truth + 2 profiles x 2 policies + 2 profiles x 2 presets
        assert_eq!(conds.len(), 9);
        assert_eq!(conds[0], Condition::GroundTruth);
        let tokens: Vec<String> = conds.iter().map(|c| c.token()).collect();
        assert!(tokens.contains(&"heuristics_imu_ambient_window".to_string()));
        assert!(tokens.contains(&"neuro_video_marmoset".to_string()));
    }

    #[test]
    fn neuro_stream_mapping_waits_then_holds() {
        let decisions = vec![Behaviour::B1; 66];
        let stream = neuro_robot_stream(&decisions);
        assert_eq!(stream.len(), 140);
        assert!(stream[..8].iter().all(|&b| b == Behaviour::NoAction));
        assert!(stream[8..].iter().all(|&b| b == Behaviour::B1));

        // Each decision is held for exactly two robot seconds.
        let alternating: Vec<Behaviour> = (0..66)
            .map(|i| if i % 2 == 0 { Behaviour::B1 } else { Behaviour::B2 })
            .collect();
        let stream = neuro_robot_stream(&alternating);
        for r in 8..140 {
            assert_eq!(stream[r], alternating[r / 2 - 4], "robot second {r}");
        }
    }

    #[test]
    fn decision_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        let stream = vec![Behaviour::B1, Behaviour::NoAction, Behaviour::B2];
        write_decision_file(&path, &stream).unwrap();
        assert_eq!(read_decision_file(&path).unwrap(), stream);
    }

    #[test]
    fn ground_truth_condition_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = Config::default();
        cfg.approaches = vec![Approach::GroundTruth];
        cfg.profiles = vec![];
        cfg.presets = vec![];
        cfg.workers = 2;
        run_condition(&cfg, dir.path(), 0, &Condition::GroundTruth).unwrap();
        let fragment =
            kv::read_kv(&Layout::new(dir.path(), 0).fragment_file("ground_truth")).unwrap();
        assert_eq!(fragment["correct"], "144");
        assert_eq!(fragment["incorrect"], "0");
        assert_eq!(fragment["unfinished"], "0");
        assert!(dir.path().join("report.kv").exists());
        assert!(dir.path().join("report.txt").exists());
    }

    #[test]
    fn stage_commands_error_on_missing_upstream() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = Config::default();
        let layout = Layout::new(dir.path(), 0);
        let pairs = vec![("video".to_string(), "rat".to_string())];
        let err = stage_circuit(&cfg, &layout, &pairs).unwrap_err();
        match err {
            PipelineError::MissingArtifact { stage, hint, .. } => {
                assert_eq!(stage, "circuit");
                assert_eq!(hint, "synth");
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
