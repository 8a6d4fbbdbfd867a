//! Synthetic activity-recognition corpus: labelled sessions plus calibrated
//! noisy prediction streams standing in for pretrained classifiers.
//!
//! A prediction stream is built from logits `gain * onehot(true activity)`
//! plus AR(1)-smoothed Gaussian noise, softmaxed per timestep. The gain is
//! binary-searched per profile until the session-averaged argmax accuracy over
//! the whole corpus matches the profile's target.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::seeds;

pub const N_ACTIVITIES: usize = 9;
pub const N_SUBJECTS: u32 = 16;
pub const N_TIMESTEPS: usize = 140;
pub const N_SESSIONS: usize = 144;

/// Simplex tolerance for prediction rows.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("target accuracy {0} outside [1/9, 1]")]
    BadTargetAccuracy(f64),
    #[error("fold count {k} does not divide {subjects} subjects")]
    BadFoldCount { k: usize, subjects: usize },
    #[error("row is not a probability simplex (sum {sum}, min {min})")]
    NotSimplex { sum: f64, min: f64 },
    #[error("gain calibration failed for profile {profile}: best accuracy {accuracy} vs target {target}")]
    Calibration {
        profile: String,
        accuracy: f64,
        target: f64,
    },
    #[error("malformed prediction file {path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Response behaviour set: two object-transport behaviours plus "no action".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Behaviour {
    B1,
    B2,
    NoAction,
}

impl Behaviour {
    pub const ALL: [Behaviour; 3] = [Behaviour::B1, Behaviour::B2, Behaviour::NoAction];

    /// Index in decision vectors: (b1, b2, no-action).
    pub fn index(self) -> usize {
        match self {
            Behaviour::B1 => 0,
            Behaviour::B2 => 1,
            Behaviour::NoAction => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Behaviour> {
        Behaviour::ALL.get(i).copied()
    }

    /// Token used in decision logs and reports.
    pub fn token(self) -> &'static str {
        match self {
            Behaviour::B1 => "b1",
            Behaviour::B2 => "b2",
            Behaviour::NoAction => "b0",
        }
    }

    pub fn from_token(s: &str) -> Option<Behaviour> {
        match s {
            "b1" => Some(Behaviour::B1),
            "b2" => Some(Behaviour::B2),
            "b0" => Some(Behaviour::NoAction),
            _ => None,
        }
    }

    /// True for behaviours that require the robot to act.
    pub fn requires_action(self) -> bool {
        self != Behaviour::NoAction
    }
}

impl fmt::Display for Behaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One of the nine daily activities, 1-based id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Activity(pub u8);

const ACTIVITY_LABELS: [&str; N_ACTIVITIES] = [
    "making a cup of tea",
    "making a sandwich",
    "making a bowl of cereals",
    "using a laptop",
    "using a phone",
    "reading a newspaper",
    "setting the table",
    "cleaning the dishes",
    "tidying the kitchen",
];

impl Activity {
    pub fn new(id: u8) -> Option<Activity> {
        (1..=N_ACTIVITIES as u8).contains(&id).then_some(Activity(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// 0-based index into prediction vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Option<Activity> {
        (i < N_ACTIVITIES).then(|| Activity(i as u8 + 1))
    }

    pub fn label(self) -> &'static str {
        ACTIVITY_LABELS[self.index()]
    }

    /// Activity-to-behaviour mapping: a1-a3 -> b1, a4-a6 -> b2, a7-a9 -> none.
    pub fn behaviour(self) -> Behaviour {
        match self.0 {
            1..=3 => Behaviour::B1,
            4..=6 => Behaviour::B2,
            _ => Behaviour::NoAction,
        }
    }

    pub fn all() -> impl Iterator<Item = Activity> {
        (1..=N_ACTIVITIES as u8).map(Activity)
    }
}

/// One recording session: a subject performing one activity for 140 timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Session {
    pub id: u32,
    pub subject: u32,
    pub activity: Activity,
    pub n_timesteps: usize,
}

impl Session {
    pub fn behaviour(&self) -> Behaviour {
        self.activity.behaviour()
    }
}

/// Noise profile of a synthetic classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierProfile {
    pub name: String,
    /// Session-averaged argmax accuracy the stream is calibrated to.
    pub target_accuracy: f64,
    /// Fraction of the error head start given to same-behaviour-group activities.
    pub confusion_bias: f64,
    /// AR(1) coefficient of the latent noise, in [0, 1).
    pub temporal_smoothing: f64,
}

impl ClassifierProfile {
    pub fn imu_ambient() -> Self {
        ClassifierProfile {
            name: "imu_ambient".into(),
            target_accuracy: 0.7430,
            confusion_bias: 0.5,
            temporal_smoothing: 0.5,
        }
    }

    pub fn video() -> Self {
        ClassifierProfile {
            name: "video".into(),
            target_accuracy: 0.9375,
            confusion_bias: 0.5,
            temporal_smoothing: 0.5,
        }
    }

    /// Noiseless control profile: every row is exactly one-hot on the truth.
    pub fn clean() -> Self {
        ClassifierProfile {
            name: "clean".into(),
            target_accuracy: 1.0,
            confusion_bias: 0.0,
            temporal_smoothing: 0.0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let lo = 1.0 / N_ACTIVITIES as f64;
        if !(self.target_accuracy >= lo && self.target_accuracy <= 1.0) {
            return Err(SynthError::BadTargetAccuracy(self.target_accuracy));
        }
        Ok(())
    }

    /// Key for the calibration cache; covers every field that shapes the stream.
    fn cache_key(&self, seed: u64) -> (String, u64, u64, u64, u64) {
        (
            self.name.clone(),
            self.target_accuracy.to_bits(),
            self.confusion_bias.to_bits(),
            self.temporal_smoothing.to_bits(),
            seed,
        )
    }
}

/// 140 rows of 9-class probability simplexes for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSeries {
    pub session_id: u32,
    pub rows: Vec<[f64; N_ACTIVITIES]>,
}

impl PredictionSeries {
    pub fn validate(&self) -> Result<(), SynthError> {
        for row in &self.rows {
            check_simplex(row)?;
        }
        Ok(())
    }
}

pub fn check_simplex(row: &[f64]) -> Result<(), SynthError> {
    let sum: f64 = row.iter().sum();
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 || (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(SynthError::NotSimplex { sum, min });
    }
    Ok(())
}

/// Full corpus: the 16 x 9 subject-by-activity grid, one session per cell.
///
/// The grid itself is canonical; the seed only determines the derived noise
/// streams downstream, so two calls always return identical corpora.
pub fn generate_corpus(_seed: u64) -> Vec<Session> {
    let mut sessions = Vec::with_capacity(N_SESSIONS);
    for subject in 1..=N_SUBJECTS {
        for activity in Activity::all() {
            sessions.push(Session {
                id: sessions.len() as u32,
                subject,
                activity,
                n_timesteps: N_TIMESTEPS,
            });
        }
    }
    sessions
}

fn session_rng(profile: &ClassifierProfile, seed: u64, session_id: u32) -> ChaCha8Rng {
    let s = seeds::mix(
        seed,
        &[seeds::tag("synth"), seeds::tag(&profile.name), session_id as u64],
    );
    ChaCha8Rng::seed_from_u64(s)
}

fn softmax_into(logits: &[f64; N_ACTIVITIES], out: &mut [f64; N_ACTIVITIES]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits.iter()) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Weight of the per-session logit offset relative to the per-row noise.
/// Session offsets make whole sessions hard (the way real classifiers fail)
/// instead of spreading error uniformly over rows.
const SESSION_NOISE: f64 = 1.0;

/// Generates one session's rows at a given gain. Factored out so calibration
/// evaluates exactly the stream that will be emitted.
fn generate_rows(
    session: &Session,
    profile: &ClassifierProfile,
    seed: u64,
    gain: f64,
) -> Vec<[f64; N_ACTIVITIES]> {
    let truth = session.activity;
    let group = truth.behaviour();
    let rho = profile.temporal_smoothing;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut rng = session_rng(profile, seed, session.id);
    let mut offset = [0.0f64; N_ACTIVITIES];
    for o in offset.iter_mut() {
        let eps: f64 = StandardNormal.sample(&mut rng);
        *o = SESSION_NOISE * eps;
    }
    let mut latent = [0.0f64; N_ACTIVITIES];
    let mut rows = Vec::with_capacity(session.n_timesteps);
    for t in 0..session.n_timesteps {
        for z in latent.iter_mut() {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *z = if t == 0 { eps } else { rho * *z + innovation * eps };
        }
        let mut logits = [0.0f64; N_ACTIVITIES];
        for a in Activity::all() {
            let i = a.index();
            let mut l = offset[i] + latent[i];
            if a == truth {
                l += gain;
            } else if a.behaviour() == group {
                // Head start for same-group activities: errors preferentially
                // land on activities mapping to the same behaviour.
                l += 0.5 * profile.confusion_bias * gain;
            }
            logits[i] = l;
        }
        let mut row = [0.0f64; N_ACTIVITIES];
        softmax_into(&logits, &mut row);
        rows.push(row);
    }
    rows
}

/// Session-averaged argmax accuracy of the whole corpus at a given gain.
fn corpus_accuracy(profile: &ClassifierProfile, seed: u64, gain: f64) -> f64 {
    let corpus = generate_corpus(seed);
    let mut correct = 0usize;
    for session in &corpus {
        let rows = generate_rows(session, profile, seed, gain);
        let mut mean = [0.0f64; N_ACTIVITIES];
        for row in &rows {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        let argmax = mean
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        if argmax == session.activity.index() {
            correct += 1;
        }
    }
    correct as f64 / N_SESSIONS as f64
}

fn calibration_cache() -> &'static Mutex<HashMap<(String, u64, u64, u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(String, u64, u64, u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Logit gain reproducing the profile's target session accuracy over the
/// corpus, found by bisection on the (noise-fixed) accuracy curve.
pub fn calibrated_gain(profile: &ClassifierProfile, seed: u64) -> Result<f64, SynthError> {
    profile.validate()?;
    if profile.target_accuracy >= 1.0 {
        return Ok(f64::INFINITY); // noiseless limit, handled as exact one-hot
    }
    let key = profile.cache_key(seed);
    if let Some(&g) = calibration_cache().lock().unwrap().get(&key) {
        return Ok(g);
    }
    let target = profile.target_accuracy;
    let (mut lo, mut hi) = (0.0f64, 24.0f64);
    for _ in 0..36 {
        let mid = 0.5 * (lo + hi);
        if corpus_accuracy(profile, seed, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let achieved = corpus_accuracy(profile, seed, hi);
    if (achieved - target).abs() > 0.02 {
        return Err(SynthError::Calibration {
            profile: profile.name.clone(),
            accuracy: achieved,
            target,
        });
    }
    calibration_cache().lock().unwrap().insert(key, hi);
    Ok(hi)
}

/// Calibrated noisy prediction stream for one session.
pub fn generate_predictions(
    session: &Session,
    profile: &ClassifierProfile,
    seed: u64,
) -> Result<PredictionSeries, SynthError> {
    profile.validate()?;
    let rows = if profile.target_accuracy >= 1.0 {
        let mut one_hot = [0.0f64; N_ACTIVITIES];
        one_hot[session.activity.index()] = 1.0;
        vec![one_hot; session.n_timesteps]
    } else {
        let gain = calibrated_gain(profile, seed)?;
        generate_rows(session, profile, seed, gain)
    };
    Ok(PredictionSeries {
        session_id: session.id,
        rows,
    })
}

/// One cross-validation fold: subject-disjoint train/test session splits.
#[derive(Debug, Clone)]
pub struct Fold {
    pub index: usize,
    pub test_subjects: Vec<u32>,
    /// Indices into the corpus vector.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Cross-subject k-fold partition; every fold's test set holds all sessions
/// of exactly `subjects/k` subjects.
pub fn fold_assignments(corpus: &[Session], k: usize) -> Result<Vec<Fold>, SynthError> {
    let mut subjects: Vec<u32> = corpus.iter().map(|s| s.subject).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if k == 0 || subjects.len() % k != 0 {
        return Err(SynthError::BadFoldCount {
            k,
            subjects: subjects.len(),
        });
    }
    let per_fold = subjects.len() / k;
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let test_subjects: Vec<u32> = subjects[f * per_fold..(f + 1) * per_fold].to_vec();
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (i, s) in corpus.iter().enumerate() {
            if test_subjects.contains(&s.subject) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        folds.push(Fold {
            index: f,
            test_subjects,
            train,
            test,
        });
    }
    Ok(folds)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// Writes one prediction file: header `session,subject,activity`, then one
/// line per timestep with 9 comma-separated values at 9 significant digits.
pub fn write_prediction_file(
    path: &Path,
    session: &Session,
    series: &PredictionSeries,
) -> Result<(), SynthError> {
    let mut out = String::new();
    out.push_str(&format!(
        "{},{},{}\n",
        session.id,
        session.subject,
        session.activity.id()
    ));
    for row in &series.rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a prediction file back. Rows are renormalized to unit sum to undo
/// the 9-digit truncation; rows further than 1e-6 from a simplex are rejected.
pub fn read_prediction_file(path: &Path) -> Result<(Session, PredictionSeries), SynthError> {
    let bad = |reason: &str| SynthError::BadFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    let head: Vec<&str> = header.trim().split(',').collect();
    if head.len() != 3 {
        return Err(bad("header must be session,subject,activity"));
    }
    let id: u32 = head[0].parse().map_err(|_| bad("bad session id"))?;
    let subject: u32 = head[1].parse().map_err(|_| bad("bad subject"))?;
    let activity = head[2]
        .parse::<u8>()
        .ok()
        .and_then(Activity::new)
        .ok_or_else(|| bad("bad activity id"))?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = [0.0f64; N_ACTIVITIES];
        let mut n = 0;
        for (i, tok) in line.trim().split(',').enumerate() {
            if i >= N_ACTIVITIES {
                return Err(bad("too many columns"));
            }
            row[i] = tok.parse().map_err(|_| bad("bad value"))?;
            n += 1;
        }
        if n != N_ACTIVITIES {
            return Err(bad("wrong column count"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&v| v < 0.0) {
            return Err(bad("row is not close to a simplex"));
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        rows.push(row);
    }
    let session = Session {
        id,
        subject,
        activity,
        n_timesteps: rows.len(),
    };
    Ok((session, PredictionSeries { session_id: id, rows }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_covers_grid_exactly_once() {
        let corpus = generate_corpus(0);
        assert_eq!(corpus.len(), N_SESSIONS);
        let mut counts = HashMap::new();
        for s in &corpus {
            *counts.entry((s.subject, s.activity.id())).or_insert(0) += 1;
            assert_eq!(s.n_timesteps, N_TIMESTEPS);
        }
        assert_eq!(counts.len(), 144);
        assert!(counts.values().all(|&c| c == 1));
        // 16 per activity, 9 per subject
        for a in Activity::all() {
            assert_eq!(corpus.iter().filter(|s| s.activity == a).count(), 16);
        }
        for subj in 1..=N_SUBJECTS {
            assert_eq!(corpus.iter().filter(|s| s.subject == subj).count(), 9);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(generate_corpus(0), generate_corpus(0));
        assert_eq!(generate_corpus(0), generate_corpus(7));
    }

    #[test]
    fn activity_behaviour_mapping_matches_table() {
        let expect = [
            Behaviour::B1,
            Behaviour::B1,
            Behaviour::B1,
            Behaviour::B2,
            Behaviour::B2,
            Behaviour::B2,
            Behaviour::NoAction,
            Behaviour::NoAction,
            Behaviour::NoAction,
        ];
        for (a, want) in Activity::all().zip(expect) {
            assert_eq!(a.behaviour(), want, "activity a{}", a.id());
        }
    }

    #[test]
    fn clean_profile_rows_are_one_hot_on_truth() {
        let corpus = generate_corpus(0);
        let profile = ClassifierProfile::clean();
        for session in corpus.iter().step_by(17) {
            let series = generate_predictions(session, &profile, 0).unwrap();
            assert_eq!(series.rows.len(), N_TIMESTEPS);
            for row in &series.rows {
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                assert_eq!(argmax, session.activity.index());
                assert_eq!(row[argmax], 1.0);
            }
            series.validate().unwrap();
        }
    }

    #[test]
    fn rows_are_simplexes_and_deterministic() {
        let corpus = generate_corpus(3);
        let profile = ClassifierProfile::video();
        let s = &corpus[31];
        let a = generate_predictions(s, &profile, 3).unwrap();
        let b = generate_predictions(s, &profile, 3).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn rejects_below_chance_target() {
        let mut p = ClassifierProfile::video();
        p.target_accuracy = 0.05;
        let corpus = generate_corpus(0);
        assert!(matches!(
            generate_predictions(&corpus[0], &p, 0),
            Err(SynthError::BadTargetAccuracy(_))
        ));
    }

    #[test]
    fn chance_profile_row_accuracy_near_chance() {
        // target 1/9, no bias: per-row argmax accuracy ~ 11.1% +- 3 pts.
        let profile = ClassifierProfile {
            name: "chance".into(),
            target_accuracy: 1.0 / 9.0,
            confusion_bias: 0.0,
            temporal_smoothing: 0.0,
        };
        let corpus = generate_corpus(0);
        let mut hits = 0usize;
        let mut total = 0usize;
        for session in &corpus {
            let series = generate_predictions(session, &profile, 11).unwrap();
            for row in &series.rows {
                let argmax = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                if argmax == session.activity.index() {
                    hits += 1;
                }
                total += 1;
            }
        }
        let acc = hits as f64 / total as f64;
        assert!((acc - 1.0 / 9.0).abs() < 0.03, "row accuracy {acc}");
    }

    #[test]
    fn folds_partition_sessions_subject_disjoint() {
        let corpus = generate_corpus(0);
        for k in [1usize, 2, 4, 8, 16] {
            let folds = fold_assignments(&corpus, k).unwrap();
            assert_eq!(folds.len(), k);
            let mut seen = vec![false; corpus.len()];
            for fold in &folds {
                assert_eq!(fold.test.len(), 144 / k);
                for &i in &fold.test {
                    assert!(!seen[i], "session {i} in two test sets");
                    seen[i] = true;
                }
                for &i in &fold.train {
                    assert!(!fold.test_subjects.contains(&corpus[i].subject));
                }
                assert_eq!(fold.train.len() + fold.test.len(), corpus.len());
            }
            assert!(seen.iter().all(|&s| s), "test sets must cover the corpus");
        }
        assert!(fold_assignments(&corpus, 3).is_err());
        assert!(fold_assignments(&corpus, 0).is_err());
    }

    #[test]
    fn eight_fold_test_sets_hold_two_subjects() {
        let corpus = generate_corpus(0);
        let folds = fold_assignments(&corpus, 8).unwrap();
        for fold in &folds {
            assert_eq!(fold.test_subjects.len(), 2);
            assert_eq!(fold.test.len(), 18);
        }
    }

    #[test]
    fn prediction_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_corpus(5);
        let profile = ClassifierProfile::video();
        let session = &corpus[100];
        let series = generate_predictions(session, &profile, 5).unwrap();
        let path = dir.path().join("session_100.csv");
        write_prediction_file(&path, session, &series).unwrap();
        let (s2, series2) = read_prediction_file(&path).unwrap();
        assert_eq!(s2, *session);
        assert_eq!(series2.rows.len(), series.rows.len());
        series2.validate().unwrap();
        for (a, b) in series.rows.iter().zip(series2.rows.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-7);
            }
        }
    }
}
