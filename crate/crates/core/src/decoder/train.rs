//! Decoder training: Adam over mean cross-entropy with a fully seeded batch
//! schedule, so a training run is a pure function of (data, config, seed).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    fit_norm, segment_input, DecoderError, DecoderModel, Gradients, Scalar, Workspace,
    IN_SIGNALS, PARAM_GROUPS, SEQ_LEN,
};
use crate::rates::Segment;
use crate::seeds;
use crate::synth::Behaviour;

/// Training hyperparameters. Defaults: 40 epochs, batch 32, Adam at 1e-3,
/// categorical cross-entropy, inputs normalized linearly to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 40,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Pre-normalized training set.
pub struct Dataset<S: Scalar> {
    pub inputs: Vec<S>,
    pub labels: Vec<usize>,
    pub n: usize,
}

impl<S: Scalar> Dataset<S> {
    /// Normalizes segments with the model's constants and checks labels.
    pub fn from_segments(
        model: &DecoderModel<S>,
        segments: &[Segment],
    ) -> Result<Dataset<S>, DecoderError> {
        let mut inputs = Vec::with_capacity(segments.len() * SEQ_LEN * IN_SIGNALS);
        let mut labels = Vec::with_capacity(segments.len());
        for seg in segments {
            inputs.extend(segment_input(model, seg)?);
            labels.push(seg.label.index());
        }
        Ok(Dataset {
            inputs,
            labels,
            n: segments.len(),
        })
    }

    fn sample(&self, i: usize) -> &[S] {
        &self.inputs[i * SEQ_LEN * IN_SIGNALS..][..SEQ_LEN * IN_SIGNALS]
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
}

struct Adam<S: Scalar> {
    m: Gradients<S>,
    v: Gradients<S>,
    t: u64,
}

impl<S: Scalar> Adam<S> {
    fn new() -> Self {
        Adam {
            m: Gradients::zeros(),
            v: Gradients::zeros(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut DecoderModel<S>, grads: &Gradients<S>, cfg: &TrainConfig) {
        self.t += 1;
        let b1 = S::from_f64(cfg.beta1);
        let b2 = S::from_f64(cfg.beta2);
        let one_mb1 = S::from_f64(1.0 - cfg.beta1);
        let one_mb2 = S::from_f64(1.0 - cfg.beta2);
        let correct1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let correct2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let rate = S::from_f64(cfg.learning_rate * correct2.sqrt() / correct1);
        let eps = S::from_f64(cfg.epsilon * correct2.sqrt());
        for name in PARAM_GROUPS {
            let g = grads.group(name);
            let m = self.m.group_mut(name);
            for (mi, &gi) in m.iter_mut().zip(g.iter()) {
                *mi = b1 * *mi + one_mb1 * gi;
            }
            let v = self.v.group_mut(name);
            for (vi, &gi) in v.iter_mut().zip(g.iter()) {
                *vi = b2 * *vi + one_mb2 * gi * gi;
            }
            let m = self.m.group(name);
            let v = self.v.group(name);
            let w = model.param_mut(name);
            for ((wi, &mi), &vi) in w.iter_mut().zip(m.iter()).zip(v.iter()) {
                *wi -= rate * mi / (vi.sqrt() + eps);
            }
        }
    }
}

/// Seeded permutation of sample indices for one epoch.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("shuffle"), epoch as u64]));
    order.shuffle(&mut rng);
    order
}

/// Full deterministic batch schedule: epochs of shuffled index chunks.
pub fn batch_schedule(n: usize, batch_size: usize, epochs: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut schedule = Vec::new();
    for epoch in 0..epochs {
        let order = epoch_order(n, seed, epoch);
        for chunk in order.chunks(batch_size.max(1)) {
            schedule.push(chunk.to_vec());
        }
    }
    schedule
}

/// Fits normalization on the training segments, initializes a model and
/// trains it per the config. Errors if any class is absent from the data.
pub fn train<S: Scalar>(
    segments: &[Segment],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(DecoderModel<S>, TrainReport), DecoderError> {
    for b in Behaviour::ALL {
        if !segments.iter().any(|s| s.label == b) {
            return Err(DecoderError::MissingClass(b));
        }
    }
    let mut model = DecoderModel::<S>::new(seed);
    let (lo, hi) = fit_norm(segments.iter());
    model.norm_min = lo;
    model.norm_max = hi;
    let data = Dataset::from_segments(&model, segments)?;
    let schedule = batch_schedule(data.n, cfg.batch_size, cfg.epochs, seed);
    let report = train_with_schedule(&mut model, &data, cfg, &schedule);
    Ok((model, report))
}

/// Drives updates over an explicit batch schedule. Updates depend only on the
/// sequence of batch contents, which makes the schedule contract testable.
pub fn train_with_schedule<S: Scalar>(
    model: &mut DecoderModel<S>,
    data: &Dataset<S>,
    cfg: &TrainConfig,
    schedule: &[Vec<usize>],
) -> TrainReport {
    let max_batch = schedule.iter().map(|b| b.len()).max().unwrap_or(1);
    let mut ws = Workspace::new(max_batch);
    let mut grads = Gradients::zeros();
    let mut adam = Adam::new();
    let mut inputs = Vec::with_capacity(max_batch * SEQ_LEN * IN_SIGNALS);
    let mut labels = Vec::with_capacity(max_batch);

    let batches_per_epoch = schedule.len() / cfg.epochs.max(1);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut epoch_loss = 0.0;
    let mut epoch_batches = 0;

    for (i, batch) in schedule.iter().enumerate() {
        inputs.clear();
        labels.clear();
        for &idx in batch {
            inputs.extend_from_slice(data.sample(idx));
            labels.push(data.labels[idx]);
        }
        model.batch_forward(&mut ws, &inputs, batch.len());
        epoch_loss += model.batch_loss(&ws, &labels);
        epoch_batches += 1;
        grads.clear();
        model.batch_backward(&mut ws, &labels, &mut grads);
        adam.step(model, &grads, cfg);

        let end_of_epoch =
            (batches_per_epoch > 0 && (i + 1) % batches_per_epoch == 0) || i + 1 == schedule.len();
        if end_of_epoch && epoch_batches > 0 {
            loss_curve.push(epoch_loss / epoch_batches as f64);
            epoch_loss = 0.0;
            epoch_batches = 0;
        }
    }
    TrainReport { loss_curve }
}

/// Mean loss over a whole dataset without updating anything.
pub fn dataset_loss<S: Scalar>(model: &DecoderModel<S>, data: &Dataset<S>) -> f64 {
    let chunk = 64usize.min(data.n.max(1));
    let mut ws = Workspace::new(chunk);
    let mut total = 0.0;
    let mut seen = 0usize;
    let mut i = 0;
    while i < data.n {
        let b = chunk.min(data.n - i);
        let inputs: Vec<S> = (i..i + b).flat_map(|s| data.sample(s).iter().copied()).collect();
        let labels: Vec<usize> = data.labels[i..i + b].to_vec();
        model.batch_forward(&mut ws, &inputs, b);
        total += model.batch_loss(&ws, &labels) * b as f64;
        seen += b;
        i += b;
    }
    total / seen.max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::Segment;

    /// Class-coded constant-level segments, trivially separable.
    fn toy_segments(n_per_class: usize) -> Vec<Segment> {
        let mut segments = Vec::new();
        for (level, label) in [
            (0.1, Behaviour::B1),
            (0.5, Behaviour::B2),
            (0.9, Behaviour::NoAction),
        ] {
            for i in 0..n_per_class {
                let jitter = (i as f64) * 1e-3;
                segments.push(Segment {
                    values: vec![level + jitter; SEQ_LEN * IN_SIGNALS],
                    width: SEQ_LEN,
                    n_signals: IN_SIGNALS,
                    session_id: i as u32,
                    start: 0,
                    label,
                });
            }
        }
        segments
    }

    #[test]
    fn separable_toy_set_reaches_full_training_accuracy() {
        let segments = toy_segments(34); // ~100 segments
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        let (model, report) = train::<f32>(&segments, &cfg, 7).unwrap();
        assert_eq!(report.loss_curve.len(), 40);
        assert!(report.loss_curve[39] < report.loss_curve[0]);
        let metrics = super::super::evaluate(&model, &segments).unwrap();
        assert_eq!(metrics.accuracy, 1.0, "confusion {:?}", metrics.confusion);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let segments = toy_segments(4);
        let cfg = TrainConfig {
            epochs: 2,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let (trained, report) = train::<f64>(&segments, &cfg, 3).unwrap();
        let mut fresh = DecoderModel::<f64>::new(3);
        fresh.norm_min = trained.norm_min;
        fresh.norm_max = trained.norm_max;
        assert_eq!(trained, fresh);
        let spread = report.loss_curve[0] - report.loss_curve[report.loss_curve.len() - 1];
        assert!(spread.abs() < 1e-9, "loss must stay flat: {report:?}");
    }

    #[test]
    fn missing_class_is_rejected() {
        let mut segments = toy_segments(3);
        segments.retain(|s| s.label != Behaviour::B2);
        assert!(matches!(
            train::<f32>(&segments, &TrainConfig::default(), 0),
            Err(DecoderError::MissingClass(Behaviour::B2))
        ));
    }

    #[test]
    fn updates_depend_only_on_batch_contents() {
        // Duplicating the dataset and pointing the same schedule at the
        // duplicate copies must produce identical weights.
        let segments = toy_segments(4); // 12 samples
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };

        let mut model_a = DecoderModel::<f64>::new(11);
        let (lo, hi) = fit_norm(segments.iter());
        model_a.norm_min = lo;
        model_a.norm_max = hi;
        let mut model_b = model_a.clone();

        let data = Dataset::from_segments(&model_a, &segments).unwrap();
        let doubled: Vec<Segment> = segments.iter().chain(segments.iter()).cloned().collect();
        let data2 = Dataset::from_segments(&model_b, &doubled).unwrap();

        let schedule = batch_schedule(data.n, cfg.batch_size, cfg.epochs, 5);
        // Same batches, but referencing the duplicate copies (index + n).
        let shifted: Vec<Vec<usize>> = schedule
            .iter()
            .map(|batch| batch.iter().map(|&i| i + segments.len()).collect())
            .collect();

        train_with_schedule(&mut model_a, &data, &cfg, &schedule);
        train_with_schedule(&mut model_b, &data2, &cfg, &shifted);
        for name in PARAM_GROUPS {
            assert_eq!(model_a.param(name), model_b.param(name), "group {name}");
        }
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let segments = toy_segments(4);
        let cfg = TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        };
        let (a, _) = train::<f32>(&segments, &cfg, 21).unwrap();
        let (b, _) = train::<f32>(&segments, &cfg, 21).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_covers_every_sample_each_epoch() {
        let schedule = batch_schedule(10, 3, 2, 9);
        assert_eq!(schedule.len(), 8); // 4 batches x 2 epochs
        for epoch in 0..2 {
            let mut seen: Vec<usize> = schedule[epoch * 4..(epoch + 1) * 4]
                .iter()
                .flatten()
                .copied()
                .collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
        assert_ne!(epoch_order(10, 9, 0), epoch_order(10, 9, 1));
    }
}
