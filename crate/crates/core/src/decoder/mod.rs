//! 1D convolutional decoder: maps four-signal cortex rate windows onto a
//! three-way behaviour decision. Two same-padded conv layers (128 and 256
//! filters, kernel 7) interspersed with max-pooling, global average pooling
//! and a dense softmax head. Implemented directly over im2col + GEMM; the
//! training loop and checkpoint format live in the submodules.

mod checkpoint;
mod scalar;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use scalar::{gemm_nn, gemm_nt, gemm_tn_acc, Scalar};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rates::Segment;
use crate::seeds;
use crate::synth::Behaviour;

/// Input geometry: four cortex signals over a 200-bin window.
pub const SEQ_LEN: usize = 200;
pub const IN_SIGNALS: usize = 4;
pub const KERNEL: usize = 7;
const PAD: usize = KERNEL / 2;
pub const CONV1_FILTERS: usize = 128;
pub const CONV2_FILTERS: usize = 256;
pub const N_CLASSES: usize = 3;

const POOL1_LEN: usize = SEQ_LEN / 2; // 100
const POOL2_LEN: usize = POOL1_LEN / 2; // 50
const COLS1: usize = IN_SIGNALS * KERNEL; // 28
const COLS2: usize = CONV1_FILTERS * KERNEL; // 896

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error("segment has shape {rows}x{cols}, expected {}x{}", SEQ_LEN, IN_SIGNALS)]
    WrongShape { rows: usize, cols: usize },
    #[error("training data is missing class {0:?}")]
    MissingClass(Behaviour),
    #[error("cannot evaluate on an empty segment list")]
    EmptyEvaluation,
    #[error("malformed checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Probability simplex over (b1, b2, no-action).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionVector(pub [f64; N_CLASSES]);

impl DecisionVector {
    pub fn values(&self) -> &[f64; N_CLASSES] {
        &self.0
    }
}

/// Argmax decision with deterministic tie-breaking: no-action wins ties,
/// then b1, then b2.
pub fn decode(q: &DecisionVector) -> Behaviour {
    let v = q.0;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for b in [Behaviour::NoAction, Behaviour::B1, Behaviour::B2] {
        if v[b.index()] == max {
            return b;
        }
    }
    Behaviour::NoAction
}

/// Trained parameter groups in canonical order.
pub const PARAM_GROUPS: [&str; 6] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense.weight",
    "dense.bias",
];

/// The decoder network. Conv weights are stored row-major as
/// [filters, kernel * in_channels], matching the im2col layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel<S: Scalar> {
    pub conv1_w: Vec<S>,
    pub conv1_b: Vec<S>,
    pub conv2_w: Vec<S>,
    pub conv2_b: Vec<S>,
    pub dense_w: Vec<S>,
    pub dense_b: Vec<S>,
    /// Linear input normalization to [0, 1], fitted on the training split.
    pub norm_min: f64,
    pub norm_max: f64,
}

impl<S: Scalar> DecoderModel<S> {
    /// Fan-in scaled uniform init for weights, zero biases.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("init")]));
        let mut uniform = |n: usize, fan_in: usize| -> Vec<S> {
            let limit = (1.0 / fan_in as f64).sqrt();
            (0..n)
                .map(|_| S::from_f64(rng.gen_range(-limit..limit)))
                .collect()
        };
        DecoderModel {
            conv1_w: uniform(CONV1_FILTERS * COLS1, COLS1),
            conv1_b: vec![S::ZERO; CONV1_FILTERS],
            conv2_w: uniform(CONV2_FILTERS * COLS2, COLS2),
            conv2_b: vec![S::ZERO; CONV2_FILTERS],
            dense_w: uniform(N_CLASSES * CONV2_FILTERS, CONV2_FILTERS),
            dense_b: vec![S::ZERO; N_CLASSES],
            norm_min: 0.0,
            norm_max: 1.0,
        }
    }

    /// Free parameters of the two conv layers: (3,712, 229,632).
    pub fn conv_parameter_counts(&self) -> (usize, usize) {
        (
            self.conv1_w.len() + self.conv1_b.len(),
            self.conv2_w.len() + self.conv2_b.len(),
        )
    }

    pub fn param(&self, name: &str) -> &[S] {
        match name {
            "conv1.weight" => &self.conv1_w,
            "conv1.bias" => &self.conv1_b,
            "conv2.weight" => &self.conv2_w,
            "conv2.bias" => &self.conv2_b,
            "dense.weight" => &self.dense_w,
            "dense.bias" => &self.dense_b,
            _ => panic!("unknown parameter group {name}"),
        }
    }

    pub fn param_mut(&mut self, name: &str) -> &mut [S] {
        match name {
            "conv1.weight" => &mut self.conv1_w,
            "conv1.bias" => &mut self.conv1_b,
            "conv2.weight" => &mut self.conv2_w,
            "conv2.bias" => &mut self.conv2_b,
            "dense.weight" => &mut self.dense_w,
            "dense.bias" => &mut self.dense_b,
            _ => panic!("unknown parameter group {name}"),
        }
    }

    /// Maps raw rate values into the model's normalized input space.
    pub fn normalize(&self, value: f64) -> S {
        let range = self.norm_max - self.norm_min;
        if range <= 0.0 {
            S::ZERO
        } else {
            S::from_f64((value - self.norm_min) / range)
        }
    }

    /// Decision vector for one normalized segment (SEQ_LEN x IN_SIGNALS).
    pub fn forward(&self, input: &[S]) -> Result<DecisionVector, DecoderError> {
        if input.len() != SEQ_LEN * IN_SIGNALS {
            return Err(DecoderError::WrongShape {
                rows: input.len() / IN_SIGNALS.max(1),
                cols: IN_SIGNALS,
            });
        }
        let mut ws = Workspace::new(1);
        let probs = self.batch_forward(&mut ws, input, 1);
        let mut q = [0.0f64; N_CLASSES];
        for (dst, src) in q.iter_mut().zip(probs.iter()) {
            *dst = src.to_f64();
        }
        Ok(DecisionVector(q))
    }

    /// Forward pass over a batch of `b` samples; returns softmax probabilities
    /// [b x 3] and leaves intermediates in the workspace for the backward pass.
    pub fn batch_forward<'w>(&self, ws: &'w mut Workspace<S>, inputs: &[S], b: usize) -> &'w [S] {
        assert!(b <= ws.max_batch && inputs.len() == b * SEQ_LEN * IN_SIGNALS);
        ws.batch = b;
        ws.inputs[..inputs.len()].copy_from_slice(inputs);

        im2col(
            inputs,
            b,
            SEQ_LEN,
            IN_SIGNALS,
            &mut ws.cols1[..b * SEQ_LEN * COLS1],
        );
        let rows1 = b * SEQ_LEN;
        gemm_nt(
            rows1,
            COLS1,
            CONV1_FILTERS,
            &ws.cols1[..rows1 * COLS1],
            &self.conv1_w,
            &mut ws.act1[..rows1 * CONV1_FILTERS],
        );
        bias_relu(&mut ws.act1[..rows1 * CONV1_FILTERS], &self.conv1_b);
        max_pool(
            &ws.act1[..rows1 * CONV1_FILTERS],
            b,
            SEQ_LEN,
            CONV1_FILTERS,
            &mut ws.pool1[..b * POOL1_LEN * CONV1_FILTERS],
            &mut ws.idx1[..b * POOL1_LEN * CONV1_FILTERS],
        );

        im2col(
            &ws.pool1[..b * POOL1_LEN * CONV1_FILTERS],
            b,
            POOL1_LEN,
            CONV1_FILTERS,
            &mut ws.cols2[..b * POOL1_LEN * COLS2],
        );
        let rows2 = b * POOL1_LEN;
        gemm_nt(
            rows2,
            COLS2,
            CONV2_FILTERS,
            &ws.cols2[..rows2 * COLS2],
            &self.conv2_w,
            &mut ws.act2[..rows2 * CONV2_FILTERS],
        );
        bias_relu(&mut ws.act2[..rows2 * CONV2_FILTERS], &self.conv2_b);
        max_pool(
            &ws.act2[..rows2 * CONV2_FILTERS],
            b,
            POOL1_LEN,
            CONV2_FILTERS,
            &mut ws.pool2[..b * POOL2_LEN * CONV2_FILTERS],
            &mut ws.idx2[..b * POOL2_LEN * CONV2_FILTERS],
        );

        // Global average pooling over the remaining 50 steps.
        let gap = &mut ws.gap[..b * CONV2_FILTERS];
        gap.iter_mut().for_each(|g| *g = S::ZERO);
        for s in 0..b {
            for t in 0..POOL2_LEN {
                let row = &ws.pool2[(s * POOL2_LEN + t) * CONV2_FILTERS..][..CONV2_FILTERS];
                for (g, &x) in gap[s * CONV2_FILTERS..][..CONV2_FILTERS].iter_mut().zip(row) {
                    *g += x;
                }
            }
        }
        let inv = S::from_f64(1.0 / POOL2_LEN as f64);
        gap.iter_mut().for_each(|g| *g *= inv);

        gemm_nt(
            b,
            CONV2_FILTERS,
            N_CLASSES,
            &ws.gap[..b * CONV2_FILTERS],
            &self.dense_w,
            &mut ws.logits[..b * N_CLASSES],
        );
        for s in 0..b {
            for (l, &bias) in ws.logits[s * N_CLASSES..][..N_CLASSES]
                .iter_mut()
                .zip(self.dense_b.iter())
            {
                *l += bias;
            }
        }

        for s in 0..b {
            let logits = &ws.logits[s * N_CLASSES..][..N_CLASSES];
            let max = logits
                .iter()
                .copied()
                .fold(S::from_f64(f64::NEG_INFINITY), S::maximum);
            let mut sum = S::ZERO;
            let probs = &mut ws.probs[s * N_CLASSES..][..N_CLASSES];
            for (p, &l) in probs.iter_mut().zip(logits.iter()) {
                *p = (l - max).exp();
                sum += *p;
            }
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        &ws.probs[..b * N_CLASSES]
    }

    /// Mean cross-entropy of the workspace's last forward pass.
    pub fn batch_loss(&self, ws: &Workspace<S>, labels: &[usize]) -> f64 {
        let b = ws.batch;
        assert_eq!(labels.len(), b);
        let mut loss = 0.0;
        for (s, &y) in labels.iter().enumerate() {
            loss -= ws.probs[s * N_CLASSES + y].to_f64().max(1e-300).ln();
        }
        loss / b as f64
    }

    /// Backward pass for mean cross-entropy; accumulates into `grads`.
    pub fn batch_backward(&self, ws: &mut Workspace<S>, labels: &[usize], grads: &mut Gradients<S>) {
        let b = ws.batch;
        assert_eq!(labels.len(), b);
        let invb = S::from_f64(1.0 / b as f64);

        // dlogits = (softmax - onehot) / batch
        for s in 0..b {
            for c in 0..N_CLASSES {
                let delta =
                    ws.probs[s * N_CLASSES + c] - if labels[s] == c { S::ONE } else { S::ZERO };
                ws.dlogits[s * N_CLASSES + c] = delta * invb;
            }
        }

        gemm_tn_acc(
            N_CLASSES,
            b,
            CONV2_FILTERS,
            &ws.dlogits[..b * N_CLASSES],
            &ws.gap[..b * CONV2_FILTERS],
            &mut grads.dense_w,
        );
        for s in 0..b {
            for c in 0..N_CLASSES {
                grads.dense_b[c] += ws.dlogits[s * N_CLASSES + c];
            }
        }
        gemm_nn(
            b,
            N_CLASSES,
            CONV2_FILTERS,
            &ws.dlogits[..b * N_CLASSES],
            &self.dense_w,
            &mut ws.dgap[..b * CONV2_FILTERS],
        );

        // Through GAP, unpool and relu of the second conv block.
        let rows2 = b * POOL1_LEN;
        let inv_gap = S::from_f64(1.0 / POOL2_LEN as f64);
        ws.dact2[..rows2 * CONV2_FILTERS]
            .iter_mut()
            .for_each(|x| *x = S::ZERO);
        for s in 0..b {
            for t in 0..POOL2_LEN {
                for c in 0..CONV2_FILTERS {
                    let g = ws.dgap[s * CONV2_FILTERS + c] * inv_gap;
                    let src = ws.idx2[(s * POOL2_LEN + t) * CONV2_FILTERS + c] as usize;
                    ws.dact2[(s * POOL1_LEN + src) * CONV2_FILTERS + c] += g;
                }
            }
        }
        for (d, &a) in ws.dact2[..rows2 * CONV2_FILTERS]
            .iter_mut()
            .zip(ws.act2[..rows2 * CONV2_FILTERS].iter())
        {
            if a <= S::ZERO {
                *d = S::ZERO;
            }
        }

        gemm_tn_acc(
            CONV2_FILTERS,
            rows2,
            COLS2,
            &ws.dact2[..rows2 * CONV2_FILTERS],
            &ws.cols2[..rows2 * COLS2],
            &mut grads.conv2_w,
        );
        for r in 0..rows2 {
            for c in 0..CONV2_FILTERS {
                grads.conv2_b[c] += ws.dact2[r * CONV2_FILTERS + c];
            }
        }
        gemm_nn(
            rows2,
            CONV2_FILTERS,
            COLS2,
            &ws.dact2[..rows2 * CONV2_FILTERS],
            &self.conv2_w,
            &mut ws.dcols2[..rows2 * COLS2],
        );

        // col2im back to the first pooling layer, then unpool + relu.
        ws.dpool1[..b * POOL1_LEN * CONV1_FILTERS]
            .iter_mut()
            .for_each(|x| *x = S::ZERO);
        col2im(
            &ws.dcols2[..rows2 * COLS2],
            b,
            POOL1_LEN,
            CONV1_FILTERS,
            &mut ws.dpool1[..b * POOL1_LEN * CONV1_FILTERS],
        );
        let rows1 = b * SEQ_LEN;
        ws.dact1[..rows1 * CONV1_FILTERS]
            .iter_mut()
            .for_each(|x| *x = S::ZERO);
        for s in 0..b {
            for t in 0..POOL1_LEN {
                for c in 0..CONV1_FILTERS {
                    let g = ws.dpool1[(s * POOL1_LEN + t) * CONV1_FILTERS + c];
                    let src = ws.idx1[(s * POOL1_LEN + t) * CONV1_FILTERS + c] as usize;
                    ws.dact1[(s * SEQ_LEN + src) * CONV1_FILTERS + c] += g;
                }
            }
        }
        for (d, &a) in ws.dact1[..rows1 * CONV1_FILTERS]
            .iter_mut()
            .zip(ws.act1[..rows1 * CONV1_FILTERS].iter())
        {
            if a <= S::ZERO {
                *d = S::ZERO;
            }
        }

        gemm_tn_acc(
            CONV1_FILTERS,
            rows1,
            COLS1,
            &ws.dact1[..rows1 * CONV1_FILTERS],
            &ws.cols1[..rows1 * COLS1],
            &mut grads.conv1_w,
        );
        for r in 0..rows1 {
            for c in 0..CONV1_FILTERS {
                grads.conv1_b[c] += ws.dact1[r * CONV1_FILTERS + c];
            }
        }
    }
}

/// Zero-padded im2col for same-length 1D convolution, batch-flattened rows.
fn im2col<S: Scalar>(input: &[S], b: usize, len: usize, channels: usize, cols: &mut [S]) {
    let width = channels * KERNEL;
    for s in 0..b {
        let sample = &input[s * len * channels..][..len * channels];
        for t in 0..len {
            let row = &mut cols[(s * len + t) * width..][..width];
            for k in 0..KERNEL {
                let src_t = t as isize + k as isize - PAD as isize;
                let dst = &mut row[k * channels..][..channels];
                if src_t < 0 || src_t >= len as isize {
                    dst.iter_mut().for_each(|x| *x = S::ZERO);
                } else {
                    dst.copy_from_slice(&sample[src_t as usize * channels..][..channels]);
                }
            }
        }
    }
}

/// Transpose of `im2col`: scatter-adds column gradients back onto the input.
fn col2im<S: Scalar>(cols: &[S], b: usize, len: usize, channels: usize, dinput: &mut [S]) {
    let width = channels * KERNEL;
    for s in 0..b {
        let dst_sample = &mut dinput[s * len * channels..][..len * channels];
        for t in 0..len {
            let row = &cols[(s * len + t) * width..][..width];
            for k in 0..KERNEL {
                let src_t = t as isize + k as isize - PAD as isize;
                if src_t < 0 || src_t >= len as isize {
                    continue;
                }
                let dst = &mut dst_sample[src_t as usize * channels..][..channels];
                for (d, &g) in dst.iter_mut().zip(row[k * channels..][..channels].iter()) {
                    *d += g;
                }
            }
        }
    }
}

fn bias_relu<S: Scalar>(act: &mut [S], bias: &[S]) {
    let n = bias.len();
    for row in act.chunks_exact_mut(n) {
        for (x, &b) in row.iter_mut().zip(bias.iter()) {
            *x = (*x + b).maximum(S::ZERO);
        }
    }
}

/// Non-overlapping width-2 max pooling over time; records winner offsets.
fn max_pool<S: Scalar>(
    input: &[S],
    b: usize,
    len: usize,
    channels: usize,
    output: &mut [S],
    idx: &mut [u32],
) {
    let half = len / 2;
    for s in 0..b {
        for t in 0..half {
            let a = &input[(s * len + 2 * t) * channels..][..channels];
            let bb = &input[(s * len + 2 * t + 1) * channels..][..channels];
            let out = &mut output[(s * half + t) * channels..][..channels];
            let ix = &mut idx[(s * half + t) * channels..][..channels];
            for c in 0..channels {
                if bb[c] > a[c] {
                    out[c] = bb[c];
                    ix[c] = (2 * t + 1) as u32;
                } else {
                    out[c] = a[c];
                    ix[c] = (2 * t) as u32;
                }
            }
        }
    }
}

/// Reusable buffers for batched passes.
pub struct Workspace<S: Scalar> {
    max_batch: usize,
    batch: usize,
    inputs: Vec<S>,
    cols1: Vec<S>,
    act1: Vec<S>,
    pool1: Vec<S>,
    idx1: Vec<u32>,
    cols2: Vec<S>,
    act2: Vec<S>,
    pool2: Vec<S>,
    idx2: Vec<u32>,
    gap: Vec<S>,
    logits: Vec<S>,
    probs: Vec<S>,
    dlogits: Vec<S>,
    dgap: Vec<S>,
    dact2: Vec<S>,
    dcols2: Vec<S>,
    dpool1: Vec<S>,
    dact1: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    pub fn new(max_batch: usize) -> Self {
        let b = max_batch.max(1);
        Workspace {
            max_batch: b,
            batch: 0,
            inputs: vec![S::ZERO; b * SEQ_LEN * IN_SIGNALS],
            cols1: vec![S::ZERO; b * SEQ_LEN * COLS1],
            act1: vec![S::ZERO; b * SEQ_LEN * CONV1_FILTERS],
            pool1: vec![S::ZERO; b * POOL1_LEN * CONV1_FILTERS],
            idx1: vec![0; b * POOL1_LEN * CONV1_FILTERS],
            cols2: vec![S::ZERO; b * POOL1_LEN * COLS2],
            act2: vec![S::ZERO; b * POOL1_LEN * CONV2_FILTERS],
            pool2: vec![S::ZERO; b * POOL2_LEN * CONV2_FILTERS],
            idx2: vec![0; b * POOL2_LEN * CONV2_FILTERS],
            gap: vec![S::ZERO; b * CONV2_FILTERS],
            logits: vec![S::ZERO; b * N_CLASSES],
            probs: vec![S::ZERO; b * N_CLASSES],
            dlogits: vec![S::ZERO; b * N_CLASSES],
            dgap: vec![S::ZERO; b * CONV2_FILTERS],
            dact2: vec![S::ZERO; b * POOL1_LEN * CONV2_FILTERS],
            dcols2: vec![S::ZERO; b * POOL1_LEN * COLS2],
            dpool1: vec![S::ZERO; b * POOL1_LEN * CONV1_FILTERS],
            dact1: vec![S::ZERO; b * SEQ_LEN * CONV1_FILTERS],
        }
    }
}

/// Parameter gradients, same shapes as the model.
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar> {
    pub conv1_w: Vec<S>,
    pub conv1_b: Vec<S>,
    pub conv2_w: Vec<S>,
    pub conv2_b: Vec<S>,
    pub dense_w: Vec<S>,
    pub dense_b: Vec<S>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros() -> Self {
        Gradients {
            conv1_w: vec![S::ZERO; CONV1_FILTERS * COLS1],
            conv1_b: vec![S::ZERO; CONV1_FILTERS],
            conv2_w: vec![S::ZERO; CONV2_FILTERS * COLS2],
            conv2_b: vec![S::ZERO; CONV2_FILTERS],
            dense_w: vec![S::ZERO; N_CLASSES * CONV2_FILTERS],
            dense_b: vec![S::ZERO; N_CLASSES],
        }
    }

    pub fn clear(&mut self) {
        for name in PARAM_GROUPS {
            self.group_mut(name).iter_mut().for_each(|g| *g = S::ZERO);
        }
    }

    pub fn group(&self, name: &str) -> &[S] {
        match name {
            "conv1.weight" => &self.conv1_w,
            "conv1.bias" => &self.conv1_b,
            "conv2.weight" => &self.conv2_w,
            "conv2.bias" => &self.conv2_b,
            "dense.weight" => &self.dense_w,
            "dense.bias" => &self.dense_b,
            _ => panic!("unknown parameter group {name}"),
        }
    }

    pub fn group_mut(&mut self, name: &str) -> &mut [S] {
        match name {
            "conv1.weight" => &mut self.conv1_w,
            "conv1.bias" => &mut self.conv1_b,
            "conv2.weight" => &mut self.conv2_w,
            "conv2.bias" => &mut self.conv2_b,
            "dense.weight" => &mut self.dense_w,
            "dense.bias" => &mut self.dense_b,
            _ => panic!("unknown parameter group {name}"),
        }
    }
}

/// Normalization constants fitted on training segments: global min and max.
pub fn fit_norm<'a>(segments: impl IntoIterator<Item = &'a Segment>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for seg in segments {
        for &v in &seg.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

/// Converts one segment into the model's normalized input buffer.
pub fn segment_input<S: Scalar>(
    model: &DecoderModel<S>,
    segment: &Segment,
) -> Result<Vec<S>, DecoderError> {
    if segment.width != SEQ_LEN || segment.n_signals != IN_SIGNALS {
        return Err(DecoderError::WrongShape {
            rows: segment.width,
            cols: segment.n_signals,
        });
    }
    Ok(segment.values.iter().map(|&v| model.normalize(v)).collect())
}

/// Decodes a list of segments in order, batching internally.
pub fn decode_segments<S: Scalar>(
    model: &DecoderModel<S>,
    segments: &[Segment],
) -> Result<Vec<DecisionVector>, DecoderError> {
    let chunk = 64usize.min(segments.len().max(1));
    let mut ws = Workspace::new(chunk);
    let mut out = Vec::with_capacity(segments.len());
    for group in segments.chunks(chunk) {
        let mut inputs = Vec::with_capacity(group.len() * SEQ_LEN * IN_SIGNALS);
        for seg in group {
            inputs.extend(segment_input(model, seg)?);
        }
        let probs = model.batch_forward(&mut ws, &inputs, group.len());
        for s in 0..group.len() {
            let mut q = [0.0f64; N_CLASSES];
            for (c, dst) in q.iter_mut().enumerate() {
                *dst = probs[s * N_CLASSES + c].to_f64();
            }
            out.push(DecisionVector(q));
        }
    }
    Ok(out)
}

/// Classification metrics over labelled segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Rows are true classes, columns predicted.
    pub confusion: [[usize; N_CLASSES]; N_CLASSES],
    pub n: usize,
}

pub fn evaluate<S: Scalar>(
    model: &DecoderModel<S>,
    segments: &[Segment],
) -> Result<Metrics, DecoderError> {
    if segments.is_empty() {
        return Err(DecoderError::EmptyEvaluation);
    }
    let decisions = decode_segments(model, segments)?;
    let mut confusion = [[0usize; N_CLASSES]; N_CLASSES];
    for (seg, q) in segments.iter().zip(decisions.iter()) {
        confusion[seg.label.index()][decode(q).index()] += 1;
    }
    Ok(metrics_from_confusion(confusion))
}

pub fn metrics_from_confusion(confusion: [[usize; N_CLASSES]; N_CLASSES]) -> Metrics {
    let n: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..N_CLASSES).map(|c| confusion[c][c]).sum();
    let mut f1_sum = 0.0;
    for c in 0..N_CLASSES {
        let tp = confusion[c][c] as f64;
        let fp: f64 = (0..N_CLASSES)
            .filter(|&r| r != c)
            .map(|r| confusion[r][c] as f64)
            .sum();
        let fne: f64 = (0..N_CLASSES)
            .filter(|&p| p != c)
            .map(|p| confusion[c][p] as f64)
            .sum();
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fne > 0.0 { tp / (tp + fne) } else { 0.0 };
        if precision + recall > 0.0 {
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Metrics {
        accuracy: correct as f64 / n.max(1) as f64,
        macro_f1: f1_sum / N_CLASSES as f64,
        confusion,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_parameter_counts_are_pinned() {
        let model = DecoderModel::<f32>::new(0);
        assert_eq!(model.conv_parameter_counts(), (3_712, 229_632));
    }

    #[test]
    fn zero_input_on_zero_bias_model_is_uniform() {
        let model = DecoderModel::<f64>::new(1);
        let q = model.forward(&vec![0.0; SEQ_LEN * IN_SIGNALS]).unwrap();
        assert_eq!(q.0[0], q.0[1]);
        assert_eq!(q.0[1], q.0[2]);
        assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fresh_models_emit_near_uniform_outputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for seed in 0..100 {
            let model = DecoderModel::<f32>::new(seed);
            let input: Vec<f32> = (0..SEQ_LEN * IN_SIGNALS)
                .map(|_| rng.gen_range(0.0..1.0))
                .collect();
            let q = model.forward(&input).unwrap();
            for &p in q.values() {
                assert!((p - 1.0 / 3.0).abs() < 0.15, "seed {seed}: {q:?}");
            }
            assert!((q.0.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = DecoderModel::<f32>::new(3);
        let input: Vec<f32> = (0..SEQ_LEN * IN_SIGNALS)
            .map(|i| (i % 17) as f32 / 17.0)
            .collect();
        assert_eq!(model.forward(&input).unwrap(), model.forward(&input).unwrap());
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let model = DecoderModel::<f32>::new(0);
        assert!(matches!(
            model.forward(&vec![0.0; 100]),
            Err(DecoderError::WrongShape { .. })
        ));
    }

    #[test]
    fn decode_tie_breaks_to_no_action_then_b1() {
        assert_eq!(decode(&DecisionVector([0.2, 0.7, 0.1])), Behaviour::B2);
        assert_eq!(decode(&DecisionVector([0.5, 0.5, 0.0])), Behaviour::B1);
        let third = 1.0 / 3.0;
        assert_eq!(
            decode(&DecisionVector([third, third, third])),
            Behaviour::NoAction
        );
    }

    #[test]
    fn batched_and_single_forward_agree() {
        let model = DecoderModel::<f64>::new(9);
        let mut ws = Workspace::new(4);
        let inputs: Vec<f64> = (0..4 * SEQ_LEN * IN_SIGNALS)
            .map(|i| ((i * 31) % 97) as f64 / 97.0)
            .collect();
        let probs = model.batch_forward(&mut ws, &inputs, 4).to_vec();
        for s in 0..4 {
            let one = model
                .forward(&inputs[s * SEQ_LEN * IN_SIGNALS..][..SEQ_LEN * IN_SIGNALS])
                .unwrap();
            for c in 0..N_CLASSES {
                assert!((one.0[c] - probs[s * N_CLASSES + c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metrics_match_hand_counts() {
        let perfect = metrics_from_confusion([[10, 0, 0], [0, 10, 0], [0, 0, 10]]);
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.macro_f1, 1.0);

        let random = metrics_from_confusion([[4, 3, 3], [3, 4, 3], [3, 3, 4]]);
        assert!((random.accuracy - 0.4).abs() < 1e-12);

        // Balanced classes with similar recalls: accuracy and macro F1 agree.
        let balanced = metrics_from_confusion([[90, 5, 5], [6, 88, 6], [5, 7, 88]]);
        assert!((balanced.accuracy - balanced.macro_f1).abs() < 0.02);
    }

    #[test]
    fn evaluate_empty_errors() {
        let model = DecoderModel::<f32>::new(0);
        assert!(matches!(
            evaluate(&model, &[]),
            Err(DecoderError::EmptyEvaluation)
        ));
    }

    #[test]
    fn fit_norm_spans_data() {
        use crate::rates::Segment;
        let mk = |fill: f64| Segment {
            values: vec![fill; SEQ_LEN * IN_SIGNALS],
            width: SEQ_LEN,
            n_signals: IN_SIGNALS,
            session_id: 0,
            start: 0,
            label: Behaviour::B1,
        };
        let a = mk(2.0);
        let mut b = mk(5.0);
        b.values[7] = -1.0;
        let (lo, hi) = fit_norm([a, b].iter());
        assert_eq!((lo, hi), (-1.0, 5.0));
    }
}
