//! Quick gradient sanity check (f64, central differences) and training
//! throughput measurement for the decoder.
//!
//! Usage: cargo run --release -p bgtc-core --example decoder_probe

use std::time::Instant;

use bgtc_core::decoder::train::{batch_schedule, train_with_schedule, Dataset, TrainConfig};
use bgtc_core::decoder::{
    DecoderModel, Gradients, Workspace, IN_SIGNALS, PARAM_GROUPS, SEQ_LEN,
};
use bgtc_core::rates::Segment;
use bgtc_core::synth::Behaviour;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    // Gradient check: analytic vs central differences on a 5-sample batch.
    // Inputs constant over time make interior pool pairs exactly tied (ties
    // shift equally under any perturbation), border pairs differ by whole
    // padding terms, and positive biases keep relu units active: the loss is
    // smooth around the probe point.
    let mut model = DecoderModel::<f64>::new(3);
    model.dense_w.iter_mut().for_each(|w| *w *= 0.02);
    model.conv1_b.iter_mut().for_each(|b| *b = 3.0);
    model.conv2_b.iter_mut().for_each(|b| *b = 18.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut inputs = vec![0.0f64; 5 * SEQ_LEN * IN_SIGNALS];
    for s in 0..5 {
        for c in 0..IN_SIGNALS {
            let level = rng.gen_range(0.2..1.0);
            for t in 0..SEQ_LEN {
                inputs[(s * SEQ_LEN + t) * IN_SIGNALS + c] = level;
            }
        }
    }
    let labels: Vec<usize> = (0..5).map(|_| rng.gen_range(0..3)).collect();
    let mut ws = Workspace::new(5);
    model.batch_forward(&mut ws, &inputs, 5);
    let mut grads = Gradients::zeros();
    model.batch_backward(&mut ws, &labels, &mut grads);

    for step in [1e-4, 1e-5, 1e-6] {
    println!("step {step:e}");
    let mut probe_rng = ChaCha8Rng::seed_from_u64(11);
    for name in PARAM_GROUPS {
        let n = model.param(name).len();
        let mut worst = 0.0f64;
        for _ in 0..30 {
            let i = probe_rng.gen_range(0..n);
            let mut m = model.clone();
            m.param_mut(name)[i] += step;
            m.batch_forward(&mut ws, &inputs, 5);
            let up = m.batch_loss(&ws, &labels);
            m.param_mut(name)[i] -= 2.0 * step;
            m.batch_forward(&mut ws, &inputs, 5);
            let down = m.batch_loss(&ws, &labels);
            let fd = (up - down) / (2.0 * step);
            let an = grads.group(name)[i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-12);
            worst = worst.max(rel);
        }
        println!("{name:14} worst rel err {worst:.3e}");
    }
    }

    // Throughput: one epoch over 2048 samples at batch 32, f32.
    let segments: Vec<Segment> = (0..2048)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            Segment {
                values: (0..SEQ_LEN * IN_SIGNALS)
                    .map(|_| rng.gen_range(0.0..400.0))
                    .collect(),
                width: SEQ_LEN,
                n_signals: IN_SIGNALS,
                session_id: i as u32,
                start: 0,
                label: Behaviour::ALL[(i % 3) as usize],
            }
        })
        .collect();
    let mut model = DecoderModel::<f32>::new(0);
    let data = Dataset::from_segments(&model, &segments).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let schedule = batch_schedule(data.n, 32, 1, 0);
    let t0 = Instant::now();
    train_with_schedule(&mut model, &data, &cfg, &schedule);
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "train epoch: {} samples in {dt:.2}s = {:.0} samples/s (single thread)",
        data.n,
        data.n as f64 / dt
    );
}
