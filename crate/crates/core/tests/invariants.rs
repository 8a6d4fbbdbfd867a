//! Cross-module property tests that are too heavy for unit scope: circuit
//! response calibration, stability fuzzing, synthetic-classifier calibration
//! bands, decoder capacity, and full-run reproducibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bgtc_core::circuit::{build_circuit, run_custom, CircuitPreset, Region, DURATION_MS};
use bgtc_core::decoder::{self, train::TrainConfig};
use bgtc_core::harness::{self, Approach, Config};
use bgtc_core::rates::{firing_rates, segment, select_cortex, SEGMENT_STRIDE, SEGMENT_WIDTH};
use bgtc_core::synth::{self, Behaviour, ClassifierProfile, N_ACTIVITIES};

fn stimulus_row(s1: f64, s2: f64) -> [f64; N_ACTIVITIES] {
    let mut row = [0.0; N_ACTIVITIES];
    row[0] = s1;
    row[3] = s2;
    row[6] = 1.0 - s1 - s2;
    row
}

/// Mean summed CtxRS rate of one channel over a record.
fn ctxrs_mean(record: &bgtc_core::circuit::SpikeRecord, channel: usize, skip_bins: usize) -> f64 {
    let matrix = firing_rates(record, 20).unwrap();
    let col = matrix.signal_index(channel, Region::CtxRS).unwrap();
    (skip_bins..matrix.n_bins)
        .map(|b| matrix.at(b, col))
        .sum::<f64>()
        / (matrix.n_bins - skip_bins) as f64
}

#[test]
fn cortical_response_is_monotone_in_stimulus() {
    // Time-averaged CtxRS rate must not decrease with constant stimulus
    // level; a small slack absorbs run-to-run noise of 10 s averages.
    for preset in [CircuitPreset::rat(), CircuitPreset::marmoset()] {
        let circuit = build_circuit(&preset, 2, 1);
        let mut previous = f64::NEG_INFINITY;
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let rows = vec![stimulus_row(s, 0.0); 20];
            let record = run_custom(&circuit, &rows, 10_000, 7).unwrap();
            let rate = ctxrs_mean(&record, 0, 100);
            let slack = 0.05 * previous.abs() + 1.0;
            assert!(
                rate >= previous - slack,
                "{}: rate {rate:.1} Hz at s={s} fell below {previous:.1} Hz",
                preset.name
            );
            previous = previous.max(rate);
        }
    }
}

#[test]
fn circuit_survives_100_random_schedules() {
    // Stability: no non-finite state over full 70 s runs under arbitrary
    // simplex-valued stimulus schedules.
    let circuit = build_circuit(&CircuitPreset::rat(), 2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(321);
    for trial in 0..100u64 {
        let rows: Vec<[f64; N_ACTIVITIES]> = (0..140)
            .map(|_| {
                let mut row = [0.0f64; N_ACTIVITIES];
                let mut sum = 0.0;
                for x in row.iter_mut() {
                    *x = rng.gen::<f64>().powi(4);
                    sum += *x;
                }
                for x in row.iter_mut() {
                    *x /= sum;
                }
                row
            })
            .collect();
        let record = run_custom(&circuit, &rows, DURATION_MS, trial).unwrap();
        assert_eq!(record.duration_ms, DURATION_MS, "trial {trial}");
    }
}

#[test]
fn classifier_profiles_calibrate_within_two_points() {
    // Corpus-level calibration over 144 sessions x 140 rows (20,160 rows).
    for profile in [ClassifierProfile::imu_ambient(), ClassifierProfile::video()] {
        let corpus = synth::generate_corpus(5);
        let mut correct = 0usize;
        for session in &corpus {
            let series = synth::generate_predictions(session, &profile, 5).unwrap();
            let mut mean = [0.0f64; N_ACTIVITIES];
            for row in &series.rows {
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
        let accuracy = correct as f64 / corpus.len() as f64;
        assert!(
            (accuracy - profile.target_accuracy).abs() <= 0.02,
            "{}: corpus accuracy {accuracy} vs target {}",
            profile.name,
            profile.target_accuracy
        );
    }
}

#[test]
fn decoder_overfits_a_32_sample_subset() {
    // Capacity check: 100% training accuracy on a 32-sample subset of real
    // circuit outputs within 200 epochs.
    let circuit = build_circuit(&CircuitPreset::rat(), 2, 1);
    let mut segments = Vec::new();
    for (activity, behaviour) in [
        (0usize, Behaviour::B1),
        (3, Behaviour::B2),
        (6, Behaviour::NoAction),
    ] {
        let mut row = [0.0; N_ACTIVITIES];
        row[activity] = 1.0;
        let record = run_custom(&circuit, &vec![row; 140], DURATION_MS, activity as u64).unwrap();
        let cortex = select_cortex(&firing_rates(&record, 20).unwrap());
        let all = segment(&cortex, SEGMENT_WIDTH, SEGMENT_STRIDE, activity as u32, behaviour)
            .unwrap();
        segments.extend(all.into_iter().step_by(6)); // 11 spread-out windows
    }
    segments.truncate(32);
    let labels: Vec<Behaviour> = segments.iter().map(|s| s.label).collect();
    assert!(labels.contains(&Behaviour::B1) && labels.contains(&Behaviour::NoAction));

    let mut reached_full = false;
    for epochs in [50, 200] {
        let cfg = TrainConfig {
            epochs,
            ..TrainConfig::default()
        };
        let (model, _) = decoder::train::train::<f32>(&segments, &cfg, 11).unwrap();
        let metrics = decoder::evaluate(&model, &segments).unwrap();
        if metrics.accuracy == 1.0 {
            reached_full = true;
            break;
        }
    }
    assert!(reached_full, "decoder failed to memorize 32 samples in 200 epochs");
}

#[test]
fn decoder_outputs_are_simplexes() {
    let model = decoder::DecoderModel::<f32>::new(77);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let input: Vec<f32> = (0..decoder::SEQ_LEN * decoder::IN_SIGNALS)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let q = model.forward(&input).unwrap();
        assert!(q.values().iter().all(|&p| p >= 0.0));
        assert!((q.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn ground_truth_run_is_byte_reproducible() {
    // Full provenance: identical config and seed reproduce identical bytes,
    // including the report.
    let base = tempfile::tempdir().unwrap();
    let mut cfg = Config::default();
    cfg.approaches = vec![Approach::GroundTruth];
    cfg.profiles = vec![];
    cfg.presets = vec![];
    cfg.workers = 2;
    let out_a = base.path().join("a");
    let out_b = base.path().join("b");
    harness::run_all(&cfg, &out_a, 9).unwrap();
    harness::run_all(&cfg, &out_b, 9).unwrap();
    for file in ["report.kv", "report.txt", "config.kv"] {
        assert_eq!(
            std::fs::read(out_a.join(file)).unwrap(),
            std::fs::read(out_b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }
    let frag = |root: &std::path::Path| {
        std::fs::read(
            harness::Layout::new(root, 9).fragment_file("ground_truth"),
        )
        .unwrap()
    };
    assert_eq!(frag(&out_a), frag(&out_b));
}
