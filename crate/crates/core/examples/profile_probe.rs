//! Sweeps the AR(1) smoothing of the synthetic classifier and reports per-row
//! accuracy plus robot outcomes of both heuristic policies. Used to pick the
//! profile defaults.
//!
//! Usage: cargo run --release -p bgtc-core --example profile_probe

use bgtc_core::heuristics::{decision_stream, Policy};
use bgtc_core::robot::{run_battery, Position, WorldMap};
use bgtc_core::synth::{
    calibrated_gain, generate_corpus, generate_predictions, Behaviour, ClassifierProfile,
    N_ACTIVITIES,
};

fn main() {
    let map = WorldMap::default();
    for target in [0.7430, 0.9375] {
        for rho in [0.0, 0.3, 0.5, 0.7, 0.85] {
            let profile = ClassifierProfile {
                name: format!("sweep_{target}_{rho}"),
                target_accuracy: target,
                confusion_bias: 0.5,
                temporal_smoothing: rho,
            };
            let corpus = generate_corpus(1);
            let gain = calibrated_gain(&profile, 1).unwrap();
            let mut row_hits = 0usize;
            let mut rows_total = 0usize;
            let mut session_hits = 0usize;
            let mut streams: Vec<(Policy, Vec<(Behaviour, Vec<Behaviour>)>)> =
                vec![(Policy::Window, Vec::new()), (Policy::Exponential, Vec::new())];
            for session in &corpus {
                let series = generate_predictions(session, &profile, 1).unwrap();
                let mut mean = [0.0f64; N_ACTIVITIES];
                for row in &series.rows {
                    let argmax = row
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .unwrap()
                        .0;
                    if argmax == session.activity.index() {
                        row_hits += 1;
                    }
                    rows_total += 1;
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
                    session_hits += 1;
                }
                for (policy, acc) in streams.iter_mut() {
                    acc.push((
                        session.behaviour(),
                        decision_stream(&series.rows, *policy),
                    ));
                }
            }
            print!(
                "target={target:.4} rho={rho:.2} gain={gain:5.2} session_acc={:.4} row_acc={:.4}",
                session_hits as f64 / 144.0,
                row_hits as f64 / rows_total as f64
            );
            for (policy, acc) in &streams {
                let result = run_battery(acc, &map, Position::Dock, true);
                print!(
                    "  {}={:.4}",
                    match policy {
                        Policy::Window => "win",
                        Policy::Exponential => "exp",
                    },
                    result.proportion_correct()
                );
            }
            println!();
        }
    }
}
