//! Prints steady-state region rates of both presets across stimulus levels.
//! Used to pick the preset calibration constants (biases, weights, gains).
//!
//! Usage: cargo run --release -p bgtc-core --example circuit_probe

use std::time::Instant;

use bgtc_core::circuit::{build_circuit, run_custom, CircuitPreset, Region, N_REGIONS};
use bgtc_core::rates::firing_rates;
use bgtc_core::synth::N_ACTIVITIES;

fn constant_row(s1: f64, s2: f64) -> [f64; N_ACTIVITIES] {
    let mut row = [0.0; N_ACTIVITIES];
    row[0] = s1; // a1 -> b1
    row[3] = s2; // a4 -> b2
    row[6] = 1.0 - s1 - s2; // a7 -> no action
    row
}

fn main() {
    for preset in [CircuitPreset::rat(), CircuitPreset::marmoset()] {
        let circuit = build_circuit(&preset, 2, 1);
        println!(
            "== preset {} ({} neurons, {} synapses) ==",
            preset.name,
            circuit.n_neurons(),
            circuit.n_synapses()
        );
        let n = preset.neurons_per_population as f64;
        for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let rows = vec![constant_row(s, 0.0); 20];
            let t0 = Instant::now();
            let rec = run_custom(&circuit, &rows, 10_000, 7).unwrap();
            let wall = t0.elapsed().as_secs_f64();
            let m = firing_rates(&rec, 20).unwrap();
            // mean per-neuron rate over the run, per (channel, region)
            let mean = |c: usize, r: Region| -> f64 {
                let col = m.signal_index(c, r).unwrap();
                let sum: f64 = (0..m.n_bins).map(|b| m.at(b, col)).sum();
                sum / m.n_bins as f64 / n
            };
            print!("s={s:4.2} [{wall:5.2}s]");
            for r in Region::ALL {
                print!("  {}={:5.1}/{:5.1}", r.token(), mean(0, r), mean(1, r));
            }
            println!();
        }
        // population-summed CtxRS difference, the separability measure
        let rows = vec![constant_row(1.0, 0.0); 140];
        let t0 = Instant::now();
        let rec = run_custom(&circuit, &rows, 70_000, 7).unwrap();
        let wall = t0.elapsed().as_secs_f64();
        let m = firing_rates(&rec, 20).unwrap();
        let summed = |c: usize| -> f64 {
            let col = m.signal_index(c, Region::CtxRS).unwrap();
            let from = 500; // skip the first 10 s
            let sum: f64 = (from..m.n_bins).map(|b| m.at(b, col)).sum();
            sum / (m.n_bins - from) as f64
        };
        println!(
            "70s run: {wall:.2}s wall, {} events, summed CtxRS ch1={:.1} Hz ch2={:.1} Hz diff={:.1}",
            rec.events.len(),
            summed(0),
            summed(1),
            summed(0) - summed(1)
        );
        let _ = N_REGIONS;
    }
}
