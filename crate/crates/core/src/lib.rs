//! Behaviour-selection pipeline: synthetic activity-prediction streams drive a
//! channelized spiking basal-ganglia-thalamus-cortex circuit, whose cortical
//! firing rates are decoded by a small 1D CNN into robot behaviours. Heuristic
//! baselines and a ground-truth control are benchmarked against the neuro
//! pipeline inside a rule-driven robot task simulator.

pub mod circuit;
pub mod decoder;
pub mod harness;
pub mod heuristics;
pub mod rates;
pub mod robot;
pub mod seeds;
pub mod synth;
