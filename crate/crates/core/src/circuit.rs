//! Channelized spiking model of the basal-ganglia-thalamus-cortex loop.
//!
//! Each response behaviour owns an independent copy (channel) of an 8-region
//! circuit wired per the classic direct/indirect pathway layout. Prediction
//! vectors enter as prefrontal stimulus currents on the striatum; the cortex
//! regions carry the decodable rate signal. Neurons are two-variable
//! quadratic integrate-and-reset units driven by exponential current pulses,
//! stepped with explicit Euler at 1 kHz.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::seeds;
use crate::synth::{check_simplex, Activity, Behaviour, PredictionSeries, N_ACTIVITIES};

pub const N_REGIONS: usize = 8;
/// Simulated duration of one full run.
pub const DURATION_MS: u32 = 70_000;
/// Integration step and sampling interval.
pub const DT_MS: u32 = 1;
/// Stimulus currents are recomputed every half second.
pub const STIM_PERIOD_MS: u32 = 500;
/// Prediction rows consumed by one full run.
pub const N_T_SIM: usize = 140;
/// Synaptic current decay constant.
pub const SYN_TAU_MS: f64 = 12.0;
/// Membrane potential clamp.
pub const V_MIN: f64 = -120.0;
pub const V_MAX: f64 = 40.0;
const SPIKE_THRESHOLD: f64 = 30.0;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("prediction series has {got} rows, expected {expected}")]
    WrongRowCount { expected: usize, got: usize },
    #[error("prediction row is not a simplex: {0}")]
    NotSimplex(String),
    #[error("non-finite state at t={time_ms} ms in channel {channel} {region:?} neuron {neuron}")]
    NonFinite {
        time_ms: u32,
        channel: usize,
        region: Region,
        neuron: usize,
    },
    #[error("run of {duration_ms} ms needs {needed} stimulus rows, got {got}")]
    NotEnoughRows {
        duration_ms: u32,
        needed: usize,
        got: usize,
    },
    #[error("malformed spike file {path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The eight modelled regions of one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    StrD1,
    StrD2,
    GPe,
    GPi,
    STN,
    TH,
    CtxRS,
    CtxFSI,
}

impl Region {
    pub const ALL: [Region; N_REGIONS] = [
        Region::StrD1,
        Region::StrD2,
        Region::GPe,
        Region::GPi,
        Region::STN,
        Region::TH,
        Region::CtxRS,
        Region::CtxFSI,
    ];

    pub fn index(self) -> usize {
        Region::ALL.iter().position(|&r| r == self).unwrap()
    }

    pub fn token(self) -> &'static str {
        match self {
            Region::StrD1 => "StrD1",
            Region::StrD2 => "StrD2",
            Region::GPe => "GPe",
            Region::GPi => "GPi",
            Region::STN => "STN",
            Region::TH => "TH",
            Region::CtxRS => "CtxRS",
            Region::CtxFSI => "CtxFSI",
        }
    }

    pub fn from_token(s: &str) -> Option<Region> {
        Region::ALL.iter().copied().find(|r| r.token() == s)
    }

    /// Fast-spiking interneuron-like populations; the rest are regular spiking.
    fn is_fast_spiking(self) -> bool {
        matches!(self, Region::CtxFSI | Region::StrD2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Excitatory,
    Inhibitory,
}

/// The twelve synapse classes of one channel.
pub const EDGES: [(Region, Region, Sign); 12] = [
    (Region::CtxRS, Region::StrD1, Sign::Excitatory),
    (Region::CtxRS, Region::StrD2, Sign::Excitatory),
    (Region::CtxRS, Region::STN, Sign::Excitatory),
    (Region::StrD1, Region::GPi, Sign::Inhibitory),
    (Region::StrD2, Region::GPe, Sign::Inhibitory),
    (Region::GPe, Region::STN, Sign::Inhibitory),
    (Region::GPe, Region::GPi, Sign::Inhibitory),
    (Region::GPi, Region::TH, Sign::Inhibitory),
    (Region::STN, Region::GPe, Sign::Excitatory),
    (Region::STN, Region::GPi, Sign::Excitatory),
    (Region::TH, Region::CtxRS, Sign::Excitatory),
    (Region::CtxFSI, Region::CtxRS, Sign::Inhibitory),
];

/// Which striatal populations receive the prefrontal stimulus current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusTarget {
    D1Only,
    D2Only,
    Both,
}

impl StimulusTarget {
    pub fn token(self) -> &'static str {
        match self {
            StimulusTarget::D1Only => "d1",
            StimulusTarget::D2Only => "d2",
            StimulusTarget::Both => "both",
        }
    }

    pub fn from_token(s: &str) -> Option<StimulusTarget> {
        match s {
            "d1" => Some(StimulusTarget::D1Only),
            "d2" => Some(StimulusTarget::D2Only),
            "both" => Some(StimulusTarget::Both),
            _ => None,
        }
    }

    fn applies_to(self, region: Region) -> bool {
        match self {
            StimulusTarget::D1Only => region == Region::StrD1,
            StimulusTarget::D2Only => region == Region::StrD2,
            StimulusTarget::Both => matches!(region, Region::StrD1 | Region::StrD2),
        }
    }
}

/// Size, connectivity and calibration constants of one animal model.
///
/// Edge weights are expressed as the expected total drive onto one target
/// neuron; the per-synapse weight divides by the expected in-degree, so the
/// rat and marmoset presets share operating points while differing in
/// population size and wiring density.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitPreset {
    pub name: String,
    pub neurons_per_population: usize,
    pub connection_probability: f64,
    /// Total-drive weight per synapse class, parallel to `EDGES`.
    pub edge_weights: [f64; EDGES.len()],
    pub bias_th: f64,
    pub bias_gpe: f64,
    pub bias_gpi: f64,
    /// Per-neuron Gaussian current noise (std dev).
    pub noise_sigma: f64,
    /// Current injected per unit stimulus.
    pub stimulus_gain: f64,
    pub stimulus_target: StimulusTarget,
}

/// Shared calibration point; presets differ in scale, not operating point.
const BASE_EDGE_WEIGHTS: [f64; EDGES.len()] = [
    0.5,  // CtxRS -> StrD1
    0.5,  // CtxRS -> StrD2
    4.0,  // CtxRS -> STN
    26.0, // StrD1 -| GPi
    10.0, // StrD2 -| GPe
    20.0, // GPe -| STN
    4.0,  // GPe -| GPi
    15.0, // GPi -| TH
    8.0,  // STN -> GPe
    10.0, // STN -> GPi
    28.0, // TH -> CtxRS
    10.0, // CtxFSI -| CtxRS
];

impl CircuitPreset {
    pub fn rat() -> CircuitPreset {
        CircuitPreset {
            name: "rat".into(),
            neurons_per_population: 10,
            connection_probability: 0.6,
            edge_weights: BASE_EDGE_WEIGHTS,
            bias_th: 7.0,
            bias_gpe: 11.0,
            bias_gpi: 13.0,
            noise_sigma: 1.5,
            stimulus_gain: 12.0,
            stimulus_target: StimulusTarget::Both,
        }
    }

    pub fn marmoset() -> CircuitPreset {
        CircuitPreset {
            name: "marmoset".into(),
            neurons_per_population: 20,
            connection_probability: 0.9,
            edge_weights: BASE_EDGE_WEIGHTS,
            bias_th: 10.0,
            bias_gpe: 11.0,
            bias_gpi: 13.5,
            noise_sigma: 1.5,
            stimulus_gain: 12.0,
            stimulus_target: StimulusTarget::Both,
        }
    }

    fn bias(&self, region: Region) -> f64 {
        match region {
            Region::TH => self.bias_th,
            Region::GPe => self.bias_gpe,
            Region::GPi => self.bias_gpi,
            _ => 0.0,
        }
    }
}

/// Izhikevich-style two-variable parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct NeuronParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

/// Classic heterogeneity: regular-spiking cells jitter reset depth and
/// adaptation, fast-spiking cells jitter recovery speed and sensitivity.
/// Keeps populations from locking into synchronous volleys.
fn draw_params(region: Region, r: f64) -> NeuronParams {
    if region.is_fast_spiking() {
        NeuronParams {
            a: 0.02 + 0.08 * r,
            b: 0.25 - 0.05 * r,
            c: -65.0,
            d: 2.0,
        }
    } else {
        NeuronParams {
            a: 0.02,
            b: 0.2,
            c: -65.0 + 15.0 * r * r,
            d: 8.0 - 6.0 * r * r,
        }
    }
}

/// Built circuit: flattened neuron arrays plus CSR outgoing synapse lists.
#[derive(Debug, Clone)]
pub struct Circuit {
    pub preset: CircuitPreset,
    pub n_channels: usize,
    pub build_seed: u64,
    params: Vec<NeuronParams>,
    syn_offsets: Vec<u32>,
    syn_targets: Vec<u32>,
    syn_weights: Vec<f64>,
}

impl Circuit {
    pub fn n_neurons(&self) -> usize {
        self.n_channels * N_REGIONS * self.preset.neurons_per_population
    }

    pub fn n_synapses(&self) -> usize {
        self.syn_targets.len()
    }

    fn neuron_index(&self, channel: usize, region: Region, i: usize) -> usize {
        (channel * N_REGIONS + region.index()) * self.preset.neurons_per_population + i
    }

    fn region_of(&self, neuron: usize) -> (usize, Region, usize) {
        let n = self.preset.neurons_per_population;
        let pop = neuron / n;
        (pop / N_REGIONS, Region::ALL[pop % N_REGIONS], neuron % n)
    }

    /// Distinct (source region, target region, sign) classes present in one
    /// channel's wiring; used by the topology audit.
    pub fn synapse_classes(&self, channel: usize) -> Vec<(Region, Region, Sign)> {
        let mut classes = Vec::new();
        let lo = channel * N_REGIONS * self.preset.neurons_per_population;
        let hi = lo + N_REGIONS * self.preset.neurons_per_population;
        for src in lo..hi {
            let (_, src_region, _) = self.region_of(src);
            for k in self.syn_offsets[src]..self.syn_offsets[src + 1] {
                let tgt = self.syn_targets[k as usize] as usize;
                assert!(tgt >= lo && tgt < hi, "cross-channel synapse");
                let (_, tgt_region, _) = self.region_of(tgt);
                let sign = if self.syn_weights[k as usize] >= 0.0 {
                    Sign::Excitatory
                } else {
                    Sign::Inhibitory
                };
                let class = (src_region, tgt_region, sign);
                if !classes.contains(&class) {
                    classes.push(class);
                }
            }
        }
        classes
    }
}

/// Behaviour a channel is associated with; channels beyond the two modelled
/// behaviours receive no stimulus.
pub fn channel_behaviour(channel: usize) -> Option<Behaviour> {
    match channel {
        0 => Some(Behaviour::B1),
        1 => Some(Behaviour::B2),
        _ => None,
    }
}

/// Stimulus weight of one (channel, activity) pair: 1 when the activity maps
/// to the channel's behaviour.
pub fn stimulus_weight(channel: usize, activity: Activity) -> f64 {
    match channel_behaviour(channel) {
        Some(b) if activity.behaviour() == b => 1.0,
        _ => 0.0,
    }
}

/// Stimulus current for one channel: prediction mass over the activities
/// mapped to the channel's behaviour. Always in [0, 1] for simplex input.
pub fn compute_stimulus(row: &[f64; N_ACTIVITIES], channel: usize) -> Result<f64, CircuitError> {
    check_simplex(row).map_err(|e| CircuitError::NotSimplex(e.to_string()))?;
    let mut s = 0.0;
    for a in Activity::all() {
        s += stimulus_weight(channel, a) * row[a.index()];
    }
    Ok(s)
}

/// Builds `n_channels` disjoint copies of the 8-region circuit. Wiring is
/// drawn per edge with the preset probability from the fixed seed; channels
/// are wired identically and never connected to each other.
pub fn build_circuit(preset: &CircuitPreset, n_channels: usize, seed: u64) -> Circuit {
    assert!(n_channels >= 1, "need at least one channel");
    let n = preset.neurons_per_population;
    let p = preset.connection_probability;
    let n_neurons = n_channels * N_REGIONS * n;

    // Channel-local neuron parameters, replicated so channels are identical.
    let mut param_rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("params")]));
    let mut param_template = Vec::with_capacity(N_REGIONS * n);
    for region in Region::ALL {
        for _ in 0..n {
            param_template.push(draw_params(region, param_rng.gen::<f64>()));
        }
    }
    let params: Vec<NeuronParams> = (0..n_channels)
        .flat_map(|_| param_template.iter().copied())
        .collect();

    // Channel-local wiring, one RNG for the template shared by all channels.
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("wire")]));
    let mut template: Vec<Vec<(u32, f64)>> = vec![Vec::new(); N_REGIONS * n];
    for (e, &(src, dst, sign)) in EDGES.iter().enumerate() {
        let w = preset.edge_weights[e] / (n as f64 * p);
        let w = match sign {
            Sign::Excitatory => w,
            Sign::Inhibitory => -w,
        };
        for i in 0..n {
            for j in 0..n {
                if rng.gen::<f64>() < p {
                    let s = src.index() * n + i;
                    let t = (dst.index() * n + j) as u32;
                    template[s].push((t, w));
                }
            }
        }
    }

    let channel_stride = (N_REGIONS * n) as u32;
    let mut syn_offsets = Vec::with_capacity(n_neurons + 1);
    let mut syn_targets = Vec::new();
    let mut syn_weights = Vec::new();
    syn_offsets.push(0u32);
    for c in 0..n_channels {
        for local in template.iter() {
            for &(t, w) in local {
                syn_targets.push(t + c as u32 * channel_stride);
                syn_weights.push(w);
            }
            syn_offsets.push(syn_targets.len() as u32);
        }
    }

    Circuit {
        preset: preset.clone(),
        n_channels,
        build_seed: seed,
        params,
        syn_offsets,
        syn_targets,
        syn_weights,
    }
}

/// One recorded spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpikeEvent {
    pub time_ms: u32,
    pub channel: u16,
    pub region: Region,
    pub neuron: u16,
}

/// Spike record of one run: events sorted by (time, channel, region, neuron).
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRecord {
    pub events: Vec<SpikeEvent>,
    pub duration_ms: u32,
    pub sample_rate_hz: u32,
    pub n_channels: usize,
}

/// Full 70 s simulation driven by a 140-row prediction series.
pub fn run_simulation(
    circuit: &Circuit,
    predictions: &PredictionSeries,
    seed: u64,
) -> Result<SpikeRecord, CircuitError> {
    if predictions.rows.len() != N_T_SIM {
        return Err(CircuitError::WrongRowCount {
            expected: N_T_SIM,
            got: predictions.rows.len(),
        });
    }
    run_custom(circuit, &predictions.rows, DURATION_MS, seed)
}

/// Simulation over an arbitrary duration; each stimulus row is held for
/// 500 ms. Used by the full run, calibration and the stability fuzz.
pub fn run_custom(
    circuit: &Circuit,
    rows: &[[f64; N_ACTIVITIES]],
    duration_ms: u32,
    seed: u64,
) -> Result<SpikeRecord, CircuitError> {
    let needed = (duration_ms as usize).div_ceil(STIM_PERIOD_MS as usize);
    if rows.len() < needed {
        return Err(CircuitError::NotEnoughRows {
            duration_ms,
            needed,
            got: rows.len(),
        });
    }

    let preset = &circuit.preset;
    let n_per_pop = preset.neurons_per_population;
    let n_neurons = circuit.n_neurons();
    let n_channels = circuit.n_channels;
    let per_channel = N_REGIONS * n_per_pop;

    // Per-neuron static lookup.
    let params = &circuit.params;
    let mut base_current = vec![0.0f64; n_neurons]; // bias, stimulus added later
    for (i, current) in base_current.iter_mut().enumerate() {
        let (_, region, _) = circuit.region_of(i);
        *current = preset.bias(region);
    }

    let mut v: Vec<f64> = params.iter().map(|p| p.c).collect();
    let mut u: Vec<f64> = params.iter().map(|p| p.b * p.c).collect();
    let mut syn = vec![0.0f64; n_neurons];
    let mut pending = vec![0.0f64; n_neurons];
    let decay = (-(DT_MS as f64) / SYN_TAU_MS).exp();

    // Independent noise stream per channel: channel k's dynamics never touch
    // another channel's draws.
    let mut noise_rngs: Vec<ChaCha8Rng> = (0..n_channels)
        .map(|c| ChaCha8Rng::seed_from_u64(seeds::mix(seed, &[seeds::tag("noise"), c as u64])))
        .collect();

    let mut stim_current = vec![0.0f64; n_neurons];
    let mut events = Vec::new();
    let mut spikes_this_step: Vec<u32> = Vec::with_capacity(n_neurons / 4);

    for t in 0..duration_ms {
        if t % STIM_PERIOD_MS == 0 {
            let row = &rows[(t / STIM_PERIOD_MS) as usize];
            for c in 0..n_channels {
                let s = compute_stimulus(row, c)?;
                let current = preset.stimulus_gain * s;
                for region in Region::ALL {
                    let val = if preset.stimulus_target.applies_to(region) {
                        current
                    } else {
                        0.0
                    };
                    for i in 0..n_per_pop {
                        stim_current[circuit.neuron_index(c, region, i)] = val;
                    }
                }
            }
        }

        // Deliver last step's spikes (1 ms delay) and decay the accumulator.
        for i in 0..n_neurons {
            syn[i] = syn[i] * decay + pending[i];
            pending[i] = 0.0;
        }

        spikes_this_step.clear();
        for c in 0..n_channels {
            let rng = &mut noise_rngs[c];
            for local in 0..per_channel {
                let i = c * per_channel + local;
                let noise: f64 = StandardNormal.sample(rng);
                let input = syn[i] + base_current[i] + stim_current[i] + preset.noise_sigma * noise;
                let p = params[i];
                let mut vi = v[i] + (0.04 * v[i] * v[i] + 5.0 * v[i] + 140.0 - u[i] + input);
                let mut ui = u[i] + p.a * (p.b * vi - u[i]);
                if !vi.is_finite() || !ui.is_finite() {
                    let (channel, region, neuron) = circuit.region_of(i);
                    return Err(CircuitError::NonFinite {
                        time_ms: t,
                        channel,
                        region,
                        neuron,
                    });
                }
                if vi >= SPIKE_THRESHOLD {
                    vi = p.c;
                    ui += p.d;
                    spikes_this_step.push(i as u32);
                }
                v[i] = vi.clamp(V_MIN, V_MAX);
                u[i] = ui;
            }
        }

        for &s in &spikes_this_step {
            let (channel, region, neuron) = circuit.region_of(s as usize);
            events.push(SpikeEvent {
                time_ms: t,
                channel: channel as u16,
                region,
                neuron: neuron as u16,
            });
            let (lo, hi) = (
                circuit.syn_offsets[s as usize] as usize,
                circuit.syn_offsets[s as usize + 1] as usize,
            );
            for k in lo..hi {
                pending[circuit.syn_targets[k] as usize] += circuit.syn_weights[k];
            }
        }
    }

    Ok(SpikeRecord {
        events,
        duration_ms,
        sample_rate_hz: 1000 / DT_MS,
        n_channels,
    })
}

// ---------------------------------------------------------------------------
// Spike record files
// ---------------------------------------------------------------------------

pub fn write_spike_file(path: &Path, record: &SpikeRecord) -> Result<(), CircuitError> {
    let mut out = String::with_capacity(record.events.len() * 16 + 64);
    out.push_str(&format!(
        "# duration_ms={} sample_rate_hz={} channels={}\n",
        record.duration_ms, record.sample_rate_hz, record.n_channels
    ));
    out.push_str("time_ms,channel,region,neuron\n");
    for e in &record.events {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.time_ms,
            e.channel,
            e.region.token(),
            e.neuron
        ));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_spike_file(path: &Path) -> Result<SpikeRecord, CircuitError> {
    let bad = |reason: String| CircuitError::BadFile {
        path: path.display().to_string(),
        reason,
    };
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let meta = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))??;
    let mut duration_ms = 0u32;
    let mut sample_rate_hz = 0u32;
    let mut n_channels = 0usize;
    for tok in meta.trim_start_matches('#').split_whitespace() {
        let (k, val) = tok
            .split_once('=')
            .ok_or_else(|| bad(format!("bad meta token {tok}")))?;
        match k {
            "duration_ms" => duration_ms = val.parse().map_err(|_| bad("bad duration".into()))?,
            "sample_rate_hz" => {
                sample_rate_hz = val.parse().map_err(|_| bad("bad rate".into()))?
            }
            "channels" => n_channels = val.parse().map_err(|_| bad("bad channels".into()))?,
            _ => return Err(bad(format!("unknown meta key {k}"))),
        }
    }
    let header = lines.next().ok_or_else(|| bad("missing header".into()))??;
    if header.trim() != "time_ms,channel,region,neuron" {
        return Err(bad("bad column header".into()));
    }
    let mut events = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.trim().split(',').collect();
        if cols.len() != 4 {
            return Err(bad(format!("bad row {line}")));
        }
        events.push(SpikeEvent {
            time_ms: cols[0].parse().map_err(|_| bad("bad time".into()))?,
            channel: cols[1].parse().map_err(|_| bad("bad channel".into()))?,
            region: Region::from_token(cols[2]).ok_or_else(|| bad("bad region".into()))?,
            neuron: cols[3].parse().map_err(|_| bad("bad neuron".into()))?,
        });
    }
    Ok(SpikeRecord {
        events,
        duration_ms,
        sample_rate_hz,
        n_channels,
    })
}
