//! Binned population firing rates and decoder windowing: spike records turn
//! into a (time x signal) rate matrix, the cortex signals are projected out,
//! and overlapping fixed-width windows feed the decoder.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::circuit::{Region, SpikeRecord, N_REGIONS};
use crate::synth::Behaviour;

/// Canonical bin width.
pub const BIN_MS: u32 = 20;
/// Decoder window width in bins (four seconds).
pub const SEGMENT_WIDTH: usize = 200;
/// Window stride in bins (one second, 75% overlap).
pub const SEGMENT_STRIDE: usize = 50;

#[derive(Debug, Error)]
pub enum RatesError {
    #[error("bin width {bin_ms} ms does not divide duration {duration_ms} ms")]
    BinMismatch { bin_ms: u32, duration_ms: u32 },
    #[error("segment width {width} exceeds matrix length {len}")]
    WidthTooLarge { width: usize, len: usize },
    #[error("malformed rate file {path}: {reason}")]
    BadFile { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binned mean-firing-rate series: time-major values over labelled
/// (channel, region) signals, in Hz summed over each population.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub values: Vec<f64>,
    pub n_bins: usize,
    pub bin_ms: u32,
    pub signals: Vec<(usize, Region)>,
}

impl RateMatrix {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn at(&self, bin: usize, signal: usize) -> f64 {
        self.values[bin * self.signals.len() + signal]
    }

    pub fn signal_label(&self, signal: usize) -> String {
        let (channel, region) = self.signals[signal];
        format!("c{}_{}", channel + 1, region.token())
    }

    /// Column of one (channel, region) signal, if present.
    pub fn signal_index(&self, channel: usize, region: Region) -> Option<usize> {
        self.signals.iter().position(|&s| s == (channel, region))
    }
}

/// Bins a spike record: value(bin, channel, region) is the spike count of the
/// whole population in that bin divided by the bin width in seconds.
pub fn firing_rates(record: &SpikeRecord, bin_ms: u32) -> Result<RateMatrix, RatesError> {
    if bin_ms == 0 || record.duration_ms % bin_ms != 0 {
        return Err(RatesError::BinMismatch {
            bin_ms,
            duration_ms: record.duration_ms,
        });
    }
    let n_bins = (record.duration_ms / bin_ms) as usize;
    let signals: Vec<(usize, Region)> = (0..record.n_channels)
        .flat_map(|c| Region::ALL.iter().map(move |&r| (c, r)))
        .collect();
    let n_signals = signals.len();
    let per_spike = 1000.0 / bin_ms as f64; // one spike in one bin, in Hz
    let mut values = vec![0.0f64; n_bins * n_signals];
    for e in &record.events {
        let bin = (e.time_ms / bin_ms) as usize;
        let signal = e.channel as usize * N_REGIONS + e.region.index();
        values[bin * n_signals + signal] += per_spike;
    }
    Ok(RateMatrix {
        values,
        n_bins,
        bin_ms,
        signals,
    })
}

/// Projects out the cortex signals in fixed order: for each channel, CtxRS
/// then CtxFSI.
pub fn select_cortex(matrix: &RateMatrix) -> RateMatrix {
    let n_channels = matrix
        .signals
        .iter()
        .map(|&(c, _)| c + 1)
        .max()
        .unwrap_or(0);
    let wanted: Vec<(usize, Region)> = (0..n_channels)
        .flat_map(|c| [(c, Region::CtxRS), (c, Region::CtxFSI)])
        .collect();
    let columns: Vec<usize> = wanted
        .iter()
        .map(|&(c, r)| matrix.signal_index(c, r).expect("cortex signal present"))
        .collect();
    let mut values = Vec::with_capacity(matrix.n_bins * wanted.len());
    for bin in 0..matrix.n_bins {
        for &col in &columns {
            values.push(matrix.at(bin, col));
        }
    }
    RateMatrix {
        values,
        n_bins: matrix.n_bins,
        bin_ms: matrix.bin_ms,
        signals: wanted,
    }
}

/// One decoder instance: a fixed-width window of the cortex rate series.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub values: Vec<f64>,
    pub width: usize,
    pub n_signals: usize,
    pub session_id: u32,
    pub start: usize,
    pub label: Behaviour,
}

impl Segment {
    pub fn at(&self, row: usize, signal: usize) -> f64 {
        self.values[row * self.n_signals + signal]
    }
}

/// Cuts overlapping windows starting at 0, stride, 2*stride, ... Only full
/// windows are emitted and the trailing one is dropped, except that a series
/// exactly one window long yields that single window.
pub fn segment(
    matrix: &RateMatrix,
    width: usize,
    stride: usize,
    session_id: u32,
    label: Behaviour,
) -> Result<Vec<Segment>, RatesError> {
    if width > matrix.n_bins {
        return Err(RatesError::WidthTooLarge {
            width,
            len: matrix.n_bins,
        });
    }
    let full = (matrix.n_bins - width) / stride + 1;
    let count = if full > 1 { full - 1 } else { full };
    let n_signals = matrix.n_signals();
    let mut segments = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let values =
            matrix.values[start * n_signals..(start + width) * n_signals].to_vec();
        segments.push(Segment {
            values,
            width,
            n_signals,
            session_id,
            start,
            label,
        });
    }
    Ok(segments)
}

// ---------------------------------------------------------------------------
// Rate matrix files
// ---------------------------------------------------------------------------

pub fn write_rate_file(path: &Path, matrix: &RateMatrix) -> Result<(), RatesError> {
    let mut out = String::with_capacity(matrix.values.len() * 6 + 64);
    out.push_str(&format!("# bin_ms={}\n", matrix.bin_ms));
    let labels: Vec<String> = (0..matrix.n_signals())
        .map(|i| matrix.signal_label(i))
        .collect();
    out.push_str(&labels.join(","));
    out.push('\n');
    for bin in 0..matrix.n_bins {
        for s in 0..matrix.n_signals() {
            if s > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", matrix.at(bin, s)));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_rate_file(path: &Path) -> Result<RateMatrix, RatesError> {
    let bad = |reason: &str| RatesError::BadFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut lines = reader.lines();
    let meta = lines.next().ok_or_else(|| bad("empty file"))??;
    let bin_ms: u32 = meta
        .trim_start_matches('#')
        .trim()
        .strip_prefix("bin_ms=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing bin_ms"))?;
    let header = lines.next().ok_or_else(|| bad("missing header"))??;
    let mut signals = Vec::new();
    for label in header.trim().split(',') {
        let (c, r) = label.split_once('_').ok_or_else(|| bad("bad label"))?;
        let channel: usize = c
            .strip_prefix('c')
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| bad("bad channel label"))?;
        let region = Region::from_token(r).ok_or_else(|| bad("bad region label"))?;
        signals.push((channel - 1, region));
    }
    let mut values = Vec::new();
    let mut n_bins = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.trim().split(',').map(|v| v.parse()).collect();
        let row = row.map_err(|_| bad("bad value"))?;
        if row.len() != signals.len() {
            return Err(bad("wrong column count"));
        }
        values.extend(row);
        n_bins += 1;
    }
    Ok(RateMatrix {
        values,
        n_bins,
        bin_ms,
        signals,
    })
}
