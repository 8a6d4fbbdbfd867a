//! Report generation: aggregates robot-outcome fragments and decoder metrics
//! across every seed directory in the output root, evaluates the trend
//! comparisons and renders a machine-readable file plus aligned text tables.
//! Reports carry no timestamps, so identical inputs reproduce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::config::Config;
use super::{kv, PipelineError};

/// Minimum averaged margin for a trend comparison to count as confirmed.
pub const TREND_MARGIN: f64 = 0.03;

#[derive(Debug, Clone)]
struct Fragment {
    condition: String,
    seed: u64,
    episodes: usize,
    correct: usize,
    incorrect: usize,
    unfinished: usize,
    elapsed_mean: Option<f64>,
    elapsed_std: Option<f64>,
}

#[derive(Debug, Clone)]
struct DecoderRow {
    pair: String,
    seed: u64,
    mean_accuracy: f64,
    mean_macro_f1: f64,
}

/// Aggregated view of one condition across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSummary {
    pub condition: String,
    pub seeds: Vec<u64>,
    pub correct: f64,
    pub incorrect: f64,
    pub unfinished: f64,
    pub elapsed_mean: Option<f64>,
    pub elapsed_std: Option<f64>,
}

/// One trend comparison between two conditions' correct proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: &'static str,
    pub better: String,
    pub worse: String,
    pub margin: f64,
    pub confirmed: bool,
}

fn list_seed_dirs(out: &Path) -> std::io::Result<Vec<(u64, std::path::PathBuf)>> {
    let mut dirs = Vec::new();
    if !out.exists() {
        return Ok(dirs);
    }
    for entry in std::fs::read_dir(out)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().to_string();
        if let Some(seed) = name.strip_prefix("seed_").and_then(|s| s.parse().ok()) {
            if entry.path().is_dir() {
                dirs.push((seed, entry.path()));
            }
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn load_fragments(out: &Path) -> Result<Vec<Fragment>, PipelineError> {
    let mut fragments = Vec::new();
    for (seed, dir) in list_seed_dirs(out)? {
        let robot_dir = dir.join("robot");
        if !robot_dir.exists() {
            continue;
        }
        let mut paths: Vec<_> = std::fs::read_dir(&robot_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|e| e == "kv").unwrap_or(false))
            .collect();
        paths.sort();
        for path in paths {
            let m = kv::read_kv(&path)?;
            let get = |k: &str| -> Result<String, PipelineError> {
                m.get(k).cloned().ok_or_else(|| PipelineError::Stage {
                    stage: "report",
                    message: format!("fragment {} missing key {k}", path.display()),
                })
            };
            fragments.push(Fragment {
                condition: get("condition")?,
                seed,
                episodes: get("episodes")?.parse().unwrap_or(0),
                correct: get("correct")?.parse().unwrap_or(0),
                incorrect: get("incorrect")?.parse().unwrap_or(0),
                unfinished: get("unfinished")?.parse().unwrap_or(0),
                elapsed_mean: m.get("elapsed_mean").and_then(|v| v.parse().ok()),
                elapsed_std: m.get("elapsed_std").and_then(|v| v.parse().ok()),
            });
        }
    }
    Ok(fragments)
}

fn load_decoder_rows(out: &Path) -> Result<Vec<DecoderRow>, PipelineError> {
    let mut rows = Vec::new();
    for (seed, dir) in list_seed_dirs(out)? {
        let decoder_dir = dir.join("decoder");
        if !decoder_dir.exists() {
            continue;
        }
        let mut pair_dirs: Vec<_> = std::fs::read_dir(&decoder_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        pair_dirs.sort();
        for pair_dir in pair_dirs {
            let metrics = pair_dir.join("metrics.kv");
            if !metrics.exists() {
                continue;
            }
            let m = kv::read_kv(&metrics)?;
            rows.push(DecoderRow {
                pair: pair_dir.file_name().unwrap().to_string_lossy().to_string(),
                seed,
                mean_accuracy: m
                    .get("mean.accuracy")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0.0),
                mean_macro_f1: m
                    .get("mean.macro_f1")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0.0),
            });
        }
    }
    Ok(rows)
}

fn summarize(fragments: &[Fragment]) -> Vec<ConditionSummary> {
    let mut by_condition: BTreeMap<String, Vec<&Fragment>> = BTreeMap::new();
    for f in fragments {
        by_condition.entry(f.condition.clone()).or_default().push(f);
    }
    by_condition
        .into_iter()
        .map(|(condition, fs)| {
            let k = fs.len() as f64;
            let prop = |num: fn(&Fragment) -> usize| -> f64 {
                fs.iter()
                    .map(|f| num(f) as f64 / f.episodes.max(1) as f64)
                    .sum::<f64>()
                    / k
            };
            let means: Vec<f64> = fs.iter().filter_map(|f| f.elapsed_mean).collect();
            let stds: Vec<f64> = fs.iter().filter_map(|f| f.elapsed_std).collect();
            ConditionSummary {
                condition,
                seeds: fs.iter().map(|f| f.seed).collect(),
                correct: prop(|f| f.correct),
                incorrect: prop(|f| f.incorrect),
                unfinished: prop(|f| f.unfinished),
                elapsed_mean: (!means.is_empty())
                    .then(|| means.iter().sum::<f64>() / means.len() as f64),
                elapsed_std: (!stds.is_empty())
                    .then(|| stds.iter().sum::<f64>() / stds.len() as f64),
            }
        })
        .collect()
}

/// The three tracked orderings; evaluated only when both sides are present.
fn comparisons(summaries: &[ConditionSummary]) -> Vec<Comparison> {
    let find = |token: &str| summaries.iter().find(|s| s.condition == token);
    let defs: [(&'static str, &str, &str); 3] = [
        (
            "video_vs_imu_on_neuro_marmoset",
            "neuro_video_marmoset",
            "neuro_imu_ambient_marmoset",
        ),
        (
            "marmoset_vs_rat_on_neuro_video",
            "neuro_video_marmoset",
            "neuro_video_rat",
        ),
        (
            "exponential_vs_window_on_heuristics_imu",
            "heuristics_imu_ambient_exponential",
            "heuristics_imu_ambient_window",
        ),
    ];
    let mut out = Vec::new();
    for (name, better, worse) in defs {
        if let (Some(a), Some(b)) = (find(better), find(worse)) {
            let margin = a.correct - b.correct;
            out.push(Comparison {
                name,
                better: better.to_string(),
                worse: worse.to_string(),
                margin,
                confirmed: margin >= TREND_MARGIN,
            });
        }
    }
    out
}

/// Parsed report, used by callers that need programmatic access.
#[derive(Debug, Clone)]
pub struct Report {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub summaries: Vec<ConditionSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Aggregates everything under `out` and writes `report.kv` / `report.txt`.
pub fn stage_report(cfg: &Config, out: &Path) -> Result<Report, PipelineError> {
    let fragments = load_fragments(out)?;
    let decoder_rows = load_decoder_rows(out)?;
    let summaries = summarize(&fragments);
    let comparisons = comparisons(&summaries);
    let mut seeds: Vec<u64> = fragments.iter().map(|f| f.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();

    let mut m = BTreeMap::new();
    m.insert("config_hash".into(), cfg.hash());
    m.insert("version".into(), env!("CARGO_PKG_VERSION").to_string());
    m.insert(
        "seeds".into(),
        seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );
    for s in &summaries {
        let base = format!("condition.{}", s.condition);
        m.insert(format!("{base}.correct"), format!("{}", s.correct));
        m.insert(format!("{base}.incorrect"), format!("{}", s.incorrect));
        m.insert(format!("{base}.unfinished"), format!("{}", s.unfinished));
        m.insert(
            format!("{base}.seeds"),
            s.seeds
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        );
        if let Some(mean) = s.elapsed_mean {
            m.insert(format!("{base}.elapsed_mean"), format!("{mean}"));
        }
        if let Some(std) = s.elapsed_std {
            m.insert(format!("{base}.elapsed_std"), format!("{std}"));
        }
    }
    for row in &decoder_rows {
        let base = format!("decoder.{}.seed_{}", row.pair, row.seed);
        m.insert(format!("{base}.accuracy"), format!("{}", row.mean_accuracy));
        m.insert(format!("{base}.macro_f1"), format!("{}", row.mean_macro_f1));
    }
    for c in &comparisons {
        let base = format!("comparison.{}", c.name);
        m.insert(
            format!("{base}.status"),
            if c.confirmed { "confirmed" } else { "inconclusive" }.to_string(),
        );
        m.insert(format!("{base}.margin"), format!("{}", c.margin));
        m.insert(format!("{base}.better"), c.better.clone());
        m.insert(format!("{base}.worse"), c.worse.clone());
    }
    kv::write_kv(&out.join("report.kv"), &m)?;

    let mut txt = String::new();
    let _ = writeln!(txt, "behaviour selection experiment report");
    let _ = writeln!(txt, "config_hash: {}", cfg.hash());
    let _ = writeln!(
        txt,
        "seeds: {}",
        seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    if !decoder_rows.is_empty() {
        let _ = writeln!(txt, "\ndecoder metrics (fold means per seed)");
        let _ = writeln!(txt, "{:<34} {:>6} {:>10} {:>10}", "condition", "seed", "accuracy", "macro_f1");
        for r in &decoder_rows {
            let _ = writeln!(
                txt,
                "{:<34} {:>6} {:>10.4} {:>10.4}",
                r.pair, r.seed, r.mean_accuracy, r.mean_macro_f1
            );
        }
    }
    if !summaries.is_empty() {
        let _ = writeln!(txt, "\nrobot outcomes (proportions, mean over seeds)");
        let _ = writeln!(
            txt,
            "{:<40} {:>8} {:>10} {:>11}",
            "condition", "correct", "incorrect", "unfinished"
        );
        for s in &summaries {
            let _ = writeln!(
                txt,
                "{:<40} {:>8.4} {:>10.4} {:>11.4}",
                s.condition, s.correct, s.incorrect, s.unfinished
            );
        }
        let _ = writeln!(txt, "\ncompletion times (correct episodes requiring action)");
        let _ = writeln!(txt, "{:<40} {:>8} {:>8}", "condition", "mean_s", "std_s");
        for s in &summaries {
            if let (Some(mean), Some(std)) = (s.elapsed_mean, s.elapsed_std) {
                let _ = writeln!(txt, "{:<40} {:>8.2} {:>8.2}", s.condition, mean, std);
            }
        }
    }
    if !comparisons.is_empty() {
        let _ = writeln!(txt, "\ntrend comparisons (margin on correct proportion)");
        for c in &comparisons {
            let _ = writeln!(
                txt,
                "{:<42} margin {:+.4}  {}",
                c.name,
                c.margin,
                if c.confirmed { "confirmed" } else { "inconclusive" }
            );
        }
    }
    std::fs::write(out.join("report.txt"), txt)?;

    Ok(Report {
        config_hash: cfg.hash(),
        seeds,
        summaries,
        comparisons,
    })
}
