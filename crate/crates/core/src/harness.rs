//! Monte Carlo experiment harness: seeded, trial-parallel campaigns over the
//! narrowband and wideband quantizers, scheme comparison tables, and CSV /
//! JSON-lines export.
//!
//! Determinism contract: every trial draws from its own ChaCha stream
//! (master seed, stream = trial index) and aggregation folds trial results
//! in index order, so parallel and serial runs agree bit-for-bit. Wall time
//! is the one reported field that is not reproducible.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{complexity_budget, BudgetScheme};
use crate::channel::{
    narrowband_channel, sample_paths_with, wideband_channel, DelayProfile, UpaGeometry,
    WidebandGrid,
};
use crate::codebooks::{analytic_covariance, combiner_codebook, default_phase_levels};
use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sq};
use crate::narrowband::{
    enhanced_kp_baseline, kp_baseline, FeedbackAllocation, NarrowbandQuantizer,
};
use crate::wideband::{wideband_overhead, WidebandAllocation, WidebandQuantizer};

/// Narrowband quantization scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NarrowbandScheme {
    /// Three-round hierarchical quantizer (B1, B2, Bc; B̌1 implied).
    Proposed { b1: u32, b2: u32, b_c: u32 },
    /// Kronecker-product baseline with a B_T-bit budget.
    Kp { b_total: u32 },
    /// Enhanced KP baseline (two singular pairs, B1 and B2 bits per axis).
    EnhancedKp { b1: u32, b2: u32 },
}

impl NarrowbandScheme {
    /// Named configurations from the narrowband comparison table.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "prop-n-i" => Some(Self::Proposed { b1: 5, b2: 4, b_c: 2 }),
            "prop-n-ii" => Some(Self::Proposed { b1: 5, b2: 3, b_c: 2 }),
            "prop-n-iii" => Some(Self::Proposed { b1: 4, b2: 3, b_c: 2 }),
            "enh-kp-i" => Some(Self::EnhancedKp { b1: 5, b2: 5 }),
            "enh-kp-ii" => Some(Self::EnhancedKp { b1: 5, b2: 4 }),
            "kp" => Some(Self::Kp { b_total: 22 }),
            _ => None,
        }
    }

    /// Comma-free label (labels land in CSV fields).
    pub fn label(&self) -> String {
        match self {
            Self::Proposed { b1, b2, b_c } => format!("proposed(b1={b1};b2={b2};bc={b_c})"),
            Self::Kp { b_total } => format!("kp(bt={b_total})"),
            Self::EnhancedKp { b1, b2 } => format!("enh-kp(b1={b1};b2={b2})"),
        }
    }

    /// Feedback bits and search evaluations of the scheme.
    pub fn budget(&self) -> (u64, u64) {
        match *self {
            Self::Proposed { b1, b2, b_c } => complexity_budget(BudgetScheme::Proposed { b1, b2, b_c }),
            Self::Kp { b_total } => complexity_budget(BudgetScheme::Kp { b1: b_total / 2 }),
            Self::EnhancedKp { b1, b2 } => complexity_budget(BudgetScheme::EnhancedKp { b1, b2 }),
        }
    }
}

/// What a campaign runs: a single-tone scheme or the two-level wideband
/// quantizer over a tone grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExperimentMode {
    Narrowband { scheme: NarrowbandScheme },
    Wideband { grid: WidebandGrid, alloc: WidebandAllocation },
}

/// Full description of one Monte Carlo campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub geometry: UpaGeometry,
    /// Per-trial path counts, drawn uniformly.
    pub p_set: Vec<usize>,
    pub delay_profile: DelayProfile,
    pub mode: ExperimentMode,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: String| Error::Config { field: field.into(), message };
        if self.p_set.is_empty() || self.p_set.iter().any(|&p| p == 0) {
            return Err(err("p_set", "path counts must be a non-empty list of positive integers".into()));
        }
        if self.trials == 0 {
            return Err(err("trials", "at least one trial".into()));
        }
        match &self.mode {
            ExperimentMode::Narrowband { scheme } => match *scheme {
                NarrowbandScheme::Proposed { b1, b2, b_c } => {
                    FeedbackAllocation::two_family(b1, b2, b_c)
                        .map_err(|e| err("scheme", e.to_string()))?;
                }
                NarrowbandScheme::Kp { b_total } => {
                    if b_total % 2 != 0 || b_total == 0 {
                        return Err(err("scheme.b_total", format!("KP budget must be even and positive, got {b_total}")));
                    }
                }
                NarrowbandScheme::EnhancedKp { .. } => {
                    if self.geometry.m_v.min(self.geometry.m_h) < 2 {
                        return Err(err("geometry", "enhanced KP needs >= 2 antennas per axis".into()));
                    }
                }
            },
            ExperimentMode::Wideband { grid, alloc } => {
                grid.validate()?;
                WidebandAllocation::new(alloc.b_w1, alloc.b_w2, alloc.b_n1, alloc.b_n2, alloc.b_c)
                    .map_err(|e| err("wideband", e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Scheme label for reports.
    pub fn scheme_label(&self) -> String {
        match &self.mode {
            ExperimentMode::Narrowband { scheme } => scheme.label(),
            ExperimentMode::Wideband { alloc, .. } => format!(
                "wideband(bw1={};bw2={};bn1={};bn2={};bc={})",
                alloc.b_w1, alloc.b_w2, alloc.b_n1, alloc.b_n2, alloc.b_c
            ),
        }
    }

    /// Total feedback bits of the configured scheme (per tone for
    /// narrowband, per band for wideband).
    pub fn total_bits(&self) -> u64 {
        match &self.mode {
            ExperimentMode::Narrowband { scheme } => scheme.budget().0,
            ExperimentMode::Wideband { grid, alloc } => {
                wideband_overhead(grid, alloc.b_w1, alloc.b_w2, alloc.b_n1)
            }
        }
    }
}

/// One result row: normalized beamforming gain statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub scenario: String,
    pub m_v: usize,
    pub m_h: usize,
    pub scheme: String,
    pub b_total: u64,
    pub trials: usize,
    pub mean_gain: f64,
    pub stderr: f64,
    pub seconds: f64,
}

/// A set of result rows.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GainReport {
    pub rows: Vec<GainRow>,
}

/// Per-trial RNG: an independent ChaCha stream per trial index under one
/// master seed.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Prebuilt per-path-count narrowband quantizers (the combiner codebook
/// depends on the path count through the effective-channel covariance).
fn build_proposed(
    geom: &UpaGeometry,
    b1: u32,
    b2: u32,
    b_c: u32,
    p_set: &[usize],
) -> Result<BTreeMap<usize, NarrowbandQuantizer>> {
    let mut map = BTreeMap::new();
    for &p in p_set {
        if map.contains_key(&p) {
            continue;
        }
        let r = analytic_covariance(geom, 2, &[b1, b2], p);
        let cb = combiner_codebook(&r, 2, b_c, default_phase_levels(1usize << b_c))?;
        let alloc = FeedbackAllocation::two_family(b1, b2, b_c)?;
        map.insert(p, NarrowbandQuantizer::new(*geom, alloc, cb)?);
    }
    Ok(map)
}

fn build_wideband(
    geom: &UpaGeometry,
    alloc: &WidebandAllocation,
    p_set: &[usize],
) -> Result<BTreeMap<usize, WidebandQuantizer>> {
    let mut map = BTreeMap::new();
    for &p in p_set {
        if map.contains_key(&p) {
            continue;
        }
        let r = analytic_covariance(geom, 2, &[alloc.b_w1, alloc.b_w2], p);
        let cb = combiner_codebook(&r, 2, alloc.b_c, default_phase_levels(1usize << alloc.b_c))?;
        map.insert(p, WidebandQuantizer::new(*geom, *alloc, cb)?);
    }
    Ok(map)
}

/// Runs one campaign: synthesizes a channel per trial, quantizes it with the
/// configured scheme, and averages the normalized beamforming gain
/// (per tone for wideband). Deterministic in the master seed regardless of
/// the rayon thread count.
pub fn run_trials(config: &ExperimentConfig) -> Result<GainRow> {
    config.validate()?;
    let start = Instant::now();
    let geom = config.geometry;
    let gains: Vec<f64> = match &config.mode {
        ExperimentMode::Narrowband { scheme } => {
            let proposed = match scheme {
                NarrowbandScheme::Proposed { b1, b2, b_c } => {
                    Some(build_proposed(&geom, *b1, *b2, *b_c, &config.p_set)?)
                }
                _ => None,
            };
            let scheme = *scheme;
            (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(config.seed, t as u64);
                    let p = config.p_set[rng.gen_range(0..config.p_set.len())];
                    let paths = sample_paths_with(p, config.delay_profile, &mut rng);
                    let h = narrowband_channel(&geom, &paths).expect("non-empty path set");
                    let cw = match scheme {
                        NarrowbandScheme::Proposed { .. } => proposed
                            .as_ref()
                            .expect("prebuilt")
                            .get(&p)
                            .expect("per-p quantizer")
                            .quantize(&h)
                            .expect("quantize"),
                        NarrowbandScheme::Kp { b_total } => {
                            kp_baseline(&h, &geom, b_total).expect("kp baseline")
                        }
                        NarrowbandScheme::EnhancedKp { b1, b2 } => {
                            enhanced_kp_baseline(&h, &geom, b1, b2).expect("enhanced kp")
                        }
                    };
                    cw.gain(&h) / norm_sq(&h)
                })
                .collect()
        }
        ExperimentMode::Wideband { grid, alloc } => {
            let quantizers = build_wideband(&geom, alloc, &config.p_set)?;
            let grid = *grid;
            (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(config.seed, t as u64);
                    let p = config.p_set[rng.gen_range(0..config.p_set.len())];
                    let paths = sample_paths_with(p, config.delay_profile, &mut rng);
                    let ch = wideband_channel(&geom, &paths, &grid).expect("wideband synth");
                    let state = quantizers
                        .get(&p)
                        .expect("per-p quantizer")
                        .quantize(&ch, &grid)
                        .expect("wideband quantize");
                    let per_nb = grid.tones_per_narrow_rb();
                    let mut acc = 0.0;
                    for rb in &state.codewords {
                        let start = (rb.l_index * grid.r_blocks + rb.r_index) * per_nb;
                        for w in start..start + per_nb {
                            let col = ch.col(w);
                            acc += inner(&rb.vector, col).norm_sqr() / norm_sq(col);
                        }
                    }
                    acc / grid.w_total as f64
                })
                .collect()
        }
    };
    // Fixed-order reduction.
    let n = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / n;
    let var = gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(GainRow {
        scenario: config.scenario.clone(),
        m_v: geom.m_v,
        m_h: geom.m_h,
        scheme: config.scheme_label(),
        b_total: config.total_bits(),
        trials: config.trials,
        mean_gain: mean,
        stderr: (var / n).sqrt(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Mean and standard error of the unnormalized gain |h^H f|² of the
/// three-round quantizer at a fixed path count. The closed-form gain
/// analyses are stated on this scale (E ||h||² = P), so analytic-vs-
/// empirical tables use this rather than the normalized campaign metric.
pub fn proposed_unnormalized_gain(
    geom: &UpaGeometry,
    b1: u32,
    b2: u32,
    b_c: u32,
    p_count: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let quantizers = build_proposed(geom, b1, b2, b_c, &[p_count])?;
    let quantizer = quantizers.get(&p_count).expect("built above");
    let geom = *geom;
    let gains: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let paths = sample_paths_with(p_count, DelayProfile::Zero, &mut rng);
            let h = narrowband_channel(&geom, &paths).expect("non-empty path set");
            quantizer.quantize(&h).expect("quantize").gain(&h)
        })
        .collect();
    let n = gains.len() as f64;
    let mean = gains.iter().sum::<f64>() / n;
    let var = gains.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// One scheme's column in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonColumn {
    pub scheme: String,
    /// Feedback bits (narrowband: per tone; wideband: whole band).
    pub feedback_bits: u64,
    /// Vector evaluations for narrowband schemes; absent for wideband rows.
    pub vector_evals: Option<u64>,
    pub mean_gains: Vec<f64>,
    pub stderrs: Vec<f64>,
}

/// Aligned comparison of several schemes over a common geometry sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub geometries: Vec<(usize, usize)>,
    pub columns: Vec<ComparisonColumn>,
}

/// Runs every config and aligns them by scheme across a shared geometry
/// sweep. Configs must come grouped per scheme with identical geometry
/// sequences. A single group degenerates to a one-column table.
pub fn compare(config_groups: &[Vec<ExperimentConfig>]) -> Result<ComparisonTable> {
    if config_groups.is_empty() {
        return Err(Error::MisalignedSweeps("compare needs at least one scheme".into()));
    }
    let sweep: Vec<(usize, usize)> = config_groups[0]
        .iter()
        .map(|c| (c.geometry.m_v, c.geometry.m_h))
        .collect();
    if sweep.is_empty() {
        return Err(Error::MisalignedSweeps("empty geometry sweep".into()));
    }
    for group in config_groups {
        let this: Vec<(usize, usize)> = group.iter().map(|c| (c.geometry.m_v, c.geometry.m_h)).collect();
        if this != sweep {
            return Err(Error::MisalignedSweeps(format!(
                "geometry sweep {this:?} differs from {sweep:?}"
            )));
        }
    }
    let mut columns = Vec::new();
    for group in config_groups {
        let mut mean_gains = Vec::with_capacity(group.len());
        let mut stderrs = Vec::with_capacity(group.len());
        for config in group {
            let row = run_trials(config)?;
            mean_gains.push(row.mean_gain);
            stderrs.push(row.stderr);
        }
        let first = &group[0];
        let vector_evals = match &first.mode {
            ExperimentMode::Narrowband { scheme } => Some(scheme.budget().1),
            ExperimentMode::Wideband { .. } => None,
        };
        columns.push(ComparisonColumn {
            scheme: first.scheme_label(),
            feedback_bits: first.total_bits(),
            vector_evals,
            mean_gains,
            stderrs,
        });
    }
    Ok(ComparisonTable { geometries: sweep, columns })
}

/// Export formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    JsonLines,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "jsonl" | "json-lines" => Ok(Self::JsonLines),
            other => Err(Error::InvalidInput(format!("unknown export format `{other}`"))),
        }
    }
}

pub const CSV_HEADER: &str = "scenario,m_v,m_h,scheme,b_total,trials,mean_gain,stderr,seconds";

/// Writes a report in the stable column order.
pub fn export<W: Write>(report: &GainReport, format: ExportFormat, out: &mut W) -> Result<()> {
    match format {
        ExportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.scenario, r.m_v, r.m_h, r.scheme, r.b_total, r.trials, r.mean_gain, r.stderr, r.seconds
                )?;
            }
        }
        ExportFormat::JsonLines => {
            for r in &report.rows {
                let line = serde_json::to_string(r)
                    .map_err(|e| Error::InvalidInput(format!("serialize: {e}")))?;
                writeln!(out, "{line}")?;
            }
        }
    }
    Ok(())
}

pub fn export_to_path(report: &GainReport, format: ExportFormat, path: &std::path::Path) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    export(report, format, &mut file)
}

/// Reads back a CSV produced by [`export`].
pub fn import_csv(text: &str) -> Result<GainReport> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != CSV_HEADER {
                return Err(Error::InvalidInput(format!("unexpected CSV header `{line}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 9 {
            return Err(Error::InvalidInput(format!("CSV row has {} fields", parts.len())));
        }
        let parse_err = |field: &str| Error::InvalidInput(format!("bad CSV field `{field}`"));
        rows.push(GainRow {
            scenario: parts[0].to_string(),
            m_v: parts[1].parse().map_err(|_| parse_err("m_v"))?,
            m_h: parts[2].parse().map_err(|_| parse_err("m_h"))?,
            scheme: parts[3].to_string(),
            b_total: parts[4].parse().map_err(|_| parse_err("b_total"))?,
            trials: parts[5].parse().map_err(|_| parse_err("trials"))?,
            mean_gain: parts[6].parse().map_err(|_| parse_err("mean_gain"))?,
            stderr: parts[7].parse().map_err(|_| parse_err("stderr"))?,
            seconds: parts[8].parse().map_err(|_| parse_err("seconds"))?,
        });
    }
    Ok(GainReport { rows })
}

/// Flat `section.key=value` config text. Lines starting with `#` and blank
/// lines are ignored.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    field: format!("line {}", lineno + 1),
                    message: format!("expected key=value, got `{line}`"),
                });
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config {
            field: key.to_string(),
            message: "missing".into(),
        })
    }

    pub fn parse_field<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| Error::Config {
                field: key.to_string(),
                message: format!("cannot parse `{raw}`"),
            }),
        }
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }
}

/// Builds an [`ExperimentConfig`] from flat key=value text. Field names in
/// errors use the `section.key` form.
pub fn config_from_kv(kv: &KvConfig) -> Result<ExperimentConfig> {
    let geometry = UpaGeometry::new(
        kv.parse_field::<usize>("geometry.m_v")?.unwrap_or(8),
        kv.parse_field::<usize>("geometry.m_h")?.unwrap_or(8),
        kv.parse_field::<f64>("geometry.d_v")?.unwrap_or(0.5),
        kv.parse_field::<f64>("geometry.d_h")?.unwrap_or(0.5),
    )?;
    let p_set: Vec<usize> = match kv.get("channel.p_set") {
        None => vec![3, 4, 5],
        Some(raw) => raw
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|_| Error::Config {
                    field: "channel.p_set".into(),
                    message: format!("cannot parse `{tok}`"),
                })
            })
            .collect::<Result<_>>()?,
    };
    let delay_profile = match kv.parse_field::<f64>("channel.delay_max_us")? {
        Some(us) if us > 0.0 => DelayProfile::Uniform { max: us * 1e-6 },
        Some(_) => DelayProfile::Zero,
        None => DelayProfile::default(),
    };
    let mode = match kv.require("scheme.kind")? {
        "proposed" => ExperimentMode::Narrowband {
            scheme: NarrowbandScheme::Proposed {
                b1: kv.parse_field::<u32>("scheme.b1")?.ok_or_else(|| missing("scheme.b1"))?,
                b2: kv.parse_field::<u32>("scheme.b2")?.ok_or_else(|| missing("scheme.b2"))?,
                b_c: kv.parse_field::<u32>("scheme.b_c")?.ok_or_else(|| missing("scheme.b_c"))?,
            },
        },
        "kp" => ExperimentMode::Narrowband {
            scheme: NarrowbandScheme::Kp {
                b_total: kv.parse_field::<u32>("scheme.b_total")?.ok_or_else(|| missing("scheme.b_total"))?,
            },
        },
        "enhanced-kp" => ExperimentMode::Narrowband {
            scheme: NarrowbandScheme::EnhancedKp {
                b1: kv.parse_field::<u32>("scheme.b1")?.ok_or_else(|| missing("scheme.b1"))?,
                b2: kv.parse_field::<u32>("scheme.b2")?.ok_or_else(|| missing("scheme.b2"))?,
            },
        },
        "wideband" => {
            let grid = WidebandGrid::new(
                kv.parse_field::<usize>("wideband.w_total")?.unwrap_or(600),
                kv.parse_field::<f64>("wideband.spacing_hz")?.unwrap_or(15e3),
                kv.parse_field::<f64>("wideband.f_c_hz")?.unwrap_or(2e9),
                kv.parse_field::<usize>("wideband.l_blocks")?.unwrap_or(4),
                kv.parse_field::<usize>("wideband.r_blocks")?.unwrap_or(2),
            )?;
            let alloc = WidebandAllocation::new(
                kv.parse_field::<u32>("wideband.b_w1")?.unwrap_or(5),
                kv.parse_field::<u32>("wideband.b_w2")?.unwrap_or(5),
                kv.parse_field::<u32>("wideband.b_n1")?.unwrap_or(3),
                kv.parse_field::<u32>("wideband.b_n2")?.unwrap_or(2),
                kv.parse_field::<u32>("wideband.b_c")?.unwrap_or(2),
            )?;
            ExperimentMode::Wideband { grid, alloc }
        }
        other => {
            if let Some(scheme) = NarrowbandScheme::preset(other) {
                ExperimentMode::Narrowband { scheme }
            } else {
                return Err(Error::Config {
                    field: "scheme.kind".into(),
                    message: format!("unknown scheme `{other}`"),
                });
            }
        }
    };
    let config = ExperimentConfig {
        scenario: kv.get("run.scenario").unwrap_or("experiment").to_string(),
        geometry,
        p_set,
        delay_profile,
        mode,
        trials: kv.parse_field::<usize>("run.trials")?.ok_or_else(|| missing("run.trials"))?,
        seed: kv.parse_field::<u64>("run.seed")?.ok_or_else(|| missing("run.seed"))?,
    };
    config.validate()?;
    Ok(config)
}

fn missing(field: &str) -> Error {
    Error::Config { field: field.into(), message: "missing".into() }
}
