//! Operation and cycle counts for the feature extractor and the matcher.
//!
//! Counts are read from instrumented runs of the real datapath. Cycles use a
//! single-lane model: one multiply, one add and any number of table reads
//! may issue per cycle per lane, so a stage takes
//! `ceil(max(mults, adds, lookups) / lanes)` cycles. Every stage has one
//! lane except the FFT, which gets one butterfly lane per pipeline stage.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{Frontend, FrontendCounts, PcmClip, FFT_STAGES, FRAME_LEN};
use crate::matcher::{classify_counted, MatchMode, MatcherConfig, Template};
use crate::ops::OpCounts;
use crate::vq::{encode_utterance_counted, Codebook, DistanceTable, EncodedUtterance};

/// Published reference points, printed next to the model's own numbers.
pub mod reference {
    pub const CLOCK_HZ: f64 = 400_000.0;
    pub const FRAME_LATENCY_MS: f64 = 2.98;
    pub const ON_CHIP_MEMORY_BYTES: usize = 128 * 1024;
    pub const TCU_AREA_REDUCTION_PCT: f64 = 99.2;
    pub const TCU_POWER_REDUCTION_PCT: f64 = 84.2;
    pub const RECOGNITION_RATE_PCT: f64 = 89.0;
    pub const TEST_CLIPS: usize = 300;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub clock_hz: f64,
    /// Butterfly lanes in the FFT; one per radix-2 stage of the pipeline.
    pub fft_lanes: u64,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            clock_hz: reference::CLOCK_HZ,
            fft_lanes: FFT_STAGES as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    pub stage: String,
    pub mults: u64,
    pub adds: u64,
    pub lookups: u64,
    pub lanes: u64,
    pub cycles: u64,
}

impl StageCost {
    pub fn from_counts(stage: impl Into<String>, counts: OpCounts, lanes: u64) -> Self {
        let lanes = lanes.max(1);
        let busiest = counts.mults.max(counts.adds).max(counts.lookups);
        StageCost {
            stage: stage.into(),
            mults: counts.mults,
            adds: counts.adds,
            lookups: counts.lookups,
            lanes,
            cycles: busiest.div_ceil(lanes),
        }
    }

    pub fn counts(&self) -> OpCounts {
        OpCounts {
            mults: self.mults,
            adds: self.adds,
            lookups: self.lookups,
        }
    }
}

/// Per-frame stage costs of `frontend`, from one instrumented frame plus one
/// hop's worth of decimation when the input is downsampled.
pub fn frontend_cost(frontend: &Frontend, cost: &CostConfig) -> Result<Vec<StageCost>> {
    let cfg = frontend.config();
    cfg.validate()?;
    let mut counts = FrontendCounts::default();
    if cfg.downsample_factor > 1 {
        let hop_in = PcmClip::new(vec![0; cfg.hop * cfg.downsample_factor], cfg.input_rate())?;
        frontend.to_pipeline_rate(&hop_in, &mut counts.downsample)?;
    }
    frontend.process_frame(&[0; FRAME_LEN], &mut counts)?;
    Ok(counts
        .stages()
        .into_iter()
        .filter(|(name, c)| !(c.is_zero() && *name == "downsample"))
        .map(|(name, c)| {
            let lanes = if name == "fft" { cost.fft_lanes } else { 1 };
            StageCost::from_counts(name, c, lanes)
        })
        .collect())
}

/// Cost of scoring one time-normalized utterance against `n_templates` templates.
pub fn matcher_cost(mode: MatchMode, template_len: usize, n_templates: usize) -> Result<StageCost> {
    let name = format!("match_{}", mode.name());
    if template_len < 2 {
        return Err(Error::config(format!("template length must be >= 2, got {template_len}")));
    }
    if n_templates == 0 {
        return Ok(StageCost::from_counts(name, OpCounts::default(), 1));
    }
    let table = DistanceTable::from_raw(1, vec![0])?;
    let templates = (0..n_templates)
        .map(|i| Template::new(format!("t{i}"), vec![0; template_len], template_len, 1))
        .collect::<Result<Vec<_>>>()?;
    let cfg = MatcherConfig {
        template_len,
        mode,
        ..MatcherConfig::default()
    };
    let u = EncodedUtterance::new(vec![0; template_len], 1)?;
    let mut counts = OpCounts::default();
    classify_counted(&u, &templates, &cfg, &table, &mut counts)?;
    Ok(StageCost::from_counts(name, counts, 1))
}

/// Per-frame nearest-codeword search.
pub fn vq_encode_cost(codebook: &Codebook) -> Result<StageCost> {
    let zero = crate::frontend::MfccVector {
        coeffs: vec![0; codebook.dim()],
    };
    let mut counts = OpCounts::default();
    encode_utterance_counted(&[zero], codebook, &mut counts)?;
    Ok(StageCost::from_counts("vq_encode", counts, 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub clock_hz: f64,
    pub per_stage: Vec<StageCost>,
    pub total_cycles_per_frame: u64,
    pub latency_ms: f64,
    /// Duration of one hop; the frame work must finish inside it.
    pub budget_ms: f64,
    pub real_time: bool,
    /// Per-frame work reported alongside but outside the frame total.
    pub auxiliary: Vec<StageCost>,
    pub memory_bytes: Option<usize>,
}

impl CostReport {
    pub fn latency_ms_at(&self, clock_hz: f64) -> f64 {
        self.total_cycles_per_frame as f64 / clock_hz * 1e3
    }

    pub fn auxiliary_cycles(&self) -> u64 {
        self.auxiliary.iter().map(|s| s.cycles).sum()
    }

    /// One stage per line: `name mults adds lookups cycles`.
    pub fn stage_lines(&self) -> String {
        let mut out = String::new();
        for s in self.per_stage.iter().chain(&self.auxiliary) {
            let _ = writeln!(out, "{} {} {} {} {}", s.stage, s.mults, s.adds, s.lookups, s.cycles);
        }
        out
    }
}

pub fn latency_report(costs: &[StageCost], clock_hz: f64, budget_ms: f64) -> Result<CostReport> {
    if !(clock_hz > 0.0) {
        return Err(Error::config(format!("clock must be positive, got {clock_hz}")));
    }
    let total: u64 = costs.iter().map(|s| s.cycles).sum();
    let latency_ms = total as f64 / clock_hz * 1e3;
    Ok(CostReport {
        clock_hz,
        per_stage: costs.to_vec(),
        total_cycles_per_frame: total,
        latency_ms,
        budget_ms,
        real_time: latency_ms <= budget_ms,
        auxiliary: Vec::new(),
        memory_bytes: None,
    })
}

/// Exact serialized size of a model.
pub fn memory_report(model_bytes: &[u8]) -> usize {
    model_bytes.len()
}

/// One side of the compression comparison, per one-second utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineWorkload {
    pub label: String,
    pub frames: u64,
    pub frontend_mults: u64,
    pub vq_distances: u64,
    pub matcher_lookups: u64,
}

impl PipelineWorkload {
    pub fn distance_computations(&self) -> u64 {
        self.vq_distances + self.matcher_lookups
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub baseline: PipelineWorkload,
    pub compressed: PipelineWorkload,
    pub distance_reduction: f64,
    pub multiply_reduction: f64,
}

/// Measures one utterance of `clip` through `frontend` and the matcher.
///
/// The baseline keeps every frame and aligns with full DTW against
/// templates of the same length; the compressed pipeline normalizes to
/// `template_len` first.
pub fn measure_workload(
    label: &str,
    frontend: &Frontend,
    clip: &PcmClip,
    codebook_size: usize,
    mode: MatchMode,
    template_len: Option<usize>,
    n_templates: usize,
) -> Result<PipelineWorkload> {
    let mut counts = FrontendCounts::default();
    let mfccs = frontend.extract_mfcc_counted(clip, &mut counts)?;
    let frames = mfccs.len();
    if frames < 2 {
        return Err(Error::usage("workload clip is shorter than two frames"));
    }
    let len = template_len.unwrap_or(frames);
    let matcher = matcher_cost(mode, len, n_templates)?;
    Ok(PipelineWorkload {
        label: label.to_string(),
        frames: counts.frames,
        frontend_mults: counts.total().mults,
        vq_distances: counts.frames * codebook_size as u64,
        matcher_lookups: matcher.lookups,
    })
}

pub fn compression_ablation(baseline: PipelineWorkload, compressed: PipelineWorkload) -> AblationReport {
    let reduction = |a: u64, b: u64| if a == 0 { 0.0 } else { 1.0 - b as f64 / a as f64 };
    AblationReport {
        distance_reduction: reduction(baseline.distance_computations(), compressed.distance_computations()),
        multiply_reduction: reduction(baseline.frontend_mults, compressed.frontend_mults),
        baseline,
        compressed,
    }
}
