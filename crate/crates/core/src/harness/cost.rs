use std::fmt::Write as _;

use serde::Serialize;

use crate::costmodel::{
    compression_ablation, frontend_cost, latency_report, matcher_cost, measure_workload, reference, vq_encode_cost,
    AblationReport, CostReport, StageCost,
};
use crate::error::Result;
use crate::frontend::{Frontend, FrontendConfig, PcmClip};
use crate::harness::config::Config;
use crate::harness::model::{Model, SectionSizes};
use crate::matcher::{MatchMode, Template};
use crate::vq::{Codebook, DistanceTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatcherComparison {
    pub template_len: usize,
    pub full_per_template: StageCost,
    pub diagonal_per_template: StageCost,
    /// Diagonal over full lookups.
    pub lookup_ratio: f64,
    pub lookup_reduction_pct: f64,
    pub reference_area_reduction_pct: f64,
    pub reference_power_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullCostReport {
    pub mode: MatchMode,
    pub frame: CostReport,
    pub reference_frame_latency_ms: f64,
    pub matcher: MatcherComparison,
    pub memory: SectionSizes,
    pub memory_bytes: usize,
    pub reference_memory_bytes: usize,
    pub ablation: AblationReport,
}

impl Model {
    /// A model with the shape `config` implies and all-zero contents.
    pub fn placeholder(config: &Config, keywords: &[&str]) -> Result<Model> {
        let k = config.vq.codebook_size;
        let t = config.matcher.template_len;
        let frontend = Frontend::new(config.frontend.clone())?;
        let model = Model {
            config: config.clone(),
            codebook: Codebook::new(vec![vec![0; config.frontend.n_mfcc]; k])?,
            table: DistanceTable::from_raw(k, vec![0; k * k])?,
            templates: keywords
                .iter()
                .map(|w| Template::new(*w, vec![0; t], t, k))
                .collect::<Result<_>>()?,
            tables: frontend.tables().clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

pub const DEFAULT_KEYWORD_COUNT: usize = 5;

/// Latency, matcher reduction, memory and compression ablation for `model`
/// matched in `mode`.
pub fn build_cost_report(model: &Model, mode: MatchMode) -> Result<FullCostReport> {
    let cfg = &model.config;
    let frontend = model.frontend()?;
    let n_templates = model.templates.len();
    let t = cfg.matcher.template_len;

    let mut stages = frontend_cost(&frontend, &cfg.cost)?;
    stages.push(matcher_cost(mode, t, n_templates)?);
    let mut frame = latency_report(&stages, cfg.cost.clock_hz, cfg.frontend.hop_duration_ms())?;
    frame.auxiliary.push(vq_encode_cost(&model.codebook)?);
    let bytes = model.to_bytes();
    frame.memory_bytes = Some(crate::costmodel::memory_report(&bytes));

    let full = matcher_cost(MatchMode::FullDtw, t, 1)?;
    let diagonal = matcher_cost(MatchMode::Diagonal, t, 1)?;
    let ratio = diagonal.lookups as f64 / full.lookups as f64;

    let k = model.codebook.size();
    let full_rate = Frontend::new(FrontendConfig {
        n_mel: cfg.frontend.n_mel,
        n_mfcc: cfg.frontend.n_mfcc,
        ..FrontendConfig::full_rate()
    })?;
    let input_rate = cfg.frontend.input_rate();
    let second = |fe: &Frontend| PcmClip::new(vec![0; fe.config().input_rate() as usize], fe.config().input_rate());
    let baseline = measure_workload(
        "full-rate + full DTW",
        &full_rate,
        &second(&full_rate)?,
        k,
        MatchMode::FullDtw,
        None,
        n_templates,
    )?;
    let compressed = measure_workload(
        "downsampled + diagonal",
        &frontend,
        &PcmClip::new(vec![0; input_rate as usize], input_rate)?,
        k,
        MatchMode::Diagonal,
        Some(t),
        n_templates,
    )?;

    Ok(FullCostReport {
        mode,
        frame,
        reference_frame_latency_ms: reference::FRAME_LATENCY_MS,
        matcher: MatcherComparison {
            template_len: t,
            lookup_reduction_pct: 100.0 * (1.0 - ratio),
            lookup_ratio: ratio,
            full_per_template: full,
            diagonal_per_template: diagonal,
            reference_area_reduction_pct: reference::TCU_AREA_REDUCTION_PCT,
            reference_power_reduction_pct: reference::TCU_POWER_REDUCTION_PCT,
        },
        memory: model.section_sizes(),
        memory_bytes: bytes.len(),
        reference_memory_bytes: reference::ON_CHIP_MEMORY_BYTES,
        ablation: compression_ablation(baseline, compressed),
    })
}

impl FullCostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let f = &self.frame;
        let mut out = String::new();
        let _ = writeln!(out, "# stage mults adds lookups cycles");
        out.push_str(&f.stage_lines());
        let _ = writeln!(
            out,
            "\nframe cycles ({} matcher): {}",
            self.mode.name(),
            f.total_cycles_per_frame
        );
        let _ = writeln!(out, "frame latency: {:.3} ms at {} Hz", f.latency_ms, f.clock_hz);
        let _ = writeln!(
            out,
            "hop budget: {:.3} ms ({})",
            f.budget_ms,
            if f.real_time { "real-time" } else { "NOT real-time" }
        );
        let _ = writeln!(
            out,
            "reference frame latency: {:.2} ms at {} Hz",
            self.reference_frame_latency_ms,
            reference::CLOCK_HZ
        );
        let aux = f.auxiliary_cycles();
        let _ = writeln!(
            out,
            "codeword search (outside the frame total): {} cycles, {:.3} ms",
            aux,
            aux as f64 / f.clock_hz * 1e3
        );

        let m = &self.matcher;
        let _ = writeln!(out, "\nmatcher lookups per template at T={}:", m.template_len);
        let _ = writeln!(out, "  full DTW: {}", m.full_per_template.lookups);
        let _ = writeln!(out, "  diagonal: {}", m.diagonal_per_template.lookups);
        let _ = writeln!(
            out,
            "  ratio {:.6} (1/{}), reduction {:.2}%",
            m.lookup_ratio,
            (1.0 / m.lookup_ratio).round(),
            m.lookup_reduction_pct
        );
        let _ = writeln!(
            out,
            "  reference silicon: area -{:.1}%, power -{:.1}% (not modelled)",
            m.reference_area_reduction_pct, m.reference_power_reduction_pct
        );

        let s = &self.memory;
        let _ = writeln!(out, "\nmodel size: {} bytes", self.memory_bytes);
        for (name, n) in [
            ("header", s.header),
            ("config", s.config),
            ("codebook", s.codebook),
            ("distance table", s.distance_table),
            ("templates", s.templates),
            ("frontend tables", s.frontend_tables),
        ] {
            let _ = writeln!(out, "  {name}: {n}");
        }
        let _ = writeln!(
            out,
            "reference on-chip memory: {} bytes ({})",
            self.reference_memory_bytes,
            if self.memory_bytes <= self.reference_memory_bytes { "fits" } else { "EXCEEDS" }
        );

        let a = &self.ablation;
        let _ = writeln!(out, "\ncompression ablation, per one-second utterance:");
        for w in [&a.baseline, &a.compressed] {
            let _ = writeln!(
                out,
                "  {}: frames {}, frontend mults {}, codeword distances {}, matcher lookups {}, total distances {}",
                w.label,
                w.frames,
                w.frontend_mults,
                w.vq_distances,
                w.matcher_lookups,
                w.distance_computations()
            );
        }
        let _ = writeln!(out, "  distance-computation reduction: {:.2}%", 100.0 * a.distance_reduction);
        let _ = writeln!(out, "  frontend multiply reduction: {:.2}%", 100.0 * a.multiply_reduction);
        out
    }
}
