use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::costmodel::{frontend_cost, latency_report, matcher_cost, reference};
use crate::error::{Error, Result};
use crate::harness::manifest::{Manifest, ManifestEntry, Split, NEGATIVE_LABEL};
use crate::harness::model::Model;
use crate::harness::wav::load_wav;
use crate::matcher::{Decision, MatchMode, Score};
use crate::ops::OpCounts;

pub const REJECT_LABEL: &str = "REJECT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub split: Split,
    /// Record wall time per clip. Off by default so reports are reproducible.
    pub timing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            split: Split::Test,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipResult {
    pub path: String,
    pub expected: String,
    pub predicted: String,
    pub score: Score,
    pub per_template_scores: Vec<Score>,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSummary {
    pub template_len: usize,
    pub n_templates: usize,
    pub matcher_counts: OpCounts,
    pub lookups_per_clip: u64,
    pub frame_cycles: u64,
    pub frame_latency_ms: f64,
    pub clock_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    pub split: &'static str,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub rejection_rate: f64,
    /// `1 / number of distinct expected labels`.
    pub chance_level: f64,
    /// Row labels: keywords then `-`.
    pub expected_labels: Vec<String>,
    /// Column labels: keywords then `REJECT`.
    pub predicted_labels: Vec<String>,
    pub confusion: Vec<Vec<usize>>,
    pub threshold: Score,
    pub clips: Vec<ClipResult>,
    pub cost: CostSummary,
    pub reference_accuracy_pct: f64,
    pub reference_test_clips: usize,
}

impl EvalReport {
    /// Accuracy recomputed from the confusion matrix.
    pub fn confusion_accuracy(&self) -> f64 {
        let n_kw = self.expected_labels.len() - 1;
        let hits: usize = (0..n_kw).map(|i| self.confusion[i][i]).sum::<usize>() + self.confusion[n_kw][n_kw];
        hits as f64 / self.total as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "mode: {}", self.mode.name());
        let _ = writeln!(out, "split: {}", self.split);
        let _ = writeln!(
            out,
            "accuracy: {:.2}% ({}/{})",
            100.0 * self.accuracy,
            self.correct,
            self.total
        );
        let _ = writeln!(out, "chance level: {:.2}%", 100.0 * self.chance_level);
        let _ = writeln!(out, "rejection rate: {:.2}%", 100.0 * self.rejection_rate);
        let _ = writeln!(out, "threshold: {}", self.threshold);
        let _ = writeln!(
            out,
            "reference: {:.0}% over more than {} one-second clips (different, unpublished corpus)",
            self.reference_accuracy_pct, self.reference_test_clips
        );
        let width = self
            .expected_labels
            .iter()
            .chain(&self.predicted_labels)
            .map(String::len)
            .max()
            .unwrap_or(1)
            .max(4);
        let _ = writeln!(out, "\nconfusion (rows expected, columns predicted):");
        let _ = write!(out, "{:width$}", "");
        for p in &self.predicted_labels {
            let _ = write!(out, " {p:>width$}");
        }
        out.push('\n');
        for (label, row) in self.expected_labels.iter().zip(&self.confusion) {
            let _ = write!(out, "{label:width$}");
            for n in row {
                let _ = write!(out, " {n:>width$}");
            }
            out.push('\n');
        }
        let c = &self.cost;
        let _ = writeln!(out, "\nmatcher lookups per clip: {}", c.lookups_per_clip);
        let _ = writeln!(
            out,
            "frame cycles: {} ({:.3} ms at {} Hz)",
            c.frame_cycles, c.frame_latency_ms, c.clock_hz
        );
        let _ = writeln!(out, "\nclips:");
        for r in &self.clips {
            let _ = write!(
                out,
                "{} expected={} predicted={} score={} {}",
                r.path,
                r.expected,
                r.predicted,
                r.score,
                if r.correct { "ok" } else { "MISS" }
            );
            if let Some(ms) = r.wall_time_ms {
                let _ = write!(out, " {ms:.3}ms");
            }
            out.push('\n');
        }
        out
    }
}

pub fn run_evaluate(manifest: &Manifest, model: &Model, mode: MatchMode, opts: EvalOptions) -> Result<EvalReport> {
    let entries: Vec<&ManifestEntry> = manifest.split(opts.split).collect();
    if entries.is_empty() {
        return Err(Error::usage(format!("the {} split is empty", opts.split.name())));
    }
    let keywords: Vec<String> = model.keywords().iter().map(|s| s.to_string()).collect();
    if let Some(e) = entries
        .iter()
        .find(|e| e.keyword.as_ref().is_some_and(|k| !keywords.contains(k)))
    {
        return Err(Error::usage(format!(
            "manifest line {}: keyword `{}` has no template in the model",
            e.line,
            e.label()
        )));
    }
    let frontend = model.frontend()?;

    let results: Vec<(ClipResult, OpCounts)> = entries
        .par_iter()
        .map(|e| {
            let name = e.path.display().to_string();
            let start = Instant::now();
            let mut counts = OpCounts::default();
            let clip = load_wav(&e.path).map_err(|err| err.in_clip(&name))?;
            let m = model
                .classify_clip(&frontend, &clip, mode, &mut counts)
                .map_err(|err| err.in_clip(&name))?;
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let predicted = m.decision.label().to_string();
            let correct = match (&e.keyword, &m.decision) {
                (Some(k), Decision::Keyword(p)) => k == p,
                (None, Decision::Reject) => true,
                _ => false,
            };
            Ok((
                ClipResult {
                    path: name,
                    expected: e.label().to_string(),
                    predicted,
                    score: m.score,
                    per_template_scores: m.per_template_scores,
                    correct,
                    wall_time_ms: opts.timing.then_some(elapsed),
                },
                counts,
            ))
        })
        .collect::<Result<_>>()?;

    let mut expected_labels = keywords.clone();
    expected_labels.push(NEGATIVE_LABEL.to_string());
    let mut predicted_labels = keywords.clone();
    predicted_labels.push(REJECT_LABEL.to_string());
    let mut confusion = vec![vec![0usize; predicted_labels.len()]; expected_labels.len()];
    let mut matcher_counts = OpCounts::default();
    let mut clips = Vec::with_capacity(results.len());
    for (r, counts) in results {
        let row = expected_labels.iter().position(|l| *l == r.expected).expect("validated label");
        let col = predicted_labels.iter().position(|l| *l == r.predicted).expect("model label");
        confusion[row][col] += 1;
        matcher_counts += counts;
        clips.push(r);
    }

    let total = clips.len();
    let correct = clips.iter().filter(|r| r.correct).count();
    let rejected = clips.iter().filter(|r| r.predicted == REJECT_LABEL).count();
    let distinct = expected_labels
        .iter()
        .enumerate()
        .filter(|(i, _)| confusion[*i].iter().sum::<usize>() > 0)
        .count();

    let cfg = &model.config;
    let mut stages = frontend_cost(&frontend, &cfg.cost)?;
    stages.push(matcher_cost(mode, cfg.matcher.template_len, model.templates.len())?);
    let latency = latency_report(&stages, cfg.cost.clock_hz, cfg.frontend.hop_duration_ms())?;

    Ok(EvalReport {
        mode,
        split: opts.split.name(),
        total,
        correct,
        accuracy: correct as f64 / total as f64,
        rejection_rate: rejected as f64 / total as f64,
        chance_level: 1.0 / distinct as f64,
        expected_labels,
        predicted_labels,
        confusion,
        threshold: cfg.matcher.rejection_threshold,
        clips,
        cost: CostSummary {
            template_len: cfg.matcher.template_len,
            n_templates: model.templates.len(),
            lookups_per_clip: matcher_counts.lookups / total as u64,
            matcher_counts,
            frame_cycles: latency.total_cycles_per_frame,
            frame_latency_ms: latency.latency_ms,
            clock_hz: cfg.cost.clock_hz,
        },
        reference_accuracy_pct: reference::RECOGNITION_RATE_PCT,
        reference_test_clips: reference::TEST_CLIPS,
    })
}
