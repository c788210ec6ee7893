use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frontend::{Frontend, MfccVector};
use crate::harness::config::Config;
use crate::harness::manifest::{Manifest, ManifestEntry, Split};
use crate::harness::model::Model;
use crate::harness::wav::load_wav;
use crate::matcher::{build_template, score, Score};
use crate::ops::OpCounts;
use crate::vq::{build_distance_table, encode_utterance, train_codebook, EncodedUtterance, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub train_clips: usize,
    pub feature_vectors: usize,
    pub codebook_size: usize,
    pub training_log: TrainingLog,
    pub threshold: Score,
    /// Fraction of correct-keyword train scores at or below the threshold.
    pub accepted_fraction: f64,
}

/// Loads and featurizes the given entries, in order.
pub fn extract_entries(entries: &[&ManifestEntry], frontend: &Frontend) -> Result<Vec<Vec<MfccVector>>> {
    entries
        .par_iter()
        .map(|e| {
            let clip = load_wav(&e.path).map_err(|err| err.in_clip(e.path.display().to_string()))?;
            let mfccs = frontend
                .extract_mfcc(&clip)
                .map_err(|err| err.in_clip(e.path.display().to_string()))?;
            if mfccs.is_empty() {
                return Err(Error::usage("clip is shorter than one frame").in_clip(e.path.display().to_string()));
            }
            Ok(mfccs)
        })
        .collect()
}

/// Smallest score at or above `target` of the sorted scores.
pub fn calibrate_threshold(scores: &[Score], target: f64) -> Result<Score> {
    if scores.is_empty() {
        return Err(Error::Training("no scores to calibrate on".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_unstable();
    let needed = ((target * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[needed - 1])
}

/// Features, codebook, distance table, medoid templates and threshold.
pub fn run_train(manifest: &Manifest, config: &Config) -> Result<(Model, TrainSummary)> {
    config.validate()?;
    manifest.check_trainable()?;
    let frontend = Frontend::new(config.frontend.clone())?;
    let train: Vec<&ManifestEntry> = manifest.split(Split::Train).collect();
    let features = extract_entries(&train, &frontend)?;

    let pooled: Vec<MfccVector> = features.iter().flatten().cloned().collect();
    let (codebook, training_log) = train_codebook(&pooled, &config.vq, config.seed)?;
    let table = build_distance_table(&codebook);
    let encoded = features
        .iter()
        .map(|f| encode_utterance(f, &codebook))
        .collect::<Result<Vec<_>>>()?;

    let mut templates = Vec::with_capacity(manifest.keywords.len());
    let mut own_utterances: Vec<Vec<&EncodedUtterance>> = Vec::new();
    for k in &manifest.keywords {
        let utts: Vec<EncodedUtterance> = train
            .iter()
            .zip(&encoded)
            .filter(|(e, _)| e.keyword.as_ref() == Some(k))
            .map(|(_, u)| u.clone())
            .collect();
        templates.push(build_template(&utts, k, &config.matcher, &table)?);
        own_utterances.push(
            train
                .iter()
                .zip(&encoded)
                .filter(|(e, _)| e.keyword.as_ref() == Some(k))
                .map(|(_, u)| u)
                .collect(),
        );
    }

    let mut own_scores = Vec::new();
    for (template, utts) in templates.iter().zip(&own_utterances) {
        for u in utts {
            let normalized = crate::matcher::time_normalize(u, config.matcher.template_len);
            own_scores.push(score(
                normalized.indices(),
                template.indices(),
                &table,
                config.matcher.mode,
                &mut OpCounts::default(),
            )?);
        }
    }
    let threshold = calibrate_threshold(&own_scores, config.calibration.target_acceptance)?;
    let accepted = own_scores.iter().filter(|&&s| s <= threshold).count();

    let mut model_config = config.clone();
    model_config.matcher.rejection_threshold = threshold;
    let model = Model {
        config: model_config,
        codebook,
        table,
        templates,
        tables: frontend.tables().clone(),
    };
    model.validate()?;
    let summary = TrainSummary {
        train_clips: train.len(),
        feature_vectors: pooled.len(),
        codebook_size: model.codebook.size(),
        training_log,
        threshold,
        accepted_fraction: accepted as f64 / own_scores.len() as f64,
    };
    Ok((model, summary))
}
