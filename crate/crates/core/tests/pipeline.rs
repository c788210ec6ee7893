use std::path::Path;

use kws_core::frontend::{Frontend, FrontendConfig};
use kws_core::harness::{
    load_wav, run_evaluate, run_train, verify_clip, Config, EvalOptions, Manifest, Model, Split,
};
use kws_core::matcher::MatchMode;
use kws_core::synth::{write_corpus, CorpusSpec};
use kws_core::Error;

fn corpus(dir: &Path, train: usize, test: usize, negatives: usize) -> Manifest {
    let spec = CorpusSpec {
        seed: 77,
        train_per_keyword: train,
        test_per_keyword: test,
        negatives,
    };
    Manifest::load(&write_corpus(dir, &spec).unwrap()).unwrap()
}

#[test]
fn trained_model_structure() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 8, 2, 0);
    let (model, summary) = run_train(&m, &Config::default()).unwrap();
    assert_eq!(model.templates.len(), 5);
    assert_eq!(model.codebook.size(), 64);
    assert_eq!(model.codebook.dim(), 12);
    assert_eq!(model.keywords(), m.keywords.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(model.templates.iter().all(|t| t.indices().len() == 64));
    assert_eq!(summary.train_clips, 40);
    assert_eq!(summary.feature_vectors, 40 * 124);
    assert!(summary.accepted_fraction >= 0.95);
    assert_eq!(model.config.matcher.rejection_threshold, summary.threshold);
    assert!(summary.training_log.is_monotone());
    assert!(model.to_bytes().len() <= 131_072);
}

#[test]
fn seen_clips_score_at_least_as_well_as_held_out() {
    let dir = tempfile::tempdir().unwrap();
    let m = Manifest::load(&write_corpus(dir.path(), &CorpusSpec::default()).unwrap()).unwrap();
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let on = |split| {
        run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions { split, timing: false })
            .unwrap()
            .accuracy
    };
    let (train, test) = (on(Split::Train), on(Split::Test));
    assert!(train >= test, "train {train} test {test}");
}

#[test]
fn report_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 4, 3, 4);
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let r = run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    assert_eq!(r.total, 5 * 3 + 4);
    assert_eq!(r.clips.len(), r.total);
    assert!((r.accuracy - r.confusion_accuracy()).abs() < 1e-12);
    for (label, row) in r.expected_labels.iter().zip(&r.confusion) {
        let n = r.clips.iter().filter(|c| &c.expected == label).count();
        assert_eq!(row.iter().sum::<usize>(), n, "row {label}");
    }
    let rejected = r.clips.iter().filter(|c| c.predicted == "REJECT").count();
    assert!((r.rejection_rate - rejected as f64 / r.total as f64).abs() < 1e-12);
    // manifest order, regardless of scheduling
    let order: Vec<String> = m.split(Split::Test).map(|e| e.path.display().to_string()).collect();
    assert_eq!(r.clips.iter().map(|c| c.path.clone()).collect::<Vec<_>>(), order);
    assert!(r.clips.iter().all(|c| c.wall_time_ms.is_none()));
    assert_eq!(r.chance_level, 1.0 / 6.0);
}

#[test]
fn full_and_diagonal_lookups_differ_by_template_length() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 2, 0);
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let diag = run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    let full = run_evaluate(&m, &model, MatchMode::FullDtw, EvalOptions::default()).unwrap();
    assert_eq!(diag.cost.lookups_per_clip, 5 * 64);
    assert_eq!(full.cost.lookups_per_clip, 5 * 64 * 64);
    assert_eq!(full.cost.matcher_counts.lookups, 64 * diag.cost.matcher_counts.lookups);
}

#[test]
fn empty_test_split_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, 0, 0);
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let err = run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "{err}");
}

#[test]
fn bad_clip_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, 1, 0);
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let victim = m.split(Split::Test).nth(2).unwrap().path.clone();
    std::fs::write(&victim, b"not a wav file").unwrap();
    match run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap_err() {
        Error::Clip { clip, source } => {
            assert_eq!(clip, victim.display().to_string());
            assert!(matches!(*source, Error::UnsupportedFormat { .. }));
        }
        other => panic!("{other}"),
    }
    std::fs::remove_file(&victim).unwrap();
    match run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap_err() {
        Error::Clip { source, .. } => assert!(matches!(*source, Error::Io { .. })),
        other => panic!("{other}"),
    }
}

#[test]
fn saved_model_evaluates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 2, 2);
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let path = dir.path().join("model.kws");
    model.save(&path).unwrap();
    let loaded = Model::load(&path).unwrap();
    assert_eq!(loaded.to_bytes(), model.to_bytes());
    let a = run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    let b = run_evaluate(&m, &loaded, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn full_mode_training_calibrates_in_full_mode() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 2, 0);
    let mut cfg = Config::default();
    cfg.matcher.mode = MatchMode::FullDtw;
    let (model, summary) = run_train(&m, &cfg).unwrap();
    assert_eq!(model.config.matcher.mode, MatchMode::FullDtw);
    assert!(summary.accepted_fraction >= 0.95);
    let r = run_evaluate(&m, &model, MatchMode::FullDtw, EvalOptions::default()).unwrap();
    assert_eq!(r.mode, MatchMode::FullDtw);
}

#[test]
fn datapath_tracks_float_reference_on_speech() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 1, 0, 0);
    let frontend = Frontend::new(FrontendConfig::default()).unwrap();
    for e in &m.entries {
        let clip = load_wav(&e.path).unwrap();
        let r = verify_clip(&frontend, &clip).unwrap();
        assert_eq!(r.frames, 124);
        assert!(r.floored_frames < r.frames, "{}", e.path.display());
        assert!(r.log_mel_mean_abs_error < 0.3, "{}: {}", e.path.display(), r.log_mel_mean_abs_error);
    }
}

#[test]
fn pipeline_rate_input_skips_decimation() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 1, 0, 0);
    let clip = load_wav(&m.entries[0].path).unwrap();
    let frontend = Frontend::new(FrontendConfig::default()).unwrap();
    let mut counts = Default::default();
    let at_8k = frontend.to_pipeline_rate(&clip, &mut counts).unwrap();
    assert_eq!(at_8k.sample_rate(), 8000);
    assert_eq!(frontend.extract_mfcc(&at_8k).unwrap(), frontend.extract_mfcc(&clip).unwrap());
}
