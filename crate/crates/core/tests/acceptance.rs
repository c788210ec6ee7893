//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kws_core::costmodel::{matcher_cost, reference};
use kws_core::frontend::{fft128, Frontend, FrontendConfig, FrontendCounts, MfccVector, PcmClip};
use kws_core::harness::train::extract_entries;
use kws_core::harness::{build_cost_report, run_evaluate, run_train, Config, EvalOptions, Manifest, Model, Split};
use kws_core::matcher::{
    classify_counted, diagonal_distance, dtw_full, dtw_full_accumulated, MatchMode, MatcherConfig, Score, Template,
};
use kws_core::numerics::QFormat;
use kws_core::ops::OpCounts;
use kws_core::oracle::{dft_naive, dtw_enumerate, sqnr_db, Complex};
use kws_core::synth::{write_corpus, CorpusSpec};
use kws_core::vq::{train_codebook, DistanceTable, EncodedUtterance, LbgConfig};

const FFT_MIN_MEAN_SQNR_DB: f64 = 45.0;
const FFT_FRAMES: usize = 100;
/// Analytic-case tolerance for the FFT, in Q2.14 LSBs.
const FFT_ANALYTIC_LSB: f64 = 4.0;
const DTW_INSTANCES: usize = 1000;
const DTW_MAX_LEN: usize = 12;
const DIAGONAL_PAIRS: usize = 1000;
const DEFAULT_T: usize = 64;
const HOP_BUDGET_MS: f64 = 8.0;
const MEMORY_BUDGET_BYTES: usize = 131_072;
const MIN_ACCURACY: f64 = 0.60;
const MIN_CHANCE_MULTIPLE: f64 = 3.0;
const MIN_DISTANCE_REDUCTION: f64 = 0.95;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_table(rng: &mut ChaCha8Rng, k: usize) -> DistanceTable {
    let mut e = vec![0u16; k * k];
    for i in 0..k {
        for j in 0..i {
            let v = rng.random_range(0..=u16::MAX);
            e[i * k + j] = v;
            e[j * k + i] = v;
        }
    }
    DistanceTable::from_raw(k, e).unwrap()
}

fn random_seq(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<u16> {
    (0..len).map(|_| rng.random_range(0..k as u16)).collect()
}

fn to_complex(s: &kws_core::frontend::Spectrum) -> Vec<Complex> {
    (0..s.bins().len())
        .map(|k| {
            let (re, im) = s.bin(k);
            Complex {
                re: re.to_f64(),
                im: im.to_f64(),
            }
        })
        .collect()
}

fn fft_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xff7);
    let mut total = 0.0;
    for _ in 0..FFT_FRAMES {
        let frame: Vec<i16> = (0..128).map(|_| rng.random_range(i16::MIN..=i16::MAX)).collect();
        let x: Vec<f64> = frame.iter().map(|&v| v as f64 / 32768.0).collect();
        total += sqnr_db(&dft_naive(&x).unwrap(), &to_complex(&fft128(&frame).unwrap()));
    }
    let mean = total / FFT_FRAMES as f64;
    let lsb = QFormat::Q2_14.ulp();

    let mut impulse = [0i16; 128];
    impulse[0] = 16384;
    let imp_err = to_complex(&fft128(&impulse).unwrap())
        .iter()
        .map(|c| (c.re - 0.5 / 128.0).abs().max(c.im.abs()))
        .fold(0.0, f64::max);

    let cosine: Vec<i16> = (0..128)
        .map(|n| (0.5 * (2.0 * PI * 16.0 * n as f64 / 128.0).cos() * 32768.0).round() as i16)
        .collect();
    let cos_err = to_complex(&fft128(&cosine).unwrap())
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let expected = if k == 16 { 0.25 } else { 0.0 };
            (c.norm_sqr().sqrt() - expected).abs()
        })
        .fold(0.0, f64::max);

    check(
        mean >= FFT_MIN_MEAN_SQNR_DB && imp_err <= FFT_ANALYTIC_LSB * lsb && cos_err <= FFT_ANALYTIC_LSB * lsb,
        format!(
            "mean SQNR {mean:.2} dB over {FFT_FRAMES} frames (>= {FFT_MIN_MEAN_SQNR_DB}); impulse err {:.2} LSB, cosine err {:.2} LSB (<= {FFT_ANALYTIC_LSB})",
            imp_err / lsb,
            cos_err / lsb
        ),
    )
}

fn dtw_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd7);
    let mut mismatches = 0;
    for _ in 0..DTW_INSTANCES {
        let k = rng.random_range(2..=16);
        let table = random_table(&mut rng, k);
        let (n, m) = (rng.random_range(1..=DTW_MAX_LEN), rng.random_range(1..=DTW_MAX_LEN));
        let a = random_seq(&mut rng, n, k);
        let b = random_seq(&mut rng, m, k);
        let expected = dtw_enumerate(&a, &b, &table).unwrap();
        let acc = dtw_full_accumulated(&a, &b, &table, &mut OpCounts::default()).unwrap();
        let denom = (n + m) as u64;
        let expected_score = Score(((expected + denom / 2) / denom) as u32);
        if acc != expected || dtw_full(&a, &b, &table).unwrap() != expected_score {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{mismatches} mismatches in {DTW_INSTANCES} instances, lengths <= {DTW_MAX_LEN}"),
    )
}

fn diagonal_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1a9);
    let (mut violations, mut identical_bad, mut strict) = (0, 0, 0);
    for _ in 0..DIAGONAL_PAIRS {
        let k = rng.random_range(2..=32);
        let table = random_table(&mut rng, k);
        let t = rng.random_range(2..=DEFAULT_T);
        let a = random_seq(&mut rng, t, k);
        let b = random_seq(&mut rng, t, k);
        let diag = diagonal_distance(&a, &b, &table).unwrap();
        let full = dtw_full(&a, &b, &table).unwrap();
        if diag < full {
            violations += 1;
        }
        if diag > full {
            strict += 1;
        }
        if diagonal_distance(&a, &a, &table).unwrap() != dtw_full(&a, &a, &table).unwrap() {
            identical_bad += 1;
        }
    }
    check(
        violations == 0 && identical_bad == 0,
        format!(
            "{violations} violations, {identical_bad} identical-pair mismatches in {DIAGONAL_PAIRS} pairs ({strict} strictly greater)"
        ),
    )
}

fn compute_reduction() -> Outcome {
    let table = DistanceTable::from_raw(2, vec![0, 256, 256, 0]).unwrap();
    let mut exact = true;
    for t in [2usize, 8, 32, DEFAULT_T, 100] {
        let lookups = |mode| {
            let cfg = MatcherConfig {
                template_len: t,
                mode,
                ..MatcherConfig::default()
            };
            let template = Template::new("k", vec![1; t], t, 2).unwrap();
            let u = EncodedUtterance::new(vec![0; 2 * t + 3], 2).unwrap();
            let mut counts = OpCounts::default();
            classify_counted(&u, &[template], &cfg, &table, &mut counts).unwrap();
            counts.lookups
        };
        let (full, diag) = (lookups(MatchMode::FullDtw), lookups(MatchMode::Diagonal));
        exact &= full == (t * t) as u64 && diag == t as u64 && diag * t as u64 == full;
        exact &= matcher_cost(MatchMode::FullDtw, t, 1).unwrap().lookups == full;
        exact &= matcher_cost(MatchMode::Diagonal, t, 1).unwrap().lookups == diag;
    }
    let full = matcher_cost(MatchMode::FullDtw, DEFAULT_T, 1).unwrap().lookups;
    let diag = matcher_cost(MatchMode::Diagonal, DEFAULT_T, 1).unwrap().lookups;
    let reduction = 100.0 * (1.0 - diag as f64 / full as f64);
    check(
        exact && (reduction - 98.4375).abs() < 1e-9,
        format!(
            "diagonal/full = 1/T at every T tried; T={DEFAULT_T}: {diag}/{full} lookups, {reduction:.2}% reduction (reference silicon: area -{}%, power -{}%, not asserted)",
            reference::TCU_AREA_REDUCTION_PCT,
            reference::TCU_POWER_REDUCTION_PCT
        ),
    )
}

fn default_model() -> Model {
    let names = ["k0", "k1", "k2", "k3", "k4"];
    Model::placeholder(&Config::default(), &names).unwrap()
}

fn latency_bound() -> Outcome {
    let r = build_cost_report(&default_model(), MatchMode::Diagonal).unwrap();
    let f = &r.frame;
    check(
        f.latency_ms <= HOP_BUDGET_MS && f.budget_ms == HOP_BUDGET_MS,
        format!(
            "{} cycles = {:.3} ms at 400 kHz (<= {HOP_BUDGET_MS} ms); reference {} ms",
            f.total_cycles_per_frame,
            f.latency_ms,
            reference::FRAME_LATENCY_MS
        ),
    )
}

struct Desk {
    _dir: tempfile::TempDir,
    manifest_path: PathBuf,
    manifest: Manifest,
}

fn desk_corpus() -> Desk {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_corpus(dir.path(), &CorpusSpec::default()).unwrap();
    let manifest = Manifest::load(&manifest_path).unwrap();
    Desk {
        _dir: dir,
        manifest_path,
        manifest,
    }
}

fn memory_budget(desk: &Desk) -> Outcome {
    let (model, _) = run_train(&desk.manifest, &Config::default()).unwrap();
    let bytes = model.to_bytes().len();
    let s = model.section_sizes();
    check(
        bytes <= MEMORY_BUDGET_BYTES,
        format!(
            "trained default model {bytes} bytes (codebook {}, distance table {}, templates {}, tables {}) <= {MEMORY_BUDGET_BYTES}",
            s.codebook, s.distance_table, s.templates, s.frontend_tables
        ),
    )
}

fn recognition(desk: &Desk) -> Outcome {
    let m = &desk.manifest;
    let per_kw = |split| {
        m.keywords
            .iter()
            .map(|k| m.split(split).filter(|e| e.keyword.as_ref() == Some(k)).count())
            .min()
            .unwrap()
    };
    let (model, _) = run_train(m, &Config::default()).unwrap();
    let r = run_evaluate(m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    check(
        m.keywords.len() >= 5
            && per_kw(Split::Train) >= 8
            && per_kw(Split::Test) >= 10
            && r.accuracy >= MIN_ACCURACY
            && r.accuracy >= MIN_CHANCE_MULTIPLE * r.chance_level,
        format!(
            "{} keywords, >= {} train / {} test each: accuracy {:.2}% ({}/{}), chance {:.2}% (floor {:.0}% and {MIN_CHANCE_MULTIPLE}x chance); reference {}% on over {} unpublished clips",
            m.keywords.len(),
            per_kw(Split::Train),
            per_kw(Split::Test),
            100.0 * r.accuracy,
            r.correct,
            r.total,
            100.0 * r.chance_level,
            100.0 * MIN_ACCURACY,
            reference::RECOGNITION_RATE_PCT,
            reference::TEST_CLIPS
        ),
    )
}

fn lbg_monotonicity(desk: &Desk) -> Outcome {
    let cfg = Config::default();
    let frontend = Frontend::new(cfg.frontend.clone()).unwrap();
    let train: Vec<_> = desk.manifest.split(Split::Train).collect();
    let vectors: Vec<MfccVector> = extract_entries(&train, &frontend).unwrap().into_iter().flatten().collect();
    let mut finals = Vec::new();
    let mut all_monotone = true;
    for k in [16, 32, 64] {
        let lbg = LbgConfig {
            codebook_size: k,
            ..LbgConfig::default()
        };
        let (_, log) = train_codebook(&vectors, &lbg, cfg.seed).unwrap();
        let trace: Vec<f64> = log.levels.iter().flat_map(|l| l.distortions.iter().copied()).collect();
        all_monotone &= trace.windows(2).all(|w| w[1] <= w[0]);
        finals.push(log.final_distortion);
    }
    check(
        all_monotone && finals[2] <= finals[1] && finals[1] <= finals[0],
        format!(
            "per-iteration distortion non-increasing: {all_monotone}; final K=16 {:.1}, K=32 {:.1}, K=64 {:.1} on {} vectors",
            finals[0],
            finals[1],
            finals[2],
            vectors.len()
        ),
    )
}

fn train_and_evaluate(manifest_path: &Path) -> (Vec<u8>, String, String) {
    let m = Manifest::load(manifest_path).unwrap();
    let (model, _) = run_train(&m, &Config::default()).unwrap();
    let r = run_evaluate(&m, &model, MatchMode::Diagonal, EvalOptions::default()).unwrap();
    (model.to_bytes(), r.to_json(), r.to_text())
}

fn determinism(desk: &Desk) -> Outcome {
    let a = train_and_evaluate(&desk.manifest_path);
    let b = train_and_evaluate(&desk.manifest_path);
    check(
        a == b,
        format!(
            "model {} bytes, JSON report {} bytes, text report {} bytes; identical across runs: {}",
            a.0.len(),
            a.1.len(),
            a.2.len(),
            a == b
        ),
    )
}

fn compression_ablation() -> Outcome {
    let r = build_cost_report(&default_model(), MatchMode::Diagonal).unwrap();
    let a = &r.ablation;

    // recount both pipelines from scratch
    let measure = |cfg: FrontendConfig| {
        let fe = Frontend::new(cfg).unwrap();
        let rate = fe.config().input_rate();
        let mut counts = FrontendCounts::default();
        fe.extract_mfcc_counted(&PcmClip::new(vec![0; rate as usize], rate).unwrap(), &mut counts).unwrap();
        counts
    };
    let full = measure(FrontendConfig::full_rate());
    let down = measure(FrontendConfig::default());
    let per_frame = |c: &FrontendCounts| (c.total().mults - c.downsample.mults) / c.frames;
    let consistent = a.baseline.frontend_mults == full.total().mults
        && a.compressed.frontend_mults == down.total().mults
        && a.baseline.frames == full.frames
        && a.compressed.frames == down.frames
        && a.baseline.frontend_mults == full.frames * per_frame(&full)
        && a.compressed.frontend_mults == down.frames * per_frame(&down) + down.downsample.mults;
    check(
        a.distance_reduction >= MIN_DISTANCE_REDUCTION && consistent && a.multiply_reduction > 0.0,
        format!(
            "distances {} -> {} ({:.2}% reduction, >= {:.0}%); frontend mults {} -> {} ({:.2}% reduction; full rate {} per frame, downsampled {} per frame + {} decimation); counts match instrumentation: {consistent}",
            a.baseline.distance_computations(),
            a.compressed.distance_computations(),
            100.0 * a.distance_reduction,
            100.0 * MIN_DISTANCE_REDUCTION,
            a.baseline.frontend_mults,
            a.compressed.frontend_mults,
            100.0 * a.multiply_reduction,
            per_frame(&full),
            per_frame(&down),
            down.downsample.mults
        ),
    )
}

fn main() -> ExitCode {
    let desk = desk_corpus();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("fixed-point FFT fidelity", Box::new(fft_fidelity)),
        ("DTW oracle equivalence", Box::new(dtw_oracle_equivalence)),
        ("diagonal dominance", Box::new(diagonal_dominance)),
        ("compute reduction", Box::new(compute_reduction)),
        ("real-time latency bound", Box::new(latency_bound)),
        ("memory budget", Box::new(|| memory_budget(&desk))),
        ("desk-scale recognition", Box::new(|| recognition(&desk))),
        ("LBG monotonicity", Box::new(|| lbg_monotonicity(&desk))),
        ("determinism", Box::new(|| determinism(&desk))),
        ("compression ablation", Box::new(compression_ablation)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
