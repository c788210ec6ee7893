use std::path::Path;
use std::process::{Command, Output};

fn kws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kws")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = kws(args);
    assert!(
        out.status.success(),
        "kws {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let manifest = ok(&["synth-corpus", s(&corpus), "--train", "3", "--test", "2", "--negatives", "2"]);
    let manifest = manifest.trim();
    assert!(Path::new(manifest).is_file());

    let model = dir.path().join("model.kws");
    let train = ok(&["--seed", "5", "train", manifest, "-o", s(&model)]);
    assert!(train.contains("train clips: 15"), "{train}");
    assert!(model.is_file());

    let json = dir.path().join("eval.json");
    let eval = ok(&["evaluate", manifest, s(&model), "--json", s(&json)]);
    assert!(eval.contains("accuracy"), "{eval}");
    assert!(std::fs::read_to_string(&json).unwrap().trim_start().starts_with('{'));
    let full = ok(&["--mode", "full", "evaluate", manifest, s(&model)]);
    assert_ne!(eval, full);

    let wav = corpus.join("go").join("test_00.wav");
    let classify = ok(&["classify", s(&model), s(&wav)]);
    assert!(classify.contains("score="), "{classify}");
    assert_eq!(classify.lines().count(), 6);

    let extract = ok(&["extract", s(&wav)]);
    assert_eq!(extract.lines().count(), 124);
    assert!(extract.lines().all(|l| l.split(' ').count() == 12));
    assert_eq!(ok(&["extract", s(&wav), "--model", s(&model)]), extract);

    let verify = ok(&["verify", s(&wav)]);
    assert!(verify.contains("fft sqnr"), "{verify}");

    let tables = dir.path().join("tables");
    ok(&["dump-tables", "--model", s(&model), "--all", "--out-dir", s(&tables)]);
    assert!(tables.join("codebook.txt").is_file());
    let table = std::fs::read_to_string(tables.join("distance_table.txt")).unwrap();
    assert_eq!(table.lines().count(), 64);
    assert!(table.lines().all(|l| l.split(' ').count() == 64));
    assert!(ok(&["dump-tables", "--table", "log2"]).lines().count() > 0);
}

#[test]
fn cost_report_shows_budget_and_reference() {
    let text = ok(&["cost-report"]);
    assert!(text.contains("reference frame latency: 2.98 ms"), "{text}");
    assert!(text.contains("(real-time)"), "{text}");
    let json = ok(&["cost-report", "--json"]);
    assert!(json.contains("\"ablation\""));
}

#[test]
fn errors_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let bogus = dir.path().join("bogus.kws");
    std::fs::write(&bogus, b"KWS0").unwrap();
    let out = kws(&["classify", s(&bogus), s(&bogus)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus.kws"));

    let out = kws(&["dump-tables", "--table", "codebook"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("needs --model"));

    let out = kws(&["--mode", "sideways", "cost-report"]);
    assert!(!out.status.success());
}
