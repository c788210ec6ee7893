use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use kws_core::frontend::{Frontend, FrontendTables};
use kws_core::harness::{
    build_cost_report, load_wav, run_evaluate, run_train, verify_clip, Config, EvalOptions, Manifest, Model, Split,
};
use kws_core::matcher::MatchMode;
use kws_core::synth::{write_corpus, CorpusSpec};

#[derive(Parser)]
#[command(name = "kws", version, about = "Fixed-point keyword-spotting accelerator model")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Matcher mode, overriding the config or the model.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    /// Training seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Diagonal,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => MatchMode::FullDtw,
            Mode::Diagonal => MatchMode::Diagonal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Print the MFCCs of a WAV file, one frame per line as raw Q7.8 integers.
    Extract {
        wav: PathBuf,
        /// Use the frontend tables stored in this model.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train a model from the train split of a manifest.
    Train {
        manifest: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Classify every clip of a split and report accuracy.
    Evaluate {
        manifest: PathBuf,
        model: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Record wall time per clip (makes the report run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Classify one WAV file.
    Classify { model: PathBuf, wav: PathBuf },
    /// Operation counts, cycles, latency, memory and the compression ablation.
    CostReport {
        /// Report on this model instead of an empty default-shaped one.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Compare the fixed-point frontend with the floating-point reference.
    Verify {
        #[arg(required = true)]
        wavs: Vec<PathBuf>,
    },
    /// Print constant tables, one raw integer per line.
    DumpTables {
        /// Table name; all tables when omitted.
        #[arg(long)]
        table: Option<String>,
        /// Write one `<name>.txt` per table here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also dump the model's codebook and distance table.
        #[arg(long)]
        all: bool,
    },
    /// Write a synthetic keyword corpus and its manifest.
    SynthCorpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        train: usize,
        #[arg(long, default_value_t = 12)]
        test: usize,
        #[arg(long, default_value_t = 10)]
        negatives: usize,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.matcher.mode = mode.into();
    }
    Ok(cfg)
}

fn load_model(path: &Path) -> Result<Model> {
    Model::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mode_override = cli.mode.map(MatchMode::from);
    match &cli.command {
        Command::Extract { wav, model } => {
            let frontend = match model {
                Some(p) => load_model(p)?.frontend()?,
                None => Frontend::new(load_config(&cli)?.frontend)?,
            };
            let clip = load_wav(wav)?;
            let mfccs = frontend.extract_mfcc(&clip)?;
            if mfccs.is_empty() {
                eprintln!("clip is shorter than one frame; no output");
            }
            for v in mfccs {
                let line: Vec<String> = v.coeffs.iter().map(i16::to_string).collect();
                println!("{}", line.join(" "));
            }
        }
        Command::Train { manifest, output } => {
            let cfg = load_config(&cli)?;
            let m = Manifest::load(manifest)?;
            let (model, summary) = run_train(&m, &cfg)?;
            model.save(output)?;
            println!("train clips: {}", summary.train_clips);
            println!("feature vectors: {}", summary.feature_vectors);
            println!("codebook size: {}", summary.codebook_size);
            println!("final distortion: {:.6}", summary.training_log.final_distortion);
            println!("threshold: {}", summary.threshold);
            println!("accepted on train: {:.2}%", 100.0 * summary.accepted_fraction);
            println!("model: {} ({} bytes)", output.display(), model.to_bytes().len());
        }
        Command::Evaluate {
            manifest,
            model,
            split,
            json,
            timing,
        } => {
            let model = load_model(model)?;
            let m = Manifest::load(manifest)?;
            let opts = EvalOptions {
                split: match split {
                    SplitArg::Train => Split::Train,
                    SplitArg::Test => Split::Test,
                },
                timing: *timing,
            };
            let mode = mode_override.unwrap_or(model.config.matcher.mode);
            let report = run_evaluate(&m, &model, mode, opts)?;
            print!("{}", report.to_text());
            if let Some(path) = json {
                std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Classify { model, wav } => {
            let model = load_model(model)?;
            let frontend = model.frontend()?;
            let clip = load_wav(wav)?;
            let mode = mode_override.unwrap_or(model.config.matcher.mode);
            let r = model.classify_clip(&frontend, &clip, mode, &mut Default::default())?;
            println!("{} score={}", r.decision.label(), r.score);
            for (t, s) in model.templates.iter().zip(&r.per_template_scores) {
                println!("  {} {}", t.keyword, s);
            }
        }
        Command::CostReport { model, json } => {
            let model = match model {
                Some(p) => load_model(p)?,
                None => {
                    let cfg = load_config(&cli)?;
                    let names: Vec<String> = (0..kws_core::harness::cost::DEFAULT_KEYWORD_COUNT)
                        .map(|i| format!("keyword{i}"))
                        .collect();
                    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                    Model::placeholder(&cfg, &refs)?
                }
            };
            let mode = mode_override.unwrap_or(model.config.matcher.mode);
            let report = build_cost_report(&model, mode)?;
            if *json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
        }
        Command::Verify { wavs } => {
            let frontend = Frontend::new(load_config(&cli)?.frontend)?;
            for w in wavs {
                let clip = load_wav(w)?;
                let r = verify_clip(&frontend, &clip).with_context(|| format!("verifying {}", w.display()))?;
                println!("{}:", w.display());
                for line in r.to_text().lines() {
                    println!("  {line}");
                }
            }
        }
        Command::DumpTables {
            table,
            out_dir,
            model,
            all,
        } => {
            let model = model.as_deref().map(load_model).transpose()?;
            let tables = match &model {
                Some(m) => m.tables.clone(),
                None => FrontendTables::build(&load_config(&cli)?.frontend)?,
            };
            let mut dumps: Vec<(String, String)> = Vec::new();
            let names: Vec<&str> = match table {
                Some(t) => vec![t.as_str()],
                None => FrontendTables::table_names().to_vec(),
            };
            for name in names {
                match (name, &model) {
                    ("codebook", Some(m)) => dumps.push((name.into(), m.codebook.dump_text())),
                    ("distance_table", Some(m)) => dumps.push((name.into(), m.table.dump_text())),
                    ("codebook" | "distance_table", None) => bail!("table `{name}` needs --model"),
                    _ => match tables.dump(name) {
                        Some(text) => dumps.push((name.into(), text)),
                        None => bail!(
                            "unknown table `{name}` (known: {}, codebook, distance_table)",
                            FrontendTables::table_names().join(", ")
                        ),
                    },
                }
            }
            if *all && table.is_none() {
                let Some(m) = &model else { bail!("--all needs --model") };
                dumps.push(("codebook".into(), m.codebook.dump_text()));
                dumps.push(("distance_table".into(), m.table.dump_text()));
            }
            match out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    for (name, text) in dumps {
                        let p = dir.join(format!("{name}.txt"));
                        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
                    }
                }
                None if dumps.len() == 1 => print!("{}", dumps[0].1),
                None => {
                    for (name, text) in dumps {
                        println!("# {name}");
                        print!("{text}");
                    }
                }
            }
        }
        Command::SynthCorpus {
            dir,
            train,
            test,
            negatives,
        } => {
            let spec = CorpusSpec {
                seed: cli.seed.unwrap_or(CorpusSpec::default().seed),
                train_per_keyword: *train,
                test_per_keyword: *test,
                negatives: *negatives,
            };
            let path = write_corpus(dir, &spec)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
