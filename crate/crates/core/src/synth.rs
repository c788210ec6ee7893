//! Formant-synthesized keyword corpus for offline testing.
//!
//! Each word is a sequence of voiced, fricative and silent segments. Voiced
//! segments drive a glottal pulse train through three cascaded resonators
//! whose centre frequencies glide between segment targets; fricatives are
//! band-passed noise. Every clip draws its own pitch, vocal-tract scale,
//! tempo, loudness, onset and background noise level from a seeded RNG, so
//! the same seed always yields the same corpus.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frontend::PcmClip;
use crate::harness::wav::save_wav;

pub const RATE: u32 = 16_000;
const CLIP_SAMPLES: usize = RATE as usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    /// Formant targets in Hz and duration in ms.
    Voiced([f64; 3], f64),
    /// Noise band centre, bandwidth and duration.
    Fricative(f64, f64, f64),
    Silence(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub name: &'static str,
    pub segments: Vec<Segment>,
}

use Segment::{Fricative as F, Silence as S, Voiced as V};

pub fn keywords() -> Vec<Word> {
    vec![
        Word {
            name: "go",
            segments: vec![S(25.0), V([500.0, 900.0, 2400.0], 230.0), V([330.0, 750.0, 2300.0], 170.0)],
        },
        Word {
            name: "stop",
            segments: vec![
                F(3600.0, 900.0, 140.0),
                S(50.0),
                V([720.0, 1150.0, 2600.0], 200.0),
                S(70.0),
                F(1200.0, 1500.0, 25.0),
            ],
        },
        Word {
            name: "left",
            segments: vec![
                V([360.0, 1050.0, 2750.0], 80.0),
                V([580.0, 1780.0, 2550.0], 180.0),
                F(1800.0, 2000.0, 110.0),
                S(40.0),
                F(3300.0, 1200.0, 30.0),
            ],
        },
        Word {
            name: "right",
            segments: vec![
                V([420.0, 1150.0, 1550.0], 110.0),
                V([760.0, 1280.0, 2450.0], 150.0),
                V([360.0, 2150.0, 2850.0], 130.0),
                S(50.0),
                F(3300.0, 1200.0, 30.0),
            ],
        },
        Word {
            name: "yes",
            segments: vec![
                V([290.0, 2250.0, 3000.0], 90.0),
                V([560.0, 1800.0, 2500.0], 160.0),
                F(3800.0, 800.0, 190.0),
            ],
        },
    ]
}

/// Words that are not keywords, for rejection tests.
pub fn distractors() -> Vec<Word> {
    vec![
        Word {
            name: "no",
            segments: vec![V([300.0, 1400.0, 2300.0], 70.0), V([480.0, 850.0, 2450.0], 300.0)],
        },
        Word {
            name: "up",
            segments: vec![V([640.0, 1200.0, 2400.0], 200.0), S(60.0), F(900.0, 1200.0, 25.0)],
        },
        Word {
            name: "wish",
            segments: vec![V([320.0, 700.0, 2200.0], 70.0), V([400.0, 2000.0, 2600.0], 140.0), F(2600.0, 1000.0, 200.0)],
        },
    ]
}

struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new() -> Self {
        Resonator { y1: 0.0, y2: 0.0 }
    }

    /// Two-pole resonator with unity gain at DC.
    fn step(&mut self, x: f64, freq: f64, bw: f64) -> f64 {
        let t = 1.0 / RATE as f64;
        let c = -(-2.0 * PI * bw * t).exp();
        let b = 2.0 * (-PI * bw * t).exp() * (2.0 * PI * freq * t).cos();
        let a = 1.0 - b - c;
        let y = a * x + b * self.y1 + c * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// Per-clip speaker and recording variation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub f0: f64,
    pub formant_scale: f64,
    pub tempo: f64,
    pub peak: f64,
    pub onset_ms: f64,
    pub noise: f64,
}

impl Variation {
    pub fn draw(rng: &mut ChaCha8Rng) -> Self {
        Variation {
            f0: rng.random_range(95.0..210.0),
            formant_scale: rng.random_range(0.9..1.1),
            tempo: rng.random_range(0.88..1.12),
            peak: rng.random_range(0.3..0.7),
            onset_ms: rng.random_range(-60.0..60.0),
            noise: rng.random_range(0.002..0.01),
        }
    }
}

const BANDWIDTHS: [f64; 3] = [70.0, 100.0, 140.0];

/// One-second clip of `word` at 16 kHz.
pub fn synthesize(word: &Word, v: Variation, rng: &mut ChaCha8Rng) -> PcmClip {
    let ms = |d: f64| (d * v.tempo * RATE as f64 / 1000.0).round() as usize;
    let total: usize = word
        .segments
        .iter()
        .map(|s| match *s {
            V(_, d) | F(_, _, d) | S(d) => ms(d),
        })
        .sum();

    let mut speech = Vec::with_capacity(total);
    let mut formants = [Resonator::new(), Resonator::new(), Resonator::new()];
    let mut fric = Resonator::new();
    let mut glottal = 0.0f64;
    let mut phase = 0.0f64;
    for (i, seg) in word.segments.iter().enumerate() {
        match *seg {
            V(target, d) => {
                let n = ms(d);
                let next = word.segments[i + 1..].iter().find_map(|s| match s {
                    V(t, _) => Some(*t),
                    _ => None,
                });
                for k in 0..n {
                    // glide into the next vowel over the last third
                    let frac = k as f64 / n as f64;
                    let mix = match next {
                        Some(_) if frac > 2.0 / 3.0 => (frac - 2.0 / 3.0) * 3.0 * 0.5,
                        _ => 0.0,
                    };
                    let f0 = v.f0 * (1.0 - 0.15 * (speech.len() as f64 / total.max(1) as f64));
                    phase += f0 / RATE as f64;
                    let pulse = if phase >= 1.0 {
                        phase -= 1.0;
                        1.0
                    } else {
                        0.0
                    };
                    glottal = 0.9 * glottal + pulse;
                    let mut y = glottal + rng.random_range(-0.02..0.02);
                    for (j, r) in formants.iter_mut().enumerate() {
                        let t = target[j] * (1.0 - mix) + next.map_or(target[j], |nx| nx[j]) * mix;
                        y = r.step(y, t * v.formant_scale, BANDWIDTHS[j]);
                    }
                    // soft attack and release
                    let edge = (k.min(n - k) as f64 / (0.01 * RATE as f64)).min(1.0);
                    speech.push(y * edge);
                }
            }
            F(centre, bw, d) => {
                let n = ms(d);
                for k in 0..n {
                    let x = rng.random_range(-1.0..1.0);
                    let edge = (k.min(n - k) as f64 / (0.005 * RATE as f64)).min(1.0);
                    speech.push(0.25 * fric.step(x, centre * v.formant_scale, bw) * edge);
                }
            }
            S(d) => speech.extend(std::iter::repeat_n(0.0, ms(d))),
        }
    }

    let peak = speech.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-9);
    let start = ((CLIP_SAMPLES.saturating_sub(speech.len())) as f64 / 2.0 + v.onset_ms * RATE as f64 / 1000.0)
        .clamp(0.0, CLIP_SAMPLES.saturating_sub(speech.len()) as f64) as usize;
    let samples: Vec<f64> = (0..CLIP_SAMPLES)
        .map(|i| {
            let s = if i >= start && i - start < speech.len() {
                speech[i - start] / peak * v.peak
            } else {
                0.0
            };
            (s + v.noise * rng.random_range(-1.0..1.0)).clamp(-1.0, 32767.0 / 32768.0)
        })
        .collect();
    PcmClip::from_f64(&samples, RATE).expect("synthesized clip is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub seed: u64,
    pub train_per_keyword: usize,
    pub test_per_keyword: usize,
    /// Distractor clips in the test split.
    pub negatives: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            seed: 2024,
            train_per_keyword: 8,
            test_per_keyword: 12,
            negatives: 10,
        }
    }
}

/// Writes the clips and a `manifest.tsv` under `dir`; returns the manifest path.
pub fn write_corpus(dir: &Path, spec: &CorpusSpec) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let words = keywords();
    let names: Vec<&str> = words.iter().map(|w| w.name).collect();
    let mut manifest = format!("# keywords: {}\n", names.join(" "));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut emit = |rel: String, label: &str, split: &str, word: &Word, rng: &mut ChaCha8Rng| -> Result<()> {
        let v = Variation::draw(rng);
        let clip = synthesize(word, v, rng);
        let path = dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        save_wav(&path, &clip)?;
        manifest.push_str(&format!("{rel}\t{label}\t{split}\n"));
        Ok(())
    };
    for w in &words {
        for i in 0..spec.train_per_keyword {
            emit(format!("{}/train_{i:02}.wav", w.name), w.name, "train", w, &mut rng)?;
        }
        for i in 0..spec.test_per_keyword {
            emit(format!("{}/test_{i:02}.wav", w.name), w.name, "test", w, &mut rng)?;
        }
    }
    let others = distractors();
    for i in 0..spec.negatives {
        let w = &others[i % others.len()];
        emit(format!("negative/{}_{i:02}.wav", w.name), "-", "test", w, &mut rng)?;
    }
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clips_are_one_second_and_deterministic() {
        let w = &keywords()[1];
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let va = Variation::draw(&mut a);
        let vb = Variation::draw(&mut b);
        let ca = synthesize(w, va, &mut a);
        assert_eq!(ca, synthesize(w, vb, &mut b));
        assert_eq!(ca.len(), 16000);
        assert_eq!(ca.sample_rate(), RATE);
        let peak = ca.samples().iter().map(|s| s.unsigned_abs()).max().unwrap();
        assert!(peak > 8000, "peak {peak}");
    }

    #[test]
    fn resonator_has_unity_dc_gain() {
        let mut r = Resonator::new();
        let mut y = 0.0;
        for _ in 0..20000 {
            y = r.step(1.0, 800.0, 100.0);
        }
        assert!((y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn corpus_layout() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CorpusSpec {
            seed: 1,
            train_per_keyword: 1,
            test_per_keyword: 1,
            negatives: 2,
        };
        let path = write_corpus(dir.path(), &spec).unwrap();
        let m = crate::harness::Manifest::load(&path).unwrap();
        assert_eq!(m.keywords, vec!["go", "stop", "left", "right", "yes"]);
        assert_eq!(m.entries.len(), 12);
        assert!(m.entries.iter().all(|e| e.path.exists()));
    }
}
