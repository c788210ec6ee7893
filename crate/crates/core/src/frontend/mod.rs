//! Feature extraction unit: PCM in, one MFCC vector per 128-sample frame out.
//!
//! Per frame the datapath runs pre-emphasis, Hamming window, the scaled
//! 128-point FFT, power, sparse Mel filterbank, table-driven `log2` and a
//! DCT-II with `c0` dropped. Every stage is integer-only; the tables it
//! reads are collected in [`FrontendTables`] so they can be serialized into
//! a model file and dumped for comparison against hardware vectors.

mod cepstrum;
mod fft;
mod filters;
mod mel;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{to_fixed, Fixed, QFormat};
use crate::ops::OpCounts;

pub use cepstrum::{dct, dct_table, log2_approx, log2_table, CEPSTRAL_FORMAT, LOG2_TABLE_LEN};
pub use fft::{fft128, fft128_with, power_spectrum, twiddle_table, Bin, Spectrum, FFT_STAGES, N_BINS, POWER_FORMAT};
pub use filters::{apply_window, downsample, downsample_counted, hamming_window, pre_emphasize, DECIMATION_KERNEL};
pub use mel::{apply_mel_filters, build_mel_filterbank, hz_to_mel, mel_to_hz, MelFilter, MelFilterbank};

pub const FRAME_LEN: usize = 128;
pub const SUPPORTED_RATES: [u32; 2] = [8000, 16000];

/// Mono Q15 audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmClip {
    samples: Vec<i16>,
    sample_rate: u32,
}

impl PcmClip {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if !SUPPORTED_RATES.contains(&sample_rate) {
            return Err(Error::config(format!(
                "sample rate {sample_rate} Hz not supported (8000 or 16000)"
            )));
        }
        if samples.is_empty() {
            return Err(Error::usage("empty clip"));
        }
        Ok(PcmClip { samples, sample_rate })
    }

    /// Quantizes real-valued samples in `[-1, 1)` to Q15.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        let q = samples.iter().map(|&x| to_fixed(x, QFormat::Q15).raw() as i16).collect();
        PcmClip::new(q, sample_rate)
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    /// Rate the frame pipeline runs at, after any decimation.
    pub sample_rate: u32,
    pub downsample_factor: usize,
    pub pre_emphasis_alpha: f64,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mel: usize,
    pub n_mfcc: usize,
    /// Fraction bits of the signed 16-bit FFT datapath (14 gives Q2.14).
    pub fft_fraction_bits: u32,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            sample_rate: 8000,
            downsample_factor: 2,
            pre_emphasis_alpha: 31.0 / 32.0,
            frame_len: FRAME_LEN,
            hop: 64,
            n_mel: 24,
            n_mfcc: 12,
            fft_fraction_bits: 14,
        }
    }
}

impl FrontendConfig {
    /// Full-rate variant without decimation, used as the uncompressed baseline.
    pub fn full_rate() -> Self {
        FrontendConfig {
            sample_rate: 16000,
            downsample_factor: 1,
            ..FrontendConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len != FRAME_LEN {
            return Err(Error::config(format!("frame_len must be {FRAME_LEN}, got {}", self.frame_len)));
        }
        if self.hop == 0 || self.hop > self.frame_len {
            return Err(Error::config(format!("hop must be in 1..={}, got {}", self.frame_len, self.hop)));
        }
        if self.n_mel < 2 || self.n_mel > N_BINS {
            return Err(Error::config(format!("n_mel must be in 2..={N_BINS}, got {}", self.n_mel)));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mel {
            return Err(Error::config(format!(
                "n_mfcc must be in 1..={}, got {}",
                self.n_mel, self.n_mfcc
            )));
        }
        if !matches!(self.downsample_factor, 1 | 2) {
            return Err(Error::config(format!(
                "downsample_factor must be 1 or 2, got {}",
                self.downsample_factor
            )));
        }
        if !SUPPORTED_RATES.contains(&self.sample_rate)
            || !SUPPORTED_RATES.contains(&(self.sample_rate * self.downsample_factor as u32))
        {
            return Err(Error::config(format!(
                "pipeline rate {} Hz with downsample factor {} does not match 8/16 kHz input",
                self.sample_rate, self.downsample_factor
            )));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis_alpha) {
            return Err(Error::config(format!(
                "pre_emphasis_alpha must be in [0, 1), got {}",
                self.pre_emphasis_alpha
            )));
        }
        if !matches!(self.fft_fraction_bits, 14 | 15) {
            return Err(Error::config(format!(
                "fft_fraction_bits must be 14 or 15, got {}",
                self.fft_fraction_bits
            )));
        }
        Ok(())
    }

    pub fn input_rate(&self) -> u32 {
        self.sample_rate * self.downsample_factor as u32
    }

    pub fn fft_format(&self) -> QFormat {
        QFormat::new(15 - self.fft_fraction_bits as u8, self.fft_fraction_bits as u8, true)
            .expect("validated fraction bits")
    }

    /// `floor((len - frame_len) / hop) + 1`, or 0 when the clip is shorter than a frame.
    pub fn frame_count(&self, pipeline_samples: usize) -> usize {
        if pipeline_samples < self.frame_len {
            0
        } else {
            (pipeline_samples - self.frame_len) / self.hop + 1
        }
    }

    pub fn hop_duration_ms(&self) -> f64 {
        self.hop as f64 * 1000.0 / self.sample_rate as f64
    }
}

/// One frame of Q7.8 cepstral coefficients `c1..=c_n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MfccVector {
    pub coeffs: Vec<i16>,
}

impl MfccVector {
    pub fn from_f64(values: &[f64]) -> Self {
        MfccVector {
            coeffs: values.iter().map(|&v| to_fixed(v, CEPSTRAL_FORMAT).raw() as i16).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, i: usize) -> Fixed {
        Fixed::from_raw(self.coeffs[i] as i64, CEPSTRAL_FORMAT)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let ulp = CEPSTRAL_FORMAT.ulp();
        self.coeffs.iter().map(|&c| c as f64 * ulp).collect()
    }
}

/// Every constant table the datapath reads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontendTables {
    pub pre_emphasis_alpha: i16,
    pub window: Vec<i16>,
    pub twiddles: Vec<(i16, i16)>,
    pub mel: MelFilterbank,
    pub log2: Vec<i16>,
    pub dct: Vec<Vec<i16>>,
}

impl FrontendTables {
    pub fn build(cfg: &FrontendConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FrontendTables {
            pre_emphasis_alpha: to_fixed(cfg.pre_emphasis_alpha, QFormat::Q15).raw() as i16,
            window: hamming_window(),
            twiddles: twiddle_table(),
            mel: build_mel_filterbank(cfg.n_mel, cfg.sample_rate)?,
            log2: log2_table(),
            dct: dct_table(cfg.n_mel, cfg.n_mfcc),
        })
    }

    /// Checks that table shapes agree with `cfg`.
    pub fn check_shapes(&self, cfg: &FrontendConfig) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("{what} table does not match the frontend config")));
        if self.window.len() != FRAME_LEN {
            return bad("window");
        }
        if self.twiddles.len() != FRAME_LEN / 2 {
            return bad("twiddle");
        }
        if self.mel.len() != cfg.n_mel {
            return bad("mel");
        }
        if self.log2.len() != LOG2_TABLE_LEN {
            return bad("log2");
        }
        if self.dct.len() != cfg.n_mfcc || self.dct.iter().any(|r| r.len() != cfg.n_mel) {
            return bad("dct");
        }
        Ok(())
    }

    pub fn table_names() -> &'static [&'static str] {
        &[
            "pre_emphasis",
            "window",
            "twiddle_re",
            "twiddle_im",
            "mel_start",
            "mel_len",
            "mel_weights",
            "log2",
            "dct",
        ]
    }

    /// One raw integer per line; multi-row tables are flattened row-major.
    pub fn dump(&self, name: &str) -> Option<String> {
        let values: Vec<i64> = match name {
            "pre_emphasis" => vec![self.pre_emphasis_alpha as i64],
            "window" => self.window.iter().map(|&v| v as i64).collect(),
            "twiddle_re" => self.twiddles.iter().map(|t| t.0 as i64).collect(),
            "twiddle_im" => self.twiddles.iter().map(|t| t.1 as i64).collect(),
            "mel_start" => self.mel.filters().iter().map(|f| f.start_bin as i64).collect(),
            "mel_len" => self.mel.filters().iter().map(|f| f.weights.len() as i64).collect(),
            "mel_weights" => self.mel.filters().iter().flat_map(|f| &f.weights).map(|&w| w as i64).collect(),
            "log2" => self.log2.iter().map(|&v| v as i64).collect(),
            "dct" => self.dct.iter().flatten().map(|&v| v as i64).collect(),
            _ => return None,
        };
        let mut out = String::with_capacity(values.len() * 7);
        for v in values {
            let _ = writeln!(out, "{v}");
        }
        Some(out)
    }
}

/// Per-stage operation counts accumulated over every processed frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontendCounts {
    pub frames: u64,
    pub downsample: OpCounts,
    pub pre_emphasis: OpCounts,
    pub window: OpCounts,
    pub fft: OpCounts,
    pub power: OpCounts,
    pub mel: OpCounts,
    pub log: OpCounts,
    pub dct: OpCounts,
}

impl FrontendCounts {
    pub fn stages(&self) -> [(&'static str, OpCounts); 8] {
        [
            ("downsample", self.downsample),
            ("pre_emphasis", self.pre_emphasis),
            ("window", self.window),
            ("fft", self.fft),
            ("power", self.power),
            ("mel", self.mel),
            ("log", self.log),
            ("dct", self.dct),
        ]
    }

    pub fn total(&self) -> OpCounts {
        let mut t = OpCounts::default();
        for (_, c) in self.stages() {
            t += c;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frontend {
    config: FrontendConfig,
    tables: FrontendTables,
}

impl Frontend {
    pub fn new(config: FrontendConfig) -> Result<Self> {
        let tables = FrontendTables::build(&config)?;
        Ok(Frontend { config, tables })
    }

    pub fn from_parts(config: FrontendConfig, tables: FrontendTables) -> Result<Self> {
        config.validate()?;
        tables.check_shapes(&config)?;
        Ok(Frontend { config, tables })
    }

    pub fn config(&self) -> &FrontendConfig {
        &self.config
    }

    pub fn tables(&self) -> &FrontendTables {
        &self.tables
    }

    pub fn mel_filterbank(&self) -> &MelFilterbank {
        &self.tables.mel
    }

    /// Brings a clip to the pipeline rate.
    pub fn to_pipeline_rate(&self, clip: &PcmClip, counts: &mut OpCounts) -> Result<PcmClip> {
        let cfg = &self.config;
        if clip.sample_rate() == cfg.sample_rate {
            Ok(clip.clone())
        } else if cfg.downsample_factor > 1 && clip.sample_rate() == cfg.input_rate() {
            downsample_counted(clip, cfg.downsample_factor, counts)
        } else {
            Err(Error::config(format!(
                "clip is {} Hz but the pipeline expects {} Hz input",
                clip.sample_rate(),
                cfg.input_rate()
            )))
        }
    }

    /// Returns an empty vector when the clip is shorter than one frame.
    pub fn extract_mfcc(&self, clip: &PcmClip) -> Result<Vec<MfccVector>> {
        self.extract_mfcc_counted(clip, &mut FrontendCounts::default())
    }

    pub fn extract_mfcc_counted(&self, clip: &PcmClip, counts: &mut FrontendCounts) -> Result<Vec<MfccVector>> {
        let pcm = self.to_pipeline_rate(clip, &mut counts.downsample)?;
        let cfg = &self.config;
        let n_frames = cfg.frame_count(pcm.len());
        (0..n_frames)
            .map(|f| {
                let start = f * cfg.hop;
                self.process_frame(&pcm.samples()[start..start + cfg.frame_len], counts)
            })
            .collect()
    }

    /// Pre-emphasized and windowed frame, the FFT input.
    pub fn shape_frame(&self, frame: &[i16]) -> Result<Vec<i16>> {
        let alpha = Fixed::from_raw(self.tables.pre_emphasis_alpha as i64, QFormat::Q15);
        let emphasized = filters::pre_emphasize_counted(frame, alpha, &mut OpCounts::default());
        filters::apply_window_with(&emphasized, &self.tables.window, &mut OpCounts::default())
    }

    /// Raw Q7.8 log2 of each Mel energy.
    fn log_energies(&self, energies: &[i64], counts: &mut OpCounts) -> Vec<i64> {
        energies
            .iter()
            .map(|&e| cepstrum::log2_raw(e, POWER_FORMAT.fraction_bits(), &self.tables.log2, counts))
            .collect()
    }

    /// Log2 Mel energies of one frame, in Q7.8.
    pub fn log_mel_frame(&self, frame: &[i16]) -> Result<Vec<Fixed>> {
        let shaped = self.shape_frame(frame)?;
        let mut scratch = OpCounts::default();
        let spectrum = fft::fft128_with(&shaped, self.config.fft_format(), &self.tables.twiddles, &mut scratch)?;
        let powers = fft::power_spectrum_counted(&spectrum, &mut scratch);
        let energies = mel::apply_mel_filters_raw(&powers, &self.tables.mel, &mut scratch);
        Ok(self
            .log_energies(&energies, &mut scratch)
            .into_iter()
            .map(|v| Fixed::from_raw(v, CEPSTRAL_FORMAT))
            .collect())
    }

    /// Runs one 128-sample frame through every stage.
    pub fn process_frame(&self, frame: &[i16], counts: &mut FrontendCounts) -> Result<MfccVector> {
        let t = &self.tables;
        let alpha = Fixed::from_raw(t.pre_emphasis_alpha as i64, QFormat::Q15);
        let emphasized = filters::pre_emphasize_counted(frame, alpha, &mut counts.pre_emphasis);
        let windowed = filters::apply_window_with(&emphasized, &t.window, &mut counts.window)?;
        let spectrum = fft::fft128_with(&windowed, self.config.fft_format(), &t.twiddles, &mut counts.fft)?;
        let powers = fft::power_spectrum_counted(&spectrum, &mut counts.power);
        let energies = mel::apply_mel_filters_raw(&powers, &t.mel, &mut counts.mel);
        let logs = self.log_energies(&energies, &mut counts.log);
        let coeffs = cepstrum::dct_raw(&logs, &t.dct, &mut counts.dct);
        counts.frames += 1;
        Ok(MfccVector { coeffs })
    }
}

pub fn extract_mfcc(clip: &PcmClip, cfg: &FrontendConfig) -> Result<Vec<MfccVector>> {
    Frontend::new(cfg.clone())?.extract_mfcc(clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_clip(seed: u64, len: usize, rate: u32) -> PcmClip {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PcmClip::new((0..len).map(|_| rng.random_range(-8000..8000)).collect(), rate).unwrap()
    }

    #[test]
    fn clip_invariants() {
        assert!(PcmClip::new(vec![], 8000).is_err());
        assert!(PcmClip::new(vec![0], 44100).is_err());
        assert_eq!(PcmClip::new(vec![0; 8000], 8000).unwrap().duration_secs(), 1.0);
    }

    #[test]
    fn one_second_at_8k_gives_124_frames() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let out = fe.extract_mfcc(&noise_clip(1, 8000, 8000)).unwrap();
        assert_eq!(out.len(), 124);
        assert!(out.iter().all(|v| v.dim() == 12));
        // 16 kHz input is decimated to the same frame count
        assert_eq!(fe.extract_mfcc(&noise_clip(1, 16000, 16000)).unwrap().len(), 124);
    }

    #[test]
    fn short_clip_gives_empty_output() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        assert!(fe.extract_mfcc(&noise_clip(2, 100, 8000)).unwrap().is_empty());
    }

    #[test]
    fn silent_clip_frames_identical() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let out = fe.extract_mfcc(&PcmClip::new(vec![0; 8000], 8000).unwrap()).unwrap();
        assert!(out.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn deterministic_across_runs() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let clip = noise_clip(3, 16000, 16000);
        assert_eq!(fe.extract_mfcc(&clip).unwrap(), fe.extract_mfcc(&clip).unwrap());
    }

    #[test]
    fn full_rate_pipeline() {
        let fe = Frontend::new(FrontendConfig::full_rate()).unwrap();
        assert_eq!(fe.extract_mfcc(&noise_clip(4, 16000, 16000)).unwrap().len(), 249);
        assert!(fe.extract_mfcc(&noise_clip(4, 8000, 8000)).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = [
            FrontendConfig { frame_len: 256, ..Default::default() },
            FrontendConfig { hop: 0, ..Default::default() },
            FrontendConfig { n_mfcc: 30, ..Default::default() },
            FrontendConfig { downsample_factor: 3, ..Default::default() },
            FrontendConfig { sample_rate: 16000, ..Default::default() },
            FrontendConfig { fft_fraction_bits: 12, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
        FrontendConfig::default().validate().unwrap();
        FrontendConfig::full_rate().validate().unwrap();
    }

    #[test]
    fn counts_per_frame() {
        let fe = Frontend::new(FrontendConfig::default()).unwrap();
        let mut counts = FrontendCounts::default();
        fe.process_frame(&[0; 128], &mut counts).unwrap();
        assert_eq!(counts.frames, 1);
        assert_eq!(counts.fft.mults, 1792);
        assert_eq!(counts.window.mults, 128);
        assert_eq!(counts.pre_emphasis.mults, 128);
        assert_eq!(counts.dct.mults, 288);
        assert_eq!(counts.mel.mults, fe.mel_filterbank().stored_weights() as u64);
    }

    #[test]
    fn table_dump_is_one_integer_per_line() {
        let t = FrontendTables::build(&FrontendConfig::default()).unwrap();
        for name in FrontendTables::table_names() {
            let text = t.dump(name).unwrap();
            assert!(text.lines().all(|l| l.parse::<i64>().is_ok()), "{name}");
        }
        assert_eq!(t.dump("window").unwrap().lines().count(), 128);
        assert_eq!(t.dump("dct").unwrap().lines().count(), 288);
        assert!(t.dump("nope").is_none());
    }
}
