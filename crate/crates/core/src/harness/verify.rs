//! Datapath versus floating-point reference on real audio.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frontend::{fft128_with, Frontend, PcmClip, CEPSTRAL_FORMAT};
use crate::ops::OpCounts;
use crate::oracle::{self, Complex};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub frames: usize,
    /// Frames whose spectrum carries any energy; SQNR is undefined on the rest.
    pub active_frames: usize,
    pub fft_sqnr_mean_db: f64,
    pub fft_sqnr_min_db: f64,
    /// Frames where some Mel energy quantized to zero and hit the log floor.
    pub floored_frames: usize,
    /// Errors over the frames that did not hit the floor.
    pub log_mel_mean_abs_error: f64,
    pub log_mel_max_abs_error: f64,
    pub mfcc_mean_abs_error: f64,
    pub mfcc_max_abs_error: f64,
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "frames: {} ({} with energy)", self.frames, self.active_frames);
        let _ = writeln!(
            out,
            "fft sqnr: mean {:.2} dB, min {:.2} dB",
            self.fft_sqnr_mean_db, self.fft_sqnr_min_db
        );
        let _ = writeln!(out, "frames at the log floor: {}", self.floored_frames);
        let _ = writeln!(
            out,
            "log-mel error: mean {:.4}, max {:.4}",
            self.log_mel_mean_abs_error, self.log_mel_max_abs_error
        );
        let _ = writeln!(
            out,
            "mfcc error: mean {:.4}, max {:.4}",
            self.mfcc_mean_abs_error, self.mfcc_max_abs_error
        );
        out
    }
}

#[derive(Default)]
struct Stats {
    sum: f64,
    max: f64,
    n: usize,
}

impl Stats {
    fn push(&mut self, e: f64) {
        self.sum += e;
        self.max = self.max.max(e);
        self.n += 1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 { f64::NAN } else { self.sum / self.n as f64 }
    }
}

/// Runs every frame of `clip` through the datapath and the float reference.
///
/// The FFT is compared on the datapath's own windowed frame, which isolates
/// the transform; the log-Mel and MFCC comparisons cover the whole frame
/// pipeline.
pub fn verify_clip(frontend: &Frontend, clip: &PcmClip) -> Result<VerifyReport> {
    let cfg = frontend.config();
    let tables = frontend.tables();
    let pcm = frontend.to_pipeline_rate(clip, &mut OpCounts::default())?;
    let n_frames = cfg.frame_count(pcm.len());
    if n_frames == 0 {
        return Err(Error::usage("clip is shorter than one frame"));
    }
    let alpha = tables.pre_emphasis_alpha as f64 / 32768.0;
    let floor = CEPSTRAL_FORMAT.min_value();
    let mut sqnr = Stats::default();
    let mut sqnr_min = f64::INFINITY;
    let (mut log_err, mut mfcc_err) = (Stats::default(), Stats::default());
    let mut floored = 0;
    for f in 0..n_frames {
        let frame = &pcm.samples()[f * cfg.hop..f * cfg.hop + cfg.frame_len];
        let windowed = frontend.shape_frame(frame)?;
        let spectrum = fft128_with(&windowed, cfg.fft_format(), &tables.twiddles, &mut OpCounts::default())?;
        let reference = oracle::fft_recursive(&windowed.iter().map(|&v| v as f64 / 32768.0).collect::<Vec<_>>())?;
        if reference.iter().any(|c| c.norm_sqr() > 0.0) {
            let test: Vec<Complex> = (0..reference.len())
                .map(|k| {
                    let (re, im) = spectrum.bin(k);
                    Complex {
                        re: re.to_f64(),
                        im: im.to_f64(),
                    }
                })
                .collect();
            let s = oracle::sqnr_db(&reference, &test);
            sqnr.push(s);
            sqnr_min = sqnr_min.min(s);
        }

        let logs = frontend.log_mel_frame(frame)?;
        if logs.iter().any(|l| l.to_f64() == floor) {
            floored += 1;
            continue;
        }
        let samples: Vec<f64> = frame.iter().map(|&v| v as f64 / 32768.0).collect();
        let float_logs = oracle::log_mel_reference(&samples, cfg.sample_rate, alpha, cfg.n_mel)?;
        for (a, b) in logs.iter().zip(&float_logs) {
            log_err.push((a.to_f64() - b).abs());
        }
        let fixed = frontend.process_frame(frame, &mut Default::default())?;
        let float = oracle::mfcc_reference(&samples, cfg.sample_rate, alpha, cfg.n_mel, cfg.n_mfcc)?;
        for (a, b) in fixed.to_f64().iter().zip(&float) {
            mfcc_err.push((a - b).abs());
        }
    }
    Ok(VerifyReport {
        frames: n_frames,
        active_frames: sqnr.n,
        fft_sqnr_mean_db: sqnr.mean(),
        fft_sqnr_min_db: if sqnr.n > 0 { sqnr_min } else { f64::NAN },
        floored_frames: floored,
        log_mel_mean_abs_error: log_err.mean(),
        log_mel_max_abs_error: log_err.max,
        mfcc_mean_abs_error: mfcc_err.mean(),
        mfcc_max_abs_error: mfcc_err.max,
    })
}
