//! 128-point radix-2 decimation-in-time FFT with a fixed 1/2 scale per stage.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::FRAME_LEN;
use crate::error::{Error, Result};
use crate::numerics::{requantize, round_shift, Fixed, QFormat};
use crate::ops::OpCounts;

pub const FFT_STAGES: u32 = 7;
pub const N_BINS: usize = FRAME_LEN / 2 + 1;
const TWIDDLE_FRACTION: u32 = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Bin {
    pub re: i32,
    pub im: i32,
}

/// Bins `0..=64` of a real 128-point transform, scaled by `2^-stage_scale_log2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spectrum {
    bins: Vec<Bin>,
    format: QFormat,
    stage_scale_log2: u32,
}

impl Spectrum {
    pub fn new(bins: Vec<Bin>, format: QFormat, stage_scale_log2: u32) -> Result<Self> {
        if bins.len() != N_BINS {
            return Err(Error::usage(format!("spectrum needs {N_BINS} bins, got {}", bins.len())));
        }
        Ok(Spectrum {
            bins,
            format,
            stage_scale_log2,
        })
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn bin(&self, k: usize) -> (Fixed, Fixed) {
        let b = self.bins[k];
        (
            Fixed::from_raw(b.re as i64, self.format),
            Fixed::from_raw(b.im as i64, self.format),
        )
    }

    pub fn format(&self) -> QFormat {
        self.format
    }

    pub fn stage_scale_log2(&self) -> u32 {
        self.stage_scale_log2
    }
}

/// `exp(-2 pi i k / 128)` for `k in 0..64`, as Q15 `(cos, -sin)` pairs.
pub fn twiddle_table() -> Vec<(i16, i16)> {
    (0..FRAME_LEN / 2)
        .map(|k| {
            let phase = -2.0 * PI * k as f64 / FRAME_LEN as f64;
            let q = |v: f64| QFormat::Q15.saturate((v * 32768.0).round() as i64) as i16;
            (q(phase.cos()), q(phase.sin()))
        })
        .collect()
}

fn default_twiddles() -> &'static [(i16, i16)] {
    static TWIDDLES: OnceLock<Vec<(i16, i16)>> = OnceLock::new();
    TWIDDLES.get_or_init(twiddle_table)
}

fn bit_reverse7(i: usize) -> usize {
    i.reverse_bits() >> (usize::BITS - FFT_STAGES)
}

/// FFT in the default Q2.14 datapath format.
pub fn fft128(frame: &[i16]) -> Result<Spectrum> {
    fft128_with(frame, QFormat::Q2_14, default_twiddles(), &mut OpCounts::default())
}

/// Q15 samples in, `format` datapath, twiddles from `twiddles`.
///
/// Every butterfly computes `(a ± w·b) / 2` from the exact product with a
/// single rounding, so each stage halves the signal and the output equals
/// the DFT divided by 128.
pub fn fft128_with(
    frame: &[i16],
    format: QFormat,
    twiddles: &[(i16, i16)],
    counts: &mut OpCounts,
) -> Result<Spectrum> {
    if frame.len() != FRAME_LEN {
        return Err(Error::usage(format!(
            "fft128 expects {FRAME_LEN} samples, got {}",
            frame.len()
        )));
    }
    if twiddles.len() != FRAME_LEN / 2 {
        return Err(Error::usage(format!(
            "fft128 expects {} twiddles, got {}",
            FRAME_LEN / 2,
            twiddles.len()
        )));
    }
    if !format.is_signed() || format.width() > 16 {
        return Err(Error::config(format!(
            "FFT datapath must be a signed format of at most 16 bits, got {format}"
        )));
    }

    let mut re = [0i64; FRAME_LEN];
    let mut im = [0i64; FRAME_LEN];
    for (i, &x) in frame.iter().enumerate() {
        re[bit_reverse7(i)] = requantize(x as i64, 15, format);
    }

    for stage in 0..FFT_STAGES {
        let half = 1usize << stage;
        let span = half << 1;
        let stride = FRAME_LEN / span;
        for group in (0..FRAME_LEN).step_by(span) {
            for j in 0..half {
                let (w_re, w_im) = twiddles[j * stride];
                let (w_re, w_im) = (w_re as i64, w_im as i64);
                let (a, b) = (group + j, group + j + half);
                let t_re = w_re * re[b] - w_im * im[b];
                let t_im = w_re * im[b] + w_im * re[b];
                let a_re = re[a] << TWIDDLE_FRACTION;
                let a_im = im[a] << TWIDDLE_FRACTION;
                let shift = TWIDDLE_FRACTION + 1;
                re[a] = format.saturate(round_shift(a_re + t_re, shift));
                im[a] = format.saturate(round_shift(a_im + t_im, shift));
                re[b] = format.saturate(round_shift(a_re - t_re, shift));
                im[b] = format.saturate(round_shift(a_im - t_im, shift));
                counts.mul(4);
                counts.add(6);
                counts.lookup(1);
            }
        }
    }

    let bins = (0..N_BINS)
        .map(|k| Bin {
            re: re[k] as i32,
            im: im[k] as i32,
        })
        .collect();
    Spectrum::new(bins, format, FFT_STAGES)
}

pub fn power_spectrum(spectrum: &Spectrum) -> Vec<Fixed> {
    power_spectrum_counted(spectrum, &mut OpCounts::default())
        .into_iter()
        .map(|raw| Fixed::from_raw(raw, POWER_FORMAT))
        .collect()
}

/// Output format of [`power_spectrum`] and of the Mel energies.
pub const POWER_FORMAT: QFormat = QFormat::UQ4_28;

/// `re^2 + im^2` at full product precision, rounded once into [`POWER_FORMAT`].
pub(crate) fn power_spectrum_counted(spectrum: &Spectrum, counts: &mut OpCounts) -> Vec<i64> {
    let product_fraction = 2 * spectrum.format.fraction_bits();
    spectrum
        .bins
        .iter()
        .map(|b| {
            counts.mul(2);
            counts.add(1);
            let p = b.re as i64 * b.re as i64 + b.im as i64 * b.im as i64;
            requantize(p, product_fraction, POWER_FORMAT)
        })
        .collect()
}
