//! Time-domain stages: decimation, pre-emphasis and windowing.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{PcmClip, FRAME_LEN};
use crate::error::{Error, Result};
use crate::numerics::{round_shift, to_fixed, Fixed, QFormat};
use crate::ops::OpCounts;

/// Binomial low-pass taps applied before decimation, normalized by 16.
pub const DECIMATION_KERNEL: [i64; 5] = [1, 4, 6, 4, 1];
const DECIMATION_SHIFT: u32 = 4;

pub fn downsample(clip: &PcmClip, factor: usize) -> Result<PcmClip> {
    downsample_counted(clip, factor, &mut OpCounts::default())
}

/// Low-pass with [`DECIMATION_KERNEL`] then keep every `factor`-th sample.
///
/// Edges are handled by repeating the first/last sample so DC passes with
/// unit gain over the whole clip.
pub fn downsample_counted(clip: &PcmClip, factor: usize, counts: &mut OpCounts) -> Result<PcmClip> {
    if factor != 2 {
        return Err(Error::config(format!(
            "unsupported downsample factor {factor}, only 2 is implemented"
        )));
    }
    let out_rate = clip.sample_rate() / factor as u32;
    if out_rate < 8000 {
        return Err(Error::config(format!(
            "downsampling {} Hz by {factor} would drop below 8000 Hz",
            clip.sample_rate()
        )));
    }
    let x = clip.samples();
    let n = x.len();
    let last = n as isize - 1;
    let at = |i: isize| x[i.clamp(0, last) as usize] as i64;
    let out: Vec<i16> = (0..n / factor)
        .map(|m| {
            let centre = (m * factor) as isize;
            let acc: i64 = DECIMATION_KERNEL
                .iter()
                .enumerate()
                .map(|(k, &h)| h * at(centre + k as isize - 2))
                .sum();
            counts.mul(DECIMATION_KERNEL.len() as u64);
            counts.add(DECIMATION_KERNEL.len() as u64 - 1);
            QFormat::Q15.saturate(round_shift(acc, DECIMATION_SHIFT)) as i16
        })
        .collect();
    PcmClip::new(out, out_rate)
}

/// `y[n] = x[n] - alpha * x[n-1]` with the delay register starting at zero.
pub fn pre_emphasize(frame: &[i16], alpha: Fixed) -> Vec<i16> {
    pre_emphasize_counted(frame, alpha, &mut OpCounts::default())
}

pub fn pre_emphasize_counted(frame: &[i16], alpha: Fixed, counts: &mut OpCounts) -> Vec<i16> {
    let q = QFormat::Q15;
    let shift = alpha.format().fraction_bits();
    let mut prev = 0i64;
    frame
        .iter()
        .map(|&x| {
            let scaled = round_shift(alpha.raw() * prev, shift);
            prev = x as i64;
            counts.mul(1);
            counts.add(1);
            q.saturate(x as i64 - scaled) as i16
        })
        .collect()
}

/// Hamming window `0.54 - 0.46 cos(2 pi n / 127)` in Q15.
pub fn hamming_window() -> Vec<i16> {
    (0..FRAME_LEN)
        .map(|n| {
            let w = 0.54 - 0.46 * (2.0 * PI * n as f64 / (FRAME_LEN - 1) as f64).cos();
            to_fixed(w, QFormat::Q15).raw() as i16
        })
        .collect()
}

fn default_window() -> &'static [i16] {
    static WINDOW: OnceLock<Vec<i16>> = OnceLock::new();
    WINDOW.get_or_init(hamming_window)
}

pub fn apply_window(frame: &[i16]) -> Result<Vec<i16>> {
    apply_window_with(frame, default_window(), &mut OpCounts::default())
}

pub(crate) fn apply_window_with(
    frame: &[i16],
    window: &[i16],
    counts: &mut OpCounts,
) -> Result<Vec<i16>> {
    if frame.len() != FRAME_LEN || window.len() != FRAME_LEN {
        return Err(Error::usage(format!(
            "window expects {FRAME_LEN} samples, got frame {} / window {}",
            frame.len(),
            window.len()
        )));
    }
    counts.mul(FRAME_LEN as u64);
    counts.lookup(FRAME_LEN as u64);
    Ok(frame
        .iter()
        .zip(window)
        .map(|(&x, &w)| QFormat::Q15.saturate(round_shift(x as i64 * w as i64, 15)) as i16)
        .collect())
}
