//! Triangular Mel filterbank stored as contiguous non-zero runs.

use super::fft::{N_BINS, POWER_FORMAT};
use super::FRAME_LEN;
use crate::error::{Error, Result};
use crate::numerics::{round_shift, to_fixed, Fixed, QFormat};
use crate::ops::OpCounts;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// One filter: Q15 weights for bins `start_bin..start_bin + weights.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MelFilter {
    pub start_bin: usize,
    pub weights: Vec<i16>,
}

impl MelFilter {
    pub fn end_bin(&self) -> usize {
        self.start_bin + self.weights.len()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().map(|&w| w as f64).sum::<f64>() / 32768.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MelFilterbank {
    filters: Vec<MelFilter>,
}

impl MelFilterbank {
    /// Checks the structural invariants: spans inside `0..65`, weights in `[0, 1]`,
    /// and no overlap between filters two apart.
    pub fn from_filters(filters: Vec<MelFilter>) -> Result<Self> {
        for (i, f) in filters.iter().enumerate() {
            if f.end_bin() > N_BINS {
                return Err(Error::usage(format!("mel filter {i} runs past bin {}", N_BINS - 1)));
            }
            if f.weights.iter().any(|&w| w < 0) {
                return Err(Error::usage(format!("mel filter {i} has a negative weight")));
            }
            if let Some(next2) = filters.get(i + 2) {
                if !f.weights.is_empty() && !next2.weights.is_empty() && f.end_bin() > next2.start_bin {
                    return Err(Error::usage(format!("mel filters {i} and {} overlap", i + 2)));
                }
            }
        }
        Ok(MelFilterbank { filters })
    }

    pub fn filters(&self) -> &[MelFilter] {
        &self.filters
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn stored_weights(&self) -> usize {
        self.filters.iter().map(|f| f.weights.len()).sum()
    }

    /// Zero-padded `n_mel x 65` weight matrix.
    pub fn to_dense(&self) -> Vec<Vec<i16>> {
        self.filters
            .iter()
            .map(|f| {
                let mut row = vec![0i16; N_BINS];
                row[f.start_bin..f.end_bin()].copy_from_slice(&f.weights);
                row
            })
            .collect()
    }
}

/// `n_mel` triangles with centres equally spaced in Mel between 0 Hz and Nyquist.
pub fn build_mel_filterbank(n_mel: usize, sample_rate: u32) -> Result<MelFilterbank> {
    if n_mel < 2 {
        return Err(Error::config(format!("need at least 2 mel filters, got {n_mel}")));
    }
    let nyquist = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mel + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mel + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / FRAME_LEN as f64;

    let filters = edges
        .windows(3)
        .map(|e| {
            let (lo, centre, hi) = (e[0], e[1], e[2]);
            let dense: Vec<i16> = (0..N_BINS)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f > lo && f <= centre {
                        (f - lo) / (centre - lo)
                    } else if f > centre && f < hi {
                        (hi - f) / (hi - centre)
                    } else {
                        0.0
                    };
                    to_fixed(w, QFormat::Q15).raw() as i16
                })
                .collect();
            match dense.iter().position(|&w| w != 0) {
                Some(start) => {
                    let end = dense.iter().rposition(|&w| w != 0).unwrap() + 1;
                    MelFilter {
                        start_bin: start,
                        weights: dense[start..end].to_vec(),
                    }
                }
                None => MelFilter {
                    start_bin: ((centre / bin_hz).round() as usize).min(N_BINS - 1),
                    weights: Vec::new(),
                },
            }
        })
        .collect();
    MelFilterbank::from_filters(filters)
}

pub fn apply_mel_filters(powers: &[Fixed], fb: &MelFilterbank) -> Result<Vec<Fixed>> {
    if powers.len() != N_BINS {
        return Err(Error::usage(format!("expected {N_BINS} powers, got {}", powers.len())));
    }
    if let Some(p) = powers.iter().find(|p| p.format() != POWER_FORMAT) {
        return Err(Error::FormatMismatch(p.format(), POWER_FORMAT));
    }
    let raw: Vec<i64> = powers.iter().map(|p| p.raw()).collect();
    Ok(apply_mel_filters_raw(&raw, fb, &mut OpCounts::default())
        .into_iter()
        .map(|e| Fixed::from_raw(e, POWER_FORMAT))
        .collect())
}

/// Sparse multiply-accumulate over each filter's span, one rounding at the end.
pub(crate) fn apply_mel_filters_raw(powers: &[i64], fb: &MelFilterbank, counts: &mut OpCounts) -> Vec<i64> {
    fb.filters
        .iter()
        .map(|f| {
            let span = &powers[f.start_bin..f.end_bin()];
            let acc: i64 = f.weights.iter().zip(span).map(|(&w, &p)| w as i64 * p).sum();
            let n = f.weights.len() as u64;
            counts.mul(n);
            counts.add(n);
            counts.lookup(n);
            POWER_FORMAT.saturate(round_shift(acc, 15))
        })
        .collect()
}
