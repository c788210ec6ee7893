//! Log compression and the DCT-II that turns log Mel energies into cepstra.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::{round_shift, to_fixed, Fixed, QFormat};
use crate::ops::OpCounts;

/// Output format of the log stage, the DCT and the codebook.
pub const CEPSTRAL_FORMAT: QFormat = QFormat::Q7_8;

pub const LOG2_TABLE_BITS: u32 = 5;
pub const LOG2_TABLE_LEN: usize = 1 << LOG2_TABLE_BITS;
/// Mantissa bits below the table index used for interpolation.
const INTERP_BITS: u32 = 16;
const TABLE_FRACTION: u32 = 15;

/// `log2(1 + i/32)` for `i in 0..32`, Q15.
pub fn log2_table() -> Vec<i16> {
    (0..LOG2_TABLE_LEN)
        .map(|i| to_fixed((1.0 + i as f64 / LOG2_TABLE_LEN as f64).log2(), QFormat::Q15).raw() as i16)
        .collect()
}

fn default_log2_table() -> &'static [i16] {
    static TABLE: OnceLock<Vec<i16>> = OnceLock::new();
    TABLE.get_or_init(log2_table)
}

/// Leading-one detect plus a 32-entry fraction table with linear interpolation.
///
/// Zero (or a negative input) clamps to the most negative Q7.8 value.
pub fn log2_approx(e: Fixed) -> Fixed {
    let raw = log2_raw(e.raw(), e.format().fraction_bits(), default_log2_table(), &mut OpCounts::default());
    Fixed::from_raw(raw, CEPSTRAL_FORMAT)
}

pub(crate) fn log2_raw(raw: i64, fraction_bits: u32, table: &[i16], counts: &mut OpCounts) -> i64 {
    // leading-one detect, two table reads and the interpolation run regardless of the input
    counts.lookup(2);
    counts.mul(1);
    counts.add(2);
    if raw <= 0 {
        return CEPSTRAL_FORMAT.min_raw();
    }
    let lead = 63 - raw.leading_zeros();
    let integer = lead as i64 - fraction_bits as i64;

    // mantissa bits below the leading one, left-aligned to TABLE_BITS + INTERP_BITS
    let below = raw & ((1i64 << lead) - 1);
    let want = LOG2_TABLE_BITS + INTERP_BITS;
    let mantissa = if lead >= want {
        below >> (lead - want)
    } else {
        below << (want - lead)
    };
    let index = (mantissa >> INTERP_BITS) as usize;
    let frac = mantissa & ((1i64 << INTERP_BITS) - 1);

    let lo = table[index] as i64;
    let hi = if index + 1 < table.len() {
        table[index + 1] as i64
    } else {
        1i64 << TABLE_FRACTION
    };
    let acc_fraction = TABLE_FRACTION + INTERP_BITS;
    let value = (integer << acc_fraction) + (lo << INTERP_BITS) + (hi - lo) * frac;
    CEPSTRAL_FORMAT.saturate(round_shift(value, acc_fraction - CEPSTRAL_FORMAT.fraction_bits()))
}

/// Rows `j = 1..=n_mfcc` of `cos(pi j (m + 0.5) / n_mel)`, Q15.
pub fn dct_table(n_mel: usize, n_mfcc: usize) -> Vec<Vec<i16>> {
    (1..=n_mfcc)
        .map(|j| {
            (0..n_mel)
                .map(|m| {
                    let c = (PI * j as f64 * (m as f64 + 0.5) / n_mel as f64).cos();
                    to_fixed(c, QFormat::Q15).raw() as i16
                })
                .collect()
        })
        .collect()
}

/// DCT-II of Q7.8 log energies, dropping `c0`.
pub fn dct(log_energies: &[Fixed], n_mfcc: usize) -> Result<Vec<Fixed>> {
    let n_mel = log_energies.len();
    if n_mel == 0 || n_mfcc == 0 || n_mfcc > n_mel {
        return Err(Error::usage(format!(
            "dct needs 0 < n_mfcc <= n_mel, got n_mfcc={n_mfcc}, n_mel={n_mel}"
        )));
    }
    if let Some(l) = log_energies.iter().find(|l| l.format() != CEPSTRAL_FORMAT) {
        return Err(Error::FormatMismatch(l.format(), CEPSTRAL_FORMAT));
    }
    let raw: Vec<i64> = log_energies.iter().map(|l| l.raw()).collect();
    let table = dct_table(n_mel, n_mfcc);
    Ok(dct_raw(&raw, &table, &mut OpCounts::default())
        .into_iter()
        .map(|c| Fixed::from_raw(c as i64, CEPSTRAL_FORMAT))
        .collect())
}

pub(crate) fn dct_raw(log_energies: &[i64], table: &[Vec<i16>], counts: &mut OpCounts) -> Vec<i16> {
    table
        .iter()
        .map(|row| {
            let acc: i64 = row.iter().zip(log_energies).map(|(&c, &l)| c as i64 * l).sum();
            let n = row.len() as u64;
            counts.mul(n);
            counts.add(n);
            counts.lookup(n);
            CEPSTRAL_FORMAT.saturate(round_shift(acc, 15)) as i16
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log2_exact_cases() {
        let q = QFormat::new(8, 8, false).unwrap();
        assert_eq!(log2_approx(to_fixed(1.0, q)).to_f64(), 0.0);
        assert_eq!(log2_approx(to_fixed(8.0, q)).to_f64(), 3.0);
        assert_eq!(log2_approx(to_fixed(0.5, q)).to_f64(), -1.0);
        assert_eq!(log2_approx(Fixed::zero(q)).raw(), CEPSTRAL_FORMAT.min_raw());
        let p = QFormat::UQ4_28;
        assert_eq!(log2_approx(Fixed::from_raw(1, p)).to_f64(), -28.0);
    }

    #[test]
    fn log2_exhaustive_sweep_uq8_8() {
        // every representable value strictly inside (2^-8, 2^7)
        let q = QFormat::UQ8_8;
        let mut worst = 0.0f64;
        for raw in 2..(1i64 << 15) {
            let e = Fixed::from_raw(raw, q);
            let err = (log2_approx(e).to_f64() - e.to_f64().log2()).abs();
            worst = worst.max(err);
        }
        assert!(worst <= 0.023, "max error {worst}");
    }

    #[test]
    fn log2_random_high_precision_inputs() {
        let q = QFormat::UQ4_28;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100_000 {
            let raw = rng.random_range(1..=q.max_raw());
            let e = Fixed::from_raw(raw, q);
            let err = (log2_approx(e).to_f64() - e.to_f64().log2()).abs();
            assert!(err <= 0.023, "raw {raw}: {err}");
        }
    }

    fn q78(values: &[f64]) -> Vec<Fixed> {
        values.iter().map(|&v| to_fixed(v, CEPSTRAL_FORMAT)).collect()
    }

    #[test]
    fn dct_of_constant_is_near_zero() {
        let out = dct(&q78(&[3.0; 24]), 12).unwrap();
        assert_eq!(out.len(), 12);
        assert!(out.iter().all(|c| c.raw().abs() <= 1), "{out:?}");
        assert!(dct(&q78(&[0.0; 24]), 12).unwrap().iter().all(|c| c.raw() == 0));
    }

    #[test]
    fn dct_matches_float_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..1000 {
            let input = q78(&(0..24).map(|_| rng.random_range(-28.0..4.0)).collect::<Vec<_>>());
            let float_in: Vec<f64> = input.iter().map(|v| v.to_f64()).collect();
            let reference = oracle::dct2(&float_in, 12);
            let got = dct(&input, 12).unwrap();
            for (g, r) in got.iter().zip(&reference) {
                assert!((g.to_f64() - r).abs() <= 1.0 / 64.0, "{} vs {r}", g.to_f64());
            }
        }
    }

    #[test]
    fn dct_rejects_bad_sizes() {
        assert!(dct(&q78(&[1.0; 4]), 5).is_err());
        assert!(dct(&[], 1).is_err());
    }

    #[test]
    fn dct_counts_macs() {
        let mut counts = OpCounts::default();
        dct_raw(&[0; 24], &dct_table(24, 12), &mut counts);
        assert_eq!(counts.mults, 24 * 12);
    }
}
