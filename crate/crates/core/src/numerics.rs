//! Fixed-point arithmetic shared by every datapath stage.
//!
//! A [`QFormat`] is described by its integer and fraction bit counts plus a
//! sign flag. The integer bit count excludes the sign bit, so the 16-bit
//! audio sample format (`Q1.15` in DSP shorthand, one sign bit and fifteen
//! fraction bits) is `QFormat { integer_bits: 0, fraction_bits: 15, signed: true }`
//! and covers `[-1, 1 - 2^-15]`.
//!
//! All rounding is half away from zero and all additions saturate. Raw
//! values are carried as `i64` so that every format of up to 32 bits, signed
//! or unsigned, fits without special cases.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QFormat {
    integer_bits: u8,
    fraction_bits: u8,
    signed: bool,
}

impl QFormat {
    /// 16-bit audio samples and window/filter weights, range `[-1, 1)`.
    pub const Q15: QFormat = QFormat::new_unchecked(0, 15, true);
    /// 16-bit FFT datapath with one guard bit, range `[-2, 2)`.
    pub const Q2_14: QFormat = QFormat::new_unchecked(1, 14, true);
    /// 16-bit cepstral coefficients and log energies, range `[-128, 128)`.
    pub const Q7_8: QFormat = QFormat::new_unchecked(7, 8, true);
    /// 16-bit unsigned distances and scores, range `[0, 256)`.
    pub const UQ8_8: QFormat = QFormat::new_unchecked(8, 8, false);
    /// 32-bit unsigned power and Mel energy format, range `[0, 16)`.
    pub const UQ4_28: QFormat = QFormat::new_unchecked(4, 28, false);

    const fn new_unchecked(integer_bits: u8, fraction_bits: u8, signed: bool) -> Self {
        QFormat {
            integer_bits,
            fraction_bits,
            signed,
        }
    }

    pub fn new(integer_bits: u8, fraction_bits: u8, signed: bool) -> Result<Self> {
        let width = integer_bits as u32 + fraction_bits as u32 + signed as u32;
        if width == 0 || width > 32 {
            return Err(Error::InvalidFormat(format!(
                "{integer_bits} integer + {fraction_bits} fraction bits{} is {width} bits, must be 1..=32",
                if signed { " + sign" } else { "" }
            )));
        }
        Ok(Self::new_unchecked(integer_bits, fraction_bits, signed))
    }

    pub const fn integer_bits(self) -> u32 {
        self.integer_bits as u32
    }

    pub const fn fraction_bits(self) -> u32 {
        self.fraction_bits as u32
    }

    pub const fn is_signed(self) -> bool {
        self.signed
    }

    /// Total storage width in bits, sign included.
    pub const fn width(self) -> u32 {
        self.integer_bits as u32 + self.fraction_bits as u32 + self.signed as u32
    }

    pub const fn max_raw(self) -> i64 {
        (1i64 << (self.integer_bits as u32 + self.fraction_bits as u32)) - 1
    }

    pub const fn min_raw(self) -> i64 {
        if self.signed {
            -(1i64 << (self.integer_bits as u32 + self.fraction_bits as u32))
        } else {
            0
        }
    }

    /// Value of one least-significant bit.
    pub fn ulp(self) -> f64 {
        (-(self.fraction_bits as f64)).exp2()
    }

    pub fn max_value(self) -> f64 {
        self.max_raw() as f64 * self.ulp()
    }

    pub fn min_value(self) -> f64 {
        self.min_raw() as f64 * self.ulp()
    }

    #[inline]
    pub fn saturate(self, raw: i64) -> i64 {
        raw.clamp(self.min_raw(), self.max_raw())
    }

    #[inline]
    pub fn saturate_wide(self, raw: i128) -> i64 {
        raw.clamp(self.min_raw() as i128, self.max_raw() as i128) as i64
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.signed { 's' } else { 'u' };
        write!(f, "{sign}{}.{}", self.integer_bits, self.fraction_bits)
    }
}

/// A saturated fixed-point value tagged with its format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fixed {
    raw: i64,
    format: QFormat,
}

impl Fixed {
    /// Wraps a raw value, saturating it into the format's range.
    pub fn from_raw(raw: i64, format: QFormat) -> Self {
        Fixed {
            raw: format.saturate(raw),
            format,
        }
    }

    pub fn zero(format: QFormat) -> Self {
        Fixed { raw: 0, format }
    }

    pub fn max(format: QFormat) -> Self {
        Fixed {
            raw: format.max_raw(),
            format,
        }
    }

    pub fn min(format: QFormat) -> Self {
        Fixed {
            raw: format.min_raw(),
            format,
        }
    }

    pub fn raw(self) -> i64 {
        self.raw
    }

    pub fn format(self) -> QFormat {
        self.format
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 * self.format.ulp()
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Nearest representable value, ties away from zero, saturating. NaN maps to zero.
pub fn to_fixed(x: f64, format: QFormat) -> Fixed {
    if x.is_nan() {
        return Fixed::zero(format);
    }
    let scaled = (x * (format.fraction_bits() as f64).exp2()).round();
    let raw = if scaled >= format.max_raw() as f64 {
        format.max_raw()
    } else if scaled <= format.min_raw() as f64 {
        format.min_raw()
    } else {
        scaled as i64
    };
    Fixed { raw, format }
}

pub fn sat_add(a: Fixed, b: Fixed) -> Result<Fixed> {
    if a.format != b.format {
        return Err(Error::FormatMismatch(a.format, b.format));
    }
    Ok(Fixed::from_raw(a.raw + b.raw, a.format))
}

/// Full-precision product, one rounding shift into `out`, then saturation.
pub fn mul_round(a: Fixed, b: Fixed, out: QFormat) -> Fixed {
    let product = a.raw as i128 * b.raw as i128;
    let from = a.format.fraction_bits() + b.format.fraction_bits();
    let raw = rescale_wide(product, from, out.fraction_bits());
    Fixed {
        raw: out.saturate_wide(raw),
        format: out,
    }
}

/// Arithmetic right shift rounding half away from zero.
#[inline]
pub fn round_shift(value: i64, shift: u32) -> i64 {
    if shift == 0 {
        return value;
    }
    let half = 1i64 << (shift - 1);
    if value >= 0 {
        (value + half) >> shift
    } else {
        -((-value + half) >> shift)
    }
}

#[inline]
fn round_shift_wide(value: i128, shift: u32) -> i128 {
    if shift == 0 {
        return value;
    }
    let half = 1i128 << (shift - 1);
    if value >= 0 {
        (value + half) >> shift
    } else {
        -((-value + half) >> shift)
    }
}

/// Moves a raw value between fraction-bit counts with rounding on the way down.
#[inline]
fn rescale_wide(value: i128, from_fraction: u32, to_fraction: u32) -> i128 {
    if from_fraction >= to_fraction {
        round_shift_wide(value, from_fraction - to_fraction)
    } else {
        value.saturating_mul(1i128 << (to_fraction - from_fraction).min(64))
    }
}

/// Re-expresses `raw` (with `from_fraction` fraction bits) in `to`, rounding and saturating.
#[inline]
pub fn requantize(raw: i64, from_fraction: u32, to: QFormat) -> i64 {
    to.saturate_wide(rescale_wide(raw as i128, from_fraction, to.fraction_bits()))
}
