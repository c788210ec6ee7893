//! Floating-point and brute-force reference implementations.
//!
//! Nothing here calls into the fixed-point datapath: these are the
//! independent yardsticks the datapath is measured against, both by the
//! test suites and by the `verify` command.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vq::DistanceTable;

const N: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    fn add(self, o: Complex) -> Complex {
        Complex { re: self.re + o.re, im: self.im + o.im }
    }

    fn sub(self, o: Complex) -> Complex {
        Complex { re: self.re - o.re, im: self.im - o.im }
    }

    fn mul(self, o: Complex) -> Complex {
        Complex {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// A finite real-valued vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatVector(Vec<f64>);

impl FloatVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("float vector has non-finite entries"));
        }
        Ok(FloatVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Direct `O(N^2)` DFT of 128 reals, bins `0..=64`, scaled by `1/128`.
pub fn dft_naive(x: &[f64]) -> Result<Vec<Complex>> {
    if x.len() != N {
        return Err(Error::usage(format!("dft_naive expects {N} samples, got {}", x.len())));
    }
    Ok((0..=N / 2)
        .map(|k| {
            let mut acc = Complex::default();
            for (n, &v) in x.iter().enumerate() {
                let phase = -2.0 * PI * ((k * n) % N) as f64 / N as f64;
                acc.re += v * phase.cos();
                acc.im += v * phase.sin();
            }
            Complex { re: acc.re / N as f64, im: acc.im / N as f64 }
        })
        .collect())
}

/// Textbook recursive radix-2 FFT, same scaling and bin range as [`dft_naive`].
pub fn fft_recursive(x: &[f64]) -> Result<Vec<Complex>> {
    if x.len() != N {
        return Err(Error::usage(format!("fft_recursive expects {N} samples, got {}", x.len())));
    }
    fn go(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        if n == 1 {
            return vec![x[0]];
        }
        let even: Vec<Complex> = x.iter().step_by(2).copied().collect();
        let odd: Vec<Complex> = x.iter().skip(1).step_by(2).copied().collect();
        let (e, o) = (go(&even), go(&odd));
        let mut out = vec![Complex::default(); n];
        for k in 0..n / 2 {
            let angle = -2.0 * PI * k as f64 / n as f64;
            let t = Complex { re: angle.cos(), im: angle.sin() }.mul(o[k]);
            out[k] = e[k].add(t);
            out[k + n / 2] = e[k].sub(t);
        }
        out
    }
    let input: Vec<Complex> = x.iter().map(|&re| Complex { re, im: 0.0 }).collect();
    Ok(go(&input)
        .into_iter()
        .take(N / 2 + 1)
        .map(|c| Complex { re: c.re / N as f64, im: c.im / N as f64 })
        .collect())
}

/// Unnormalized DCT-II coefficients `1..=n_out`.
pub fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (1..=n_out)
        .map(|j| {
            x.iter()
                .enumerate()
                .map(|(m, &v)| v * (PI * j as f64 * (m as f64 + 0.5) / n).cos())
                .sum()
        })
        .collect()
}

/// SQNR in dB of `test` against `reference`.
pub fn sqnr_db(reference: &[Complex], test: &[Complex]) -> f64 {
    let signal: f64 = reference.iter().map(|c| c.norm_sqr()).sum();
    let noise: f64 = reference.iter().zip(test).map(|(r, t)| r.sub(*t).norm_sqr()).sum();
    if noise == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / noise).log10()
    }
}

/// Floating-point log2 Mel energies of one 128-sample frame at the pipeline
/// rate, scaled like the fixed-point datapath: spectrum divided by 128 and
/// log floored at -128.
pub fn log_mel_reference(frame: &[f64], sample_rate: u32, alpha: f64, n_mel: usize) -> Result<Vec<f64>> {
    if frame.len() != N {
        return Err(Error::usage(format!("log_mel_reference expects {N} samples, got {}", frame.len())));
    }
    let mut prev = 0.0;
    let shaped: Vec<f64> = frame
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let y = x - alpha * prev;
            prev = x;
            y * (0.54 - 0.46 * (2.0 * PI * n as f64 / (N - 1) as f64).cos())
        })
        .collect();
    let power: Vec<f64> = fft_recursive(&shaped)?.iter().map(|c| c.norm_sqr()).collect();

    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sample_rate as f64 / 2.0);
    let edges: Vec<f64> = (0..n_mel + 2).map(|i| hz(top * i as f64 / (n_mel + 1) as f64)).collect();
    Ok((0..n_mel)
        .map(|m| {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let e: f64 = power
                .iter()
                .enumerate()
                .map(|(k, &p)| {
                    let f = k as f64 * sample_rate as f64 / N as f64;
                    let w = if f > lo && f <= c {
                        (f - lo) / (c - lo)
                    } else if f > c && f < hi {
                        (hi - f) / (hi - c)
                    } else {
                        0.0
                    };
                    w * p
                })
                .sum();
            if e > 0.0 { e.log2().max(-128.0) } else { -128.0 }
        })
        .collect())
}

/// [`log_mel_reference`] followed by unnormalized DCT rows `1..=n_mfcc`,
/// clamped to the Q7.8 range.
pub fn mfcc_reference(frame: &[f64], sample_rate: u32, alpha: f64, n_mel: usize, n_mfcc: usize) -> Result<Vec<f64>> {
    let logs = log_mel_reference(frame, sample_rate, alpha, n_mel)?;
    Ok(dct2(&logs, n_mfcc).into_iter().map(|v| v.clamp(-128.0, 32767.0 / 256.0)).collect())
}

pub const MAX_ENUMERATION_CELLS: usize = 144;

/// Minimum accumulated table cost over every monotone warping path, by
/// explicit depth-first enumeration. Returns the unnormalized sum of raw
/// table entries.
pub fn dtw_enumerate(a: &[u16], b: &[u16], table: &DistanceTable) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::usage("dtw_enumerate needs non-empty sequences"));
    }
    if a.len() * b.len() > MAX_ENUMERATION_CELLS {
        return Err(Error::usage(format!(
            "dtw_enumerate is limited to {MAX_ENUMERATION_CELLS} cells, got {}x{}",
            a.len(),
            b.len()
        )));
    }
    let cost = |i: usize, j: usize| table.get(a[i] as usize, b[j] as usize) as u64;
    let mut best = u64::MAX;
    let mut stack = vec![(0usize, 0usize, cost(0, 0))];
    while let Some((i, j, acc)) = stack.pop() {
        if i == a.len() - 1 && j == b.len() - 1 {
            best = best.min(acc);
            continue;
        }
        if i + 1 < a.len() {
            stack.push((i + 1, j, acc + cost(i + 1, j)));
        }
        if j + 1 < b.len() {
            stack.push((i, j + 1, acc + cost(i, j + 1)));
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            stack.push((i + 1, j + 1, acc + cost(i + 1, j + 1)));
        }
    }
    Ok(best)
}

/// Float DTW with `(|a| + |b|)` normalization, table entries read as real values.
pub fn dtw_float(a: &[u16], b: &[u16], table: &DistanceTable) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            let c = table.get(a[i] as usize, b[j] as usize) as f64 / 256.0;
            let prev = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => d[0][j - 1],
                (_, 0) => d[i - 1][0],
                _ => d[i - 1][j].min(d[i][j - 1]).min(d[i - 1][j - 1]),
            };
            d[i][j] = c + prev;
        }
    }
    d[n - 1][m - 1] / (n + m) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    /// Mean squared distance after each assignment step.
    pub distortions: Vec<f64>,
}

/// Plain Lloyd iterations from the given seeds. Empty cells keep their centroid.
pub fn kmeans_reference(vectors: &[Vec<f64>], seeds: &[Vec<f64>], max_iters: usize) -> Result<KMeansResult> {
    if vectors.len() < seeds.len() || seeds.is_empty() {
        return Err(Error::usage(format!(
            "kmeans needs 1 <= K <= |vectors|, got K={} with {} vectors",
            seeds.len(),
            vectors.len()
        )));
    }
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut centroids = seeds.to_vec();
    let mut distortions = Vec::new();
    for _ in 0..max_iters {
        let mut sums = vec![vec![0.0; centroids[0].len()]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        let mut total = 0.0;
        for v in vectors {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, sq(v, c)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            total += d;
            counts[best] += 1;
            for (s, x) in sums[best].iter_mut().zip(v) {
                *s += x;
            }
        }
        distortions.push(total / vectors.len() as f64);
        let mut moved = false;
        for (c, (s, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if n > 0 {
                let mean: Vec<f64> = s.iter().map(|x| x / n as f64).collect();
                moved |= mean != *c;
                *c = mean;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(KMeansResult { centroids, distortions })
}
