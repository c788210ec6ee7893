//! Vector quantization: offline LBG training, nearest-codeword search and the
//! precomputed codeword distance table used by the matcher.
//!
//! Training runs in `f64` and quantizes the final centroids to Q7.8; the
//! search and the table are pure integer code. All distances are squared
//! Euclidean.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{MfccVector, CEPSTRAL_FORMAT};
use crate::numerics::{requantize, to_fixed, QFormat};
use crate::ops::OpCounts;

/// Fraction bits of a squared distance between two Q7.8 vectors.
pub const DISTORTION_FRACTION_BITS: u32 = 2 * 8;
pub const TABLE_FORMAT: QFormat = QFormat::UQ8_8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codebook {
    dim: usize,
    codewords: Vec<Vec<i16>>,
}

impl Codebook {
    pub fn new(codewords: Vec<Vec<i16>>) -> Result<Self> {
        let Some(first) = codewords.first() else {
            return Err(Error::usage("codebook needs at least one codeword"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::usage("codewords must have non-zero dimension"));
        }
        if codewords.len() > u16::MAX as usize + 1 {
            return Err(Error::usage("codebook too large for 16-bit indices"));
        }
        if codewords.iter().any(|c| c.len() != dim) {
            return Err(Error::usage("codewords have inconsistent dimensions"));
        }
        Ok(Codebook { dim, codewords })
    }

    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn codewords(&self) -> &[Vec<i16>] {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> MfccVector {
        MfccVector {
            coeffs: self.codewords[i].clone(),
        }
    }

    /// Mean squared distance (real units) from each vector to its nearest codeword.
    pub fn mean_distortion(&self, vectors: &[MfccVector]) -> Result<f64> {
        let mut total = 0.0;
        for v in vectors {
            let (_, d) = quantize_vector(v, self)?;
            total += d as f64 / (1u64 << DISTORTION_FRACTION_BITS) as f64;
        }
        Ok(total / vectors.len().max(1) as f64)
    }

    /// One codeword per line, coefficients as raw Q7.8 integers separated by spaces.
    pub fn dump_text(&self) -> String {
        self.codewords
            .iter()
            .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ") + "\n")
            .collect()
    }
}

/// Symmetric `K x K` table of squared codeword distances in unsigned Q8.8.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    size: usize,
    entries: Vec<u16>,
}

impl DistanceTable {
    /// Row-major raw entries; checks zero diagonal and symmetry.
    pub fn from_raw(size: usize, entries: Vec<u16>) -> Result<Self> {
        if size == 0 || entries.len() != size * size {
            return Err(Error::usage(format!(
                "distance table of size {size} needs {} entries, got {}",
                size * size,
                entries.len()
            )));
        }
        for i in 0..size {
            if entries[i * size + i] != 0 {
                return Err(Error::usage(format!("distance table diagonal entry {i} is non-zero")));
            }
            for j in 0..i {
                if entries[i * size + j] != entries[j * size + i] {
                    return Err(Error::usage(format!("distance table is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(DistanceTable { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[u16] {
        &self.entries
    }

    /// Every entry multiplied by `factor`, saturating.
    pub fn scaled(&self, factor: u32) -> DistanceTable {
        DistanceTable {
            size: self.size,
            entries: self
                .entries
                .iter()
                .map(|&e| (e as u32 * factor).min(u16::MAX as u32) as u16)
                .collect(),
        }
    }

    pub fn dump_text(&self) -> String {
        self.entries.chunks(self.size).map(|row| {
            row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ") + "\n"
        }).collect()
    }
}

/// Codeword indices of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EncodedUtterance {
    indices: Vec<u16>,
}

impl EncodedUtterance {
    pub fn new(indices: Vec<u16>, codebook_size: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::usage("encoded utterance is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i as usize >= codebook_size) {
            return Err(Error::usage(format!(
                "codeword index {bad} out of range for codebook of {codebook_size}"
            )));
        }
        Ok(EncodedUtterance { indices })
    }

    pub fn indices(&self) -> &[u16] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbgConfig {
    pub codebook_size: usize,
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop a level once the relative distortion improvement drops below this.
    pub convergence: f64,
}

impl Default for LbgConfig {
    fn default() -> Self {
        LbgConfig {
            codebook_size: 64,
            epsilon: 0.01,
            max_iters: 50,
            convergence: 1e-4,
        }
    }
}

impl LbgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.codebook_size == 0 || !self.codebook_size.is_power_of_two() || self.codebook_size > 1 << 16 {
            return Err(Error::config(format!(
                "codebook_size must be a power of two in 1..=65536, got {}",
                self.codebook_size
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!("epsilon must be in (0, 1), got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be positive"));
        }
        if !(self.convergence >= 0.0) {
            return Err(Error::config("convergence threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Distortion trace of one codebook size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub size: usize,
    /// Mean squared distance after each assignment step.
    pub distortions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub levels: Vec<LevelLog>,
    /// Mean distortion of the quantized codebook over the training set.
    pub final_distortion: f64,
}

impl TrainingLog {
    pub fn is_monotone(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.distortions.windows(2).all(|w| w[1] <= w[0]))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(v: &[f64], codebook: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in codebook.iter().enumerate() {
        let d = squared_distance(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// LBG splitting with Lloyd refinement.
///
/// Each level doubles the codebook: codeword `c` becomes `c + d` and `c - d`
/// (placed at `2i` and `2i + 1`), where `d_k = epsilon * r_k * |c_k|` and
/// `r_k` is drawn uniformly from `[0.5, 1.5)` by a ChaCha8 generator seeded
/// with `seed`. Components that are exactly zero use the data RMS instead of
/// `|c_k|`. Empty cells after a centroid update are re-seeded at
/// `c_max + d` where `c_max` is the cell with the largest total distortion.
pub fn train_codebook(vectors: &[MfccVector], cfg: &LbgConfig, seed: u64) -> Result<(Codebook, TrainingLog)> {
    cfg.validate()?;
    let k = cfg.codebook_size;
    if vectors.len() < k {
        return Err(Error::Training(format!(
            "{} training vectors cannot support a codebook of {k}",
            vectors.len()
        )));
    }
    let dim = vectors[0].dim();
    if dim == 0 || vectors.iter().any(|v| v.dim() != dim) {
        return Err(Error::usage("training vectors have inconsistent or zero dimension"));
    }

    let data: Vec<Vec<f64>> = vectors.iter().map(MfccVector::to_f64).collect();
    let n = data.len() as f64;
    let rms = (data.iter().flatten().map(|x| x * x).sum::<f64>() / (n * dim as f64)).sqrt().max(CEPSTRAL_FORMAT.ulp());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perturbation = |c: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
        c.iter()
            .map(|&x| {
                let r: f64 = rng.random_range(0.5..1.5);
                let scale = if x == 0.0 { rms } else { x.abs() };
                cfg.epsilon * r * scale
            })
            .collect()
    };

    let mut centroid = vec![0.0; dim];
    for v in &data {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += x;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);

    let mut codebook = vec![centroid];
    let mut levels = vec![LevelLog {
        size: 1,
        distortions: vec![data.iter().map(|v| squared_distance(v, &codebook[0])).sum::<f64>() / n],
    }];

    while codebook.len() < k {
        let mut split = Vec::with_capacity(codebook.len() * 2);
        for c in &codebook {
            let d = perturbation(c, &mut rng);
            split.push(c.iter().zip(&d).map(|(x, e)| x + e).collect());
            split.push(c.iter().zip(&d).map(|(x, e)| x - e).collect());
        }
        codebook = split;
        let log = lloyd(&data, &mut codebook, cfg, &mut |c, rng_ref| perturbation(c, rng_ref), &mut rng);
        levels.push(log);
    }

    let quantized: Vec<Vec<i16>> = codebook
        .iter()
        .map(|c| c.iter().map(|&x| to_fixed(x, CEPSTRAL_FORMAT).raw() as i16).collect())
        .collect();
    let codebook = Codebook::new(quantized)?;
    let final_distortion = codebook.mean_distortion(vectors)?;
    Ok((codebook, TrainingLog { levels, final_distortion }))
}

fn lloyd(
    data: &[Vec<f64>],
    codebook: &mut [Vec<f64>],
    cfg: &LbgConfig,
    perturbation: &mut dyn FnMut(&[f64], &mut ChaCha8Rng) -> Vec<f64>,
    rng: &mut ChaCha8Rng,
) -> LevelLog {
    let n = data.len() as f64;
    let dim = codebook[0].len();
    let mut distortions: Vec<f64> = Vec::new();
    for _ in 0..cfg.max_iters {
        let mut sums = vec![vec![0.0; dim]; codebook.len()];
        let mut counts = vec![0usize; codebook.len()];
        let mut cell_cost = vec![0.0; codebook.len()];
        let mut total = 0.0;
        for v in data {
            let (i, d) = nearest(v, codebook);
            total += d;
            counts[i] += 1;
            cell_cost[i] += d;
            for (s, x) in sums[i].iter_mut().zip(v) {
                *s += x;
            }
        }
        let distortion = total / n;
        let converged = match distortions.last() {
            Some(&prev) => prev == 0.0 || (prev - distortion) / prev < cfg.convergence,
            None => distortion == 0.0,
        };
        distortions.push(distortion);
        if converged {
            break;
        }
        for (i, c) in codebook.iter_mut().enumerate() {
            if counts[i] > 0 {
                for (cv, s) in c.iter_mut().zip(&sums[i]) {
                    *cv = s / counts[i] as f64;
                }
            }
        }
        for empty in (0..codebook.len()).filter(|&i| counts[i] == 0) {
            let worst = (0..codebook.len())
                .fold(0, |best, i| if cell_cost[i] > cell_cost[best] { i } else { best });
            let d = perturbation(&codebook[worst], rng);
            codebook[empty] = codebook[worst].iter().zip(&d).map(|(x, e)| x + e).collect();
            cell_cost[worst] /= 2.0;
        }
    }
    LevelLog {
        size: codebook.len(),
        distortions,
    }
}

/// Nearest codeword by squared distance, ties to the lowest index.
///
/// The distortion is returned raw with [`DISTORTION_FRACTION_BITS`] fraction bits.
pub fn quantize_vector(v: &MfccVector, cb: &Codebook) -> Result<(usize, u64)> {
    quantize_vector_counted(v, cb, &mut OpCounts::default())
}

pub fn quantize_vector_counted(v: &MfccVector, cb: &Codebook, counts: &mut OpCounts) -> Result<(usize, u64)> {
    if v.dim() != cb.dim {
        return Err(Error::usage(format!(
            "vector dimension {} does not match codebook dimension {}",
            v.dim(),
            cb.dim
        )));
    }
    let mut best = (0usize, u64::MAX);
    for (i, c) in cb.codewords.iter().enumerate() {
        let d: u64 = v
            .coeffs
            .iter()
            .zip(c)
            .map(|(&x, &y)| {
                let diff = x as i64 - y as i64;
                (diff * diff) as u64
            })
            .sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    let elems = (cb.size() * cb.dim) as u64;
    counts.mul(elems);
    counts.add(2 * elems + cb.size() as u64);
    counts.lookup(elems);
    Ok(best)
}

pub fn build_distance_table(cb: &Codebook) -> DistanceTable {
    let k = cb.size();
    let mut entries = vec![0u16; k * k];
    for i in 0..k {
        for j in 0..i {
            let d: i64 = cb.codewords[i]
                .iter()
                .zip(&cb.codewords[j])
                .map(|(&x, &y)| (x as i64 - y as i64).pow(2))
                .sum();
            let q = requantize(d, DISTORTION_FRACTION_BITS, TABLE_FORMAT) as u16;
            entries[i * k + j] = q;
            entries[j * k + i] = q;
        }
    }
    DistanceTable { size: k, entries }
}

pub fn encode_utterance(mfccs: &[MfccVector], cb: &Codebook) -> Result<EncodedUtterance> {
    encode_utterance_counted(mfccs, cb, &mut OpCounts::default())
}

pub fn encode_utterance_counted(mfccs: &[MfccVector], cb: &Codebook, counts: &mut OpCounts) -> Result<EncodedUtterance> {
    if mfccs.is_empty() {
        return Err(Error::usage("cannot encode an empty feature sequence"));
    }
    let indices = mfccs
        .iter()
        .map(|v| quantize_vector_counted(v, cb, counts).map(|(i, _)| i as u16))
        .collect::<Result<Vec<_>>>()?;
    EncodedUtterance::new(indices, cb.size())
}
