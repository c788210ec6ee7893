//! Template classification: full DTW as the reference scorer, the fixed
//! diagonal distance as the deployed scorer, and keyword decision with
//! rejection.
//!
//! Scores are unsigned Q8.8 averages of table entries: the accumulated path
//! cost divided by `|a| + |b|` (full DTW) or `2T` (diagonal), so both modes
//! share one scale and one rejection threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::OpCounts;
use crate::vq::{DistanceTable, EncodedUtterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    FullDtw,
    Diagonal,
}

impl MatchMode {
    pub fn name(self) -> &'static str {
        match self {
            MatchMode::FullDtw => "full",
            MatchMode::Diagonal => "diagonal",
        }
    }
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full_dtw" => Ok(MatchMode::FullDtw),
            "diagonal" => Ok(MatchMode::Diagonal),
            other => Err(Error::config(format!("unknown matcher mode `{other}` (full|diagonal)"))),
        }
    }
}

/// Raw unsigned Q8.8 score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub u32);

impl Score {
    pub fn from_f64(x: f64) -> Score {
        Score((x * 256.0).round().clamp(0.0, u32::MAX as f64) as u32)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 256.0
    }
}

impl std::fmt::Display for Score {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}", self.to_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    /// Normalized template length.
    pub template_len: usize,
    pub rejection_threshold: Score,
    pub mode: MatchMode,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            template_len: 64,
            rejection_threshold: Score(u16::MAX as u32),
            mode: MatchMode::Diagonal,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_len < 2 || self.template_len > u16::MAX as usize {
            return Err(Error::config(format!(
                "template_len must be in 2..=65535, got {}",
                self.template_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub keyword: String,
    indices: Vec<u16>,
}

impl Template {
    pub fn new(keyword: impl Into<String>, indices: Vec<u16>, len: usize, codebook_size: usize) -> Result<Self> {
        if indices.len() != len {
            return Err(Error::usage(format!(
                "template has {} indices, expected {len}",
                indices.len()
            )));
        }
        EncodedUtterance::new(indices.clone(), codebook_size)?;
        Ok(Template {
            keyword: keyword.into(),
            indices,
        })
    }

    pub fn indices(&self) -> &[u16] {
        &self.indices
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keyword(String),
    Reject,
}

impl Decision {
    pub fn label(&self) -> &str {
        match self {
            Decision::Keyword(k) => k,
            Decision::Reject => "REJECT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub decision: Decision,
    /// Best (lowest) template score.
    pub score: Score,
    pub per_template_scores: Vec<Score>,
}

/// `out[t] = u[floor(t * len / T)]`.
pub fn time_normalize(u: &EncodedUtterance, len: usize) -> EncodedUtterance {
    let src = u.indices();
    let n = src.len();
    if n == 0 {
        return u.clone();
    }
    let indices = (0..len).map(|t| src[t * n / len]).collect();
    // indices come from a valid utterance, so range checks cannot fail
    EncodedUtterance::new(indices, usize::MAX).expect("resampled a valid utterance")
}

fn normalize(sum: u64, denominator: u64) -> Score {
    Score(((sum + denominator / 2) / denominator).min(u32::MAX as u64) as u32)
}

/// Accumulated (unnormalized) cost of the optimal warping path.
pub fn dtw_full_accumulated(a: &[u16], b: &[u16], table: &DistanceTable, counts: &mut OpCounts) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::usage("dtw_full needs non-empty sequences"));
    }
    let m = b.len();
    let mut prev = vec![0u32; m];
    let mut row = vec![0u32; m];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            let cost = table.get(ai as usize, bj as usize) as u32;
            counts.lookup(1);
            let best = match (i, j) {
                (0, 0) => 0,
                (0, _) => row[j - 1],
                (_, 0) => prev[0],
                _ => {
                    counts.add(2);
                    prev[j].min(row[j - 1]).min(prev[j - 1])
                }
            };
            counts.add(1);
            row[j] = best.saturating_add(cost);
        }
        std::mem::swap(&mut prev, &mut row);
    }
    Ok(prev[m - 1] as u64)
}

pub fn dtw_full(a: &[u16], b: &[u16], table: &DistanceTable) -> Result<Score> {
    dtw_full_counted(a, b, table, &mut OpCounts::default())
}

pub fn dtw_full_counted(a: &[u16], b: &[u16], table: &DistanceTable, counts: &mut OpCounts) -> Result<Score> {
    let sum = dtw_full_accumulated(a, b, table, counts)?;
    Ok(normalize(sum, (a.len() + b.len()) as u64))
}

pub fn diagonal_distance(a: &[u16], b: &[u16], table: &DistanceTable) -> Result<Score> {
    diagonal_distance_counted(a, b, table, &mut OpCounts::default())
}

/// Sum of `table[a_t][b_t]` over `t`, divided by `2T`.
pub fn diagonal_distance_counted(a: &[u16], b: &[u16], table: &DistanceTable, counts: &mut OpCounts) -> Result<Score> {
    let sum = diagonal_accumulated(a, b, table, counts)?;
    Ok(normalize(sum, 2 * a.len() as u64))
}

fn diagonal_accumulated(a: &[u16], b: &[u16], table: &DistanceTable, counts: &mut OpCounts) -> Result<u64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::usage(format!(
            "diagonal distance needs equal non-empty lengths (got {} and {}); time-normalize first",
            a.len(),
            b.len()
        )));
    }
    counts.lookup(a.len() as u64);
    counts.add(a.len() as u64);
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| table.get(x as usize, y as usize) as u64)
        .sum())
}

/// Accumulated cost in the given mode; the normalizer is `|a| + |b|` either way.
fn accumulated(a: &[u16], b: &[u16], table: &DistanceTable, mode: MatchMode, counts: &mut OpCounts) -> Result<u64> {
    match mode {
        MatchMode::FullDtw => dtw_full_accumulated(a, b, table, counts),
        MatchMode::Diagonal => diagonal_accumulated(a, b, table, counts),
    }
}

pub fn score(a: &[u16], b: &[u16], table: &DistanceTable, mode: MatchMode, counts: &mut OpCounts) -> Result<Score> {
    let sum = accumulated(a, b, table, mode, counts)?;
    Ok(normalize(sum, (a.len() + b.len()) as u64))
}

pub fn classify(
    u: &EncodedUtterance,
    templates: &[Template],
    cfg: &MatcherConfig,
    table: &DistanceTable,
) -> Result<MatchResult> {
    classify_counted(u, templates, cfg, table, &mut OpCounts::default())
}

/// Normalizes `u` to the template length, scores every template and picks
/// the first lowest score; above the threshold the decision is `Reject`.
///
/// The argmin is taken on the accumulated sums (all comparisons share the
/// `2T` normalizer), so rounding in the normalization never reorders templates.
pub fn classify_counted(
    u: &EncodedUtterance,
    templates: &[Template],
    cfg: &MatcherConfig,
    table: &DistanceTable,
    counts: &mut OpCounts,
) -> Result<MatchResult> {
    cfg.validate()?;
    if templates.is_empty() {
        return Err(Error::usage("classify needs at least one template"));
    }
    if u.is_empty() {
        return Err(Error::usage("cannot classify an empty utterance"));
    }
    let normalized = time_normalize(u, cfg.template_len);
    let sums = templates
        .iter()
        .map(|t| accumulated(normalized.indices(), t.indices(), table, cfg.mode, counts))
        .collect::<Result<Vec<_>>>()?;
    let denominator = 2 * cfg.template_len as u64;
    let per_template_scores: Vec<Score> = sums.iter().map(|&s| normalize(s, denominator)).collect();
    let best = (0..sums.len()).min_by_key(|&i| (sums[i], i)).expect("non-empty");
    let best_score = per_template_scores[best];
    let decision = if best_score <= cfg.rejection_threshold {
        Decision::Keyword(templates[best].keyword.clone())
    } else {
        Decision::Reject
    };
    Ok(MatchResult {
        decision,
        score: best_score,
        per_template_scores,
    })
}

/// Index of the utterance with the smallest summed full-DTW score to all others.
pub fn medoid_index(utterances: &[EncodedUtterance], table: &DistanceTable) -> Result<usize> {
    if utterances.is_empty() {
        return Err(Error::usage("cannot pick a medoid from no utterances"));
    }
    let n = utterances.len();
    let mut sums = vec![0u64; n];
    for i in 0..n {
        for j in 0..i {
            let s = dtw_full(utterances[i].indices(), utterances[j].indices(), table)?.0 as u64;
            sums[i] += s;
            sums[j] += s;
        }
    }
    Ok((0..n).min_by_key(|&i| (sums[i], i)).expect("non-empty"))
}

pub fn build_template(
    utterances: &[EncodedUtterance],
    keyword: &str,
    cfg: &MatcherConfig,
    table: &DistanceTable,
) -> Result<Template> {
    cfg.validate()?;
    let medoid = medoid_index(utterances, table)?;
    let normalized = time_normalize(&utterances[medoid], cfg.template_len);
    Template::new(keyword, normalized.indices().to_vec(), cfg.template_len, table.size())
}
