//! Two-sided Wilcoxon signed-rank test on paired per-fold losses.
//!
//! Zero differences are dropped and tied magnitudes share their average
//! rank. Up to [`EXACT_MAX_N`] pairs the null distribution of the positive
//! rank sum is computed exactly by counting all `2^n` sign assignments;
//! beyond that a tie-corrected normal approximation with continuity
//! correction is used.

use statrs::function::erf::erfc;
use thiserror::Error;

pub const EXACT_MAX_N: usize = 20;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WilcoxonError {
    #[error("need at least {MIN_PAIRS} non-zero differences, got {0}")]
    TooFewPairs(usize),
    #[error("paired vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired results must be finite")]
    NonFinite,
    #[error("significance level must lie in (0, 1)")]
    BadAlpha,
}

/// Per-fold losses of two methods on the same folds.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedResults {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedResults {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, WilcoxonError> {
        if a.len() != b.len() {
            return Err(WilcoxonError::LengthMismatch(a.len(), b.len()));
        }
        if a.is_empty() {
            return Err(WilcoxonError::TooFewPairs(0));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(WilcoxonError::NonFinite);
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn swapped(&self) -> Self {
        Self {
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }
}

/// Which side has the smaller losses according to the rank sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Rank sum of pairs where `a > b`.
    pub w_plus: f64,
    /// Rank sum of pairs where `a < b`.
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    pub exact: bool,
    pub significant: bool,
    pub winner: Winner,
}

/// Average ranks (1-based) of `values`, doubled so they are integers.
fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share rank (i + 1 + j + 1) / 2
        let r2 = (i + j + 2) as u64;
        for &o in &order[i..=j] {
            ranks[o] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// Exact two-sided p-value for a doubled positive rank sum `w2` given the
/// doubled ranks of every non-zero difference.
///
/// The null distribution assigns each rank a positive sign with
/// probability 1/2; `counts[s]` is the number of sign patterns whose doubled
/// positive sum is `s`.
pub fn exact_p_value(ranks2: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let patterns = 2f64.powi(ranks2.len() as i32);
    let w2 = w2 as usize;
    let lower: f64 = counts[..=w2.min(total as usize)].iter().sum();
    let upper: f64 = counts[w2.min(total as usize + 1)..].iter().sum();
    (2.0 * lower.min(upper) / patterns).min(1.0)
}

/// Normal-approximation two-sided p-value with continuity and tie
/// corrections.
pub fn normal_p_value(ranks2: &[u64], w_plus: f64) -> f64 {
    let n = ranks2.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks2.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    // 2 * (1 - Phi(z)) = erfc(z / sqrt 2)
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

pub fn wilcoxon_signed_rank(
    pairs: &PairedResults,
    alpha: f64,
) -> Result<WilcoxonResult, WilcoxonError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WilcoxonError::BadAlpha);
    }
    let diffs: Vec<f64> = pairs
        .a
        .iter()
        .zip(&pairs.b)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(WilcoxonError::TooFewPairs(n));
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks2 = doubled_ranks(&mags);
    let w2_plus: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total2: u64 = ranks2.iter().sum();
    let w_plus = w2_plus as f64 / 2.0;
    let w_minus = (total2 - w2_plus) as f64 / 2.0;
    let exact = n <= EXACT_MAX_N;
    let p_value = if exact {
        exact_p_value(&ranks2, w2_plus)
    } else {
        normal_p_value(&ranks2, w_plus)
    };
    let winner = if w_plus < w_minus {
        Winner::A
    } else if w_minus < w_plus {
        Winner::B
    } else {
        Winner::Tie
    };
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        statistic: w_plus.min(w_minus),
        p_value,
        exact,
        significant: p_value < alpha,
        winner,
    })
}
