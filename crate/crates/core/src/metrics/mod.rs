//! Regression error metrics and paired significance testing.

mod relevance;
mod wilcoxon;

pub use relevance::{build_relevance, ControlPoint, RelevanceError, RelevanceFunction};
pub use wilcoxon::{
    exact_p_value, normal_p_value, wilcoxon_signed_rank, PairedResults, WilcoxonError,
    WilcoxonResult, Winner, EXACT_MAX_N,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("integration step must lie in (0, 0.5]")]
    BadStep,
}

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<(), MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check(y_true, y_pred)?;
    let sq: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sq / y_true.len() as f64).sqrt())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, MetricError> {
    check(y_true, y_pred)?;
    let abs: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b).abs()).sum();
    Ok(abs / y_true.len() as f64)
}

pub const DEFAULT_SERA_STEP: f64 = 0.001;

/// Squared error-relevance area.
///
/// For each threshold `t` on a uniform grid over `[0, 1]`, `SER_t` sums the
/// squared errors of the cases with `phi(y) >= t`; the curve is integrated
/// with the trapezoid rule. Empty input gives 0.
pub fn sera(
    y_true: &[f64],
    y_pred: &[f64],
    phi: &RelevanceFunction,
    step: f64,
) -> Result<f64, MetricError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if !(step > 0.0 && step <= 0.5) {
        return Err(MetricError::BadStep);
    }
    // Sort cases by relevance so each SER_t is a suffix sum.
    let mut cases: Vec<(f64, f64)> = y_true
        .iter()
        .zip(y_pred)
        .map(|(&y, &p)| (phi.eval(y), (p - y) * (p - y)))
        .collect();
    cases.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut suffix = vec![0.0; cases.len() + 1];
    for i in (0..cases.len()).rev() {
        suffix[i] = suffix[i + 1] + cases[i].1;
    }
    let ser_at = |t: f64| {
        let first = cases.partition_point(|c| c.0 < t);
        suffix[first]
    };
    let intervals = (1.0 / step).round().max(1.0) as usize;
    let h = 1.0 / intervals as f64;
    let mut area = 0.5 * (ser_at(0.0) + ser_at(1.0));
    for i in 1..intervals {
        area += ser_at(i as f64 * h);
    }
    Ok(area * h)
}
