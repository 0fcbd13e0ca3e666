//! Cliff's delta: (#{a > b} - #{a < b}) / (n_a * n_b) over all cross pairs.

use super::StatsError;

/// Computes delta by sorting one sample and binary-searching each value of
/// the other, so large samples stay O((n+m) log m). Exact pair counts —
/// no approximation — which keeps |delta| = 1 attainable exactly.
pub fn cliffs_delta(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteValue);
    }
    let mut sorted_ys = ys.to_vec();
    sorted_ys.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let mut greater = 0u64; // pairs with x > y
    let mut less = 0u64; // pairs with x < y
    for &x in xs {
        let below = sorted_ys.partition_point(|&y| y < x) as u64;
        let not_above = sorted_ys.partition_point(|&y| y <= x) as u64;
        greater += below;
        less += sorted_ys.len() as u64 - not_above;
    }
    let pairs = (xs.len() as u64 * ys.len() as u64) as f64;
    Ok((greater as f64 - less as f64) / pairs)
}
