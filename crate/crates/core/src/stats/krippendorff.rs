//! Krippendorff's alpha for inter-rater agreement with missing ratings.
//!
//! Built on the coincidence matrix: every item (unit) rated by at least two
//! raters contributes its ordered value pairs weighted by 1/(m_u - 1).
//! Items with fewer than two ratings drop out entirely. Observed and
//! expected disagreement then come from the matrix and its marginals.

use std::collections::BTreeMap;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaMetric {
    /// Squared difference of the rating values.
    Interval,
    /// Squared difference of cumulative marginal mass between the two
    /// values' positions in the sorted value set.
    Ordinal,
}

impl AlphaMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlphaMetric::Interval => "interval",
            AlphaMetric::Ordinal => "ordinal",
        }
    }
}

/// Alpha is undefined when expected disagreement is zero (every pairable
/// rating is the same value); that case is reported, never silently mapped
/// to a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaResult {
    Value(f64),
    Degenerate,
}

impl AlphaResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            AlphaResult::Value(v) => Some(*v),
            AlphaResult::Degenerate => None,
        }
    }
}

/// JSON form: the number itself, or the string `"DEGENERATE"`.
impl serde::Serialize for AlphaResult {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            AlphaResult::Value(v) => serializer.serialize_f64(*v),
            AlphaResult::Degenerate => serializer.serialize_str("DEGENERATE"),
        }
    }
}

/// `ratings[r][u]` is rater `r`'s rating of unit `u` (`None` = not rated).
/// Rows must be equal length; at least two raters and one pairable unit are
/// required. Values are matched exactly when grouped into categories, which
/// is the intended use (integer rubric scores).
pub fn krippendorff_alpha(
    ratings: &[Vec<Option<f64>>],
    metric: AlphaMetric,
) -> Result<AlphaResult, StatsError> {
    if ratings.len() < 2 {
        return Err(StatsError::NeedTwoRaters(ratings.len()));
    }
    let n_units = ratings[0].len();
    if ratings.iter().any(|row| row.len() != n_units) {
        return Err(StatsError::RaggedRatings);
    }
    for row in ratings {
        if row.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFiniteValue);
        }
    }

    // Collect pairable units and the category set they span. Categories are
    // keyed by bit pattern so exact-equal values collapse.
    let mut units: Vec<Vec<f64>> = Vec::new();
    let mut categories: BTreeMap<u64, f64> = BTreeMap::new();
    for u in 0..n_units {
        let values: Vec<f64> = ratings.iter().filter_map(|row| row[u]).collect();
        if values.len() >= 2 {
            for &v in &values {
                categories.insert(v.to_bits() ^ sign_flip(v), v);
            }
            units.push(values);
        }
    }
    if units.is_empty() {
        return Err(StatsError::NoPairableUnits);
    }
    let values: Vec<f64> = categories.into_values().collect();
    let index_of = |v: f64| -> usize {
        values
            .iter()
            .position(|&c| c == v)
            .expect("category registered")
    };
    let v_count = values.len();

    // Coincidence matrix and its marginals.
    let mut coincidence = vec![vec![0.0f64; v_count]; v_count];
    for unit in &units {
        let m = unit.len() as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[index_of(a)][index_of(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();

    let distance2 = |i: usize, j: usize| -> f64 {
        match metric {
            AlphaMetric::Interval => {
                let d = values[i] - values[j];
                d * d
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                let between: f64 = marginals[lo..=hi].iter().sum();
                let d = between - (marginals[lo] + marginals[hi]) / 2.0;
                d * d
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..v_count {
        for j in 0..v_count {
            if i == j {
                continue;
            }
            let d2 = distance2(i, j);
            observed += coincidence[i][j] * d2;
            expected += marginals[i] * marginals[j] * d2;
        }
    }
    let d_o = observed / n;
    let d_e = expected / (n * (n - 1.0));

    if d_e == 0.0 {
        return Ok(AlphaResult::Degenerate);
    }
    Ok(AlphaResult::Value(1.0 - d_o / d_e))
}

/// Orders f64 bit patterns so the BTreeMap iterates values ascending
/// (negative values sort before positive ones).
fn sign_flip(v: f64) -> u64 {
    if v.is_sign_negative() {
        !0u64
    } else {
        1u64 << 63
    }
}
