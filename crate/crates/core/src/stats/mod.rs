//! Nonparametric group comparison over judge scores.
//!
//! The pipeline is: verdict store → `ScoreMatrix` (per-sample, per-dimension
//! cells holding raw judge scores and a cell mean) → per-dimension test
//! results (Mann-Whitney U, Cliff's delta, Krippendorff's alpha) → CSV/JSON
//! exports. Ordinal scores never pass through t-tests or other
//! normality-assuming machinery.

pub mod cliffs;
pub mod krippendorff;
pub mod mannwhitney;

pub use cliffs::cliffs_delta;
pub use krippendorff::{krippendorff_alpha, AlphaMetric, AlphaResult};
pub use mannwhitney::{
    mann_whitney_u, mann_whitney_u_exact, mann_whitney_u_normal, midranks, MwMethod, MwResult,
    EXACT_ENUMERATION_LIMIT,
};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::judge::store::VerdictStore;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in input")]
    NonFiniteValue,
    #[error("exact enumeration needs {assignments} assignments (limit {limit})")]
    EnumerationTooLarge { assignments: u64, limit: u64 },
    #[error("need at least two raters, got {0}")]
    NeedTwoRaters(usize),
    #[error("rating rows have unequal lengths")]
    RaggedRatings,
    #[error("no unit has two or more ratings")]
    NoPairableUnits,
    #[error("verdict store is missing {} cell(s), e.g. {}", .missing.len(), .missing.iter().take(5).cloned().collect::<Vec<_>>().join(", "))]
    IncompleteStore { missing: Vec<String> },
    #[error("group \"{0}\" has no samples in the matrix")]
    UnknownGroup(String),
    #[error("duplicate model label \"{0}\"")]
    DuplicateModelLabel(String),
    #[error("no dimensions requested")]
    NoDimensions,
}

/// How MISSING verdicts inside a cell are handled when computing the cell
/// mean for group comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    /// Any MISSING judge score excludes the whole cell.
    Strict,
    /// The mean is taken over present scores; only an all-MISSING cell is
    /// excluded.
    Lenient,
}

impl MissingPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MissingPolicy::Strict => "strict",
            MissingPolicy::Lenient => "lenient",
        }
    }
}

/// One `(sample, dimension)` cell. `raw` is aligned with the matrix's
/// `model_labels`; `mean` is `None` when the cell is excluded under the
/// active missing policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub raw: Vec<Option<u8>>,
    pub mean: Option<f64>,
}

impl Cell {
    pub fn is_excluded(&self) -> bool {
        self.mean.is_none()
    }
}

/// Sample-major score matrix: `cells[s * dims + d]`.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub sample_ids: Vec<String>,
    pub sample_groups: Vec<String>,
    pub dim_ids: Vec<String>,
    pub model_labels: Vec<String>,
    pub policy: MissingPolicy,
    cells: Vec<Cell>,
}

impl ScoreMatrix {
    /// Direct constructor for synthetic fixtures; `cells` must be
    /// sample-major with `sample_ids.len() * dim_ids.len()` entries.
    pub fn from_parts(
        sample_ids: Vec<String>,
        sample_groups: Vec<String>,
        dim_ids: Vec<String>,
        model_labels: Vec<String>,
        policy: MissingPolicy,
        cells: Vec<Cell>,
    ) -> Result<Self, StatsError> {
        if dim_ids.is_empty() {
            return Err(StatsError::NoDimensions);
        }
        assert_eq!(sample_ids.len(), sample_groups.len());
        assert_eq!(cells.len(), sample_ids.len() * dim_ids.len());
        Ok(Self {
            sample_ids,
            sample_groups,
            dim_ids,
            model_labels,
            policy,
            cells,
        })
    }

    pub fn cell(&self, sample_idx: usize, dim_idx: usize) -> &Cell {
        &self.cells[sample_idx * self.dim_ids.len() + dim_idx]
    }

    /// Cell means for one group and dimension, excluded cells dropped,
    /// corpus order preserved.
    pub fn group_means(&self, group: &str, dim_idx: usize) -> Vec<f64> {
        (0..self.sample_ids.len())
            .filter(|&s| self.sample_groups[s] == group)
            .filter_map(|s| self.cell(s, dim_idx).mean)
            .collect()
    }

    pub fn excluded_count(&self, group: &str, dim_idx: usize) -> usize {
        (0..self.sample_ids.len())
            .filter(|&s| self.sample_groups[s] == group)
            .filter(|&s| self.cell(s, dim_idx).is_excluded())
            .count()
    }

    pub fn has_group(&self, group: &str) -> bool {
        self.sample_groups.iter().any(|g| g == group)
    }

    /// Raw integer scores arranged for agreement analysis: one row per
    /// judge, one column per sample (all groups pooled), `None` where the
    /// verdict was MISSING. Cell exclusion does not apply here — agreement
    /// is about the judges, not the group contrast.
    pub fn alpha_grid(&self, dim_idx: usize) -> Vec<Vec<Option<f64>>> {
        (0..self.model_labels.len())
            .map(|m| {
                (0..self.sample_ids.len())
                    .map(|s| self.cell(s, dim_idx).raw.get(m).copied().flatten())
                    .map(|v| v.map(f64::from))
                    .collect()
            })
            .collect()
    }

    /// Long-format CSV: one row per `(sample, dimension)`, with each judge's
    /// raw score (`MISSING` when unparsable), and the cell mean to four
    /// decimals (empty when the cell is excluded).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,group,dim_id");
        for label in &self.model_labels {
            out.push(',');
            out.push_str(&csv_field(&format!("score_{label}")));
        }
        out.push_str(",cell_mean\n");
        for s in 0..self.sample_ids.len() {
            for d in 0..self.dim_ids.len() {
                let cell = self.cell(s, d);
                out.push_str(&csv_field(&self.sample_ids[s]));
                out.push(',');
                out.push_str(&csv_field(&self.sample_groups[s]));
                out.push(',');
                out.push_str(&csv_field(&self.dim_ids[d]));
                for raw in &cell.raw {
                    out.push(',');
                    match raw {
                        Some(v) => out.push_str(&v.to_string()),
                        None => out.push_str("MISSING"),
                    }
                }
                out.push(',');
                if let Some(mean) = cell.mean {
                    out.push_str(&format!("{mean:.4}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Builds the score matrix from a verdict store. Every
/// `(sample, dimension, model)` triple must have a verdict — a MISSING
/// verdict counts as resolved, an absent record does not — so a partially
/// evaluated run fails loudly here instead of silently shrinking groups.
pub fn aggregate_scores(
    store: &VerdictStore,
    corpus: &Corpus,
    dim_ids: &[String],
    model_labels: &[String],
    policy: MissingPolicy,
) -> Result<ScoreMatrix, StatsError> {
    if dim_ids.is_empty() {
        return Err(StatsError::NoDimensions);
    }
    let mut labels = model_labels.to_vec();
    labels.sort();
    for pair in labels.windows(2) {
        if pair[0] == pair[1] {
            return Err(StatsError::DuplicateModelLabel(pair[0].clone()));
        }
    }

    let mut cells = Vec::with_capacity(corpus.samples.len() * dim_ids.len());
    let mut absent: Vec<String> = Vec::new();
    for sample in &corpus.samples {
        for dim_id in dim_ids {
            let mut raw: Vec<Option<u8>> = Vec::with_capacity(labels.len());
            for label in &labels {
                match store.get(&sample.id, dim_id, label) {
                    Some(verdict) => raw.push(verdict.score.value()),
                    None => {
                        absent.push(format!("{}/{}/{}", sample.id, dim_id, label));
                        raw.push(None);
                    }
                }
            }
            let present: Vec<f64> = raw.iter().flatten().map(|&v| f64::from(v)).collect();
            let mean = match policy {
                MissingPolicy::Strict if raw.iter().any(|r| r.is_none()) => None,
                _ if present.is_empty() => None,
                _ => Some(present.iter().sum::<f64>() / present.len() as f64),
            };
            cells.push(Cell { raw, mean });
        }
    }
    if !absent.is_empty() {
        return Err(StatsError::IncompleteStore { missing: absent });
    }

    ScoreMatrix::from_parts(
        corpus.samples.iter().map(|s| s.id.clone()).collect(),
        corpus.samples.iter().map(|s| s.group.clone()).collect(),
        dim_ids.to_vec(),
        labels,
        policy,
        cells,
    )
}

/// Location/scale summary of one group's cell means. Median is the midpoint
/// of the sorted values; `sd` is the n-1 sample standard deviation, absent
/// for singleton groups.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: Option<f64>,
}

pub fn group_summary(values: &[f64]) -> Result<SummaryStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteValue);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let sd = if n >= 2 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        Some((ss / (n - 1) as f64).sqrt())
    } else {
        None
    };
    Ok(SummaryStats {
        n,
        mean,
        median,
        sd,
    })
}

/// Full comparison of two groups on one dimension.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionStats {
    pub dim_id: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    /// Cells dropped by the missing policy, per group.
    pub excluded_a: usize,
    pub excluded_b: usize,
    pub summary_a: SummaryStats,
    pub summary_b: SummaryStats,
    pub u: f64,
    pub p_two_sided: f64,
    pub p_method: String,
    pub cliffs_delta: f64,
    pub alpha: AlphaResult,
    pub alpha_metric: String,
}

/// Runs the per-dimension suite: U and p on the cell means, Cliff's delta
/// on the same values, and alpha on the raw per-judge scores of all samples.
pub fn compare_dimension(
    matrix: &ScoreMatrix,
    dim_idx: usize,
    group_a: &str,
    group_b: &str,
    method: MwMethod,
    alpha_metric: AlphaMetric,
) -> Result<DimensionStats, StatsError> {
    for group in [group_a, group_b] {
        if !matrix.has_group(group) {
            return Err(StatsError::UnknownGroup(group.to_string()));
        }
    }
    let values_a = matrix.group_means(group_a, dim_idx);
    let values_b = matrix.group_means(group_b, dim_idx);
    let mw = mann_whitney_u(&values_a, &values_b, method)?;
    let delta = cliffs_delta(&values_a, &values_b)?;
    let alpha = match krippendorff_alpha(&matrix.alpha_grid(dim_idx), alpha_metric) {
        Ok(result) => result,
        // A single judge configuration has no agreement to measure.
        Err(StatsError::NeedTwoRaters(_)) => AlphaResult::Degenerate,
        Err(e) => return Err(e),
    };
    Ok(DimensionStats {
        dim_id: matrix.dim_ids[dim_idx].clone(),
        group_a: group_a.to_string(),
        group_b: group_b.to_string(),
        n_a: values_a.len(),
        n_b: values_b.len(),
        excluded_a: matrix.excluded_count(group_a, dim_idx),
        excluded_b: matrix.excluded_count(group_b, dim_idx),
        summary_a: group_summary(&values_a)?,
        summary_b: group_summary(&values_b)?,
        u: mw.u,
        p_two_sided: mw.p_two_sided,
        p_method: mw.method.as_str().to_string(),
        cliffs_delta: delta,
        alpha,
        alpha_metric: alpha_metric.as_str().to_string(),
    })
}

/// `compare_dimension` across every dimension of the matrix.
pub fn compare_all(
    matrix: &ScoreMatrix,
    group_a: &str,
    group_b: &str,
    method: MwMethod,
    alpha_metric: AlphaMetric,
) -> Result<Vec<DimensionStats>, StatsError> {
    (0..matrix.dim_ids.len())
        .map(|d| compare_dimension(matrix, d, group_a, group_b, method, alpha_metric))
        .collect()
}
