//! Table and report rendering. One row per rubric dimension; p-values are
//! printed plainly down to 0.001 and in scientific notation below that
//! ("2.4×10⁻⁸" in markdown, "2.4e-8" in CSV).

use serde::Serialize;

use crate::stats::{AlphaResult, DimensionStats, SummaryStats};

/// A dimension whose comparison could not run because one side lost every
/// cell to the missing-score policy. It still gets a table row, marked
/// EXCLUDED, and the command exits 0 with a warning.
#[derive(Debug, Clone, Serialize)]
pub struct ExcludedRow {
    pub dim_id: String,
    pub status: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub excluded_a: usize,
    pub excluded_b: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum StatsRow {
    Stats(DimensionStats),
    Excluded(ExcludedRow),
}

impl StatsRow {
    pub fn dim_id(&self) -> &str {
        match self {
            StatsRow::Stats(s) => &s.dim_id,
            StatsRow::Excluded(e) => &e.dim_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Csv,
}

/// Formats a two-sided p-value: three decimals at or above 0.001, scientific
/// notation below. `ascii` picks "2.4e-8" over "2.4×10⁻⁸".
pub fn format_p(p: f64, ascii: bool) -> String {
    if p >= 0.001 || p.is_nan() {
        return format!("{p:.3}");
    }
    if p <= 0.0 {
        // Not reachable from the erfc/exact paths, but render something
        // honest rather than panicking on a degenerate input.
        return "0".to_string();
    }
    let mut exp = p.log10().floor() as i32;
    let mut mantissa = p / 10f64.powi(exp);
    // Rounding 9.97 → "10.0" would be malformed; carry into the exponent.
    if format!("{mantissa:.1}").starts_with("10") {
        mantissa /= 10.0;
        exp += 1;
    }
    if ascii {
        format!("{mantissa:.1}e{exp}")
    } else {
        format!("{mantissa:.1}×10{}", superscript(exp))
    }
}

fn superscript(exp: i32) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    let mut out = String::new();
    if exp < 0 {
        out.push('⁻');
    }
    for c in exp.unsigned_abs().to_string().chars() {
        out.push(DIGITS[c.to_digit(10).unwrap() as usize]);
    }
    out
}

fn format_alpha(alpha: &AlphaResult) -> String {
    match alpha {
        AlphaResult::Value(v) => format!("{v:.2}"),
        AlphaResult::Degenerate => "DEGENERATE".to_string(),
    }
}

fn summary_fields(s: &SummaryStats, absent: &str) -> [String; 3] {
    [
        format!("{:.2}", s.mean),
        format!("{:.2}", s.median),
        s.sd.map_or_else(|| absent.to_string(), |v| format!("{v:.2}")),
    ]
}

const HEADERS: [&str; 13] = [
    "dimension",
    "n_a",
    "mean_a",
    "median_a",
    "sd_a",
    "n_b",
    "mean_b",
    "median_b",
    "sd_b",
    "u",
    "p",
    "delta",
    "alpha",
];

fn row_fields(row: &StatsRow, fmt: TableFormat) -> [String; 13] {
    let absent = match fmt {
        TableFormat::Markdown => "—",
        TableFormat::Csv => "",
    };
    match row {
        StatsRow::Stats(s) => {
            let a = summary_fields(&s.summary_a, absent);
            let b = summary_fields(&s.summary_b, absent);
            [
                s.dim_id.clone(),
                s.n_a.to_string(),
                a[0].clone(),
                a[1].clone(),
                a[2].clone(),
                s.n_b.to_string(),
                b[0].clone(),
                b[1].clone(),
                b[2].clone(),
                format!("{:.1}", s.u),
                format_p(s.p_two_sided, fmt == TableFormat::Csv),
                format!("{:+.2}", s.cliffs_delta),
                format_alpha(&s.alpha),
            ]
        }
        StatsRow::Excluded(e) => {
            let mut fields = std::array::from_fn::<String, 13, _>(|_| absent.to_string());
            fields[0] = e.dim_id.clone();
            fields[1] = e.n_a.to_string();
            fields[5] = e.n_b.to_string();
            fields[10] = "EXCLUDED".to_string();
            fields
        }
    }
}

/// Renders the per-dimension comparison table.
pub fn render_table(rows: &[StatsRow], fmt: TableFormat) -> String {
    let mut out = String::new();
    match fmt {
        TableFormat::Markdown => {
            out.push_str("| ");
            out.push_str(&HEADERS.join(" | "));
            out.push_str(" |\n|");
            for _ in HEADERS {
                out.push_str("---|");
            }
            out.push('\n');
            for row in rows {
                out.push_str("| ");
                out.push_str(&row_fields(row, fmt).join(" | "));
                out.push_str(" |\n");
            }
        }
        TableFormat::Csv => {
            out.push_str(&HEADERS.join(","));
            out.push('\n');
            for row in rows {
                let fields: Vec<String> = row_fields(row, fmt)
                    .into_iter()
                    .map(|f| csv_escape(&f))
                    .collect();
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
    }
    out
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Full method echo included in every artifact so a reader never has to
/// guess which variants produced the numbers.
#[derive(Debug, Clone, Serialize)]
pub struct MethodEcho {
    pub mw_method: String,
    pub alpha_metric: String,
    pub missing_policy: String,
    pub cf_mode: String,
    pub group_a: String,
    pub group_b: String,
}

impl MethodEcho {
    pub fn describe(&self) -> String {
        format!(
            "Mann-Whitney U ({}), Cliff's delta, Krippendorff's alpha ({}); \
             missing scores: {}; counterfactual adjudication: {}; \
             comparison: {} vs {}.",
            self.mw_method,
            self.alpha_metric,
            self.missing_policy,
            self.cf_mode,
            self.group_a,
            self.group_b
        )
    }
}

/// Assembles report.md: method echo, the markdown table, one figure
/// reference per renderable dimension, and an optional density section.
pub fn render_report(
    run_id: &str,
    timestamp: Option<&str>,
    echo: &MethodEcho,
    rows: &[StatsRow],
    figures: &[(String, String)],
    density_section: Option<&str>,
) -> String {
    let mut out = String::new();
    out.push_str("# Corpus evaluation report\n\n");
    out.push_str(&format!("Run: `{run_id}`"));
    if let Some(ts) = timestamp {
        out.push_str(&format!("  \nGenerated: {ts}"));
    }
    out.push_str("\n\n");
    out.push_str(&format!("Methods: {}\n\n", echo.describe()));
    out.push_str("## Scores by dimension\n\n");
    out.push_str(&render_table(rows, TableFormat::Markdown));
    out.push('\n');
    if let Some(section) = density_section {
        out.push_str(section);
        out.push('\n');
    }
    if !figures.is_empty() {
        out.push_str("## Figures\n\n");
        for (dim_id, rel_path) in figures {
            out.push_str(&format!("![{dim_id}]({rel_path})\n"));
        }
        out.push('\n');
    }
    out
}
