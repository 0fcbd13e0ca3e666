//! Direct SVG box plots, no plotting dependency. Each figure shows exactly
//! two groups: median line, quartile box, whiskers at 1.5×IQR, outliers as
//! marked points, and a jittered strip of all raw points. Jitter comes from
//! a seeded generator so figures are reproducible; the only nondeterministic
//! byte is an optional timestamp comment that callers can suppress.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const WIDTH: f64 = 460.0;
const HEIGHT: f64 = 340.0;
const PLOT_LEFT: f64 = 64.0;
const PLOT_RIGHT: f64 = 432.0;
const PLOT_TOP: f64 = 56.0;
const PLOT_BOTTOM: f64 = 296.0;
const BOX_WIDTH: f64 = 72.0;
/// Scores live on 1..5; a fixed domain keeps every figure comparable.
const Y_MIN: f64 = 0.5;
const Y_MAX: f64 = 5.5;

#[derive(Debug, Clone)]
pub struct BoxplotOptions {
    /// Timestamp comment text; None suppresses it for byte-stable output.
    pub timestamp: Option<String>,
    pub jitter_seed: u64,
}

impl Default for BoxplotOptions {
    fn default() -> Self {
        Self {
            timestamp: None,
            jitter_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct FiveNum {
    q1: f64,
    median: f64,
    q3: f64,
    whisker_lo: f64,
    whisker_hi: f64,
}

/// Linear-interpolation quantile over a sorted slice (the common "type 7"
/// definition: h = (n-1)q).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[n - 1]
    }
}

fn five_number(sorted: &[f64]) -> FiveNum {
    let q1 = quantile(sorted, 0.25);
    let median = quantile(sorted, 0.5);
    let q3 = quantile(sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    // Whiskers reach the most extreme observation inside the fences; the
    // quartiles themselves are observations-adjacent, so the filtered sets
    // are never empty.
    let whisker_lo = sorted
        .iter()
        .copied()
        .filter(|v| *v >= lo_fence)
        .fold(f64::INFINITY, f64::min);
    let whisker_hi = sorted
        .iter()
        .copied()
        .filter(|v| *v <= hi_fence)
        .fold(f64::NEG_INFINITY, f64::max);
    FiveNum {
        q1,
        median,
        q3,
        whisker_lo,
        whisker_hi,
    }
}

fn y_px(v: f64) -> f64 {
    PLOT_BOTTOM - (v - Y_MIN) / (Y_MAX - Y_MIN) * (PLOT_BOTTOM - PLOT_TOP)
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn significance_stars(p: f64) -> Option<&'static str> {
    if p < 0.001 {
        Some("***")
    } else if p < 0.01 {
        Some("**")
    } else if p < 0.05 {
        Some("*")
    } else {
        None
    }
}

fn jitter_rng(seed: u64, dim_id: &str, group_index: usize) -> ChaCha20Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(dim_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update((group_index as u64).to_le_bytes());
    ChaCha20Rng::from_seed(hasher.finalize().into())
}

fn push_box(out: &mut String, cx: f64, stats: &FiveNum) {
    let half = BOX_WIDTH / 2.0;
    let (q1y, medy, q3y) = (y_px(stats.q1), y_px(stats.median), y_px(stats.q3));
    let (wlo, whi) = (y_px(stats.whisker_lo), y_px(stats.whisker_hi));
    out.push_str("  <g class=\"box\">\n");
    // Whisker stem and caps.
    out.push_str(&format!(
        "    <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" class=\"whisker\"/>\n",
        fmt(cx),
        fmt(whi),
        fmt(q3y)
    ));
    out.push_str(&format!(
        "    <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" class=\"whisker\"/>\n",
        fmt(cx),
        fmt(q1y),
        fmt(wlo)
    ));
    for y in [whi, wlo] {
        out.push_str(&format!(
            "    <line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" class=\"cap\"/>\n",
            fmt(cx - half * 0.5),
            fmt(cx + half * 0.5),
            fmt(y)
        ));
    }
    // Quartile box; zero height is legal SVG and renders the n=1 case as a
    // bare line.
    out.push_str(&format!(
        "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" class=\"iqr\"/>\n",
        fmt(cx - half),
        fmt(q3y),
        fmt(BOX_WIDTH),
        fmt((q1y - q3y).max(0.0))
    ));
    out.push_str(&format!(
        "    <line x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\" class=\"median\"/>\n",
        fmt(cx - half),
        fmt(cx + half),
        fmt(medy)
    ));
    out.push_str("  </g>\n");
}

fn push_points(out: &mut String, cx: f64, values: &[f64], stats: &FiveNum, rng: &mut ChaCha20Rng) {
    out.push_str("  <g class=\"points\">\n");
    for &v in values {
        let dx = (rng.gen::<f64>() - 0.5) * BOX_WIDTH * 0.6;
        let outlier = v < stats.whisker_lo || v > stats.whisker_hi;
        let class = if outlier { "outlier" } else { "pt" };
        out.push_str(&format!(
            "    <circle cx=\"{}\" cy=\"{}\" r=\"{}\" class=\"{class}\"/>\n",
            fmt(cx + dx),
            fmt(y_px(v)),
            if outlier { "3.5" } else { "2.5" }
        ));
    }
    out.push_str("  </g>\n");
}

/// Renders one dimension's figure. Callers must pass non-empty groups — an
/// empty group means the figure is omitted upstream with a warning.
pub fn render_boxplot(
    dim_id: &str,
    label_a: &str,
    values_a: &[f64],
    label_b: &str,
    values_b: &[f64],
    p_two_sided: f64,
    options: &BoxplotOptions,
) -> String {
    assert!(
        !values_a.is_empty() && !values_b.is_empty(),
        "render_boxplot requires non-empty groups"
    );
    let mut sorted_a = values_a.to_vec();
    let mut sorted_b = values_b.to_vec();
    sorted_a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sorted_b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let stats_a = five_number(&sorted_a);
    let stats_b = five_number(&sorted_b);

    let cx_a = PLOT_LEFT + (PLOT_RIGHT - PLOT_LEFT) * 0.28;
    let cx_b = PLOT_LEFT + (PLOT_RIGHT - PLOT_LEFT) * 0.72;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if let Some(ts) = &options.timestamp {
        out.push_str(&format!("<!-- generated {} -->\n", xml_escape(ts)));
    }
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n",
        W = WIDTH as u32,
        H = HEIGHT as u32
    ));
    out.push_str(
        "  <style>\n\
         .bg{fill:#ffffff}.grid{stroke:#dddddd;stroke-width:1}\n\
         .axis{stroke:#333333;stroke-width:1}.tick{font:11px sans-serif;fill:#333333}\n\
         .label{font:13px sans-serif;fill:#111111;text-anchor:middle}\n\
         .title{font:bold 14px sans-serif;fill:#111111;text-anchor:middle}\n\
         .iqr{fill:#9ecae1;fill-opacity:0.55;stroke:#31708f;stroke-width:1.5}\n\
         .median{stroke:#08306b;stroke-width:2.5}\n\
         .whisker{stroke:#31708f;stroke-width:1.5}.cap{stroke:#31708f;stroke-width:1.5}\n\
         .pt{fill:#08306b;fill-opacity:0.45}.outlier{fill:#d7301f;stroke:#7f0000}\n\
         .sig{stroke:#111111;stroke-width:1.2;fill:none}\n\
         .stars{font:bold 14px sans-serif;fill:#111111;text-anchor:middle}\n\
         </style>\n",
    );
    out.push_str(&format!(
        "  <rect class=\"bg\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\"/>\n",
        WIDTH as u32, HEIGHT as u32
    ));

    // Gridlines and y ticks at each score level.
    for tick in 1..=5u32 {
        let y = y_px(tick as f64);
        out.push_str(&format!(
            "  <line class=\"grid\" x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\"/>\n",
            fmt(PLOT_LEFT),
            fmt(PLOT_RIGHT),
            fmt(y)
        ));
        out.push_str(&format!(
            "  <text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{tick}</text>\n",
            fmt(PLOT_LEFT - 8.0),
            fmt(y + 4.0)
        ));
    }
    out.push_str(&format!(
        "  <line class=\"axis\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\"/>\n",
        fmt(PLOT_LEFT),
        fmt(PLOT_TOP),
        fmt(PLOT_BOTTOM)
    ));
    out.push_str(&format!(
        "  <line class=\"axis\" x1=\"{}\" y1=\"{2}\" x2=\"{}\" y2=\"{2}\"/>\n",
        fmt(PLOT_LEFT),
        fmt(PLOT_RIGHT),
        fmt(PLOT_BOTTOM)
    ));

    push_box(&mut out, cx_a, &stats_a);
    push_box(&mut out, cx_b, &stats_b);
    let mut rng_a = jitter_rng(options.jitter_seed, dim_id, 0);
    let mut rng_b = jitter_rng(options.jitter_seed, dim_id, 1);
    push_points(&mut out, cx_a, values_a, &stats_a, &mut rng_a);
    push_points(&mut out, cx_b, values_b, &stats_b, &mut rng_b);

    // Significance bracket across both boxes when p < 0.05.
    if let Some(stars) = significance_stars(p_two_sided) {
        let y = PLOT_TOP - 14.0;
        out.push_str(&format!(
            "  <path class=\"sig\" d=\"M {a} {lo} L {a} {y} L {b} {y} L {b} {lo}\"/>\n",
            a = fmt(cx_a),
            b = fmt(cx_b),
            y = fmt(y),
            lo = fmt(y + 8.0)
        ));
        out.push_str(&format!(
            "  <text class=\"stars\" x=\"{}\" y=\"{}\">{stars}</text>\n",
            fmt((cx_a + cx_b) / 2.0),
            fmt(y - 4.0)
        ));
    }

    out.push_str(&format!(
        "  <text class=\"title\" x=\"{}\" y=\"24\">{}</text>\n",
        fmt(WIDTH / 2.0),
        xml_escape(dim_id)
    ));
    for (cx, label, n) in [
        (cx_a, label_a, values_a.len()),
        (cx_b, label_b, values_b.len()),
    ] {
        out.push_str(&format!(
            "  <text class=\"label\" x=\"{}\" y=\"{}\">{} (n={n})</text>\n",
            fmt(cx),
            fmt(PLOT_BOTTOM + 22.0),
            xml_escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}
