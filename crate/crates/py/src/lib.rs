//! Python bindings for the cotgauge evaluation harness.
//!
//! Exposes the statistics kernels, corpus loading, prompt rendering, and the
//! counterfactual-density analyzer. Error values map to `ValueError` with the
//! library's own error text.

// The #[pyfunction] trampolines expand to PyErr-to-PyErr conversions.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use cotgauge::cfdensity::{self, AnalysisOptions, CfMode, Lexicon, PatternSet};
use cotgauge::corpus::{self, CotSample};
use cotgauge::judge;
use cotgauge::rubric;
use cotgauge::stats::{self, AlphaMetric, AlphaResult};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py(py)
        }
    })
}

/// Serialize any library value through serde_json into Python objects.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let json = serde_json::to_value(value).map_err(value_err)?;
    json_to_py(py, &json)
}

/// Mann-Whitney U for two score samples.
///
/// `method` is "normal" (tie-corrected normal approximation, no continuity
/// correction) or "exact" (full enumeration of the permutation null).
#[pyfunction]
#[pyo3(signature = (xs, ys, method = "normal"))]
fn mann_whitney_u(py: Python<'_>, xs: Vec<f64>, ys: Vec<f64>, method: &str) -> PyResult<PyObject> {
    let result = match method {
        "normal" => stats::mann_whitney_u_normal(&xs, &ys).map_err(value_err)?,
        "exact" => stats::mann_whitney_u_exact(&xs, &ys).map_err(value_err)?,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let dict = PyDict::new_bound(py);
    dict.set_item("u", result.u)?;
    dict.set_item("p_two_sided", result.p_two_sided)?;
    dict.set_item("method", result.method.as_str())?;
    dict.set_item("n_a", result.n_a)?;
    dict.set_item("n_b", result.n_b)?;
    Ok(dict.into_py(py))
}

/// Cliff's delta effect size, positive when `xs` tends larger.
#[pyfunction]
fn cliffs_delta(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    stats::cliffs_delta(&xs, &ys).map_err(value_err)
}

/// Krippendorff's alpha over a raters-by-items grid (`None` marks a missing
/// cell). Returns `None` when agreement is degenerate (no variance to score).
#[pyfunction]
#[pyo3(signature = (ratings, metric = "interval"))]
fn krippendorff_alpha(ratings: Vec<Vec<Option<f64>>>, metric: &str) -> PyResult<Option<f64>> {
    let metric = match metric {
        "interval" => AlphaMetric::Interval,
        "ordinal" => AlphaMetric::Ordinal,
        other => return Err(PyValueError::new_err(format!("unknown metric {other:?}"))),
    };
    match stats::krippendorff_alpha(&ratings, metric).map_err(value_err)? {
        AlphaResult::Value(v) => Ok(Some(v)),
        AlphaResult::Degenerate => Ok(None),
    }
}

/// Load and validate a JSONL corpus; raises ValueError on any schema problem.
/// Returns a list of sample dicts.
#[pyfunction]
fn load_corpus(py: Python<'_>, path: &str, groups: Vec<String>) -> PyResult<PyObject> {
    let corpus = corpus::load_corpus(path, &groups).map_err(value_err)?;
    let list = PyList::empty_bound(py);
    for sample in &corpus.samples {
        let dict = PyDict::new_bound(py);
        dict.set_item("id", &sample.id)?;
        dict.set_item("group", &sample.group)?;
        dict.set_item("preamble", &sample.preamble)?;
        dict.set_item("cot_body", &sample.cot_body)?;
        dict.set_item("summary", &sample.summary)?;
        let metadata = serde_json::Value::Object(sample.metadata.clone());
        dict.set_item("metadata", json_to_py(py, &metadata)?)?;
        list.append(dict)?;
    }
    Ok(list.into_py(py))
}

/// Sentence segmentation as used by the density analyzer.
#[pyfunction]
fn segment_sentences(text: &str) -> Vec<String> {
    cfdensity::segment_sentences(text)
        .into_iter()
        .map(|span| span.text)
        .collect()
}

/// Heuristic counterfactual-density analysis of one reasoning text.
///
/// Returns the full analysis as a dict: sentence_count, claims, nodes,
/// load_bearing_count, and density (`None` when no claims were found).
#[pyfunction]
#[pyo3(signature = (text, window = cfdensity::DEFAULT_WINDOW))]
fn analyze_density(py: Python<'_>, text: &str, window: usize) -> PyResult<PyObject> {
    let lexicon = Lexicon::default();
    let patterns = PatternSet::default();
    let options = AnalysisOptions {
        mode: CfMode::Heuristic,
        window,
        lexicon: &lexicon,
        patterns: &patterns,
        judge: None,
    };
    let analysis = cfdensity::analyze(text, &options).map_err(value_err)?;
    to_py(py, &analysis)
}

/// Scan `text` against the default provenance blocklist; returns
/// (substring, byte_offset) pairs, empty when the text is clean.
#[pyfunction]
fn check_blinding(text: &str) -> Vec<(String, usize)> {
    let rubric = rubric::default_rubric();
    rubric::check_blinding(text, &rubric.blocklist)
        .into_iter()
        .map(|v| (v.substring, v.offset))
        .collect()
}

/// Parse a judge reply into (score, rationale); raises ValueError when the
/// reply holds no usable JSON verdict.
#[pyfunction]
fn parse_verdict(reply: &str) -> PyResult<(u8, String)> {
    judge::parse_verdict(reply).map_err(value_err)
}

/// Render the blinded scoring prompt for one dimension of the built-in
/// rubric; raises ValueError when the text would leak provenance.
#[pyfunction]
#[pyo3(signature = (dim_id, cot_body, preamble = ""))]
fn render_scoring_prompt(dim_id: &str, cot_body: &str, preamble: &str) -> PyResult<String> {
    let rubric = rubric::default_rubric();
    let dimension = rubric
        .dimensions
        .iter()
        .find(|d| d.dim_id == dim_id)
        .ok_or_else(|| PyValueError::new_err(format!("unknown dimension {dim_id:?}")))?;
    let sample = CotSample {
        id: "py".into(),
        group: "py".into(),
        preamble: preamble.into(),
        cot_body: cot_body.into(),
        summary: String::new(),
        metadata: serde_json::Map::new(),
    };
    let prompt = rubric::render_scoring_prompt(dimension, &sample, &rubric).map_err(value_err)?;
    Ok(prompt.rendered_text)
}

/// The built-in rubric dimensions as a list of dicts.
#[pyfunction]
fn rubric_dimensions(py: Python<'_>) -> PyResult<PyObject> {
    let rubric = rubric::default_rubric();
    let list = PyList::empty_bound(py);
    for dim in &rubric.dimensions {
        list.append(to_py(py, dim)?)?;
    }
    Ok(list.into_py(py))
}

#[pymodule]
fn cotgauge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(cliffs_delta, m)?)?;
    m.add_function(wrap_pyfunction!(krippendorff_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(segment_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_density, m)?)?;
    m.add_function(wrap_pyfunction!(check_blinding, m)?)?;
    m.add_function(wrap_pyfunction!(parse_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(render_scoring_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(rubric_dimensions, m)?)?;
    Ok(())
}
