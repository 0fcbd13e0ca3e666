//! Scoring dimensions, blinded prompt rendering, and the blinding checker.
//!
//! A prompt carries exactly one dimension's definition and anchors plus the
//! sample's `{preamble, cot_body}`. It never carries the sample id or any
//! provenance label: provenance substrings are banned via a blocklist, and a
//! render is refused outright when the sample's own text would leak one.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::CotSample;

/// One scorable quality dimension with 1–5 anchors.
///
/// Anchor levels 1, 3, and 5 are required; 2 and 4 are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub dim_id: String,
    pub name: String,
    pub definition: String,
    pub anchors: BTreeMap<u8, String>,
}

/// An ordered set of dimensions plus the provenance blocklist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rubric {
    pub dimensions: Vec<Dimension>,
    pub blocklist: Vec<String>,
}

/// A fully rendered, blinding-checked scoring prompt.
///
/// `sample_id` is carried for out-of-band correlation only and is never part
/// of `rendered_text`.
#[derive(Debug, Clone)]
pub struct ScoringPrompt {
    pub dim_id: String,
    pub sample_id: String,
    pub rendered_text: String,
    pub content_hash: String,
}

/// A blocklist hit: the matched substring and its byte offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlindingViolation {
    pub substring: String,
    pub offset: usize,
}

#[derive(Debug, Error)]
pub enum RubricError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: malformed rubric JSON: {message}")]
    Malformed { path: String, message: String },
    #[error("dimension \"{dim_id}\" is missing required anchor level {level}")]
    MissingAnchor { dim_id: String, level: u8 },
    #[error("dimension \"{dim_id}\" has anchor level {level} outside 1–5")]
    AnchorOutOfRange { dim_id: String, level: u8 },
    #[error("duplicate dimension id \"{0}\"")]
    DuplicateDimension(String),
    #[error("dimension \"{0}\" has an empty definition")]
    EmptyDefinition(String),
    #[error("rubric declares no dimensions")]
    NoDimensions,
    #[error(
        "sample \"{sample_id}\" leaks provenance into the prompt for {dim_id}: {violations:?}"
    )]
    BlindingLeak {
        sample_id: String,
        dim_id: String,
        violations: Vec<BlindingViolation>,
    },
}

pub const DEFAULT_BLOCKLIST: &[&str] = &[
    "Group A",
    "Group B",
    "BC",
    "Expert Solo",
    "group A",
    "group B",
];

/// The five built-in dimensions, D1–D5, with their 1/3/5 anchors.
pub fn default_rubric() -> Rubric {
    let dim = |dim_id: &str, name: &str, definition: &str, a1: &str, a3: &str, a5: &str| {
        let mut anchors = BTreeMap::new();
        anchors.insert(1, a1.to_string());
        anchors.insert(3, a3.to_string());
        anchors.insert(5, a5.to_string());
        Dimension {
            dim_id: dim_id.to_string(),
            name: name.to_string(),
            definition: definition.to_string(),
            anchors,
        }
    };
    Rubric {
        dimensions: vec![
            dim(
                "D1",
                "Reasoning Chain Completeness",
                "Are there missing links in the derivation from premises to conclusion?",
                "many logical leaps",
                "backbone complete but some details missing",
                "every reasoning step is externalized, seamlessly connected",
            ),
            dim(
                "D2",
                "Implicit Premise Externalization Rate",
                "Are reasoning premises \u{201c}typically taken as self-evident by experts\u{201d} made explicit?",
                "almost all implicit premises are assumed",
                "core implicit premises are externalized",
                "even micro-premises underlying deep aesthetic intuition are verbalized",
            ),
            dim(
                "D3",
                "Naturalness of Reasoning Process",
                "Does the output preserve characteristic process features such as trial and error, hesitation, and self-correction from the expert's original reasoning?",
                "flat, polished conclusion stacking with no trace of trial and error",
                "occasional self-correction",
                "a live, breathing reasoning flow",
            ),
            dim(
                "D4",
                "Information Density",
                "The amount of non-deletable independent reasoning information per unit length",
                "much filler/restatement",
                "informative but with redundancy",
                "every sentence is non-deletable",
            ),
            dim(
                "D5",
                "Counterfactual Density",
                "The ratio of load-bearing claims that are explicitly probed by counterfactual perturbation",
                "zero counterfactual branches",
                "moderate coverage of load-bearing claims",
                "every load-bearing claim is perturbed and a new branch is traced",
            ),
        ],
        blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
    }
}

impl Rubric {
    /// Check rubric invariants: unique dim ids, non-empty definitions,
    /// anchor levels within 1–5 with 1/3/5 present.
    pub fn validate(&self) -> Result<(), RubricError> {
        if self.dimensions.is_empty() {
            return Err(RubricError::NoDimensions);
        }
        let mut seen = Vec::new();
        for dim in &self.dimensions {
            if seen.contains(&&dim.dim_id) {
                return Err(RubricError::DuplicateDimension(dim.dim_id.clone()));
            }
            seen.push(&dim.dim_id);
            if dim.definition.trim().is_empty() {
                return Err(RubricError::EmptyDefinition(dim.dim_id.clone()));
            }
            for &level in dim.anchors.keys() {
                if !(1..=5).contains(&level) {
                    return Err(RubricError::AnchorOutOfRange {
                        dim_id: dim.dim_id.clone(),
                        level,
                    });
                }
            }
            for level in [1u8, 3, 5] {
                if !dim.anchors.contains_key(&level) {
                    return Err(RubricError::MissingAnchor {
                        dim_id: dim.dim_id.clone(),
                        level,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dimension(&self, dim_id: &str) -> Option<&Dimension> {
        self.dimensions.iter().find(|d| d.dim_id == dim_id)
    }

    pub fn dim_ids(&self) -> Vec<String> {
        self.dimensions.iter().map(|d| d.dim_id.clone()).collect()
    }
}

/// Load a rubric from its JSON file format: `{"dimensions": [...],
/// "blocklist": [...]}` with anchors keyed by level.
pub fn load_rubric<P: AsRef<Path>>(path: P) -> Result<Rubric, RubricError> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(path.as_ref()).map_err(|source| RubricError::Io {
        path: path_str.clone(),
        source,
    })?;
    let rubric: Rubric = serde_json::from_str(&text).map_err(|e| RubricError::Malformed {
        path: path_str,
        message: e.to_string(),
    })?;
    rubric.validate()?;
    Ok(rubric)
}

/// Scan `text` for blocklist substrings (case-sensitive, every occurrence).
/// An empty result means the text is blind.
pub fn check_blinding(text: &str, blocklist: &[String]) -> Vec<BlindingViolation> {
    let mut violations = Vec::new();
    for entry in blocklist {
        if entry.is_empty() {
            continue;
        }
        let mut start = 0;
        while let Some(pos) = text[start..].find(entry.as_str()) {
            violations.push(BlindingViolation {
                substring: entry.clone(),
                offset: start + pos,
            });
            start += pos + 1;
        }
    }
    violations.sort_by_key(|v| (v.offset, v.substring.clone()));
    violations
}

fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

/// Render the blinded single-dimension scoring prompt for one sample.
///
/// The render is refused with [`RubricError::BlindingLeak`] when the result
/// would contain any blocklist substring — the sample's own text is the only
/// possible source, since the template and rubric are checked too.
pub fn render_scoring_prompt(
    dimension: &Dimension,
    sample: &CotSample,
    rubric: &Rubric,
) -> Result<ScoringPrompt, RubricError> {
    let mut text = String::new();
    text.push_str("You are scoring one reasoning transcript on a single quality dimension.\n\n");
    text.push_str(&format!("Dimension: {}\n", dimension.name));
    text.push_str(&format!("Definition: {}\n", dimension.definition));
    text.push_str("Scoring anchors:\n");
    for (level, anchor) in &dimension.anchors {
        text.push_str(&format!("  {level} = {anchor}\n"));
    }
    text.push('\n');
    text.push_str(
        "Score only the reasoning transcript below. If a context section is present, \
         it is background only and is not scored.\n\n",
    );
    if !sample.preamble.is_empty() {
        text.push_str("Context (background only; it is not scored):\n");
        text.push_str(&sample.preamble);
        text.push_str("\n\n");
    }
    text.push_str("Reasoning transcript:\n");
    text.push_str(&sample.cot_body);
    text.push_str("\n\n");
    text.push_str(
        "Respond with a single JSON object with keys \"score\" (an integer from 1 to 5) \
         and \"rationale\" (a brief justification). Output the JSON object and nothing else.\n",
    );

    let violations = check_blinding(&text, &rubric.blocklist);
    if !violations.is_empty() {
        return Err(RubricError::BlindingLeak {
            sample_id: sample.id.clone(),
            dim_id: dimension.dim_id.clone(),
            violations,
        });
    }

    let content_hash = sha256_hex(&text);
    Ok(ScoringPrompt {
        dim_id: dimension.dim_id.clone(),
        sample_id: sample.id.clone(),
        rendered_text: text,
        content_hash,
    })
}
