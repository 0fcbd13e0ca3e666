//! Counterfactual density: how much of a reasoning transcript's load-bearing
//! causal structure is explicitly probed with counterfactual branches.
//!
//! The measurement is deterministic text analysis in four steps — sentence
//! segmentation, causal-connective claim detection, counterfactual-node
//! detection, and node→claim linking — followed by a ratio:
//! `density = probed_load_bearing / load_bearing`, undefined when the
//! denominator is zero (reported as `null`, never as `0.0`).
//!
//! Whether a connective claim is truly load-bearing requires a semantic
//! reversal test. *Heuristic* mode over-approximates: every connective claim
//! counts as a candidate and candidates count as load-bearing. *Judge* mode
//! asks a judge model whether the segment still holds with the connective
//! reversed; a judge that never answers parseably drops the claim back to a
//! flagged candidate. Both modes label their output, and the two are never
//! merged with the rubric's judged D5 score.

use std::collections::HashSet;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::judge::transport::{CompletionRequest, JudgeTransport, TransportError};
use crate::judge::{JudgeEndpoint, RetryPolicy};

#[derive(Debug, Error)]
pub enum CfError {
    #[error("I/O on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed lexicon file {path}: {message}")]
    MalformedLexicon { path: String, message: String },
    #[error("lexicon has no connectives")]
    EmptyLexicon,
    #[error("pattern set is empty")]
    EmptyPatterns,
    #[error("pattern \"{name}\" is not a valid regex: {message}")]
    BadPattern { name: String, message: String },
    #[error("judge mode requires a judge endpoint and transport")]
    JudgeRequired,
    #[error("judge transport failed: {0}")]
    Transport(#[from] TransportError),
}

/// One sentence, with character offsets into the source text. Spans are
/// ordered and non-overlapping; everything between spans is whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closing_wrapper(c: char) -> bool {
    matches!(c, '\'' | '"' | '’' | '”' | ')' | ']' | '»')
}

/// Splits text into sentences. A boundary is a run of terminal punctuation
/// (`.` `!` `?` `…`), plus any closing quotes/brackets directly after it,
/// followed by whitespace or end of text — so a period inside a closing
/// quote ends the sentence *after* the quote. One exception: an ellipsis run
/// (`…` or two-plus dots) whose next non-space character is lowercase is a
/// mid-sentence pause, not a boundary.
pub fn segment_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let mut spans = Vec::new();
    let mut sentence_start: Option<usize> = None;
    let mut i = 0;
    while i < len {
        if sentence_start.is_none() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            sentence_start = Some(i);
        }
        if !is_terminal(chars[i]) {
            i += 1;
            continue;
        }
        let mut dots = 0usize;
        let mut ellipsis_char = false;
        while i < len && is_terminal(chars[i]) {
            dots += usize::from(chars[i] == '.');
            ellipsis_char |= chars[i] == '…';
            i += 1;
        }
        while i < len && is_closing_wrapper(chars[i]) {
            i += 1;
        }
        let boundary_ok = i >= len || chars[i].is_whitespace();
        let soft_ellipsis = (dots >= 2 || ellipsis_char) && {
            let mut j = i;
            while j < len && chars[j].is_whitespace() {
                j += 1;
            }
            j < len && chars[j].is_lowercase()
        };
        if boundary_ok && !soft_ellipsis {
            let start = sentence_start.take().expect("open sentence");
            spans.push(SentenceSpan {
                start,
                end: i,
                text: chars[start..i].iter().collect(),
            });
        }
    }
    if let Some(start) = sentence_start {
        let mut end = len;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        if end > start {
            spans.push(SentenceSpan {
                start,
                end,
                text: chars[start..end].iter().collect(),
            });
        }
    }
    spans
}

/// Causal-connective lexicon. Entries are matched case-insensitively on word
/// boundaries; multi-word entries match across any whitespace.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<(String, Regex)>,
}

pub const DEFAULT_CONNECTIVES: [&str; 4] = ["because", "therefore", "must", "otherwise"];

impl Lexicon {
    pub fn new(connectives: &[String]) -> Result<Self, CfError> {
        if connectives.is_empty() {
            return Err(CfError::EmptyLexicon);
        }
        let mut entries = Vec::with_capacity(connectives.len());
        for word in connectives {
            let pattern = format!(r"(?i)\b{}\b", regex::escape(word).replace(r"\ ", r"\s+"));
            let re = Regex::new(&pattern).map_err(|e| CfError::BadPattern {
                name: word.clone(),
                message: e.to_string(),
            })?;
            entries.push((word.to_lowercase(), re));
        }
        Ok(Self { entries })
    }

    /// Earliest connective match in `text`; ties go to lexicon order.
    fn earliest_match(&self, text: &str) -> Option<String> {
        self.entries
            .iter()
            .filter_map(|(name, re)| re.find(text).map(|m| (m.start(), name)))
            .min_by_key(|(start, _)| *start)
            .map(|(_, name)| name.clone())
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        let words: Vec<String> = DEFAULT_CONNECTIVES.iter().map(|s| s.to_string()).collect();
        Self::new(&words).expect("default lexicon compiles")
    }
}

/// Counterfactual marker families, tried in order; the first family that
/// matches a sentence names its node. All defaults require subjunctive or
/// hypothetical marking so indicative conditionals ("If you finish, call
/// me.") are not counted.
#[derive(Debug, Clone)]
pub struct PatternSet {
    families: Vec<(String, Regex)>,
}

const DEFAULT_PATTERNS: [(&str, &str); 5] = [
    ("if_had", r"(?is)\bif\b.*?\bhad\b"),
    ("had_x_been", r"(?i)^\W*had(?:\s+\w+){1,4}\s+been\b"),
    ("suppose_instead", r"(?i)\bsuppose,?\s+instead\b"),
    ("what_if", r"(?i)\bwhat\s+if\b"),
    ("would_have", r"(?i)\bwould(?:\s+\w+){0,2}\s+have\b"),
];

impl PatternSet {
    pub fn new(families: &[(String, String)]) -> Result<Self, CfError> {
        if families.is_empty() {
            return Err(CfError::EmptyPatterns);
        }
        let mut compiled = Vec::with_capacity(families.len());
        for (name, pattern) in families {
            let re = Regex::new(pattern).map_err(|e| CfError::BadPattern {
                name: name.clone(),
                message: e.to_string(),
            })?;
            compiled.push((name.clone(), re));
        }
        Ok(Self { families: compiled })
    }

    fn first_match(&self, text: &str) -> Option<String> {
        self.families
            .iter()
            .find(|(_, re)| re.is_match(text))
            .map(|(name, _)| name.clone())
    }
}

impl Default for PatternSet {
    fn default() -> Self {
        let families: Vec<(String, String)> = DEFAULT_PATTERNS
            .iter()
            .map(|(n, p)| (n.to_string(), p.to_string()))
            .collect();
        Self::new(&families).expect("default patterns compile")
    }
}

/// On-disk lexicon format: `{"connectives": [...], "patterns":
/// [{"name": ..., "regex": ...}]?}`. Omitted patterns keep the defaults.
#[derive(Debug, Deserialize)]
struct LexiconFile {
    connectives: Vec<String>,
    #[serde(default)]
    patterns: Option<Vec<PatternFileEntry>>,
}

#[derive(Debug, Deserialize)]
struct PatternFileEntry {
    name: String,
    regex: String,
}

pub fn load_lexicon_file(path: &Path) -> Result<(Lexicon, PatternSet), CfError> {
    let text = std::fs::read_to_string(path).map_err(|e| CfError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let parsed: LexiconFile =
        serde_json::from_str(&text).map_err(|e| CfError::MalformedLexicon {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let lexicon = Lexicon::new(&parsed.connectives)?;
    let patterns = match parsed.patterns {
        Some(entries) => PatternSet::new(
            &entries
                .into_iter()
                .map(|e| (e.name, e.regex))
                .collect::<Vec<_>>(),
        )?,
        None => PatternSet::default(),
    };
    Ok((lexicon, patterns))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadBearing {
    Yes,
    No,
    Candidate,
}

impl LoadBearing {
    pub fn counts(&self) -> bool {
        matches!(self, LoadBearing::Yes | LoadBearing::Candidate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfMode {
    Heuristic,
    Judge,
}

impl CfMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CfMode::Heuristic => "heuristic",
            CfMode::Judge => "judge",
        }
    }
}

/// A sentence containing a causal connective, plus its reversal-test result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Claim {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub connective: String,
    pub load_bearing: LoadBearing,
    pub adjudication_mode: CfMode,
    /// True when judge adjudication was requested but the judge never
    /// answered parseably, so the claim fell back to candidate.
    pub judge_fallback: bool,
}

/// A sentence carrying a counterfactual marker, optionally linked to the
/// claim it probes (an index into the analysis's `claims`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualNode {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub pattern: String,
    pub linked_claim: Option<usize>,
}

/// Full per-sample analysis. `density` is `None` (JSON `null`) when there
/// are no load-bearing claims — explicitly distinct from a zero density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimAnalysis {
    pub mode: CfMode,
    pub sentence_count: usize,
    pub claims: Vec<Claim>,
    pub nodes: Vec<CounterfactualNode>,
    pub probed_load_bearing_count: usize,
    pub load_bearing_count: usize,
    pub density: Option<f64>,
}

/// One candidate claim per sentence containing at least one connective; the
/// earliest match in the sentence names the claim's connective.
pub fn detect_candidate_claims(spans: &[SentenceSpan], lexicon: &Lexicon) -> Vec<Claim> {
    spans
        .iter()
        .enumerate()
        .filter_map(|(i, span)| {
            lexicon.earliest_match(&span.text).map(|connective| Claim {
                sentence: i,
                start: span.start,
                end: span.end,
                connective,
                load_bearing: LoadBearing::Candidate,
                adjudication_mode: CfMode::Heuristic,
                judge_fallback: false,
            })
        })
        .collect()
}

/// One node per sentence matching any pattern family.
pub fn detect_counterfactual_nodes(
    spans: &[SentenceSpan],
    patterns: &PatternSet,
) -> Vec<CounterfactualNode> {
    spans
        .iter()
        .enumerate()
        .filter_map(|(i, span)| {
            patterns
                .first_match(&span.text)
                .map(|pattern| CounterfactualNode {
                    sentence: i,
                    start: span.start,
                    end: span.end,
                    pattern,
                    linked_claim: None,
                })
        })
        .collect()
}

/// Connective → reversal used when rewriting a segment for the judge.
fn reversal_surface(connective: &str) -> &'static str {
    match connective {
        "because" => "even though",
        "therefore" => "and separately",
        "must" => "need not",
        "otherwise" => "and still",
        _ => "and yet",
    }
}

fn render_reversal_prompt(claim_text: &str, connective: &str, context: &str) -> String {
    let re =
        Regex::new(&format!(r"(?i)\b{}\b", regex::escape(connective))).expect("connective escapes");
    let rewritten = re
        .replace(claim_text, reversal_surface(connective))
        .into_owned();
    let mut prompt = String::new();
    prompt.push_str(
        "You are testing whether a causal connective is load-bearing in a reasoning segment.\n\n",
    );
    if !context.is_empty() {
        prompt.push_str("Surrounding context:\n");
        prompt.push_str(context);
        prompt.push_str("\n\n");
    }
    prompt.push_str("Original segment:\n");
    prompt.push_str(claim_text);
    prompt.push_str("\n\nRewritten segment with the connective reversed:\n");
    prompt.push_str(&rewritten);
    prompt.push_str(
        "\n\nIf the rewritten segment still works as reasoning, answer \"holds\". \
         If the reasoning no longer goes through, answer \"collapses\".\n\n\
         Respond with a single JSON object with keys \"verdict\" (either \"holds\" or \
         \"collapses\") and \"rationale\" (a brief justification). Output the JSON object \
         and nothing else.\n",
    );
    prompt
}

fn parse_reversal_reply(text: &str) -> Option<bool> {
    let object = crate::judge::first_json_object(text)?;
    match object.get("verdict")?.as_str()?.to_lowercase().as_str() {
        "collapses" => Some(true),
        "holds" => Some(false),
        _ => None,
    }
}

/// Judge-assisted reversal test for one claim. A "collapses" verdict marks
/// the claim load-bearing, "holds" marks it not; when every attempt is
/// unparsable the claim stays a candidate with `judge_fallback` set.
/// Transport failures propagate — availability problems are not data.
pub fn reversal_test(
    claim: &mut Claim,
    sentence_text: &str,
    endpoint: &JudgeEndpoint,
    transport: &dyn JudgeTransport,
    policy: &RetryPolicy,
) -> Result<(), CfError> {
    let prompt = render_reversal_prompt(sentence_text, &claim.connective, "");
    claim.adjudication_mode = CfMode::Judge;
    let max_attempts = endpoint.max_parse_retries + 1;
    for attempt in 1..=max_attempts {
        let request = CompletionRequest {
            model_id: &endpoint.model_id,
            prompt: &prompt,
            attempt,
        };
        let text = crate::judge::complete_with_retry(transport, &request, policy)?;
        if let Some(collapses) = parse_reversal_reply(&text) {
            claim.load_bearing = if collapses {
                LoadBearing::Yes
            } else {
                LoadBearing::No
            };
            return Ok(());
        }
    }
    claim.load_bearing = LoadBearing::Candidate;
    claim.judge_fallback = true;
    Ok(())
}

/// Links each node (in text order) to the nearest not-yet-linked claim that
/// counts as load-bearing, at most `window` sentences back (the node's own
/// sentence qualifies). One link per claim: once taken, later nodes must
/// look further back or stay unlinked.
pub fn link_nodes_to_claims(claims: &[Claim], nodes: &mut [CounterfactualNode], window: usize) {
    let mut taken: HashSet<usize> = HashSet::new();
    for node in nodes.iter_mut() {
        let best = claims
            .iter()
            .enumerate()
            .filter(|(ci, c)| {
                c.load_bearing.counts()
                    && !taken.contains(ci)
                    && c.sentence <= node.sentence
                    && node.sentence - c.sentence <= window
            })
            .max_by_key(|(_, c)| c.sentence)
            .map(|(ci, _)| ci);
        if let Some(ci) = best {
            taken.insert(ci);
            node.linked_claim = Some(ci);
        }
    }
}

/// Assembles the final analysis from adjudicated claims and linked nodes.
pub fn counterfactual_density(
    mode: CfMode,
    sentence_count: usize,
    claims: Vec<Claim>,
    nodes: Vec<CounterfactualNode>,
) -> ClaimAnalysis {
    let load_bearing_count = claims.iter().filter(|c| c.load_bearing.counts()).count();
    let probed = nodes.iter().filter(|n| n.linked_claim.is_some()).count();
    let density = if load_bearing_count > 0 {
        Some(probed as f64 / load_bearing_count as f64)
    } else {
        None
    };
    ClaimAnalysis {
        mode,
        sentence_count,
        claims,
        nodes,
        probed_load_bearing_count: probed,
        load_bearing_count,
        density,
    }
}

/// Everything `analyze` needs besides the text.
pub struct AnalysisOptions<'a> {
    pub mode: CfMode,
    pub window: usize,
    pub lexicon: &'a Lexicon,
    pub patterns: &'a PatternSet,
    /// Required in judge mode: the adjudicating endpoint and transport.
    pub judge: Option<(&'a JudgeEndpoint, &'a dyn JudgeTransport, &'a RetryPolicy)>,
}

impl<'a> AnalysisOptions<'a> {
    pub fn heuristic(lexicon: &'a Lexicon, patterns: &'a PatternSet) -> Self {
        Self {
            mode: CfMode::Heuristic,
            window: DEFAULT_WINDOW,
            lexicon,
            patterns,
            judge: None,
        }
    }
}

pub const DEFAULT_WINDOW: usize = 3;

/// Full pipeline on one transcript.
pub fn analyze(text: &str, options: &AnalysisOptions) -> Result<ClaimAnalysis, CfError> {
    let spans = segment_sentences(text);
    let mut claims = detect_candidate_claims(&spans, options.lexicon);

    if options.mode == CfMode::Judge {
        let (endpoint, transport, policy) = options.judge.ok_or(CfError::JudgeRequired)?;
        for claim in &mut claims {
            let sentence_text = &spans[claim.sentence].text;
            reversal_test(claim, sentence_text, endpoint, transport, policy)?;
        }
    }

    let mut nodes = detect_counterfactual_nodes(&spans, options.patterns);
    link_nodes_to_claims(&claims, &mut nodes, options.window);
    Ok(counterfactual_density(
        options.mode,
        spans.len(),
        claims,
        nodes,
    ))
}
