//! Run configuration: a single JSON file, overridable by environment
//! variables, overridable in turn by CLI flags (precedence argv > env >
//! file). Secrets never appear in the file or on the command line — each
//! endpoint names the environment variable holding its credential.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cfdensity::CfMode;
use crate::stats::{AlphaMetric, MissingPolicy, MwMethod};

use super::HarnessError;

/// One corpus file and the group label its samples must carry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub path: String,
    pub group: String,
}

/// One judge endpoint. `credential_env` names the environment variable read
/// at call time for live runs; mock runs ignore transport fields entirely.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub label: String,
    pub model_id: String,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_parse_retries")]
    pub max_parse_retries: u32,
    /// Extra decoding parameters merged into each request body
    /// (temperature defaults to 0 when absent).
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_parse_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodChoice {
    Normal,
    Exact,
}

impl MethodChoice {
    pub fn to_mw(self) -> MwMethod {
        match self {
            MethodChoice::Normal => MwMethod::NormalTieCorrected,
            MethodChoice::Exact => MwMethod::ExactEnumeration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaChoice {
    Interval,
    Ordinal,
}

impl AlphaChoice {
    pub fn to_metric(self) -> AlphaMetric {
        match self {
            AlphaChoice::Interval => AlphaMetric::Interval,
            AlphaChoice::Ordinal => AlphaMetric::Ordinal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingChoice {
    Strict,
    Lenient,
}

impl MissingChoice {
    pub fn to_policy(self) -> MissingPolicy {
        match self {
            MissingChoice::Strict => MissingPolicy::Strict,
            MissingChoice::Lenient => MissingPolicy::Lenient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CfChoice {
    Heuristic,
    Judge,
}

impl CfChoice {
    pub fn to_mode(self) -> CfMode {
        match self {
            CfChoice::Heuristic => CfMode::Heuristic,
            CfChoice::Judge => CfMode::Judge,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsConfig {
    #[serde(default = "default_method")]
    pub method: MethodChoice,
    #[serde(default = "default_alpha")]
    pub alpha_metric: AlphaChoice,
}

fn default_method() -> MethodChoice {
    MethodChoice::Normal
}

fn default_alpha() -> AlphaChoice {
    AlphaChoice::Interval
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            method: default_method(),
            alpha_metric: default_alpha(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfConfig {
    #[serde(default = "default_cf_mode")]
    pub mode: CfChoice,
    #[serde(default)]
    pub lexicon_path: Option<String>,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_cf_mode() -> CfChoice {
    CfChoice::Heuristic
}

fn default_window() -> usize {
    crate::cfdensity::DEFAULT_WINDOW
}

impl Default for CfConfig {
    fn default() -> Self {
        Self {
            mode: default_cf_mode(),
            lexicon_path: None,
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpora: Vec<CorpusEntry>,
    /// Rubric JSON path; absent means the built-in five-dimension rubric.
    #[serde(default)]
    pub rubric_path: Option<String>,
    pub endpoints: Vec<EndpointConfig>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_missing")]
    pub missing_policy: MissingChoice,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub cfdensity: CfConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    pub run_id: String,
    /// Comparison groups; default to the first two distinct corpus groups in
    /// file order.
    #[serde(default)]
    pub group_a: Option<String>,
    #[serde(default)]
    pub group_b: Option<String>,
    /// Mock-judge seed. When set, no network traffic ever happens.
    #[serde(default)]
    pub mock_judge: Option<u64>,
    /// Emit generation timestamps into the report and figures. Off gives
    /// byte-identical artifacts across runs.
    #[serde(default = "default_true")]
    pub emit_timestamp: bool,
}

fn default_concurrency() -> usize {
    4
}

fn default_missing() -> MissingChoice {
    MissingChoice::Strict
}

fn default_out_dir() -> String {
    "runs".to_string()
}

fn default_true() -> bool {
    true
}

/// CLI-level overrides (highest precedence).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub run_id: Option<String>,
    pub out_dir: Option<String>,
    pub concurrency: Option<usize>,
    pub method: Option<MethodChoice>,
    pub alpha_metric: Option<AlphaChoice>,
    pub missing: Option<MissingChoice>,
    pub cf_mode: Option<CfChoice>,
    pub mock_judge: Option<u64>,
    pub no_timestamp: bool,
}

fn env_string(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

fn config_err(message: impl Into<String>) -> HarnessError {
    HarnessError::Config(message.into())
}

fn parse_env<T, F: Fn(&str) -> Option<T>>(name: &str, parse: F) -> Result<Option<T>, HarnessError> {
    match env_string(name) {
        None => Ok(None),
        Some(raw) => parse(&raw)
            .map(Some)
            .ok_or_else(|| config_err(format!("invalid value \"{raw}\" in ${name}"))),
    }
}

/// Loads the file, then layers environment variables (COTGAUGE_*) and CLI
/// overrides on top, then sanity-checks the result.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("malformed config {}: {e}", path.display())))?;

    // Environment layer.
    if let Some(v) = env_string("COTGAUGE_RUN_ID") {
        cfg.run_id = v;
    }
    if let Some(v) = env_string("COTGAUGE_OUT_DIR") {
        cfg.out_dir = v;
    }
    if let Some(v) = parse_env("COTGAUGE_CONCURRENCY", |s| s.parse().ok())? {
        cfg.concurrency = v;
    }
    if let Some(v) = parse_env("COTGAUGE_METHOD", choice_method)? {
        cfg.stats.method = v;
    }
    if let Some(v) = parse_env("COTGAUGE_ALPHA_METRIC", choice_alpha)? {
        cfg.stats.alpha_metric = v;
    }
    if let Some(v) = parse_env("COTGAUGE_MISSING", choice_missing)? {
        cfg.missing_policy = v;
    }
    if let Some(v) = parse_env("COTGAUGE_CF_MODE", choice_cf)? {
        cfg.cfdensity.mode = v;
    }
    if let Some(v) = parse_env("COTGAUGE_MOCK_JUDGE", |s| s.parse().ok())? {
        cfg.mock_judge = Some(v);
    }

    // CLI layer.
    if let Some(v) = &overrides.run_id {
        cfg.run_id = v.clone();
    }
    if let Some(v) = &overrides.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = overrides.concurrency {
        cfg.concurrency = v;
    }
    if let Some(v) = overrides.method {
        cfg.stats.method = v;
    }
    if let Some(v) = overrides.alpha_metric {
        cfg.stats.alpha_metric = v;
    }
    if let Some(v) = overrides.missing {
        cfg.missing_policy = v;
    }
    if let Some(v) = overrides.cf_mode {
        cfg.cfdensity.mode = v;
    }
    if let Some(v) = overrides.mock_judge {
        cfg.mock_judge = Some(v);
    }
    if overrides.no_timestamp {
        cfg.emit_timestamp = false;
    }

    check_config(&cfg)?;
    Ok(cfg)
}

fn choice_method(s: &str) -> Option<MethodChoice> {
    match s {
        "normal" => Some(MethodChoice::Normal),
        "exact" => Some(MethodChoice::Exact),
        _ => None,
    }
}

fn choice_alpha(s: &str) -> Option<AlphaChoice> {
    match s {
        "interval" => Some(AlphaChoice::Interval),
        "ordinal" => Some(AlphaChoice::Ordinal),
        _ => None,
    }
}

fn choice_missing(s: &str) -> Option<MissingChoice> {
    match s {
        "strict" => Some(MissingChoice::Strict),
        "lenient" => Some(MissingChoice::Lenient),
        _ => None,
    }
}

fn choice_cf(s: &str) -> Option<CfChoice> {
    match s {
        "heuristic" => Some(CfChoice::Heuristic),
        "judge" => Some(CfChoice::Judge),
        _ => None,
    }
}

fn check_config(cfg: &RunConfig) -> Result<(), HarnessError> {
    if cfg.corpora.is_empty() {
        return Err(config_err("config lists no corpora"));
    }
    for entry in &cfg.corpora {
        if !Path::new(&entry.path).exists() {
            return Err(config_err(format!("corpus file not found: {}", entry.path)));
        }
    }
    if let Some(p) = &cfg.rubric_path {
        if !Path::new(p).exists() {
            return Err(config_err(format!("rubric file not found: {p}")));
        }
    }
    if let Some(p) = &cfg.cfdensity.lexicon_path {
        if !Path::new(p).exists() {
            return Err(config_err(format!("lexicon file not found: {p}")));
        }
    }
    if cfg.run_id.is_empty()
        || !cfg
            .run_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
    {
        return Err(config_err(format!(
            "run_id \"{}\" must be non-empty [A-Za-z0-9._-]",
            cfg.run_id
        )));
    }
    let (a, b) = comparison_groups(cfg)?;
    if a == b {
        return Err(config_err(format!(
            "comparison groups must differ (both \"{a}\")"
        )));
    }
    Ok(())
}

/// Commands that talk to judges (or plan to) need at least one endpoint;
/// heuristic density analysis does not, so this is not a global invariant.
pub fn require_endpoints(cfg: &RunConfig) -> Result<(), HarnessError> {
    if cfg.endpoints.is_empty() {
        return Err(config_err("config lists no judge endpoints"));
    }
    Ok(())
}

/// The two groups compared in reports: explicit config, else the first two
/// distinct corpus groups in file order.
pub fn comparison_groups(cfg: &RunConfig) -> Result<(String, String), HarnessError> {
    let mut distinct: Vec<String> = Vec::new();
    for entry in &cfg.corpora {
        if !distinct.contains(&entry.group) {
            distinct.push(entry.group.clone());
        }
    }
    let a = cfg
        .group_a
        .clone()
        .or_else(|| distinct.first().cloned())
        .ok_or_else(|| config_err("cannot infer group_a"))?;
    let b = cfg
        .group_b
        .clone()
        .or_else(|| distinct.iter().find(|g| **g != a).cloned())
        .ok_or_else(|| config_err("cannot infer group_b: corpora define fewer than two groups"))?;
    Ok((a, b))
}

/// Hash over the result-affecting slice of the config. Presentation and
/// scheduling knobs (timestamps, concurrency, out_dir) are excluded: commits
/// are ordered, so they cannot change any artifact byte. Everything that can
/// — corpora, rubric, endpoints, policies, seed — is covered, and a changed
/// hash under the same run_id refuses to run.
pub fn config_hash(cfg: &RunConfig) -> String {
    #[derive(Serialize)]
    struct HashedView<'a> {
        corpora: &'a Vec<CorpusEntry>,
        rubric_path: &'a Option<String>,
        endpoints: &'a Vec<EndpointConfig>,
        missing_policy: MissingChoice,
        stats: &'a StatsConfig,
        cfdensity: &'a CfConfig,
        run_id: &'a String,
        group_a: &'a Option<String>,
        group_b: &'a Option<String>,
        mock_judge: &'a Option<u64>,
    }
    let view = HashedView {
        corpora: &cfg.corpora,
        rubric_path: &cfg.rubric_path,
        endpoints: &cfg.endpoints,
        missing_policy: cfg.missing_policy,
        stats: &cfg.stats,
        cfdensity: &cfg.cfdensity,
        run_id: &cfg.run_id,
        group_a: &cfg.group_a,
        group_b: &cfg.group_b,
        mock_judge: &cfg.mock_judge,
    };
    let canonical = serde_json::to_string(&view).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Creates (or reopens) the run directory, enforcing the append-only
/// contract: a second run under the same run_id must present an identical
/// result-affecting config.
pub fn ensure_run_dir(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    let dir = Path::new(&cfg.out_dir).join(&cfg.run_id);
    std::fs::create_dir_all(&dir)
        .map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let hash = config_hash(cfg);
    let hash_path = dir.join("config.hash");
    if hash_path.exists() {
        let stored = std::fs::read_to_string(&hash_path)
            .map_err(|e| HarnessError::Runtime(format!("cannot read config.hash: {e}")))?;
        if stored.trim() != hash {
            return Err(config_err(format!(
                "run \"{}\" already exists with a different config; \
                 pick a new --run-id or restore the original config",
                cfg.run_id
            )));
        }
    } else {
        std::fs::write(&hash_path, format!("{hash}\n"))
            .map_err(|e| HarnessError::Runtime(format!("cannot write config.hash: {e}")))?;
        let echo = serde_json::to_string_pretty(cfg).expect("config serializes");
        std::fs::write(dir.join("config.json"), format!("{echo}\n"))
            .map_err(|e| HarnessError::Runtime(format!("cannot write config echo: {e}")))?;
    }
    Ok(dir)
}
