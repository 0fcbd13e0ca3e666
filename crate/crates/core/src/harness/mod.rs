//! Run orchestration: the command implementations behind the CLI. Each
//! command reads the shared [`config::RunConfig`], works inside an
//! append-only run directory, and maps failures onto three exit classes —
//! config (3), validation (2), runtime (1).

pub mod boxplot;
pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfdensity::{self, AnalysisOptions, CfError, ClaimAnalysis, Lexicon, PatternSet};
use crate::corpus::{load_corpus, merge_corpora, Corpus};
use crate::judge::store::VerdictStore;
use crate::judge::transport::{HttpTransport, JudgeTransport, MockJudge};
use crate::judge::{
    now_rfc3339, run_batch, BatchOptions, BatchReport, JudgeEndpoint, JudgeError, RetryPolicy,
};
use crate::rubric::{default_rubric, load_rubric, render_scoring_prompt, Rubric};
use crate::stats::{aggregate_scores, compare_dimension, ScoreMatrix, StatsError};

use boxplot::{render_boxplot, BoxplotOptions};
use config::{comparison_groups, ensure_run_dir, require_endpoints, EndpointConfig, RunConfig};
use report::{render_report, render_table, ExcludedRow, MethodEcho, StatsRow, TableFormat};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad or missing configuration; nothing was attempted. Exit 3.
    #[error("{0}")]
    Config(String),
    /// The inputs failed schema or blinding checks. Exit 2.
    #[error("{0}")]
    Validation(String),
    /// The run itself failed partway; partial state is on disk. Exit 1.
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 3,
            HarnessError::Validation(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

fn runtime(message: impl Into<String>) -> HarnessError {
    HarnessError::Runtime(message.into())
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticEntry {
    pub kind: String,
    pub detail: String,
}

/// What `validate` writes to `diagnostics.json`, pass or fail.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub status: String,
    pub run_id: String,
    pub samples: usize,
    pub groups: BTreeMap<String, usize>,
    pub dimensions: usize,
    pub endpoints: usize,
    pub prompts_rendered: usize,
    pub planned_calls: usize,
    pub violations: Vec<DiagnosticEntry>,
}

fn load_all_corpora(cfg: &RunConfig) -> Result<Corpus, HarnessError> {
    let mut parts = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    for entry in &cfg.corpora {
        let corpus = load_corpus(&entry.path, std::slice::from_ref(&entry.group))
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
        if !groups.contains(&entry.group) {
            groups.push(entry.group.clone());
        }
        parts.push(corpus);
    }
    merge_corpora(parts, &groups).map_err(|e| HarnessError::Validation(e.to_string()))
}

fn load_rubric_choice(cfg: &RunConfig) -> Result<Rubric, HarnessError> {
    let rubric = match &cfg.rubric_path {
        Some(path) => load_rubric(path).map_err(|e| HarnessError::Validation(e.to_string()))?,
        None => default_rubric(),
    };
    rubric
        .validate()
        .map_err(|e| HarnessError::Validation(e.to_string()))?;
    Ok(rubric)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| runtime(format!("cannot serialize {}: {e}", path.display())))?;
    std::fs::write(path, format!("{text}\n"))
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Dry run: loads everything, renders every prompt, sweeps for blinding
/// leaks, and reports how many judge calls a full evaluation would make.
/// No network traffic. `diagnostics.json` is written pass or fail.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Diagnostics, HarnessError> {
    require_endpoints(cfg)?;
    let run_dir = ensure_run_dir(cfg)?;
    let mut violations: Vec<DiagnosticEntry> = Vec::new();

    let corpus = match load_all_corpora(cfg) {
        Ok(c) => Some(c),
        Err(e) => {
            violations.push(DiagnosticEntry {
                kind: "corpus".into(),
                detail: e.to_string(),
            });
            None
        }
    };
    let rubric = match load_rubric_choice(cfg) {
        Ok(r) => Some(r),
        Err(e) => {
            violations.push(DiagnosticEntry {
                kind: "rubric".into(),
                detail: e.to_string(),
            });
            None
        }
    };

    let mut groups = BTreeMap::new();
    let mut prompts_rendered = 0usize;
    if let (Some(corpus), Some(rubric)) = (&corpus, &rubric) {
        for sample in &corpus.samples {
            *groups.entry(sample.group.clone()).or_insert(0usize) += 1;
        }
        for dim in &rubric.dimensions {
            for sample in &corpus.samples {
                match render_scoring_prompt(dim, sample, rubric) {
                    Ok(_) => prompts_rendered += 1,
                    Err(e) => violations.push(DiagnosticEntry {
                        kind: "blinding".into(),
                        detail: e.to_string(),
                    }),
                }
            }
        }
    }

    let samples = corpus.as_ref().map_or(0, |c| c.samples.len());
    let dimensions = rubric.as_ref().map_or(0, |r| r.dimensions.len());
    let diagnostics = Diagnostics {
        status: if violations.is_empty() {
            "ok"
        } else {
            "violations"
        }
        .into(),
        run_id: cfg.run_id.clone(),
        samples,
        groups,
        dimensions,
        endpoints: cfg.endpoints.len(),
        prompts_rendered,
        planned_calls: samples * dimensions * cfg.endpoints.len(),
        violations,
    };
    write_json(&run_dir.join("diagnostics.json"), &diagnostics)?;

    println!(
        "validate: {} samples ({}), {} dimensions, {} endpoints",
        diagnostics.samples,
        diagnostics
            .groups
            .iter()
            .map(|(g, n)| format!("{g}: {n}"))
            .collect::<Vec<_>>()
            .join(", "),
        diagnostics.dimensions,
        diagnostics.endpoints
    );
    println!(
        "validate: {} prompts rendered, {} violation(s)",
        diagnostics.prompts_rendered,
        diagnostics.violations.len()
    );
    println!("validate: {} calls planned", diagnostics.planned_calls);

    if diagnostics.violations.is_empty() {
        Ok(diagnostics)
    } else {
        for v in &diagnostics.violations {
            eprintln!("violation [{}]: {}", v.kind, v.detail);
        }
        Err(HarnessError::Validation(format!(
            "{} violation(s); see {}",
            diagnostics.violations.len(),
            run_dir.join("diagnostics.json").display()
        )))
    }
}

fn build_endpoints(cfg: &RunConfig) -> Vec<JudgeEndpoint> {
    cfg.endpoints
        .iter()
        .map(|e| {
            let mut endpoint = JudgeEndpoint::new(&e.label, &e.model_id);
            endpoint.max_parse_retries = e.max_parse_retries;
            endpoint
        })
        .collect()
}

fn live_transport(e: &EndpointConfig) -> Result<HttpTransport, HarnessError> {
    let base_url = e.base_url.as_ref().ok_or_else(|| {
        HarnessError::Config(format!(
            "endpoint \"{}\" has no base_url for a live run",
            e.label
        ))
    })?;
    let env_name = e.credential_env.as_ref().ok_or_else(|| {
        HarnessError::Config(format!(
            "endpoint \"{}\" names no credential_env for a live run",
            e.label
        ))
    })?;
    let token = std::env::var(env_name).map_err(|_| {
        HarnessError::Config(format!(
            "environment variable {env_name} (credential for \"{}\") is not set",
            e.label
        ))
    })?;
    HttpTransport::new(
        base_url,
        Some(token),
        Duration::from_secs(e.timeout_secs),
        e.params.clone(),
    )
    .map_err(|err| runtime(format!("cannot build transport for \"{}\": {err}", e.label)))
}

/// The offline stand-in for a judge: deterministic in the seed, with a mild
/// preference for transcripts that explicitly probe alternatives, so mock
/// runs produce a visible group contrast instead of pure noise.
fn mock_judge(seed: u64) -> MockJudge {
    MockJudge::new(seed)
        .with_default_weights([0.10, 0.30, 0.35, 0.18, 0.07])
        .with_bias("would have", [0.02, 0.06, 0.17, 0.40, 0.35])
}

/// Scores every outstanding `(sample, dimension, endpoint)` cell, resuming
/// whatever a previous run left behind. Mock mode (`mock_judge` seed set)
/// never touches the network; live mode reads each endpoint's bearer token
/// from the environment variable named in the config.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    max_cells: Option<usize>,
) -> Result<BatchReport, HarnessError> {
    require_endpoints(cfg)?;
    let run_dir = ensure_run_dir(cfg)?;
    let corpus = load_all_corpora(cfg)?;
    let rubric = load_rubric_choice(cfg)?;
    let endpoints = build_endpoints(cfg);

    let mut owned: Vec<Box<dyn JudgeTransport>> = Vec::with_capacity(cfg.endpoints.len());
    match cfg.mock_judge {
        Some(seed) => {
            for _ in &cfg.endpoints {
                owned.push(Box::new(mock_judge(seed)));
            }
        }
        None => {
            for e in &cfg.endpoints {
                owned.push(Box::new(live_transport(e)?));
            }
        }
    }
    let transports: Vec<&dyn JudgeTransport> = owned.iter().map(|b| b.as_ref()).collect();

    let mut store =
        VerdictStore::open(&run_dir).map_err(|e| runtime(format!("verdict store: {e}")))?;
    let options = BatchOptions {
        concurrency: cfg.concurrency.max(1),
        max_cells,
        retry: if cfg.mock_judge.is_some() {
            RetryPolicy::immediate()
        } else {
            RetryPolicy::default()
        },
    };
    let report = run_batch(
        &corpus,
        &rubric,
        &endpoints,
        &transports,
        &mut store,
        &options,
    )
    .map_err(|e| match e {
        JudgeError::Render(inner) => HarnessError::Validation(inner.to_string()),
        other => runtime(other.to_string()),
    })?;

    // Per-(model, dimension) progress: how full each archive is now.
    let per_sample = corpus.samples.len();
    for endpoint in &endpoints {
        for dim_id in rubric.dim_ids() {
            let cells = store
                .iter()
                .filter(|(k, _)| k.model_label == endpoint.label && k.dim_id == dim_id)
                .count();
            println!(
                "evaluate: {} × {dim_id}: {cells}/{per_sample} cells",
                endpoint.label
            );
        }
    }
    println!(
        "evaluate: planned {}, skipped {}, scored {}, missing {}, deferred {}, failed {}",
        report.planned,
        report.skipped,
        report.scored,
        report.missing,
        report.deferred,
        report.failures.len()
    );

    if report.failures.is_empty() {
        Ok(report)
    } else {
        for f in report.failures.iter().take(5) {
            eprintln!(
                "failed cell {}/{}/{}: {}",
                f.sample_id, f.dim_id, f.model_label, f.error
            );
        }
        Err(runtime(format!(
            "{} cell(s) failed permanently; verdicts committed so far are kept — rerun to retry",
            report.failures.len()
        )))
    }
}

struct ComputedStats {
    run_dir: PathBuf,
    matrix: ScoreMatrix,
    rows: Vec<StatsRow>,
    echo: MethodEcho,
}

fn compute_stats(cfg: &RunConfig) -> Result<ComputedStats, HarnessError> {
    require_endpoints(cfg)?;
    let run_dir = ensure_run_dir(cfg)?;
    let corpus = load_all_corpora(cfg)?;
    let rubric = load_rubric_choice(cfg)?;
    let dim_ids = rubric.dim_ids();
    let labels: Vec<String> = cfg.endpoints.iter().map(|e| e.label.clone()).collect();
    let store = VerdictStore::open(&run_dir).map_err(|e| runtime(format!("verdict store: {e}")))?;

    let matrix = aggregate_scores(
        &store,
        &corpus,
        &dim_ids,
        &labels,
        cfg.missing_policy.to_policy(),
    )
    .map_err(|e| match e {
        StatsError::IncompleteStore { .. } => {
            runtime(format!("{e}; run `cotgauge evaluate` to completion first"))
        }
        other => runtime(other.to_string()),
    })?;

    let (group_a, group_b) = comparison_groups(cfg)?;
    let mut rows = Vec::with_capacity(dim_ids.len());
    for (dim_idx, dim_id) in dim_ids.iter().enumerate() {
        let values_a = matrix.group_means(&group_a, dim_idx);
        let values_b = matrix.group_means(&group_b, dim_idx);
        if values_a.is_empty() || values_b.is_empty() {
            let side = if values_a.is_empty() {
                &group_a
            } else {
                &group_b
            };
            eprintln!(
                "warning: dimension {dim_id}: group \"{side}\" has no scored cells \
                 under the {} policy; row marked EXCLUDED",
                cfg.missing_policy.to_policy().as_str()
            );
            rows.push(StatsRow::Excluded(ExcludedRow {
                dim_id: dim_id.clone(),
                status: "EXCLUDED".into(),
                group_a: group_a.clone(),
                group_b: group_b.clone(),
                n_a: values_a.len(),
                n_b: values_b.len(),
                excluded_a: matrix.excluded_count(&group_a, dim_idx),
                excluded_b: matrix.excluded_count(&group_b, dim_idx),
            }));
            continue;
        }
        let stats = compare_dimension(
            &matrix,
            dim_idx,
            &group_a,
            &group_b,
            cfg.stats.method.to_mw(),
            cfg.stats.alpha_metric.to_metric(),
        )
        .map_err(|e| match e {
            StatsError::UnknownGroup(g) => {
                HarnessError::Validation(format!("comparison group \"{g}\" not in corpus"))
            }
            other => runtime(other.to_string()),
        })?;
        rows.push(StatsRow::Stats(stats));
    }

    let echo = MethodEcho {
        mw_method: cfg.stats.method.to_mw().as_str().to_string(),
        alpha_metric: cfg.stats.alpha_metric.to_metric().as_str().to_string(),
        missing_policy: cfg.missing_policy.to_policy().as_str().to_string(),
        cf_mode: cfg.cfdensity.mode.to_mode().as_str().to_string(),
        group_a,
        group_b,
    };
    Ok(ComputedStats {
        run_dir,
        matrix,
        rows,
        echo,
    })
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    run_id: &'a str,
    method: &'a MethodEcho,
    rows: &'a [StatsRow],
}

/// Aggregates verdicts into `matrix.csv` and `stats.json`; echoes every
/// method choice so the numbers are self-describing.
pub fn cmd_stats(cfg: &RunConfig) -> Result<Vec<StatsRow>, HarnessError> {
    let computed = compute_stats(cfg)?;
    let matrix_path = computed.run_dir.join("matrix.csv");
    std::fs::write(&matrix_path, computed.matrix.to_csv())
        .map_err(|e| runtime(format!("cannot write {}: {e}", matrix_path.display())))?;
    write_json(
        &computed.run_dir.join("stats.json"),
        &StatsDoc {
            run_id: &cfg.run_id,
            method: &computed.echo,
            rows: &computed.rows,
        },
    )?;
    let table_path = computed.run_dir.join("table.csv");
    std::fs::write(&table_path, render_table(&computed.rows, TableFormat::Csv))
        .map_err(|e| runtime(format!("cannot write {}: {e}", table_path.display())))?;

    println!("stats: methods: {}", computed.echo.describe());
    print!("{}", render_table(&computed.rows, TableFormat::Markdown));
    println!(
        "stats: wrote {} and {}",
        matrix_path.display(),
        computed.run_dir.join("stats.json").display()
    );
    Ok(computed.rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDensity {
    pub n: usize,
    pub defined: usize,
    pub undefined: usize,
    /// Mean over samples with a defined density only; None when every
    /// sample in the group is UNDEFINED.
    pub mean_density: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfSummary {
    pub mode: String,
    pub window: usize,
    pub groups: BTreeMap<String, GroupDensity>,
}

#[derive(Serialize)]
struct DensityRecord<'a> {
    sample_id: &'a str,
    group: &'a str,
    #[serde(flatten)]
    analysis: &'a ClaimAnalysis,
}

/// Counterfactual-density analysis over the corpus: one JSONL record per
/// sample plus a per-group summary. Judge mode adjudicates load-bearing
/// status through an endpoint (mock or live); heuristic mode never needs
/// one. UNDEFINED densities are counted separately, never averaged in.
pub fn cmd_cfdensity(cfg: &RunConfig) -> Result<CfSummary, HarnessError> {
    use crate::harness::config::CfChoice;

    if cfg.cfdensity.mode == CfChoice::Judge && cfg.endpoints.is_empty() {
        return Err(HarnessError::Config(
            "judge-mode density needs a judge endpoint in the config".into(),
        ));
    }
    let run_dir = ensure_run_dir(cfg)?;
    let corpus = load_all_corpora(cfg)?;

    let (lexicon, patterns): (Lexicon, PatternSet) = match &cfg.cfdensity.lexicon_path {
        Some(path) => cfdensity::load_lexicon_file(Path::new(path))
            .map_err(|e| HarnessError::Config(e.to_string()))?,
        None => (Lexicon::default(), PatternSet::default()),
    };

    // Judge-mode plumbing lives outside the per-sample loop so one transport
    // serves the whole corpus.
    let endpoint_cfg = cfg.endpoints.first();
    let endpoints = build_endpoints(cfg);
    let judge_endpoint = endpoints.first();
    let mut owned_transport: Option<Box<dyn JudgeTransport>> = None;
    let retry;
    if cfg.cfdensity.mode == CfChoice::Judge {
        match cfg.mock_judge {
            Some(seed) => {
                owned_transport = Some(Box::new(mock_judge(seed)));
                retry = RetryPolicy::immediate();
            }
            None => {
                owned_transport = Some(Box::new(live_transport(endpoint_cfg.unwrap())?));
                retry = RetryPolicy::default();
            }
        }
    } else {
        retry = RetryPolicy::immediate();
    }

    let mut lines = String::new();
    let mut by_group: BTreeMap<String, GroupDensity> = BTreeMap::new();
    let mut density_sums: BTreeMap<String, f64> = BTreeMap::new();
    for sample in &corpus.samples {
        let options = AnalysisOptions {
            mode: cfg.cfdensity.mode.to_mode(),
            window: cfg.cfdensity.window,
            lexicon: &lexicon,
            patterns: &patterns,
            judge: owned_transport
                .as_deref()
                .map(|t| (judge_endpoint.unwrap(), t, &retry)),
        };
        let analysis = cfdensity::analyze(&sample.cot_body, &options).map_err(|e| match e {
            CfError::JudgeRequired => HarnessError::Config(e.to_string()),
            other => runtime(format!("sample {}: {other}", sample.id)),
        })?;
        let record = DensityRecord {
            sample_id: &sample.id,
            group: &sample.group,
            analysis: &analysis,
        };
        lines.push_str(
            &serde_json::to_string(&record)
                .map_err(|e| runtime(format!("cannot serialize density record: {e}")))?,
        );
        lines.push('\n');

        let entry = by_group
            .entry(sample.group.clone())
            .or_insert(GroupDensity {
                n: 0,
                defined: 0,
                undefined: 0,
                mean_density: None,
            });
        entry.n += 1;
        match analysis.density {
            Some(d) => {
                entry.defined += 1;
                *density_sums.entry(sample.group.clone()).or_insert(0.0) += d;
            }
            None => entry.undefined += 1,
        }
    }
    for (group, entry) in by_group.iter_mut() {
        if entry.defined > 0 {
            entry.mean_density = Some(density_sums[group] / entry.defined as f64);
        }
    }

    let jsonl_path = run_dir.join("cfdensity.jsonl");
    std::fs::write(&jsonl_path, lines)
        .map_err(|e| runtime(format!("cannot write {}: {e}", jsonl_path.display())))?;
    let summary = CfSummary {
        mode: cfg.cfdensity.mode.to_mode().as_str().to_string(),
        window: cfg.cfdensity.window,
        groups: by_group,
    };
    write_json(&run_dir.join("cfdensity_summary.json"), &summary)?;

    println!(
        "cfdensity: mode {}, link window {} sentence(s)",
        summary.mode, summary.window
    );
    for (group, g) in &summary.groups {
        match g.mean_density {
            Some(m) => println!(
                "cfdensity: {group}: n={}, mean density {m:.2} over {} defined, {} UNDEFINED",
                g.n, g.defined, g.undefined
            ),
            None => println!(
                "cfdensity: {group}: n={}, all {} UNDEFINED (no defined densities)",
                g.n, g.undefined
            ),
        }
    }
    Ok(summary)
}

fn density_section(summary: &CfSummary) -> String {
    let mut out = String::new();
    out.push_str("## Counterfactual density\n\n");
    out.push_str(&format!(
        "Adjudication: {}; link window: {} sentence(s). Means cover samples with a \
         defined density; UNDEFINED samples are counted separately.\n\n",
        summary.mode, summary.window
    ));
    out.push_str("| group | n | defined | undefined | mean density |\n|---|---|---|---|---|\n");
    for (group, g) in &summary.groups {
        let mean = g
            .mean_density
            .map_or_else(|| "—".to_string(), |m| format!("{m:.2}"));
        out.push_str(&format!(
            "| {group} | {} | {} | {} | {mean} |\n",
            g.n, g.defined, g.undefined
        ));
    }
    out
}

fn figure_file_name(dim_id: &str) -> String {
    let safe: String = dim_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.svg")
}

/// Renders `report.md` plus one box-plot SVG per comparable dimension. A
/// dimension whose row is EXCLUDED gets no figure, with a warning.
pub fn cmd_report(cfg: &RunConfig) -> Result<PathBuf, HarnessError> {
    let computed = compute_stats(cfg)?;
    let figures_dir = computed.run_dir.join("figures");
    std::fs::create_dir_all(&figures_dir)
        .map_err(|e| runtime(format!("cannot create {}: {e}", figures_dir.display())))?;

    let timestamp = cfg.emit_timestamp.then(now_rfc3339);
    let mut figures: Vec<(String, String)> = Vec::new();
    for (dim_idx, row) in computed.rows.iter().enumerate() {
        match row {
            StatsRow::Stats(stats) => {
                let values_a = computed.matrix.group_means(&computed.echo.group_a, dim_idx);
                let values_b = computed.matrix.group_means(&computed.echo.group_b, dim_idx);
                let options = BoxplotOptions {
                    timestamp: timestamp.clone(),
                    ..BoxplotOptions::default()
                };
                let svg = render_boxplot(
                    &stats.dim_id,
                    &computed.echo.group_a,
                    &values_a,
                    &computed.echo.group_b,
                    &values_b,
                    stats.p_two_sided,
                    &options,
                );
                let file_name = figure_file_name(&stats.dim_id);
                let path = figures_dir.join(&file_name);
                std::fs::write(&path, svg)
                    .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
                figures.push((stats.dim_id.clone(), format!("figures/{file_name}")));
            }
            StatsRow::Excluded(e) => {
                eprintln!(
                    "warning: no figure for dimension {}: a group has no scored cells",
                    e.dim_id
                );
            }
        }
    }

    let summary_path = computed.run_dir.join("cfdensity_summary.json");
    let density = if summary_path.exists() {
        let text = std::fs::read_to_string(&summary_path)
            .map_err(|e| runtime(format!("cannot read {}: {e}", summary_path.display())))?;
        let summary: CfSummary = serde_json::from_str(&text)
            .map_err(|e| runtime(format!("malformed {}: {e}", summary_path.display())))?;
        Some(density_section(&summary))
    } else {
        None
    };

    let report = render_report(
        &cfg.run_id,
        timestamp.as_deref(),
        &computed.echo,
        &computed.rows,
        &figures,
        density.as_deref(),
    );
    let report_path = computed.run_dir.join("report.md");
    std::fs::write(&report_path, report)
        .map_err(|e| runtime(format!("cannot write {}: {e}", report_path.display())))?;
    println!(
        "report: wrote {} and {} figure(s)",
        report_path.display(),
        figures.len()
    );
    Ok(report_path)
}

/// The full pipeline: validate, evaluate, stats, density, report.
pub fn cmd_all(cfg: &RunConfig, max_cells: Option<usize>) -> Result<(), HarnessError> {
    cmd_validate(cfg)?;
    cmd_evaluate(cfg, max_cells)?;
    cmd_stats(cfg)?;
    cmd_cfdensity(cfg)?;
    cmd_report(cfg)?;
    Ok(())
}
