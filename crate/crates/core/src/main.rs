use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use cotgauge::harness::config::{
    load_config, AlphaChoice, CfChoice, MethodChoice, MissingChoice, Overrides,
};
use cotgauge::harness::{
    cmd_all, cmd_cfdensity, cmd_evaluate, cmd_report, cmd_stats, cmd_validate, HarnessError,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Normal,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlphaArg {
    Interval,
    Ordinal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MissingArg {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CfModeArg {
    Heuristic,
    Judge,
}

#[derive(Parser)]
#[command(
    name = "cotgauge",
    version,
    about = "Corpus-quality evaluation for expert reasoning transcripts: blinded \
             multi-judge rubric scoring, nonparametric statistics, and \
             counterfactual-density analysis."
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the configured run id.
    #[arg(long, global = true, value_name = "ID")]
    run_id: Option<String>,

    /// Override the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,

    /// Use the deterministic offline judge with this seed (no network).
    #[arg(long, global = true, value_name = "SEED")]
    mock_judge: Option<u64>,

    /// Maximum concurrent judge calls.
    #[arg(long, global = true, value_name = "N")]
    concurrency: Option<usize>,

    /// Mann-Whitney variant: tie-corrected normal approximation or exact
    /// enumeration (small samples only).
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,

    /// Distance metric for Krippendorff's alpha.
    #[arg(long, global = true, value_enum)]
    alpha_metric: Option<AlphaArg>,

    /// Missing-score policy: strict excludes the whole cell, lenient
    /// averages the judges that did answer.
    #[arg(long, global = true, value_enum)]
    missing: Option<MissingArg>,

    /// How load-bearing claims are adjudicated in density analysis.
    #[arg(long, global = true, value_enum)]
    cf_mode: Option<CfModeArg>,

    /// Omit generation timestamps for byte-identical artifacts.
    #[arg(long, global = true)]
    no_timestamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check corpora and rubric, render every prompt, and sweep for
    /// blinding leaks without making any judge call.
    Validate,
    /// Score every outstanding (sample, dimension, judge) cell.
    Evaluate {
        /// Stop after committing this many new cells (for interruption
        /// drills); the run resumes cleanly afterwards.
        #[arg(long, value_name = "N")]
        max_cells: Option<usize>,
    },
    /// Aggregate verdicts into matrix.csv and stats.json.
    Stats,
    /// Counterfactual-density analysis per sample and per group.
    Cfdensity,
    /// Render report.md and one box-plot figure per dimension.
    Report,
    /// validate → evaluate → stats → cfdensity → report.
    All {
        #[arg(long, value_name = "N")]
        max_cells: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let config_path = cli
        .config
        .or_else(|| std::env::var("COTGAUGE_CONFIG").ok().map(PathBuf::from))
        .ok_or_else(|| {
            HarnessError::Config("no config given (use --config or $COTGAUGE_CONFIG)".into())
        })?;
    let overrides = Overrides {
        run_id: cli.run_id,
        out_dir: cli.out,
        concurrency: cli.concurrency,
        method: cli.method.map(|m| match m {
            MethodArg::Normal => MethodChoice::Normal,
            MethodArg::Exact => MethodChoice::Exact,
        }),
        alpha_metric: cli.alpha_metric.map(|a| match a {
            AlphaArg::Interval => AlphaChoice::Interval,
            AlphaArg::Ordinal => AlphaChoice::Ordinal,
        }),
        missing: cli.missing.map(|m| match m {
            MissingArg::Strict => MissingChoice::Strict,
            MissingArg::Lenient => MissingChoice::Lenient,
        }),
        cf_mode: cli.cf_mode.map(|m| match m {
            CfModeArg::Heuristic => CfChoice::Heuristic,
            CfModeArg::Judge => CfChoice::Judge,
        }),
        mock_judge: cli.mock_judge,
        no_timestamp: cli.no_timestamp,
    };
    let cfg = load_config(&config_path, &overrides)?;

    match cli.command {
        Command::Validate => cmd_validate(&cfg).map(|_| ()),
        Command::Evaluate { max_cells } => cmd_evaluate(&cfg, max_cells).map(|_| ()),
        Command::Stats => cmd_stats(&cfg).map(|_| ()),
        Command::Cfdensity => cmd_cfdensity(&cfg).map(|_| ()),
        Command::Report => cmd_report(&cfg).map(|_| ()),
        Command::All { max_cells } => cmd_all(&cfg, max_cells),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
