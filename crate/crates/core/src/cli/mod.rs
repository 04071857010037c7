//! The `multico` command line: `fit`, `simulate` and `evaluate`.
//!
//! Exit codes: 0 on success, 2 for unusable input, 3 when every restart
//! hit a numerical failure.

pub mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{match_views, view_membership_ari, Partition};
use crate::inference::{fit, FitOptions};
use crate::model::{Dataset, TruncationConfig};
use crate::synthgen::{generate, benchmark_scenario};

use io::{Metrics, NamedAssignments, Summary};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INFERENCE: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "multico", version, about = "Nonparametric Bayesian multiple co-clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a typed CSV and write assignments, summary and trace.
    Fit(FitArgs),
    /// Write synthetic datasets with their true assignments.
    Simulate(SimulateArgs),
    /// Score a fitted assignment file against a true one.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// TOML file with `[model]` and `[fit]` tables; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub feature_clusters: Option<usize>,
    #[arg(long)]
    pub object_clusters: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Rescale Gaussian columns to mean 0 and unit variance first.
    #[arg(long)]
    pub standardize: bool,
    /// Relabel views and clusters by size whenever that raises the bound.
    #[arg(long)]
    pub reorder: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: usize,
    /// Features per view for each of the three families.
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub result: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: TruncationConfig,
    pub fit: FitOptions,
}

impl RunConfig {
    fn with_flags(mut self, a: &FitArgs) -> Self {
        let m = &mut self.model;
        let f = &mut self.fit;
        if let Some(v) = a.views {
            m.views = v;
        }
        if let Some(g) = a.feature_clusters {
            m.feature_clusters = g;
        }
        if let Some(k) = a.object_clusters {
            m.object_clusters = k;
        }
        if let Some(s) = a.restarts {
            f.restarts = s;
        }
        if let Some(t) = a.tol {
            f.tol = t;
        }
        if let Some(n) = a.max_iters {
            f.max_iters = n;
        }
        if let Some(b) = a.seed {
            f.base_seed = b;
        }
        if let Some(p) = a.threads {
            f.threads = p;
        }
        if a.reorder {
            f.reorder = true;
        }
        self
    }
}

pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const TRACE_FILE: &str = "elbo_trace.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn described_violations(dataset: &Dataset, err: Error) -> Error {
    let Error::InvalidDataset(violations) = &err else {
        return err;
    };
    let lines: Vec<String> = violations
        .iter()
        .map(|v| {
            let fam = &dataset.families[v.family_index];
            let column = v
                .feature
                .and_then(|j| fam.feature_names.get(j))
                .map_or_else(String::new, |c| format!(" column `{c}`"));
            let row = v
                .cell
                .and_then(|(i, _)| dataset.object_ids.get(i))
                .map_or_else(String::new, |id| format!(" row `{id}`"));
            format!("{v}{column}{row}")
        })
        .collect();
    Error::Parse {
        path: "dataset".into(),
        message: format!("{} violation(s):\n  {}", lines.len(), lines.join("\n  ")),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let base = match &args.config {
        Some(p) => io::read_toml::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_flags(args);
    let schema = io::read_schema(&args.schema)?;
    let mut dataset = io::read_dataset(&args.data, &schema)?;
    if let Err(e) = Dataset::validated(dataset.object_ids.clone(), dataset.families.clone()) {
        return Err(described_violations(&dataset, e));
    }
    if args.standardize {
        dataset = dataset.standardize_gaussian();
    }
    let result = fit(&dataset, &cfg.model, &cfg.fit)?;

    ensure_dir(&args.out)?;
    let named = NamedAssignments::from_assignments(&dataset, &result.assignments);
    io::write_assignments(&args.out.join(ASSIGNMENTS_FILE), &named)?;
    io::write_toml(&args.out.join(SUMMARY_FILE), &Summary::from_result(&result))?;
    io::write_trace(&args.out.join(TRACE_FILE), &result.elbo_trace)?;
    Ok(())
}

/// File stem of replicate `r`.
pub fn replicate_stem(r: usize) -> String {
    format!("{r:03}")
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.n < 2 || args.d == 0 || args.replicates == 0 {
        return Err(Error::InvalidConfig("need n >= 2, d >= 1 and replicates >= 1".into()));
    }
    if !(0.0..1.0).contains(&args.missing) {
        return Err(Error::InvalidConfig(format!("--missing must lie in [0, 1), got {}", args.missing)));
    }
    ensure_dir(&args.out)?;
    for r in 0..args.replicates {
        let seed = args.seed.wrapping_add(r as u64);
        let scenario = benchmark_scenario(args.n, args.d, args.missing, seed);
        let (dataset, truth) = generate(&scenario)?;
        let stem = replicate_stem(r);
        if r == 0 {
            io::write_schema(&args.out.join("schema.toml"), &dataset)?;
        }
        io::write_dataset(&args.out.join(format!("data_{stem}.csv")), &dataset)?;
        io::write_assignments(
            &args.out.join(format!("truth_{stem}.csv")),
            &NamedAssignments::from_assignments(&dataset, &truth),
        )?;
        io::write_toml(&args.out.join(format!("scenario_{stem}.toml")), &scenario)?;
    }
    Ok(())
}

/// Scores `result` against `truth`. Object partitions are compared for the
/// views that hold at least one feature on each side.
pub fn evaluate_named(truth: &NamedAssignments, result: &NamedAssignments) -> Result<Metrics> {
    let t = truth.aligned_to(truth)?;
    let y = result.aligned_to(truth)?;
    let parts = |a: &crate::model::Assignments, views: Vec<usize>| -> Result<Vec<Partition>> {
        views
            .into_iter()
            .filter(|&v| v < a.objects.len())
            .map(|v| Partition::new(a.objects[v].clone()))
            .collect()
    };
    let truth_parts = parts(&t, t.active_views())?;
    let yielded_parts = parts(&y, y.active_views())?;
    let matched = match_views(&truth_parts, &yielded_parts)?;
    Ok(Metrics {
        object_ari: matched.per_true,
        object_ari_mean: matched.mean,
        view_ari: view_membership_ari(&t, &y)?,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let truth = io::read_assignments(&args.truth)?;
    let result = io::read_assignments(&args.result)?;
    let metrics = evaluate_named(&truth, &result)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    io::write_toml(&args.out, &metrics)
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::AllRestartsFailed(_) | Error::NonFinite { .. } | Error::DegenerateVariance(_) => EXIT_INFERENCE,
        _ => EXIT_INPUT,
    }
}

pub fn run(cli: Cli) -> ExitCode {
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
