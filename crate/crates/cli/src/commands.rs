//! The `select`, `panel` and `simulate` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use ranksel_core::models::{learners_by_name, null_model_tau, LossFn};
use ranksel_core::ranksum::LossPanel;
use ranksel_core::select::{
    build_split_panel, build_vfold_panel, rsr_from_panel, rsr_from_panel_masked, ConfidenceSet,
    LearnerSuite, Method,
};
use ranksel_core::simlab::{
    run_case1_sweep, run_case2, AggregateReport, Case1Config, Case2Config, Estimate,
    SimulationRun, CASE2_DIMS,
};

use crate::config::{Command, LossKind, RunConfig, SimCase};
use crate::csvio::{fmt_f64, read_dataset, read_panel, write_csv, write_dat};
use crate::CliError;

pub const CASE1_DEFAULT_N: [usize; 4] = [40, 80, 160, 320];

/// Per-model summary shown next to a confidence set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostic {
    pub id: String,
    pub p_value: f64,
    pub selected: bool,
    pub failed: bool,
    pub mean_loss: f64,
    /// Smallest `mu` against any competitor, with its standard error.
    pub min_mu: Option<f64>,
    pub min_mu_se: Option<f64>,
    pub competitors: usize,
    pub screened_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub version: String,
    pub command: String,
    /// Resolved configuration; parses back to the same [`RunConfig`].
    pub config: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_set: Option<ConfidenceSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<ModelDiagnostic>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregates: Vec<AggregateReport>,
    /// Kept out of `report.json` so identical runs give identical bytes;
    /// written to `timing.json` instead.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl ReportBundle {
    fn new(config: &RunConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: config.command.as_str().to_string(),
            config: config.to_pairs().into_iter().collect(),
            confidence_set: None,
            diagnostics: Vec::new(),
            aggregates: Vec::new(),
            wall_seconds: 0.0,
        }
    }

    /// Recovers the configuration this report was produced with.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let pairs: Vec<(String, String)> = self.config.clone().into_iter().collect();
        RunConfig::from_pairs(&pairs)
    }
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out <dir> is required".into()))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_timing(dir: &Path, seconds: f64) -> Result<(), CliError> {
    write_json(&dir.join("timing.json"), &serde_json::json!({ "wall_seconds": seconds }))
}

fn diagnostics(set: &ConfidenceSet, panel: &LossPanel) -> Vec<ModelDiagnostic> {
    let means = panel.mean_losses();
    (0..panel.n_models())
        .map(|m| {
            let detail = set.details.iter().find(|d| d.reference == m);
            let min = detail.and_then(|d| {
                (0..d.mu.len())
                    .min_by(|&a, &b| d.mu[a].total_cmp(&d.mu[b]))
                    .map(|i| (d.mu[i], d.se[i]))
            });
            ModelDiagnostic {
                id: set.model_ids[m].clone(),
                p_value: set.p_values[m],
                selected: set.contains(m),
                failed: set.failed.contains(&m),
                mean_loss: means[m],
                min_mu: min.map(|v| v.0),
                min_mu_se: min.map(|v| v.1),
                competitors: detail.map_or(0, |d| d.competitors.len()),
                screened_out: set.screened_out[m].len(),
            }
        })
        .collect()
}

fn write_pvalues(dir: &Path, diags: &[ModelDiagnostic]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = diags
        .iter()
        .map(|d| {
            vec![
                d.id.clone(),
                fmt_f64(d.p_value),
                d.selected.to_string(),
                d.failed.to_string(),
                fmt_f64(d.mean_loss),
                d.screened_out.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("pvalues.csv"),
        &["model_id", "p_value", "selected", "failed", "mean_loss", "screened_out"],
        &rows,
    )
}

fn finish_selection(
    config: &RunConfig,
    set: ConfidenceSet,
    panel: &LossPanel,
    started: Instant,
) -> Result<ReportBundle, CliError> {
    let dir = out_dir(config)?;
    let mut bundle = ReportBundle::new(config);
    bundle.diagnostics = diagnostics(&set, panel);
    bundle.confidence_set = Some(set);
    write_pvalues(&dir, &bundle.diagnostics)?;
    write_json(&dir.join("report.json"), &bundle)?;
    bundle.wall_seconds = started.elapsed().as_secs_f64();
    write_timing(&dir, bundle.wall_seconds)?;
    Ok(bundle)
}

pub fn cmd_select(config: &RunConfig) -> Result<ReportBundle, CliError> {
    let started = Instant::now();
    let data_path = config.data.as_ref().expect("validated");
    let response = config.response.as_deref().expect("validated");
    let (data, _) = read_dataset(data_path, response)?;
    let names: Vec<&str> = config.learners.iter().map(String::as_str).collect();
    let learners = learners_by_name(&names, &data, config.k_path.unwrap_or(10))?;
    if learners.len() < 2 {
        return Err(CliError::Usage(format!(
            "at least 2 candidate models are required, --learners gave {}",
            learners.len()
        )));
    }
    let suite = LearnerSuite::new(learners);
    let loss = match config.loss {
        LossKind::Squared => LossFn::Squared,
        LossKind::Absolute => LossFn::Absolute,
        LossKind::Huber => LossFn::huber(null_model_tau(&data))?,
    };
    let sel = config.selection();
    let (built, method) = if config.folds == 0 {
        (build_split_panel(&suite, &data, &loss, sel.seed)?, Method::RsrSplit)
    } else {
        (build_vfold_panel(&suite, &data, &loss, sel.folds, sel.seed)?, Method::RsrVfold)
    };
    let set = rsr_from_panel_masked(&built.panel, &built.failed, &sel, method)?;
    finish_selection(config, set, &built.panel, started)
}

pub fn cmd_panel(config: &RunConfig) -> Result<ReportBundle, CliError> {
    let started = Instant::now();
    let panel = read_panel(config.losses.as_ref().expect("validated"))?;
    let set = rsr_from_panel(&panel, &config.selection())?;
    finish_selection(config, set, &panel, started)
}

fn opt_num(e: Option<Estimate>) -> (String, String) {
    e.map_or(("nan".into(), "nan".into()), |e| (fmt_f64(e.mean), fmt_f64(e.se)))
}

fn opt_cell<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn write_simulation_outputs(dir: &Path, case: SimCase, runs: &[SimulationRun]) -> Result<(), CliError> {
    let aggregates: Vec<&AggregateReport> = runs.iter().map(|r| &r.aggregate).collect();
    write_json(&dir.join("aggregate.json"), &aggregates)?;

    let mut rows = Vec::new();
    for run in runs {
        for rep in &run.replicates {
            if rep.outcomes.is_empty() {
                let mut row = vec![rep.n.to_string(), rep.replicate.to_string(), String::new()];
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(rep.failed_candidates.to_string());
                row.push(rep.error.clone().unwrap_or_default());
                rows.push(row);
            }
            for o in &rep.outcomes {
                rows.push(vec![
                    rep.n.to_string(),
                    rep.replicate.to_string(),
                    o.method.to_string(),
                    o.set_size.to_string(),
                    opt_cell(o.correct),
                    opt_cell(o.chosen_index),
                    opt_cell(o.chosen_lambda.map(fmt_f64)),
                    opt_cell(o.nonzeros),
                    opt_cell(o.covered),
                    opt_cell(o.oracle),
                    opt_cell(o.cv_error.map(fmt_f64)),
                    o.empty_set.to_string(),
                    o.bootstrap_columns.to_string(),
                    o.bootstrap_columns_unscreened.to_string(),
                    rep.failed_candidates.to_string(),
                    String::new(),
                ]);
            }
        }
    }
    write_csv(
        &dir.join("replicates.csv"),
        &[
            "n",
            "replicate",
            "method",
            "set_size",
            "correct",
            "chosen_index",
            "chosen_lambda",
            "nonzeros",
            "covered",
            "oracle",
            "cv_error",
            "empty_set",
            "bootstrap_columns",
            "bootstrap_columns_unscreened",
            "failed_candidates",
            "error",
        ],
        &rows,
    )?;

    let mut sizes = Vec::new();
    let mut rates = Vec::new();
    for agg in &aggregates {
        for s in &agg.methods {
            let (m, se) = opt_num(s.set_size);
            sizes.push(vec![agg.n.to_string(), m, se, s.method.to_string()]);
            let metrics = match case {
                SimCase::Case1 => vec![("correct", s.correct_rate)],
                SimCase::Case2 => vec![
                    ("coverage", s.coverage_rate),
                    ("oracle", s.oracle_rate),
                    ("nonzeros", s.nonzeros),
                    ("cv_error", s.cv_error),
                ],
            };
            for (name, est) in metrics {
                let (m, se) = opt_num(est);
                rates.push(vec![agg.n.to_string(), m, se, format!("{}:{name}", s.method)]);
            }
        }
    }
    write_dat(&dir.join("setsize_vs_n.dat"), &["n", "mean_set_size", "se", "method"], &sizes)?;
    write_dat(&dir.join("rates.dat"), &["n", "value", "se", "method:metric"], &rates)?;
    Ok(())
}

pub fn cmd_simulate(config: &RunConfig) -> Result<ReportBundle, CliError> {
    let started = Instant::now();
    let case = config.case.expect("validated");
    let usage = |e: ranksel_core::Error| CliError::Usage(e.to_string());
    let runs = match case {
        SimCase::Case1 => {
            let cfg = Case1Config {
                n: 0,
                x_df: config.x_df.unwrap_or(3.0),
                reps: config.reps.unwrap_or(100),
                alpha: config.alpha,
                seed: config.seed,
                methods: config.methods.clone(),
                folds: config.folds,
                draws: config.draws,
                screening: config.screening,
                projection: config.projection,
            };
            let ns = if config.n.is_empty() {
                CASE1_DEFAULT_N.to_vec()
            } else {
                config.n.clone()
            };
            for &n in &ns {
                Case1Config { n, ..cfg.clone() }.validate().map_err(usage)?;
            }
            run_case1_sweep(&cfg, &ns)?
        }
        SimCase::Case2 => {
            if config.n.len() > 1 {
                return Err(CliError::Usage("case2 takes a single n".into()));
            }
            let n = config.n.first().copied().unwrap_or(200);
            let p = config.p.unwrap_or(200);
            if !CASE2_DIMS.contains(&(n, p)) {
                let supported: Vec<String> =
                    CASE2_DIMS.iter().map(|(n, p)| format!("(n={n}, p={p})")).collect();
                return Err(CliError::Usage(format!(
                    "unsupported case2 dimensions (n={n}, p={p}); supported: {}",
                    supported.join(", ")
                )));
            }
            let cfg = Case2Config {
                n,
                p,
                noise_df: config.noise_df.unwrap_or(3.0),
                rho: config.rho.unwrap_or(0.25),
                reps: config.reps.unwrap_or(50),
                folds: config.folds,
                k_path: config.k_path.unwrap_or(50),
                alpha: config.alpha,
                seed: config.seed,
                methods: config.methods.clone(),
                draws: config.draws,
                screening: config.screening,
                projection: config.projection,
            };
            cfg.validate().map_err(usage)?;
            vec![run_case2(&cfg)?]
        }
    };
    let dir = out_dir(config)?;
    write_simulation_outputs(&dir, case, &runs)?;
    let mut bundle = ReportBundle::new(config);
    bundle.aggregates = runs.into_iter().map(|r| r.aggregate).collect();
    write_json(&dir.join("report.json"), &bundle)?;
    bundle.wall_seconds = started.elapsed().as_secs_f64();
    write_timing(&dir, bundle.wall_seconds)?;
    Ok(bundle)
}

/// Runs one command inside a pool of `config.threads` workers.
pub fn run(config: &RunConfig) -> Result<ReportBundle, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", config.threads)))?;
    pool.install(|| match config.command {
        Command::Select => cmd_select(config),
        Command::Panel => cmd_panel(config),
        Command::Simulate => cmd_simulate(config),
    })
}
