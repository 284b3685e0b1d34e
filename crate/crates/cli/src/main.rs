use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ranksel_cli::config::{parse_kv, read_kv_file};
use ranksel_cli::{run, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "ranksel", version, about = "Rank-sum robust model selection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit candidate learners on a CSV dataset and build their confidence set.
    Select(SelectArgs),
    /// Confidence set from a precomputed loss panel.
    Panel(PanelArgs),
    /// Run a simulation design.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Bootstrap draws.
    #[arg(long = "B", visible_alias = "draws")]
    draws: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Bootstrap score construction: symmetrized or row_only.
    #[arg(long)]
    projection: Option<String>,
    /// Screen out competitors the reference already beats decisively.
    #[arg(long)]
    screening: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Extra `key=value` assignments, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated: ols, huber, huber_lasso.
    #[arg(long)]
    learners: Option<String>,
    /// Loss on out-of-sample residuals: squared, absolute or huber.
    #[arg(long)]
    loss: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PanelArgs {
    #[arg(long)]
    losses: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Case1,
    Case2,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    case: Case,
    #[arg(long)]
    reps: Option<usize>,
    /// Sample size(s), comma-separated for a case1 sweep.
    #[arg(long)]
    n: Option<String>,
    #[command(flatten)]
    common: Common,
}

fn push(pairs: &mut Vec<(String, String)>, key: &str, value: Option<String>) {
    if let Some(v) = value {
        pairs.push((key.to_string(), v));
    }
}

fn apply_common(pairs: &mut Vec<(String, String)>, c: &Common) -> Result<(), CliError> {
    push(pairs, "seed", c.seed.map(|v| v.to_string()));
    push(pairs, "out", c.out.as_ref().map(|p| p.to_string_lossy().into_owned()));
    push(pairs, "alpha", c.alpha.map(|v| v.to_string()));
    push(pairs, "draws", c.draws.map(|v| v.to_string()));
    push(pairs, "folds", c.folds.map(|v| v.to_string()));
    push(pairs, "projection", c.projection.clone());
    if c.screening {
        pairs.push(("screening".into(), "true".into()));
    }
    push(pairs, "threads", c.threads.map(|v| v.to_string()));
    for s in &c.set {
        pairs.extend(parse_kv(s)?);
    }
    Ok(())
}

fn base_pairs(common: &Common) -> Result<Vec<(String, String)>, CliError> {
    match &common.config {
        Some(path) => read_kv_file(path),
        None => Ok(Vec::new()),
    }
}

fn to_config(cli: Cli) -> Result<RunConfig, CliError> {
    let mut pairs;
    match cli.command {
        Cmd::Select(a) => {
            pairs = base_pairs(&a.common)?;
            pairs.push(("command".into(), "select".into()));
            push(&mut pairs, "data", a.data.map(|p| p.to_string_lossy().into_owned()));
            push(&mut pairs, "response", a.response);
            push(&mut pairs, "learners", a.learners);
            push(&mut pairs, "loss", a.loss);
            apply_common(&mut pairs, &a.common)?;
        }
        Cmd::Panel(a) => {
            pairs = base_pairs(&a.common)?;
            pairs.push(("command".into(), "panel".into()));
            push(&mut pairs, "losses", a.losses.map(|p| p.to_string_lossy().into_owned()));
            apply_common(&mut pairs, &a.common)?;
        }
        Cmd::Simulate(a) => {
            pairs = base_pairs(&a.common)?;
            pairs.push(("command".into(), "simulate".into()));
            let case = match a.case {
                Case::Case1 => "case1",
                Case::Case2 => "case2",
            };
            pairs.push(("case".into(), case.into()));
            push(&mut pairs, "reps", a.reps.map(|v| v.to_string()));
            push(&mut pairs, "n", a.n);
            apply_common(&mut pairs, &a.common)?;
        }
    }
    RunConfig::from_pairs(&pairs)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = to_config(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(bundle) => {
            if let Some(set) = &bundle.confidence_set {
                let ids: Vec<&str> = set.selected.iter().map(|&m| set.model_ids[m].as_str()).collect();
                println!("selected {} of {} models: {}", ids.len(), set.model_ids.len(), ids.join(", "));
            }
            for agg in &bundle.aggregates {
                println!("{} n={}: {} replicates ({} failed)", agg.case, agg.n, agg.reps, agg.failed_replicates);
            }
        }
        Err(e) => {
            eprintln!("ranksel: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
