use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use xai::artifact::RunDir;
use xai::config::{ConfigValue, List, RunConfig};
use xai::pipeline::{Pipeline, CONFIG};
use xai::{Result, XaiError};
use xai_core::probe::Placement;
use xai_core::surrogate::SurrogateKind;

#[derive(Debug, Parser)]
#[command(name = "xai", version, about = "Train a black-box classifier and explain it through attention ranking and tree surrogates")]
struct Cli {
    #[command(subcommand)]
    stage: Stage,
    /// Flat `key = value` config file. Defaults to the run directory's
    /// saved config when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "run")]
    run_dir: PathBuf,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, global = true, value_parser = parse_with::<Placement>)]
    placement: Option<Placement>,
    #[arg(long, global = true, value_parser = parse_with::<SurrogateKind>)]
    surrogate: Option<SurrogateKind>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Held-out row to explain (repeatable).
    #[arg(long, global = true)]
    instance: Vec<usize>,
    /// Any config key, e.g. `--set cae.epochs=10` (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Stage {
    /// Load `data.path` and split it.
    Ingest,
    /// Generate a synthetic dataset and split it.
    Synth,
    /// Train the autoencoder classifier and write its checkpoint.
    TrainBlackbox,
    /// Fit the attention probe and rank input features.
    Probe,
    /// Perturb each feature and record the prediction-error shift.
    Sensitivity,
    /// Fit a tree surrogate on the top-k features and score its R².
    Surrogate,
    /// Permutation, impurity and Shapley importances of the surrogate.
    Importance,
    /// Extract a decision list from the surrogate's trees.
    Rules,
    /// Local Shapley values and counterfactuals for `explain.instances`.
    Explain,
    /// Prediction change when one top-k feature is removed.
    Whatif,
    /// Assemble report.json from the saved artifacts.
    Report,
    /// Every stage in order.
    RunAll,
    /// Print the resolved configuration.
    Config,
}

fn parse_with<T: ConfigValue>(s: &str) -> std::result::Result<T, String> {
    T::parse_value(s)
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let saved = cli.run_dir.join(CONFIG);
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if saved.exists() => RunConfig::load(&saved)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| XaiError::Usage(format!("--set expects KEY=VALUE, got `{o}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(k) = cli.top_k {
        cfg.top_k = k;
    }
    if let Some(p) = cli.placement {
        cfg.probe_placement = p;
    }
    if let Some(s) = cli.surrogate {
        cfg.surrogate_kind = s;
    }
    if !cli.instance.is_empty() {
        cfg.explain_instances = List(cli.instance.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve(cli)?;
    if let Stage::Config = cli.stage {
        print!("{}", cfg.to_text());
        println!("# hash {}", cfg.hash());
        return Ok(());
    }
    let mut p = Pipeline::new(cfg, RunDir::create(&cli.run_dir)?, cli.threads)?;
    p.verbose = true;
    match cli.stage {
        Stage::Ingest => p.ingest(),
        Stage::Synth => p.synth(),
        Stage::TrainBlackbox => p.train_blackbox().map(drop),
        Stage::Probe => p.probe().map(drop),
        Stage::Sensitivity => p.sensitivity().map(drop),
        Stage::Surrogate => p.surrogate().map(drop),
        Stage::Importance => p.importance().map(drop),
        Stage::Rules => p.rules().map(drop),
        Stage::Explain => p.explain().map(drop),
        Stage::Whatif => p.whatif().map(drop),
        Stage::Report => p.report().map(drop),
        Stage::RunAll => p.run_all().map(drop),
        Stage::Config => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
