//! Command-line surface. Every run parameter can come from a config file
//! (`--config`, TOML or JSON); flags given on the command line win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use privbary_core::coreset::{build_coreset, CoresetConfig};
use privbary_core::metrics::evaluate;
use privbary_core::ot::OtMethod;
use privbary_core::pipelines::{split_distribution, RemainderPolicy};
use privbary_core::{Dataset, DiscreteMeasure};
use serde::{Deserialize, Serialize};

use crate::experiment::{run_experiment, write_outcome, ExperimentConfig};
use crate::io::{emit_measure_csv, ingest_measure_csv, read_config, read_region, write_json, CountsFile, ReportFile, Stamped, VERSION};
use crate::settings::{run_pipeline, PipelineKind, RunSettings};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PRIVBARY_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "privbary-out";

#[derive(Debug, Parser)]
#[command(name = "privbary", version, about = "Differentially private Wasserstein barycenters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Private coreset of one measure.
    Coreset(CoresetArgs),
    /// Barycenter of several measures with one of the pipelines.
    Barycenter(BarycenterArgs),
    /// Random split of a uniform measure into k' disjoint parts.
    Split(SplitArgs),
    /// Costs of a private and a non-private barycenter on the raw data.
    Evaluate(EvaluateArgs),
    /// Seeded sweep described by a config file.
    Experiment(ExperimentArgs),
}

/// Flags shared by every verb that runs a mechanism.
#[derive(Debug, Default, Clone, Args)]
pub struct SettingsArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Number of support points of the barycenter.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub k_prime: Option<usize>,
    #[arg(long)]
    pub d_prime: Option<usize>,
    /// Sinkhorn regularization.
    #[arg(long)]
    pub reg: Option<f64>,
    #[arg(long)]
    pub outer_iters: Option<usize>,
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Shrink the noise by (240 d)^(-1/d); outputs are tagged heuristic.
    #[arg(long)]
    pub heuristic_noise: bool,
    /// Give the n mod k' leftover atoms of a split to the first parts.
    #[arg(long)]
    pub distribute_remainder: bool,
}

impl SettingsArgs {
    pub fn to_settings(&self) -> RunSettings {
        RunSettings {
            seed: self.seed,
            m: self.m,
            p: self.p,
            epsilon: self.epsilon,
            delta: self.delta,
            d_prime: self.d_prime,
            k_prime: self.k_prime,
            reg: self.reg,
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters,
            heuristic_noise: self.heuristic_noise.then_some(true),
            distribute_remainder: self.distribute_remainder.then_some(true),
        }
    }
}

/// Config file accepted by `coreset` and `barycenter`.
#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct VerbConfig {
    pub inputs: Vec<PathBuf>,
    pub pipeline: Option<PipelineKind>,
    pub region: Option<PathBuf>,
    pub levels: Option<u32>,
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

fn load_verb_config(path: Option<&Path>) -> Result<VerbConfig> {
    path.map_or_else(|| Ok(VerbConfig::default()), read_config)
}

/// Flag, then config value, then `$PRIVBARY_OUTPUT_DIR`, then `./privbary-out`.
pub fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.or(config)
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_measures(paths: &[PathBuf]) -> Result<Dataset> {
    if paths.is_empty() {
        bail!("no input measures given");
    }
    let mut measures = Vec::with_capacity(paths.len());
    for p in paths {
        let ing = ingest_measure_csv(p)?;
        for w in ing.warnings {
            eprintln!("warning: {}: {w}", p.display());
        }
        measures.push(ing.measure);
    }
    Ok(Dataset::new(measures)?)
}

fn provenance_comments(seed: u64, what: &str) -> Vec<String> {
    vec![format!("privbary {VERSION} seed {seed} {what}")]
}

#[derive(Debug, Args)]
pub struct CoresetArgs {
    /// Measure CSV.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Region JSON; synthesized points are kept inside it.
    #[arg(long)]
    pub region: Option<PathBuf>,
    /// Leaf level of the dyadic tree; derived from epsilon and n when unset.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Output measure CSV (default `<output dir>/coreset.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the noisy counts as JSON.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn cmd_coreset(args: &CoresetArgs) -> Result<()> {
    let file = load_verb_config(args.config.as_deref())?;
    let s = file.settings.overlay(&args.settings.to_settings()).resolve();
    let input = args.input.clone().or_else(|| file.inputs.first().cloned()).context("--input is required")?;
    let ing = ingest_measure_csv(&input)?;
    for w in &ing.warnings {
        eprintln!("warning: {}: {w}", input.display());
    }
    let mut config = CoresetConfig::new(s.epsilon, s.seed);
    config.levels = args.levels.or(file.levels);
    config.noise_multiplier = s.noise_multiplier(ing.measure.dim());
    if let Some(r) = args.region.as_ref().or(file.region.as_ref()) {
        config.region = Some(read_region(r)?);
    }
    let core = build_coreset(&ing.measure, &config)?;
    let out = args.output.clone().unwrap_or_else(|| output_dir(None, file.output.as_deref()).join("coreset.csv"));
    ensure_parent(&out)?;
    let tag = format!("coreset epsilon {} strictness {:?}", s.epsilon, core.strictness);
    emit_measure_csv(&core.measure, &provenance_comments(s.seed, &tag), &out)?;
    if let Some(c) = &args.counts {
        ensure_parent(c)?;
        write_json(&Stamped::new(s.seed, CountsFile { counts: core.counts }), c)?;
    }
    println!("{}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BarycenterArgs {
    /// Measure CSVs, one per input distribution.
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub pipeline: Option<PipelineKind>,
    /// Output measure CSV (default `<output dir>/barycenter.csv`).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Report JSON with the privacy ledger and provenance.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn cmd_barycenter(args: &BarycenterArgs) -> Result<()> {
    let file = load_verb_config(args.config.as_deref())?;
    let s = file.settings.overlay(&args.settings.to_settings()).resolve();
    let inputs = if args.inputs.is_empty() { file.inputs.clone() } else { args.inputs.clone() };
    let kind = args.pipeline.or(file.pipeline).unwrap_or(PipelineKind::Coreset);
    let data = load_measures(&inputs)?;
    let out_put = run_pipeline(kind, &data, &s)?;
    let out = args.output.clone().unwrap_or_else(|| output_dir(None, file.output.as_deref()).join("barycenter.csv"));
    ensure_parent(&out)?;
    let strictness = out_put.report.as_ref().map_or("non_private".to_string(), |r| format!("{:?}", r.strictness));
    let tag = format!("{} strictness {strictness}", kind.name());
    emit_measure_csv(&out_put.measure, &provenance_comments(s.seed, &tag), &out)?;
    if let Some(r) = &args.report {
        let Some(report) = out_put.report else { bail!("the nonprivate pipeline has no report") };
        ensure_parent(r)?;
        for w in &report.provenance.warnings {
            eprintln!("warning: {w}");
        }
        write_json(&Stamped::new(s.seed, ReportFile { report }), r)?;
    }
    println!("{}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k_prime: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `part_<i>.csv` (default: the output directory).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub distribute_remainder: bool,
}

pub fn cmd_split(args: &SplitArgs) -> Result<()> {
    let ing = ingest_measure_csv(&args.input)?;
    let policy = if args.distribute_remainder { RemainderPolicy::Distribute } else { RemainderPolicy::Drop };
    let split = split_distribution(&ing.measure, args.k_prime, args.seed, policy)?;
    let dir = output_dir(args.output.as_deref(), None);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let width = split.parts.len().to_string().len();
    for (i, part) in split.parts.iter().enumerate() {
        let tag = format!("split part {i} of {}", split.parts.len());
        emit_measure_csv(part, &provenance_comments(args.seed, &tag), &dir.join(format!("part_{i:0width$}.csv")))?;
    }
    if split.dropped > 0 {
        eprintln!("warning: dropped {} atoms", split.dropped);
    }
    println!("{}", dir.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub private: PathBuf,
    #[arg(long)]
    pub nonprivate: PathBuf,
    /// Measure CSVs of the raw data.
    #[arg(long = "data", num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Write the metrics JSON here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let private: DiscreteMeasure = ingest_measure_csv(&args.private)?.measure;
    let nonprivate: DiscreteMeasure = ingest_measure_csv(&args.nonprivate)?.measure;
    let data = load_measures(&args.data)?;
    let eval = evaluate(&private, &nonprivate, &data, args.p, &OtMethod::exact_uncapped())?;
    match &args.output {
        Some(path) => {
            ensure_parent(path)?;
            write_json(&eval, path)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&eval)?),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub pipeline: Option<PipelineKind>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Directory for `results.csv`, `trials.csv` and `manifest.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

pub fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let mut config: ExperimentConfig = read_config(&args.config)?;
    config.settings = config.settings.overlay(&args.settings.to_settings());
    if let Some(p) = args.pipeline {
        config.pipeline = p;
    }
    if let Some(t) = args.trials {
        config.trials = t;
    }
    let dir = output_dir(args.output.as_deref(), config.output.as_deref());
    config.output = Some(dir.clone());
    let base = args.config.parent().unwrap_or(Path::new("."));
    let outcome = run_experiment(&config, base);
    write_outcome(&outcome, &dir)?;
    if let Some(e) = &outcome.manifest.error {
        bail!("experiment stopped early ({} rows written): {e}", outcome.summary.len());
    }
    println!("{}", dir.display());
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Coreset(a) => cmd_coreset(a),
        Command::Barycenter(a) => cmd_barycenter(a),
        Command::Split(a) => cmd_split(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}
