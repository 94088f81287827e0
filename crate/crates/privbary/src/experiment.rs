//! Seeded experiment sweeps.
//!
//! One dataset is drawn from `derive(seed, 1)` and shared by every trial and
//! grid point of a sweep that does not change `n`. Trial `t` runs the
//! mechanism with `derive(derive(seed, 2), t)`. The non-private reference
//! runs once per grid point with `derive(seed, 3)`, so the `nonprivate`
//! pipeline is identical across trials.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use privbary_core::dp::{PrivacyBudget, Strictness};
use privbary_core::metrics::evaluate;
use privbary_core::ot::OtMethod;
use privbary_core::rng::{child_rng, derive_seed};
use privbary_core::synth::{circle, gen_counterexample_1d, gen_gaussian_mixture, quadrant_centers, DEFAULT_MIXTURE_STDDEV};
use privbary_core::{Dataset, DiscreteMeasure};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{fmt_f64, ingest_measure_csv, write_json, VERSION};
use crate::settings::{run_pipeline, PipelineKind, Resolved, RunSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// `k` measures of `n` draws each from the four-component mixture centred
    /// at `(±1/4, ±1/4, 0, …)`.
    SyntheticGaussians {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_stddev")]
        stddev: f64,
    },
    /// The one-dimensional neighbouring pair as a two-measure dataset.
    #[serde(rename = "counterexample_1d")]
    Counterexample1d {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_e")]
        e: f64,
    },
    /// Two `n`-point circles, the second rotated by half a step.
    CircleInstability {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    CustomCsv { paths: Vec<PathBuf> },
}

fn default_n() -> usize {
    1000
}
fn default_d() -> usize {
    10
}
fn default_k() -> usize {
    1
}
fn default_stddev() -> f64 {
    DEFAULT_MIXTURE_STDDEV
}
fn default_e() -> f64 {
    0.5
}
fn default_radius() -> f64 {
    0.5
}

impl Scenario {
    fn with_n(&self, new_n: usize) -> Result<Scenario> {
        let mut s = self.clone();
        match &mut s {
            Scenario::SyntheticGaussians { n, .. }
            | Scenario::Counterexample1d { n, .. }
            | Scenario::CircleInstability { n, .. } => *n = new_n,
            Scenario::CustomCsv { .. } => bail!("cannot sweep n over a custom_csv scenario"),
        }
        Ok(s)
    }

    /// Relative paths in `custom_csv` resolve against `base`.
    pub fn generate(&self, seed: u64, base: &Path) -> Result<Dataset> {
        Ok(match self {
            Scenario::SyntheticGaussians { n, d, k, stddev } => {
                let centers = quadrant_centers(*d);
                let measures = (0..*k)
                    .map(|i| gen_gaussian_mixture(*n, &centers, *stddev, &mut child_rng(seed, i as u64)))
                    .collect::<privbary_core::Result<Vec<_>>>()?;
                Dataset::new(measures)?
            }
            Scenario::Counterexample1d { n, e } => {
                let (a, b) = gen_counterexample_1d(*n, *e)?;
                Dataset::new(vec![a, b])?
            }
            Scenario::CircleInstability { n, radius } => {
                let step = std::f64::consts::PI / *n as f64;
                Dataset::new(vec![circle(*n, *radius, 0.0)?, circle(*n, *radius, step)?])?
            }
            Scenario::CustomCsv { paths } => {
                if paths.is_empty() {
                    bail!("custom_csv needs at least one path");
                }
                let measures = paths
                    .iter()
                    .map(|p| ingest_measure_csv(&base.join(p)).map(|i| i.measure))
                    .collect::<Result<Vec<DiscreteMeasure>>>()?;
                Dataset::new(measures)?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    N,
    Epsilon,
    DPrime,
    KPrime,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::Epsilon => "epsilon",
            SweepParam::DPrime => "d_prime",
            SweepParam::KPrime => "k_prime",
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, SweepParam::Epsilon)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `Σ_i β_i W_p^p(μ_i, ν)` of the released barycenter on the raw data.
    CostPrivate,
    CostNonprivate,
    /// `W_p` between the released and the non-private barycenter.
    WPBetween,
    CostRatio,
    EpsilonCharged,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::CostPrivate => "cost_private",
            Metric::CostNonprivate => "cost_nonprivate",
            Metric::WPBetween => "w_p_between",
            Metric::CostRatio => "cost_ratio",
            Metric::EpsilonCharged => "epsilon_charged",
        }
    }
}

fn default_trials() -> usize {
    1
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::CostPrivate]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub pipeline: PipelineKind,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: RunSettings,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.metrics.is_empty() {
            bail!("at least one metric is required");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                bail!("sweep over {} has no values", sweep.param.name());
            }
            for &v in &sweep.values {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("sweep values must be positive; got {v}");
                }
                if sweep.param.is_integer() && v.fract() != 0.0 {
                    bail!("sweep over {} needs integer values; got {v}", sweep.param.name());
                }
            }
        }
        Ok(())
    }
}

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub param: String,
    pub value: f64,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

/// One row of `trials.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub param: String,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub metric: Metric,
    pub result: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridPointRecord {
    pub value: Option<f64>,
    pub settings: Resolved,
    pub declared: Option<PrivacyBudget>,
    pub charged: Option<PrivacyBudget>,
    pub strictness: Strictness,
    pub trial_seeds: Vec<u64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub data_seed: u64,
    pub reference_seed: u64,
    pub status: String,
    pub error: Option<String>,
    pub config: ExperimentConfig,
    pub grid: Vec<GridPointRecord>,
    pub wall_clock_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialRow>,
    pub manifest: Manifest,
}

struct TrialResult {
    metrics: Vec<f64>,
    declared: Option<PrivacyBudget>,
    charged: Option<PrivacyBudget>,
    strictness: Strictness,
    warnings: Vec<String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_trial(
    kind: PipelineKind,
    data: &Dataset,
    settings: &Resolved,
    reference: &DiscreteMeasure,
    metrics: &[Metric],
) -> Result<TrialResult> {
    let (released, report) = if kind == PipelineKind::Nonprivate {
        (reference.clone(), None)
    } else {
        let out = run_pipeline(kind, data, settings)?;
        (out.measure, out.report)
    };
    let eval = evaluate(&released, reference, data, settings.p, &OtMethod::exact_uncapped())?;
    let charged = report.as_ref().map(|r| r.privacy_charged);
    let values = metrics
        .iter()
        .map(|m| match m {
            Metric::CostPrivate => eval.cost_private,
            Metric::CostNonprivate => eval.cost_nonprivate,
            Metric::WPBetween => eval.w_p_between,
            Metric::CostRatio => eval.cost_ratio(),
            Metric::EpsilonCharged => charged.map_or(0.0, |c| c.epsilon),
        })
        .collect();
    Ok(TrialResult {
        metrics: values,
        declared: report.as_ref().map(|r| r.declared),
        charged,
        strictness: report.as_ref().map_or(Strictness::NonPrivate, |r| r.strictness),
        warnings: report.map(|r| r.provenance.warnings).unwrap_or_default(),
    })
}

fn apply_sweep(param: SweepParam, value: f64, base: &RunSettings) -> RunSettings {
    let mut s = base.clone();
    match param {
        SweepParam::N => {}
        SweepParam::Epsilon => s.epsilon = Some(value),
        SweepParam::DPrime => s.d_prime = Some(value as usize),
        SweepParam::KPrime => s.k_prime = Some(value as usize),
    }
    s
}

/// Runs every grid point. Trials of a grid point run in parallel; rows are
/// emitted in grid and trial order regardless of scheduling. On a failed
/// trial the rows of finished grid points are kept and the manifest records
/// the error with status `partial`.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path) -> ExperimentOutcome {
    let start = Instant::now();
    let master = config.settings.seed.unwrap_or(0);
    let data_seed = derive_seed(master, 1);
    let trial_base = derive_seed(master, 2);
    let reference_seed = derive_seed(master, 3);
    let mut summary = Vec::new();
    let mut trials = Vec::new();
    let mut grid = Vec::new();

    let points: Vec<Option<f64>> = match &config.sweep {
        Some(s) => s.values.iter().map(|v| Some(*v)).collect(),
        None => vec![None],
    };
    let param_name = config.sweep.as_ref().map_or("none", |s| s.param.name()).to_string();

    let mut run = || -> Result<()> {
        config.validate()?;
        let shared = match &config.sweep {
            Some(s) if s.param == SweepParam::N => None,
            _ => Some(config.scenario.generate(data_seed, base_dir)?),
        };
        for value in &points {
            let (data, settings) = match (value, &config.sweep) {
                (Some(v), Some(s)) => {
                    let data = match &shared {
                        Some(d) => d.clone(),
                        None => config.scenario.with_n(*v as usize)?.generate(data_seed, base_dir)?,
                    };
                    (data, apply_sweep(s.param, *v, &config.settings))
                }
                _ => (shared.clone().expect("unswept data"), config.settings.clone()),
            };
            let mut reference_settings = settings.clone();
            reference_settings.seed = Some(reference_seed);
            let reference = run_pipeline(PipelineKind::Nonprivate, &data, &reference_settings.resolve())
                .context("non-private reference")?
                .measure;
            let seeds: Vec<u64> = (0..config.trials).map(|t| derive_seed(trial_base, t as u64)).collect();
            let results: Vec<Result<TrialResult>> = seeds
                .par_iter()
                .map(|&seed| {
                    let mut s = settings.clone();
                    s.seed = Some(seed);
                    run_trial(config.pipeline, &data, &s.resolve(), &reference, &config.metrics)
                })
                .collect();
            let mut ok = Vec::with_capacity(results.len());
            for (t, r) in results.into_iter().enumerate() {
                ok.push(r.with_context(|| format!("trial {t} at {param_name} = {value:?}"))?);
            }
            let row_value = value.unwrap_or(0.0);
            for (j, metric) in config.metrics.iter().enumerate() {
                let xs: Vec<f64> = ok.iter().map(|r| r.metrics[j]).collect();
                let (mean, std) = mean_std(&xs);
                summary.push(SummaryRow {
                    param: param_name.clone(),
                    value: row_value,
                    metric: *metric,
                    mean,
                    std,
                    trials: xs.len(),
                });
                for (t, x) in xs.iter().enumerate() {
                    trials.push(TrialRow {
                        param: param_name.clone(),
                        value: row_value,
                        trial: t,
                        seed: seeds[t],
                        metric: *metric,
                        result: *x,
                    });
                }
            }
            let strictness =
                ok.iter().map(|r| r.strictness).reduce(Strictness::combine).unwrap_or(Strictness::NonPrivate);
            let mut warnings: Vec<String> = ok.iter().flat_map(|r| r.warnings.iter().cloned()).collect();
            warnings.sort();
            warnings.dedup();
            grid.push(GridPointRecord {
                value: *value,
                settings: settings.resolve(),
                declared: ok[0].declared,
                charged: ok[0].charged,
                strictness,
                trial_seeds: seeds,
                warnings,
            });
        }
        Ok(())
    };
    let result = run();
    let error = result.err().map(|e| format!("{e:#}"));
    ExperimentOutcome {
        summary,
        trials,
        manifest: Manifest {
            version: VERSION.into(),
            seed: master,
            data_seed,
            reference_seed,
            status: if error.is_some() { "partial" } else { "complete" }.into(),
            error,
            config: config.clone(),
            grid,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    }
}

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], seed: u64, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "# privbary {VERSION} seed {seed}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(f);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl SummaryRow {
    fn cells(&self) -> [String; 6] {
        [
            self.param.clone(),
            fmt_f64(self.value),
            self.metric.name().into(),
            fmt_f64(self.mean),
            fmt_f64(self.std),
            self.trials.to_string(),
        ]
    }
}

impl TrialRow {
    fn cells(&self) -> [String; 6] {
        [
            self.param.clone(),
            fmt_f64(self.value),
            self.trial.to_string(),
            self.seed.to_string(),
            self.metric.name().into(),
            fmt_f64(self.result),
        ]
    }
}

/// Writes `results.csv`, `trials.csv` and `manifest.json` into `dir`.
pub fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let seed = outcome.manifest.seed;
    let summary: Vec<_> = outcome.summary.iter().map(SummaryRow::cells).collect();
    write_rows(&summary, &["param", "value", "metric", "mean", "std", "trials"], seed, &dir.join("results.csv"))?;
    let trials: Vec<_> = outcome.trials.iter().map(TrialRow::cells).collect();
    write_rows(&trials, &["param", "value", "trial", "seed", "metric", "result"], seed, &dir.join("trials.csv"))?;
    write_json(&outcome.manifest, &dir.join("manifest.json"))
}
