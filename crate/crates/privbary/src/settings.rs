//! Run parameters shared by the CLI verbs and the experiment runner, and the
//! dispatch from a pipeline name to the core algorithms.

use anyhow::{bail, Result};
use privbary_core::dp::{heuristic_noise_multiplier, PrivacyBudget};
use privbary_core::ot::SinkhornParams;
use privbary_core::pipelines::{
    approx_barycenter, coreset_barycenter, optimal_k_prime, output_perturbation_barycenter, projection_for,
    subsampled_output_perturbation, ApproxParams, CoresetBarycenterParams, CoresetOptions, OutputPerturbationParams,
    PipelineReport, RemainderPolicy,
};
use privbary_core::{Dataset, DiscreteMeasure};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    /// Private coresets, then the barycenter of the coresets.
    Coreset,
    /// Non-private barycenter plus Gaussian noise.
    OutputPerturbation,
    /// Output perturbation after splitting every measure into `k'` parts.
    Subsampled,
    /// The approximate barycenter without privacy.
    Nonprivate,
}

impl PipelineKind {
    pub fn name(self) -> &'static str {
        match self {
            PipelineKind::Coreset => "coreset",
            PipelineKind::OutputPerturbation => "output_perturbation",
            PipelineKind::Subsampled => "subsampled",
            PipelineKind::Nonprivate => "nonprivate",
        }
    }
}

/// Every field is optional so that a config file and command-line flags can
/// be layered; [`RunSettings::resolve`] fills in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub p: Option<f64>,
    pub epsilon: Option<f64>,
    /// Defaults to `1/n` for the largest input measure.
    pub delta: Option<f64>,
    pub d_prime: Option<usize>,
    /// Defaults to the optimal `k'` rule.
    pub k_prime: Option<usize>,
    pub reg: Option<f64>,
    pub outer_iters: Option<usize>,
    pub inner_iters: Option<usize>,
    pub heuristic_noise: Option<bool>,
    pub distribute_remainder: Option<bool>,
}

impl RunSettings {
    /// `self` with every field set in `flags` replaced.
    pub fn overlay(&self, flags: &RunSettings) -> RunSettings {
        RunSettings {
            seed: flags.seed.or(self.seed),
            m: flags.m.or(self.m),
            p: flags.p.or(self.p),
            epsilon: flags.epsilon.or(self.epsilon),
            delta: flags.delta.or(self.delta),
            d_prime: flags.d_prime.or(self.d_prime),
            k_prime: flags.k_prime.or(self.k_prime),
            reg: flags.reg.or(self.reg),
            outer_iters: flags.outer_iters.or(self.outer_iters),
            inner_iters: flags.inner_iters.or(self.inner_iters),
            heuristic_noise: flags.heuristic_noise.or(self.heuristic_noise),
            distribute_remainder: flags.distribute_remainder.or(self.distribute_remainder),
        }
    }

    pub fn resolve(&self) -> Resolved {
        Resolved {
            seed: self.seed.unwrap_or(0),
            m: self.m.unwrap_or(8),
            p: self.p.unwrap_or(2.0),
            epsilon: self.epsilon.unwrap_or(1.0),
            delta: self.delta,
            d_prime: self.d_prime,
            k_prime: self.k_prime,
            reg: self.reg.unwrap_or(1e-2),
            outer_iters: self.outer_iters.unwrap_or(50),
            inner_iters: self.inner_iters.unwrap_or(1000),
            heuristic_noise: self.heuristic_noise.unwrap_or(false),
            policy: if self.distribute_remainder.unwrap_or(false) {
                RemainderPolicy::Distribute
            } else {
                RemainderPolicy::Drop
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub seed: u64,
    pub m: usize,
    pub p: f64,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub d_prime: Option<usize>,
    pub k_prime: Option<usize>,
    pub reg: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub heuristic_noise: bool,
    pub policy: RemainderPolicy,
}

impl Resolved {
    pub fn approx(&self) -> ApproxParams {
        ApproxParams {
            sinkhorn: SinkhornParams::new(self.reg, self.inner_iters),
            outer_iters: self.outer_iters,
            ..ApproxParams::default()
        }
    }

    pub fn noise_multiplier(&self, d: usize) -> f64 {
        if self.heuristic_noise {
            heuristic_noise_multiplier(d)
        } else {
            1.0
        }
    }

    pub fn budget(&self, data: &Dataset) -> Result<PrivacyBudget> {
        let n = data.measures().iter().map(|m| m.len()).max().unwrap_or(1);
        Ok(PrivacyBudget::new(self.epsilon, self.delta.unwrap_or(1.0 / n as f64))?)
    }

    /// `k'` for the subsampled pipeline: explicit, or the optimal rule
    /// evaluated on the smallest measure.
    pub fn k_prime_for(&self, data: &Dataset) -> usize {
        self.k_prime.unwrap_or_else(|| {
            let n = data.measures().iter().map(|m| m.len()).min().unwrap_or(1);
            optimal_k_prime(n, self.m, data.dim(), self.epsilon, data.len(), self.p)
        })
    }
}

/// A released barycenter with its report (absent for the non-private run).
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub measure: DiscreteMeasure,
    pub report: Option<PipelineReport>,
}

pub fn run_pipeline(kind: PipelineKind, data: &Dataset, s: &Resolved) -> Result<PipelineOutput> {
    let d = data.dim();
    let approx = s.approx();
    let report = match kind {
        PipelineKind::Nonprivate => {
            let projection = projection_for(d, s.d_prime, s.seed)?;
            let b = approx_barycenter(data, s.m, s.p, &approx, projection.as_ref(), s.seed)?;
            return Ok(PipelineOutput { measure: b.measure, report: None });
        }
        PipelineKind::Coreset => {
            if s.delta.is_some_and(|x| x != 0.0) {
                bail!("the coreset pipeline is pure epsilon-DP; delta must be unset or 0");
            }
            let coreset = CoresetOptions { noise_multiplier: s.noise_multiplier(d), ..CoresetOptions::default() };
            let params = CoresetBarycenterParams {
                m: s.m,
                p: s.p,
                epsilon: s.epsilon,
                d_prime: s.d_prime,
                approx,
                coreset,
                seed: s.seed,
            };
            coreset_barycenter(data, &params)?
        }
        PipelineKind::OutputPerturbation | PipelineKind::Subsampled => {
            let params = OutputPerturbationParams {
                m: s.m,
                p: s.p,
                budget: s.budget(data)?,
                d_prime: s.d_prime,
                approx,
                noise_multiplier: s.noise_multiplier(d),
                seed: s.seed,
            };
            if kind == PipelineKind::Subsampled {
                subsampled_output_perturbation(data, &params, s.k_prime_for(data), s.policy)?
            } else {
                output_perturbation_barycenter(data, &params)?
            }
        }
    };
    Ok(PipelineOutput { measure: report.barycenter.measure.clone(), report: Some(report) })
}
