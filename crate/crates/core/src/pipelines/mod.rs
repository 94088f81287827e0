//! End-to-end private barycenter algorithms.
//!
//! Every pipeline runs the same approximate barycenter step (see
//! [`approx_barycenter`]): optionally project with a Gaussian JL map, run the
//! free-support solver in the projected space, read a solution off exact
//! couplings to the projected measures, and place each support point at the
//! `p`-center of its preimage in the original space.
//!
//! Randomness is derived from the pipeline seed by tag:
//! projection `1`, free-support initialisation `2`, Gaussian noise `3`,
//! coreset of measure `i` at `1000 + i`, split of measure `i` at `2000 + i`.

mod cluster;
mod split;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::barycenter::{
    cost_with_support, free_support_barycenter, solution_weights, support_points, BarycenterResult, FreeSupportParams,
};
use crate::coreset::{build_coreset, CellSampler, CoresetConfig, LevelAllocation};
use crate::dp::{gaussian_mechanism, PrivacyBudget, PrivacyLedger, Scope, Share, Strictness};
use crate::error::{Error, Result};
use crate::jl::{sample_projection, Projection};
use crate::math::{check_p, sqrt};
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::{OtMethod, SinkhornParams};
use crate::region::RegionPolygon;
use crate::rng::{child_rng, derive_seed};

pub use cluster::{clusterability_profile, clusterable_convergence_bound, ClusterProfile};
pub use split::{optimal_k_prime, split_distribution, RemainderPolicy, Split};

const TAG_PROJECTION: u64 = 1;
const TAG_INIT: u64 = 2;
const TAG_NOISE: u64 = 3;
const TAG_CORESET: u64 = 1000;
const TAG_SPLIT: u64 = 2000;

/// Settings of the approximate barycenter step shared by all pipelines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub sinkhorn: SinkhornParams,
    pub outer_iters: usize,
    pub tol: f64,
    /// Solver used to read the solution off the free-support output.
    pub weights_method: OtMethod,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self {
            sinkhorn: SinkhornParams::new(1e-2, 1000),
            outer_iters: 50,
            tol: 1e-7,
            weights_method: OtMethod::exact_uncapped(),
        }
    }
}

/// Reproducibility record attached to every [`PipelineReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pipeline: String,
    pub seed: u64,
    pub d: usize,
    pub d_prime: usize,
    pub projection_used: bool,
    pub k: usize,
    pub k_prime: Option<usize>,
    /// Calibrated Gaussian variance before the multiplier.
    pub sigma2: Option<f64>,
    pub noise_multiplier: f64,
    pub outer_iterations: usize,
    pub outer_converged: bool,
    pub inner_converged: bool,
    pub reg: f64,
    pub inner_iters: usize,
    pub dropped_atoms: usize,
    pub coreset_sizes: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Output of a pipeline.
///
/// `barycenter.measure` is the release. `barycenter.cost` is the solution
/// cost against whatever the solver saw: private coresets for
/// [`coreset_barycenter`], raw data (before noise) for the output
/// perturbation pipelines, where it is a diagnostic outside the guarantee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub barycenter: BarycenterResult,
    pub declared: PrivacyBudget,
    pub privacy_charged: PrivacyBudget,
    pub strictness: Strictness,
    pub ledger: PrivacyLedger,
    pub provenance: Provenance,
}

impl PipelineReport {
    fn finish(
        barycenter: BarycenterResult,
        ledger: PrivacyLedger,
        strictness: Strictness,
        provenance: Provenance,
    ) -> Result<Self> {
        Ok(Self {
            barycenter,
            declared: ledger.declared(),
            privacy_charged: ledger.charged()?,
            strictness,
            ledger,
            provenance,
        })
    }
}

/// Approximate barycenter with uniform weights, computed in the projected
/// space when `projection` is given.
pub fn approx_barycenter(
    data: &Dataset,
    m: usize,
    p: f64,
    approx: &ApproxParams,
    projection: Option<&Projection>,
    seed: u64,
) -> Result<BarycenterResult> {
    check_p(p)?;
    let projected;
    let solve_on = match projection {
        Some(pi) => {
            if pi.input_dim() != data.dim() {
                return Err(Error::DimensionMismatch { expected: data.dim(), found: pi.input_dim() });
            }
            projected = data.try_map(|mu| pi.project_measure(mu))?;
            &projected
        }
        None => data,
    };
    let params = FreeSupportParams {
        m,
        p,
        sinkhorn: approx.sinkhorn,
        outer_iters: approx.outer_iters,
        tol: approx.tol,
        seed: derive_seed(seed, TAG_INIT),
    };
    let fs = free_support_barycenter(solve_on, &params, None)?;
    let solution = solution_weights(&fs.measure, solve_on, p, &approx.weights_method)?;
    let lifted = support_points(data, &solution, p)?;
    let measure = DiscreteMeasure::uniform(data.dim(), lifted.coords().to_vec())?;
    let cost = cost_with_support(data, &solution, &measure, p);
    Ok(BarycenterResult { measure, cost, ..fs })
}

/// Resolves the projection for a requested `d'`: `None` when no projection
/// is applied.
/// The projection a pipeline seeded with `seed` uses; `None` when `d' ≥ d`.
pub fn projection_for(d: usize, d_prime: Option<usize>, seed: u64) -> Result<Option<Projection>> {
    match d_prime {
        Some(0) => Err(Error::InvalidParameter { name: "d_prime", value: 0.0 }),
        Some(dp) if dp < d => Ok(Some(sample_projection(d, dp, derive_seed(seed, TAG_PROJECTION))?)),
        _ => Ok(None),
    }
}

fn provenance(pipeline: &str, data: &Dataset, d_prime: Option<usize>, seed: u64, approx: &ApproxParams) -> Provenance {
    let d = data.dim();
    let used = matches!(d_prime, Some(dp) if dp < d);
    Provenance {
        pipeline: pipeline.into(),
        seed,
        d,
        d_prime: if used { d_prime.unwrap_or(d) } else { d },
        projection_used: used,
        k: data.len(),
        k_prime: None,
        sigma2: None,
        noise_multiplier: 1.0,
        outer_iterations: 0,
        outer_converged: false,
        inner_converged: false,
        reg: approx.sinkhorn.reg,
        inner_iters: approx.sinkhorn.max_iters,
        dropped_atoms: 0,
        coreset_sizes: Vec::new(),
        warnings: Vec::new(),
    }
}

fn record_solver(prov: &mut Provenance, b: &BarycenterResult) {
    prov.outer_iterations = b.iterations_run;
    prov.outer_converged = b.converged;
    prov.inner_converged = b.inner_converged;
    if !b.inner_converged {
        prov.warnings.push("an inner Sinkhorn solve hit its iteration cap".into());
    }
    if b.reseeded_atoms > 0 {
        prov.warnings.push(alloc::format!("{} atoms reseeded after losing all mass", b.reseeded_atoms));
    }
}

/// Coreset settings for [`coreset_barycenter`]; the budget and seed come from
/// the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetOptions {
    pub levels: Option<u32>,
    pub sampler: CellSampler,
    pub region: Option<RegionPolygon>,
    pub subsample_to: Option<usize>,
    pub noise_multiplier: f64,
    pub allocation: LevelAllocation,
    /// Test mode: feed the raw measures to the solver instead of coresets.
    /// The report is marked non-private and nothing is charged.
    pub bypass: bool,
}

impl Default for CoresetOptions {
    fn default() -> Self {
        let c = CoresetConfig::new(1.0, 0);
        Self {
            levels: c.levels,
            sampler: c.sampler,
            region: c.region,
            subsample_to: c.subsample_to,
            noise_multiplier: c.noise_multiplier,
            allocation: c.allocation,
            bypass: false,
        }
    }
}

impl CoresetOptions {
    pub fn config(&self, epsilon: f64, seed: u64) -> CoresetConfig {
        CoresetConfig {
            epsilon,
            levels: self.levels,
            sampler: self.sampler,
            region: self.region.clone(),
            subsample_to: self.subsample_to,
            noise_multiplier: self.noise_multiplier,
            allocation: self.allocation,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetBarycenterParams {
    pub m: usize,
    pub p: f64,
    pub epsilon: f64,
    /// Projection dimension; `None` or `d` skips the projection.
    pub d_prime: Option<usize>,
    pub approx: ApproxParams,
    pub coreset: CoresetOptions,
    pub seed: u64,
}

/// Private coreset of every measure at the full `ε` (the measures are
/// disjoint, so the charges compose in parallel), then the approximate
/// barycenter of the coresets. Charges exactly `ε`.
pub fn coreset_barycenter(data: &Dataset, params: &CoresetBarycenterParams) -> Result<PipelineReport> {
    let d = data.dim();
    if let Some(dp) = params.d_prime {
        if dp > d {
            return Err(Error::InvalidParameter { name: "d_prime", value: dp as f64 });
        }
    }
    data.check_bounded()?;
    let declared = PrivacyBudget::pure(params.epsilon)?;
    let mut ledger = PrivacyLedger::new(declared);
    let mut prov = provenance("coreset", data, params.d_prime, params.seed, &params.approx);
    prov.noise_multiplier = params.coreset.noise_multiplier;

    let (coresets, strictness) = if params.coreset.bypass {
        prov.warnings.push("coresets bypassed: output is not private".into());
        (data.clone(), Strictness::NonPrivate)
    } else {
        let mut strictness = Strictness::Strict;
        let mut measures = Vec::with_capacity(data.len());
        for (i, mu) in data.measures().iter().enumerate() {
            let config = params.coreset.config(params.epsilon, derive_seed(params.seed, TAG_CORESET + i as u64));
            let core = build_coreset(mu, &config)?;
            ledger.charge_composed(&alloc::format!("coreset {i}"), Scope::Parallel { group: 0 }, Share::ONE, &core.ledger)?;
            strictness = strictness.combine(core.strictness);
            prov.coreset_sizes.push(core.measure.len());
            measures.push(core.measure);
        }
        (Dataset::with_betas(measures, data.betas().to_vec())?, strictness)
    };

    let projection = projection_for(d, params.d_prime, params.seed)?;
    let bary = approx_barycenter(&coresets, params.m, params.p, &params.approx, projection.as_ref(), params.seed)?;
    record_solver(&mut prov, &bary);
    PipelineReport::finish(bary, ledger, strictness, prov)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPerturbationParams {
    pub m: usize,
    pub p: f64,
    pub budget: PrivacyBudget,
    /// Projection dimension; skipped when `d' ≥ d`.
    pub d_prime: Option<usize>,
    pub approx: ApproxParams,
    /// Scale on the calibrated noise; `0` disables it.
    pub noise_multiplier: f64,
    pub seed: u64,
}

/// Gaussian noise `σ² = 2 m ln(1.25/δ) (max_i β_i)² / ε²` per coordinate of
/// the stacked support, from stacked L2 sensitivity `√m · max_i β_i`.
/// With uniform weights over `k` measures this is `2 m ln(1.25/δ) / (ε k)²`.
pub fn output_perturbation_sigma2(m: usize, betas: &[f64], budget: &PrivacyBudget) -> Result<f64> {
    let beta = betas.iter().copied().fold(0.0, f64::max);
    Ok(crate::dp::gaussian_calibration(sqrt(m as f64) * beta, budget)?.sigma2)
}

fn perturb(
    data: &Dataset,
    params: &OutputPerturbationParams,
    mut prov: Provenance,
) -> Result<PipelineReport> {
    if !(params.budget.delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", value: params.budget.delta });
    }
    data.check_bounded()?;
    let projection = projection_for(data.dim(), params.d_prime, params.seed)?;
    let mut bary = approx_barycenter(data, params.m, params.p, &params.approx, projection.as_ref(), params.seed)?;
    record_solver(&mut prov, &bary);

    let beta = data.betas().iter().copied().fold(0.0, f64::max);
    let sensitivity = sqrt(params.m as f64) * beta;
    let mut ledger = PrivacyLedger::new(params.budget);
    let spent = ledger.charge("gaussian output noise", Scope::Sequential, Share::ONE, Share::ONE)?;
    let mut rng = child_rng(params.seed, TAG_NOISE);
    let release = gaussian_mechanism(bary.measure.coords(), sensitivity, &spent, params.noise_multiplier, &mut rng)?;
    if release.calibration.warning.is_some() {
        prov.warnings.push("Gaussian calibration is only proven for epsilon < 1".into());
    }
    prov.sigma2 = Some(release.calibration.sigma2);
    prov.noise_multiplier = params.noise_multiplier;
    bary.measure = DiscreteMeasure::uniform(data.dim(), release.values)?;
    PipelineReport::finish(bary, ledger, release.noise.strictness(), prov)
}

/// Non-private approximate barycenter followed by Gaussian noise on the
/// stacked support coordinates (atom-major). Charges exactly `(ε, δ)`.
pub fn output_perturbation_barycenter(data: &Dataset, params: &OutputPerturbationParams) -> Result<PipelineReport> {
    let prov = provenance("output_perturbation", data, params.d_prime, params.seed, &params.approx);
    perturb(data, params, prov)
}

/// Splits every measure into `k'` disjoint parts, runs the output
/// perturbation pipeline on all `k k'` parts (each weighted `β_i / k'`), so the
/// noise variance shrinks by `k'²`.
pub fn subsampled_output_perturbation(
    data: &Dataset,
    params: &OutputPerturbationParams,
    k_prime: usize,
    policy: RemainderPolicy,
) -> Result<PipelineReport> {
    let mut prov = provenance("subsampled_output_perturbation", data, params.d_prime, params.seed, &params.approx);
    let mut parts = Vec::with_capacity(data.len() * k_prime);
    let mut betas = Vec::with_capacity(data.len() * k_prime);
    for (i, (beta, mu)) in data.iter().enumerate() {
        let s = split_distribution(mu, k_prime, derive_seed(params.seed, TAG_SPLIT + i as u64), policy)?;
        prov.dropped_atoms += s.dropped;
        betas.extend(core::iter::repeat_n(beta / k_prime as f64, s.parts.len()));
        parts.extend(s.parts);
    }
    prov.k_prime = Some(k_prime);
    let split = Dataset::with_betas(parts, betas)?;
    perturb(&split, params, prov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::synth::{gen_gaussian_mixture, quadrant_centers};

    fn mixture(k: usize, n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let ms = (0..k).map(|_| gen_gaussian_mixture(n, &quadrant_centers(d), 0.05, &mut rng).unwrap()).collect();
        Dataset::new(ms).unwrap()
    }

    #[test]
    fn sigma2_examples() {
        let b = PrivacyBudget::new(1.0, 1.0 / 200000.0).unwrap();
        let s = output_perturbation_sigma2(48, &[1.0], &b).unwrap();
        assert!((s - 96.0 * libm::log(250000.0)).abs() < 1e-9);
        let split = output_perturbation_sigma2(48, &[1.0 / 1000.0], &b).unwrap();
        assert!((split - 1.193e-3).abs() < 1e-6, "{split}");
    }

    #[test]
    fn bypass_matches_nonprivate_solver() {
        let data = mixture(2, 40, 3, 1);
        let mut params = CoresetBarycenterParams {
            m: 4,
            p: 2.0,
            epsilon: 1.0,
            d_prime: Some(3),
            approx: ApproxParams::default(),
            coreset: CoresetOptions::default(),
            seed: 9,
        };
        params.coreset.bypass = true;
        let rep = coreset_barycenter(&data, &params).unwrap();
        let direct = approx_barycenter(&data, 4, 2.0, &params.approx, None, 9).unwrap();
        assert_eq!(rep.barycenter.measure, direct.measure);
        assert_eq!(rep.strictness, Strictness::NonPrivate);
    }

    #[test]
    fn coreset_pipeline_charges_epsilon() {
        let data = mixture(3, 60, 2, 2);
        let params = CoresetBarycenterParams {
            m: 4,
            p: 2.0,
            epsilon: 0.7,
            d_prime: None,
            approx: ApproxParams::default(),
            coreset: CoresetOptions::default(),
            seed: 3,
        };
        let rep = coreset_barycenter(&data, &params).unwrap();
        assert_eq!(rep.privacy_charged, rep.declared);
        assert_eq!(rep.provenance.coreset_sizes.len(), 3);
        assert!(rep.barycenter.cost.is_finite());
        let too_big = CoresetBarycenterParams { d_prime: Some(3), ..params };
        assert!(coreset_barycenter(&data, &too_big).is_err());
    }

    #[test]
    fn noise_off_equals_nonprivate() {
        let data = mixture(1, 50, 2, 4);
        let params = OutputPerturbationParams {
            m: 3,
            p: 2.0,
            budget: PrivacyBudget::new(1.0, 1e-5).unwrap(),
            d_prime: None,
            approx: ApproxParams::default(),
            noise_multiplier: 0.0,
            seed: 5,
        };
        let rep = output_perturbation_barycenter(&data, &params).unwrap();
        let direct = approx_barycenter(&data, 3, 2.0, &params.approx, None, 5).unwrap();
        assert_eq!(rep.barycenter.measure, direct.measure);
        assert_eq!(rep.strictness, Strictness::NonPrivate);
        assert_eq!(rep.privacy_charged, params.budget);
        let zero_delta = OutputPerturbationParams { budget: PrivacyBudget::pure(1.0).unwrap(), ..params };
        assert!(output_perturbation_barycenter(&data, &zero_delta).is_err());
    }

    #[test]
    fn subsampled_records_split() {
        let data = mixture(1, 103, 2, 6);
        let params = OutputPerturbationParams {
            m: 2,
            p: 2.0,
            budget: PrivacyBudget::new(1.0, 1e-5).unwrap(),
            d_prime: None,
            approx: ApproxParams::default(),
            noise_multiplier: 1.0,
            seed: 7,
        };
        let rep = subsampled_output_perturbation(&data, &params, 10, RemainderPolicy::Drop).unwrap();
        assert_eq!(rep.provenance.k_prime, Some(10));
        assert_eq!(rep.provenance.dropped_atoms, 3);
        let expected = output_perturbation_sigma2(2, &[0.1], &params.budget).unwrap();
        assert_eq!(rep.provenance.sigma2, Some(expected));
        assert_eq!(rep.privacy_charged, params.budget);
    }
}
