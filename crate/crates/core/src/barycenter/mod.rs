//! Free-support Wasserstein barycenters.
//!
//! [`free_support_barycenter`] alternates entropic couplings from every input
//! measure to the current support with a support update that moves each atom
//! to the weighted `p`-center of the mass coupled to it.

mod solution;

use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::check_p;
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::{sinkhorn_ot, SinkhornParams, TransportPlan};
use crate::rng::child_rng;

pub use solution::{
    cost_of_projected_solution, cost_of_solution, cost_with_support, solution_weights, support_points, weighted_center,
    Solution, SolutionEntry,
};

/// Settings for [`free_support_barycenter`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeSupportParams {
    /// Number of barycenter atoms.
    pub m: usize,
    pub p: f64,
    /// Inner solver: `reg`, inner iteration cap and marginal tolerance.
    pub sinkhorn: SinkhornParams,
    pub outer_iters: usize,
    /// Stop once the relative objective change drops below this.
    pub tol: f64,
    pub seed: u64,
}

impl FreeSupportParams {
    pub fn new(m: usize, p: f64, seed: u64) -> Self {
        Self { m, p, sinkhorn: SinkhornParams::new(1e-2, 1000), outer_iters: 50, tol: 1e-7, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarycenterResult {
    pub measure: DiscreteMeasure,
    /// Unregularised `Σ_i β_i ⟨T_i, C⟩` for the final couplings.
    pub cost: f64,
    /// Number of support updates performed.
    pub iterations_run: usize,
    pub converged: bool,
    /// Entropic objective `Σ_i β_i (⟨T_i, C⟩ + reg KL)` before each update.
    pub objective_trace: Vec<f64>,
    /// Atoms re-placed at a random data point after losing all mass.
    pub reseeded_atoms: usize,
    /// Whether every inner Sinkhorn solve met its tolerance.
    pub inner_converged: bool,
}

/// `m` distinct pooled data atoms chosen uniformly at random.
pub fn subsample_init(data: &Dataset, m: usize, seed: u64) -> Result<DiscreteMeasure> {
    let pool: Vec<&[f64]> = data.measures().iter().flat_map(|mu| mu.points()).collect();
    if m == 0 || m > pool.len() {
        return Err(Error::InvalidParameter { name: "m", value: m as f64 });
    }
    let mut rng = child_rng(seed, 0);
    let picks = index::sample(&mut rng, pool.len(), m);
    let pts: Vec<&[f64]> = picks.iter().map(|i| pool[i]).collect();
    DiscreteMeasure::from_points(&pts)
}

/// Fixed-weight free-support barycenter of `data`.
///
/// `init` supplies the starting support and weights; otherwise `m` pooled
/// data atoms are drawn without replacement using `params.seed`.
pub fn free_support_barycenter(
    data: &Dataset,
    params: &FreeSupportParams,
    init: Option<&DiscreteMeasure>,
) -> Result<BarycenterResult> {
    check_p(params.p)?;
    if params.m == 0 {
        return Err(Error::InvalidParameter { name: "m", value: 0.0 });
    }
    let dim = data.dim();
    let mut nu = match init {
        Some(m) if m.dim() != dim => return Err(Error::DimensionMismatch { expected: dim, found: m.dim() }),
        Some(m) if m.len() != params.m => return Err(Error::DimensionMismatch { expected: params.m, found: m.len() }),
        Some(m) => m.clone(),
        None => subsample_init(data, params.m, params.seed)?,
    };
    let mut reseed_rng = child_rng(params.seed, 1);
    let mut trace = Vec::new();
    let mut reseeded = 0;
    let mut iterations_run = 0;
    let mut converged = false;
    let mut inner_converged = true;

    let solve = |nu: &DiscreteMeasure, inner_converged: &mut bool| -> Result<(Vec<TransportPlan>, f64, f64)> {
        let mut plans = Vec::with_capacity(data.len());
        let (mut objective, mut cost) = (0.0, 0.0);
        for (beta, mu) in data.iter() {
            let out = sinkhorn_ot(mu, nu, params.p, &params.sinkhorn)?;
            *inner_converged &= out.converged;
            objective += beta * out.entropic_objective;
            cost += beta * out.plan.cost;
            plans.push(out.plan);
        }
        Ok((plans, objective, cost))
    };

    let (mut plans, objective, mut cost) = solve(&nu, &mut inner_converged)?;
    trace.push(objective);
    for _ in 0..params.outer_iters {
        let mut coords = Vec::with_capacity(params.m * dim);
        let mut wbuf = Vec::new();
        let mut cbuf = Vec::new();
        for j in 0..params.m {
            cbuf.clear();
            wbuf.clear();
            for ((beta, mu), plan) in data.iter().zip(&plans) {
                for l in 0..mu.len() {
                    let t = plan.get(l, j);
                    if t > 0.0 {
                        cbuf.extend_from_slice(mu.point(l));
                        wbuf.push(beta * t);
                    }
                }
            }
            let mass: f64 = wbuf.iter().sum();
            if mass > 1e-300 {
                coords.extend(weighted_center(dim, &cbuf, &wbuf, params.p)?);
            } else {
                let i = reseed_rng.random_range(0..data.len());
                let mu = data.measure(i);
                coords.extend_from_slice(mu.point(reseed_rng.random_range(0..mu.len())));
                reseeded += 1;
            }
        }
        nu = DiscreteMeasure::new(dim, coords, nu.weights().to_vec())?;
        iterations_run += 1;

        let prev = *trace.last().unwrap_or(&f64::INFINITY);
        let (new_plans, objective, new_cost) = solve(&nu, &mut inner_converged)?;
        plans = new_plans;
        cost = new_cost;
        trace.push(objective);
        if (prev - objective).abs() <= params.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(BarycenterResult {
        measure: nu,
        cost,
        iterations_run,
        converged,
        objective_trace: trace,
        reseeded_atoms: reseeded,
        inner_converged,
    })
}
