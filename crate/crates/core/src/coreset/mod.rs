//! Private coresets from noisy hierarchical histograms.
//!
//! The cube `[−1/2, 1/2]^d` is split dyadically: level `ℓ` has `2^ℓ` cells and
//! going from level `ℓ` to `ℓ + 1` halves every cell along axis `ℓ mod d`,
//! child `2c` taking the lower half of cell `c`. Atom counts at every level
//! receive discrete Laplace noise, are reconciled top-down into a consistent
//! nonnegative tree, and the leaf counts are turned back into points by
//! sampling inside each leaf cell.
//!
//! Replacing one atom changes two counts per level by one each, so a level
//! spending `ε_ℓ` uses noise scale `2 / ε_ℓ`. Levels compose sequentially.

use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{
    exponential_mechanism, sample_discrete_laplace, NoiseKind, NoiseSpec, PrivacyBudget, PrivacyLedger, Scope, Share,
    Strictness,
};
use crate::error::{Error, Result};
use crate::math::{floor, pow, round, sqrt};
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::{wasserstein_p, OtMethod};
use crate::region::RegionPolygon;
use crate::rng::{child_rng, derive_seed};

/// Counts change by at most this much per level when one atom is replaced.
pub const REPLACEMENT_SENSITIVITY: f64 = 2.0;

/// Rejection-sampling attempts per point before falling back to the region
/// point nearest the cell centre.
pub const REGION_REJECTION_CAP: usize = 1000;

/// How the budget is divided across the `L + 1` levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelAllocation {
    /// `ε / (L + 1)` per level.
    Uniform,
    /// Level `ℓ` gets a share proportional to `ratio^ℓ`.
    Geometric { ratio: u32 },
}

impl LevelAllocation {
    /// Exact shares for levels `0..=leaf_level`, summing to 1.
    pub fn shares(&self, leaf_level: u32) -> Result<Vec<Share>> {
        let count = leaf_level as u64 + 1;
        match *self {
            LevelAllocation::Uniform => Ok((0..count).map(|_| Share::new(1, count)).collect()),
            LevelAllocation::Geometric { ratio } => {
                if ratio == 0 {
                    return Err(Error::InvalidParameter { name: "ratio", value: 0.0 });
                }
                let r = ratio as u64;
                let weights: Vec<u64> = (0..count)
                    .map(|l| r.checked_pow(l as u32))
                    .collect::<Option<_>>()
                    .ok_or(Error::Invalid("geometric allocation overflows"))?;
                let total = weights.iter().try_fold(0u64, |a, w| a.checked_add(*w)).ok_or(Error::Invalid("geometric allocation overflows"))?;
                Ok(weights.into_iter().map(|w| Share::new(w, total)).collect())
            }
        }
    }
}

/// How points are placed inside a leaf cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellSampler {
    /// Uniform in the cell.
    Uniform,
    /// Uniform in the cell box scaled by `factor` about its centre.
    Scaled { factor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetConfig {
    pub epsilon: f64,
    /// Leaf level `L`; defaults to `⌈log₂(ε n)⌉`.
    pub levels: Option<u32>,
    pub sampler: CellSampler,
    /// Planar region that synthesized points must fall in (`d = 2` only).
    pub region: Option<RegionPolygon>,
    /// Uniformly subsample the synthesized atoms down to this many.
    pub subsample_to: Option<usize>,
    /// Scale on the calibrated Laplace noise: `1` strict, in `(0, 1)`
    /// heuristic, `0` disables noise.
    pub noise_multiplier: f64,
    pub allocation: LevelAllocation,
    pub seed: u64,
}

impl CoresetConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            levels: None,
            sampler: CellSampler::Uniform,
            region: None,
            subsample_to: None,
            noise_multiplier: 1.0,
            allocation: LevelAllocation::Uniform,
            seed,
        }
    }

    pub fn strictness(&self) -> Strictness {
        Strictness::from_multiplier(self.noise_multiplier)
    }
}

/// Counts for one level of the tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub level: u32,
    /// Exact counts; never used for synthesis and never serialized.
    #[serde(skip)]
    pub true_counts: Vec<u64>,
    pub noisy: Vec<f64>,
    pub reconciled: Vec<f64>,
    pub noise: NoiseSpec,
}

/// Noisy, reconciled counts for every level `0..=L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalCounts {
    pub dim: usize,
    /// Leaf level `L`.
    pub leaf_level: u32,
    pub levels: Vec<LevelCounts>,
}

/// One row of the exported tree: level, cell index and reconciled count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub level: u32,
    pub cell: usize,
    pub count: f64,
}

impl HierarchicalCounts {
    pub fn leaves(&self) -> &[f64] {
        &self.levels[self.leaf_level as usize].reconciled
    }

    pub fn records(&self) -> Vec<CountRecord> {
        self.levels
            .iter()
            .flat_map(|l| l.reconciled.iter().enumerate().map(move |(cell, &count)| CountRecord { level: l.level, cell, count }))
            .collect()
    }

    /// Rebuilds a tree from exported records (true counts unknown).
    pub fn from_records(dim: usize, records: &[CountRecord]) -> Result<Self> {
        let leaf_level = records.iter().map(|r| r.level).max().ok_or(Error::Invalid("no count records"))?;
        let mut levels: Vec<LevelCounts> = (0..=leaf_level)
            .map(|l| LevelCounts {
                level: l,
                true_counts: Vec::new(),
                noisy: alloc::vec![0.0; 1 << l],
                reconciled: alloc::vec![0.0; 1 << l],
                noise: NoiseSpec { kind: NoiseKind::DiscreteLaplace, scale: 0.0, multiplier: 0.0 },
            })
            .collect();
        for r in records {
            let lv = &mut levels[r.level as usize];
            if r.cell >= lv.reconciled.len() || !(r.count >= 0.0) {
                return Err(Error::Invalid("count record out of range"));
            }
            lv.reconciled[r.cell] = r.count;
            lv.noisy[r.cell] = r.count;
        }
        Ok(Self { dim, leaf_level, levels })
    }
}

/// `⌈log₂(ε n)⌉`, or 0 when `ε n ≤ 1`.
pub fn default_leaf_level(epsilon: f64, n: usize) -> u32 {
    let target = epsilon * n as f64;
    let mut l = 0u32;
    while l < 40 && ((1u64 << l) as f64) < target {
        l += 1;
    }
    l
}

/// Axis-aligned box `(lo, hi)` of `cell` at `level`.
pub fn cell_box(dim: usize, level: u32, cell: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = alloc::vec![-0.5; dim];
    let mut hi = alloc::vec![0.5; dim];
    for k in 0..level {
        let bit = (cell >> (level - 1 - k)) & 1;
        let axis = k as usize % dim;
        let mid = 0.5 * (lo[axis] + hi[axis]);
        if bit == 0 {
            hi[axis] = mid;
        } else {
            lo[axis] = mid;
        }
    }
    (lo, hi)
}

/// Diameter of a cell at `level`.
pub fn cell_diameter(dim: usize, level: u32) -> f64 {
    let mut s = 0.0;
    for axis in 0..dim {
        let halvings = (level as usize + dim - 1 - axis) / dim;
        let w = pow(0.5, halvings as f64);
        s += w * w;
    }
    sqrt(s)
}

/// Leaf cell containing `x` (points on a split go to the upper half).
pub fn leaf_index(x: &[f64], leaf_level: u32) -> usize {
    let dim = x.len();
    let mut lo = alloc::vec![-0.5; dim];
    let mut hi = alloc::vec![0.5; dim];
    let mut cell = 0usize;
    for k in 0..leaf_level {
        let axis = k as usize % dim;
        let mid = 0.5 * (lo[axis] + hi[axis]);
        cell <<= 1;
        if x[axis] >= mid {
            cell |= 1;
            lo[axis] = mid;
        } else {
            hi[axis] = mid;
        }
    }
    cell
}

fn check_input(measure: &DiscreteMeasure, config: &CoresetConfig) -> Result<()> {
    if !(config.epsilon > 0.0) || !config.epsilon.is_finite() {
        return Err(Error::InvalidParameter { name: "epsilon", value: config.epsilon });
    }
    if !(config.noise_multiplier >= 0.0) || !config.noise_multiplier.is_finite() {
        return Err(Error::InvalidParameter { name: "noise_multiplier", value: config.noise_multiplier });
    }
    if let CellSampler::Scaled { factor } = config.sampler {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidParameter { name: "factor", value: factor });
        }
    }
    if config.region.is_some() && measure.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: measure.dim() });
    }
    if !measure.has_uniform_weights() {
        return Err(Error::Invalid("private coresets need an empirical measure with uniform weights"));
    }
    measure.check_bounded()
}

/// Noisy counts at every level, reconciled into a consistent tree.
///
/// Returns the counts and a ledger whose charges compose to exactly
/// `config.epsilon`.
pub fn build_counts(measure: &DiscreteMeasure, config: &CoresetConfig) -> Result<(HierarchicalCounts, PrivacyLedger)> {
    check_input(measure, config)?;
    let dim = measure.dim();
    let leaf_level = config.levels.unwrap_or_else(|| default_leaf_level(config.epsilon, measure.len()));
    if leaf_level > 30 {
        return Err(Error::InvalidParameter { name: "levels", value: leaf_level as f64 });
    }
    let shares = config.allocation.shares(leaf_level)?;
    let mut ledger = PrivacyLedger::new(PrivacyBudget::pure(config.epsilon)?);

    let mut leaf_counts = alloc::vec![0u64; 1 << leaf_level];
    for x in measure.points() {
        leaf_counts[leaf_index(x, leaf_level)] += 1;
    }

    let mut rng = child_rng(config.seed, 0);
    let mut levels = Vec::with_capacity(leaf_level as usize + 1);
    for (l, share) in (0..=leaf_level).zip(&shares) {
        let shift = leaf_level - l;
        let mut true_counts = alloc::vec![0u64; 1 << l];
        for (leaf, c) in leaf_counts.iter().enumerate() {
            true_counts[leaf >> shift] += c;
        }
        let spent = ledger.charge(&level_label(l), Scope::Sequential, *share, Share::ZERO)?;
        let noise = NoiseSpec {
            kind: NoiseKind::DiscreteLaplace,
            scale: REPLACEMENT_SENSITIVITY / spent.epsilon,
            multiplier: config.noise_multiplier,
        };
        let noisy = true_counts
            .iter()
            .map(|&c| {
                let z = if noise.multiplier > 0.0 { sample_discrete_laplace(noise.effective_scale(), &mut rng)? } else { 0 };
                Ok(c as f64 + z as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        levels.push(LevelCounts { level: l, true_counts, noisy, reconciled: Vec::new(), noise });
    }
    reconcile(&mut levels);
    Ok((HierarchicalCounts { dim, leaf_level, levels }, ledger))
}

fn level_label(l: u32) -> String {
    alloc::format!("histogram level {l}")
}

/// Top-down: clip the root, then split every parent's count between its
/// children in proportion to their clipped noisy counts (evenly when both
/// clip to zero).
fn reconcile(levels: &mut [LevelCounts]) {
    levels[0].reconciled = alloc::vec![levels[0].noisy[0].max(0.0)];
    for l in 1..levels.len() {
        let (parents, rest) = levels.split_at_mut(l);
        let parent = &parents[l - 1].reconciled;
        let child = &mut rest[0];
        let mut rec = alloc::vec![0.0; child.noisy.len()];
        for (c, &r) in parent.iter().enumerate() {
            let a = child.noisy[2 * c].max(0.0);
            let b = child.noisy[2 * c + 1].max(0.0);
            if a + b > 0.0 {
                rec[2 * c] = r * a / (a + b);
                rec[2 * c + 1] = r * b / (a + b);
            } else {
                rec[2 * c] = 0.5 * r;
                rec[2 * c + 1] = 0.5 * r;
            }
        }
        child.reconciled = rec;
    }
}

/// Largest-remainder rounding of nonnegative reals to integers summing to
/// `round(Σ values)`. Ties go to the lower index.
pub fn largest_remainder(values: &[f64]) -> Vec<usize> {
    let total = round(values.iter().sum::<f64>()).max(0.0) as usize;
    let mut out: Vec<usize> = values.iter().map(|v| floor(v.max(0.0)) as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = values[a].max(0.0) - floor(values[a].max(0.0));
        let rb = values[b].max(0.0) - floor(values[b].max(0.0));
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Synthesizes a uniform-weight measure from the reconciled leaf counts.
///
/// Reads only the reconciled counts, never raw data. Each leaf draws from its
/// own stream derived from `config.seed`.
pub fn synthesize_measure(counts: &HierarchicalCounts, config: &CoresetConfig) -> Result<DiscreteMeasure> {
    if config.region.is_some() && counts.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: counts.dim });
    }
    let dim = counts.dim;
    let per_leaf = largest_remainder(counts.leaves());
    let total: usize = per_leaf.iter().sum();
    if total == 0 {
        return Err(Error::AllCountsZero);
    }
    let factor = match config.sampler {
        CellSampler::Uniform => 1.0,
        CellSampler::Scaled { factor } => factor,
    };
    let leaf_seed = derive_seed(config.seed, 1);
    let mut coords = Vec::with_capacity(total * dim);
    let mut x = alloc::vec![0.0; dim];
    for (leaf, &c) in per_leaf.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let (lo, hi) = cell_box(dim, counts.leaf_level, leaf);
        let center: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let half: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * factor * (b - a)).collect();
        let mut rng = child_rng(leaf_seed, leaf as u64);
        for _ in 0..c {
            let mut placed = false;
            let attempts = if config.region.is_some() { REGION_REJECTION_CAP } else { 1 };
            for _ in 0..attempts {
                for k in 0..dim {
                    let u: f64 = rng.random();
                    x[k] = center[k] + half[k] * (2.0 * u - 1.0);
                }
                if config.region.as_ref().is_none_or(|r| r.contains([x[0], x[1]])) {
                    placed = true;
                    break;
                }
            }
            if !placed {
                let r = config.region.as_ref().expect("rejection only fails with a region");
                let q = r.nearest_point([center[0], center[1]]);
                x[0] = q[0];
                x[1] = q[1];
            }
            coords.extend_from_slice(&x);
        }
    }
    DiscreteMeasure::uniform(dim, coords)
}

/// A private coreset with its accounting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coreset {
    pub measure: DiscreteMeasure,
    pub counts: HierarchicalCounts,
    pub ledger: PrivacyLedger,
    pub strictness: Strictness,
}

/// `build_counts` then `synthesize_measure`, with optional subsampling.
pub fn build_coreset(measure: &DiscreteMeasure, config: &CoresetConfig) -> Result<Coreset> {
    let (counts, ledger) = build_counts(measure, config)?;
    let mut out = synthesize_measure(&counts, config)?;
    if let Some(s) = config.subsample_to {
        if s == 0 {
            return Err(Error::InvalidParameter { name: "subsample_to", value: 0.0 });
        }
        if out.len() > s {
            let mut rng = child_rng(config.seed, 2);
            let keep: Vec<usize> = index::sample(&mut rng, out.len(), s).into_vec();
            out = out.restrict(&keep)?;
        }
    }
    Ok(Coreset { measure: out, counts, ledger, strictness: config.strictness() })
}

/// Result of [`whp_coreset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhpCoreset {
    pub measure: DiscreteMeasure,
    pub selected: usize,
    pub utilities: Vec<f64>,
    pub ledger: PrivacyLedger,
    pub strictness: Strictness,
}

/// Minimum number of trials for failure probability `ξ`: `⌈log₂(1/ξ)⌉`.
pub fn whp_min_trials(xi: f64) -> Result<usize> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidParameter { name: "xi", value: xi });
    }
    Ok(default_leaf_level(1.0 / xi, 1).max(1) as usize)
}

/// Runs `trials` independent coresets at `ε / (2 trials)` each and selects one
/// with the exponential mechanism at `ε / 2`, scoring candidates by
/// `−W₁(candidate, measure)` (sensitivity `1/n`).
///
/// `config.epsilon` is the total budget; `utility` computes the `W₁` scores.
pub fn whp_coreset(
    measure: &DiscreteMeasure,
    config: &CoresetConfig,
    xi: f64,
    trials: usize,
    utility: &OtMethod,
) -> Result<WhpCoreset> {
    let min = whp_min_trials(xi)?;
    if trials < min {
        return Err(Error::InvalidParameter { name: "trials", value: trials as f64 });
    }
    let mut ledger = PrivacyLedger::new(PrivacyBudget::pure(config.epsilon)?);
    let trial_share = Share::new(1, 2 * trials as u64);
    let mut candidates = Vec::with_capacity(trials);
    let mut utilities = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut c = config.clone();
        c.epsilon = trial_share.apply(config.epsilon);
        c.seed = derive_seed(config.seed, 100 + t as u64);
        let core = build_coreset(measure, &c)?;
        ledger.charge_composed(&alloc::format!("coreset trial {t}"), Scope::Sequential, trial_share, &core.ledger)?;
        utilities.push(-wasserstein_p(&core.measure, measure, 1.0, utility)?);
        candidates.push(core.measure);
    }
    let spent = ledger.charge("candidate selection", Scope::Sequential, Share::new(1, 2), Share::ZERO)?;
    let mut rng = child_rng(config.seed, 3);
    let selected = exponential_mechanism(&utilities, 1.0 / measure.len() as f64, spent.epsilon, &mut rng)?;
    Ok(WhpCoreset {
        measure: candidates.swap_remove(selected),
        selected,
        utilities,
        ledger,
        strictness: config.strictness(),
    })
}

/// Both sides of the cost-transfer inequality from data to coresets, plus
/// alternative right-hand sides for diagnosis.
///
/// With `a_i = W_p(μ_i, ν)`, `b_i = W_p(μ_i, μ'_i)` and `c_i = W_p(μ'_i, ν)`:
/// `lhs = Σ β_i c_i^p` and `rhs = Σ β_i a_i^p + p 2^{p−1} Σ β_i b_i^p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptTransfer {
    pub lhs: f64,
    /// `Σ β_i a_i^p`.
    pub cost: f64,
    pub rhs: f64,
    /// `Σ β_i (a_i + b_i)^p`, always a valid bound by the triangle inequality.
    pub rhs_triangle: f64,
    /// `Σ β_i (a_i^p + p 2^{p−1} b_i)`, valid for data of diameter at most 1.
    pub rhs_linear: f64,
}

impl OptTransfer {
    /// `lhs ≤ rhs + 1e-6`.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-6
    }
}

pub fn coreset_opt_transfer_check(data: &Dataset, coresets: &Dataset, nu: &DiscreteMeasure, p: f64) -> Result<OptTransfer> {
    if coresets.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), found: coresets.len() });
    }
    let method = OtMethod::exact_uncapped();
    let k = pow(2.0, p - 1.0) * p;
    let mut out = OptTransfer { lhs: 0.0, cost: 0.0, rhs: 0.0, rhs_triangle: 0.0, rhs_linear: 0.0 };
    for ((beta, mu), core) in data.iter().zip(coresets.measures()) {
        let a = wasserstein_p(mu, nu, p, &method)?;
        let b = wasserstein_p(mu, core, p, &method)?;
        let c = wasserstein_p(core, nu, p, &method)?;
        out.lhs += beta * pow(c, p);
        out.cost += beta * pow(a, p);
        out.rhs += beta * (pow(a, p) + k * pow(b, p));
        out.rhs_triangle += beta * pow(a + b, p);
        out.rhs_linear += beta * (pow(a, p) + k * b);
    }
    Ok(out)
}
