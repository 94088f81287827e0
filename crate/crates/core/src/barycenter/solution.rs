//! Barycenter solutions.
//!
//! A solution assigns to every barycenter atom `j` a set `S_j` of data atoms
//! `x` (atom `ℓ` of measure `i`) with fractions `w_j(x)`: the share of `x`'s
//! mass that is transported to atom `j`. For every data atom the fractions
//! sum to 1. Given a solution, each atom sits at the weighted `p`-center of
//! its set, and the induced cost upper bounds the barycenter objective.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jl::Projection;
use crate::math::{check_p, ground_cost, pow, sqrt};
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::OtMethod;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub measure: usize,
    pub atom: usize,
    /// Fraction of the data atom's mass assigned to this barycenter atom.
    pub weight: f64,
}

/// The sets `S_1, …, S_m` with their fractions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub sets: Vec<Vec<SolutionEntry>>,
}

impl Solution {
    /// Number of barycenter atoms `m`.
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Largest `|Σ_j w_j(x) − 1|` over the data atoms of `data`.
    pub fn mass_residual(&self, data: &Dataset) -> f64 {
        let mut sums: Vec<Vec<f64>> = data.measures().iter().map(|m| alloc::vec![0.0; m.len()]).collect();
        for e in self.sets.iter().flatten() {
            sums[e.measure][e.atom] += e.weight;
        }
        sums.iter().flatten().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Multiplies every fraction by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let sets = self
            .sets
            .iter()
            .map(|s| s.iter().map(|e| SolutionEntry { weight: e.weight * c, ..*e }).collect())
            .collect();
        Self { sets }
    }

    /// Rescales fractions so every data atom's fractions sum to 1.
    pub fn renormalized(&self, data: &Dataset) -> Self {
        let mut sums: Vec<Vec<f64>> = data.measures().iter().map(|m| alloc::vec![0.0; m.len()]).collect();
        for e in self.sets.iter().flatten() {
            sums[e.measure][e.atom] += e.weight;
        }
        let sets = self
            .sets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|e| {
                        let t = sums[e.measure][e.atom];
                        SolutionEntry { weight: if t > 0.0 { e.weight / t } else { e.weight }, ..*e }
                    })
                    .collect()
            })
            .collect();
        Self { sets }
    }
}

/// Reads a solution off optimal couplings from each `μ_i` to `candidate`:
/// `w_j(x_ℓ) = T_i[ℓ, j] / a_iℓ`.
pub fn solution_weights(candidate: &DiscreteMeasure, data: &Dataset, p: f64, method: &OtMethod) -> Result<Solution> {
    check_p(p)?;
    let m = candidate.len();
    let mut sets: Vec<Vec<SolutionEntry>> = alloc::vec![Vec::new(); m];
    for (i, mu) in data.measures().iter().enumerate() {
        let plan = match method {
            OtMethod::Exact { .. } if mu.dim() == 1 => crate::ot::quantile_plan_1d(mu, candidate, p)?,
            _ => method.plan(mu, candidate, p)?,
        };
        for l in 0..mu.len() {
            let a = mu.weight(l);
            if a <= 0.0 {
                continue;
            }
            for (j, &t) in plan.row(l).iter().enumerate() {
                if t > 0.0 {
                    sets[j].push(SolutionEntry { measure: i, atom: l, weight: t / a });
                }
            }
        }
    }
    Ok(Solution { sets })
}

/// Maximum iterations for the iterative `p`-center solvers.
const CENTER_MAX_ITERS: usize = 100_000;

/// Minimiser of `y ↦ Σ_r w_r ‖x_r − y‖^p` over points `x_r` stored row-major.
///
/// Closed form for `p = 2`, Weiszfeld with the Vardi-Zhang correction for
/// `p = 1`, gradient descent with backtracking otherwise. Iterative solvers
/// stop once the step falls below `1e-12` times the point spread.
pub fn weighted_center(dim: usize, coords: &[f64], weights: &[f64], p: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) {
        return Err(Error::Invalid("weighted center needs positive total weight"));
    }
    let mut mean = alloc::vec![0.0; dim];
    for (x, w) in coords.chunks_exact(dim).zip(weights) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    if p == 2.0 {
        return Ok(mean);
    }
    let spread = coords.chunks_exact(dim).map(|x| sqrt(crate::math::sq_dist(x, &mean))).fold(0.0, f64::max);
    if spread == 0.0 {
        return Ok(mean);
    }
    let tol = 1e-12 * spread;
    if p == 1.0 {
        Ok(weiszfeld(dim, coords, weights, mean, tol))
    } else {
        let y = descend(dim, coords, weights, p, mean, tol);
        Ok(newton_polish(dim, coords, weights, p, y))
    }
}

fn weiszfeld(dim: usize, coords: &[f64], weights: &[f64], mut y: Vec<f64>, tol: f64) -> Vec<f64> {
    let mut num = alloc::vec![0.0; dim];
    let mut r = alloc::vec![0.0; dim];
    for _ in 0..CENTER_MAX_ITERS {
        num.iter_mut().for_each(|v| *v = 0.0);
        r.iter_mut().for_each(|v| *v = 0.0);
        let (mut den, mut eta) = (0.0, 0.0);
        for (x, &w) in coords.chunks_exact(dim).zip(weights) {
            let d = sqrt(crate::math::sq_dist(x, &y));
            if d <= tol * 1e-3 {
                eta += w;
                continue;
            }
            den += w / d;
            for k in 0..dim {
                num[k] += w * x[k] / d;
                r[k] += w * (x[k] - y[k]) / d;
            }
        }
        if den == 0.0 {
            break;
        }
        let rn = crate::math::norm(&r);
        let gamma = if eta > 0.0 {
            if rn <= eta {
                break;
            }
            eta / rn
        } else {
            0.0
        };
        let mut step = 0.0;
        for k in 0..dim {
            let nk = (1.0 - gamma) * num[k] / den + gamma * y[k];
            step += (nk - y[k]) * (nk - y[k]);
            y[k] = nk;
        }
        if sqrt(step) <= tol {
            break;
        }
    }
    y
}

fn power_objective(dim: usize, coords: &[f64], weights: &[f64], p: f64, y: &[f64]) -> f64 {
    coords.chunks_exact(dim).zip(weights).map(|(x, w)| w * ground_cost(x, y, p)).sum()
}

fn descend(dim: usize, coords: &[f64], weights: &[f64], p: f64, mut y: Vec<f64>, tol: f64) -> Vec<f64> {
    let mut f = power_objective(dim, coords, weights, p, &y);
    let mut grad = alloc::vec![0.0; dim];
    let mut trial = alloc::vec![0.0; dim];
    let mut lr = 1.0;
    for _ in 0..CENTER_MAX_ITERS {
        power_gradient(dim, coords, weights, p, &y, &mut grad);
        let gn2: f64 = grad.iter().map(|g| g * g).sum();
        if gn2 == 0.0 {
            break;
        }
        lr *= 2.0;
        let accepted = loop {
            for k in 0..dim {
                trial[k] = y[k] - lr * grad[k];
            }
            let ft = power_objective(dim, coords, weights, p, &trial);
            if ft <= f - 0.5 * lr * gn2 {
                f = ft;
                break true;
            }
            lr *= 0.5;
            if lr * sqrt(gn2) < tol * 1e-3 {
                break false;
            }
        };
        if !accepted {
            break;
        }
        let step = lr * sqrt(gn2);
        core::mem::swap(&mut y, &mut trial);
        if step <= tol {
            break;
        }
    }
    y
}

fn power_gradient(dim: usize, coords: &[f64], weights: &[f64], p: f64, y: &[f64], grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for (x, &w) in coords.chunks_exact(dim).zip(weights) {
        let d = sqrt(crate::math::sq_dist(x, y));
        if d == 0.0 {
            continue;
        }
        let s = w * p * pow(d, p - 2.0);
        for k in 0..dim {
            grad[k] += s * (y[k] - x[k]);
        }
    }
}

/// Newton steps accepted only while the gradient norm shrinks. Descent stalls
/// once objective differences fall below rounding; this recovers the last
/// digits.
fn newton_polish(dim: usize, coords: &[f64], weights: &[f64], p: f64, mut y: Vec<f64>) -> Vec<f64> {
    let mut grad = alloc::vec![0.0; dim];
    let mut next_grad = alloc::vec![0.0; dim];
    let mut hess = alloc::vec![0.0; dim * dim];
    power_gradient(dim, coords, weights, p, &y, &mut grad);
    let mut gn: f64 = crate::math::norm(&grad);
    for _ in 0..50 {
        if gn == 0.0 {
            break;
        }
        hess.iter_mut().for_each(|h| *h = 0.0);
        for (x, &w) in coords.chunks_exact(dim).zip(weights) {
            let d = sqrt(crate::math::sq_dist(x, &y));
            if d == 0.0 {
                continue;
            }
            let s = w * p * pow(d, p - 2.0);
            let t = s * (p - 2.0) / (d * d);
            for a in 0..dim {
                hess[a * dim + a] += s;
                for b in 0..dim {
                    hess[a * dim + b] += t * (y[a] - x[a]) * (y[b] - x[b]);
                }
            }
        }
        let Some(step) = solve_dense(dim, &mut hess, &grad) else { break };
        let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a - b).collect();
        power_gradient(dim, coords, weights, p, &trial, &mut next_grad);
        let tn = crate::math::norm(&next_grad);
        if !(tn < gn) {
            break;
        }
        y = trial;
        core::mem::swap(&mut grad, &mut next_grad);
        gn = tn;
    }
    y
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(n: usize, a: &mut [f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if !(a[piv * n + col].abs() > 0.0) {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[r * n + k] -= f * a[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= a[col * n + k] * x[k];
        }
        x[col] = s / a[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Per-atom weighted points `(coords, weights)` with weights `β_i a_iℓ w_j(x)`.
fn gather(data: &Dataset, set: &[SolutionEntry]) -> (Vec<f64>, Vec<f64>) {
    let dim = data.dim();
    let mut coords = Vec::with_capacity(set.len() * dim);
    let mut weights = Vec::with_capacity(set.len());
    for e in set {
        let mu = data.measure(e.measure);
        coords.extend_from_slice(mu.point(e.atom));
        weights.push(data.betas()[e.measure] * mu.weight(e.atom) * e.weight);
    }
    (coords, weights)
}

/// Places every barycenter atom at the weighted `p`-center of its set. The
/// returned measure weights atom `j` by the data mass assigned to it.
pub fn support_points(data: &Dataset, solution: &Solution, p: f64) -> Result<DiscreteMeasure> {
    let dim = data.dim();
    let mut coords = Vec::with_capacity(solution.len() * dim);
    let mut masses = Vec::with_capacity(solution.len());
    for (j, set) in solution.sets.iter().enumerate() {
        let (c, w) = gather(data, set);
        let mass: f64 = w.iter().sum();
        if set.is_empty() || !(mass > 0.0) {
            return Err(Error::EmptyAtom { atom: j });
        }
        coords.extend(weighted_center(dim, &c, &w, p)?);
        masses.push(mass);
    }
    if masses.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    DiscreteMeasure::normalized(dim, coords, masses).map(|(m, _)| m)
}

/// `Σ_j Σ_{x ∈ S_j} β_i a_iℓ w_j(x) ‖x − ν_j‖^p` with `ν = support_points(…)`.
pub fn cost_of_solution(data: &Dataset, solution: &Solution, p: f64) -> Result<f64> {
    let nu = support_points(data, solution, p)?;
    Ok(cost_with_support(data, solution, &nu, p))
}

/// Solution cost against given atom locations.
pub fn cost_with_support(data: &Dataset, solution: &Solution, nu: &DiscreteMeasure, p: f64) -> f64 {
    let mut total = 0.0;
    for (j, set) in solution.sets.iter().enumerate() {
        let y = nu.point(j);
        for e in set {
            let mu = data.measure(e.measure);
            total += data.betas()[e.measure] * mu.weight(e.atom) * e.weight * ground_cost(mu.point(e.atom), y, p);
        }
    }
    total
}

/// Cost of the same solution after pushing every measure through `projection`.
pub fn cost_of_projected_solution(data: &Dataset, solution: &Solution, projection: &Projection, p: f64) -> Result<f64> {
    let projected = data.try_map(|m| projection.project_measure(m))?;
    cost_of_solution(&projected, solution, p)
}
