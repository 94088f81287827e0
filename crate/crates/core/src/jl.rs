//! Johnson-Lindenstrauss projections.
//!
//! A projection is a `d' × d` Gaussian matrix with i.i.d. `N(0, 1/d')`
//! entries. Projecting data before solving for a barycenter preserves the
//! cost of every barycenter solution up to a `1 ± γ` factor once
//! `d' ≳ C p⁴ γ⁻² ln(n / (γ ξ))`.

use alloc::vec::Vec;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::barycenter::{cost_of_projected_solution, cost_of_solution, solution_weights, subsample_init};
use crate::error::{Error, Result};
use crate::math::{ceil, ln, pow, sqrt};
use crate::measure::{Dataset, DiscreteMeasure};
use crate::ot::OtMethod;
use crate::rng::{child_rng, derive_seed};

/// Empirically calibrated constant for [`jl_dimension`] with `p = 2`.
///
/// Smallest value on the grid `{1e-4, 2e-4, …, 1e-2}` for which 90% of 300
/// instances of the default [`JlInstanceFamily`] keep the cost ratio inside
/// `[1/(1+γ), 1+γ]` at `γ = 0.2`, `ξ = 0.1` (run `examples/calibrate_jl.rs`).
/// It gives `d' = 5` there. Smaller `p` shrinks `p⁴` and needs recalibration.
pub const DEFAULT_JL_CONSTANT: f64 = 0.0014;

/// A linear map `ℝ^d → ℝ^{d'}`, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    rows: usize,
    cols: usize,
    matrix: Vec<f64>,
}

impl Projection {
    pub fn from_matrix(rows: usize, cols: usize, matrix: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("projection dimensions must be positive"));
        }
        if matrix.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: matrix.len() });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection matrix"));
        }
        Ok(Self { rows, cols, matrix })
    }

    pub fn identity(d: usize) -> Self {
        let mut matrix = alloc::vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        Self { rows: d, cols: d, matrix }
    }

    /// Gaussian projection with `N(0, 1/d')` entries.
    pub fn gaussian(d: usize, d_prime: usize, seed: u64) -> Result<Self> {
        sample_projection(d, d_prime, seed)
    }

    pub fn input_dim(&self) -> usize {
        self.cols
    }

    pub fn output_dim(&self) -> usize {
        self.rows
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.matrix.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rows];
        self.apply_into(x, &mut out);
        out
    }

    /// Push-forward `Π♯μ`: same weights, projected atoms.
    pub fn project_measure(&self, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        if mu.dim() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: mu.dim() });
        }
        mu.map_points(self.rows, |x, out| self.apply_into(x, out))
    }
}

/// Samples a `d' × d` Gaussian projection from `seed`.
pub fn sample_projection(d: usize, d_prime: usize, seed: u64) -> Result<Projection> {
    if d == 0 || d_prime == 0 {
        return Err(Error::Invalid("projection dimensions must be positive"));
    }
    let mut rng = child_rng(seed, 0);
    let s = 1.0 / sqrt(d_prime as f64);
    let matrix = (0..d * d_prime)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * s
        })
        .collect();
    Ok(Projection { rows: d_prime, cols: d, matrix })
}

pub fn project_measure(mu: &DiscreteMeasure, projection: &Projection) -> Result<DiscreteMeasure> {
    projection.project_measure(mu)
}

/// `⌈C p⁴ γ⁻² ln(n / (γ ξ))⌉` without clamping, at least 1.
pub fn jl_dimension_unclamped(p: f64, gamma: f64, xi: f64, n: f64, c: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter { name: "gamma", value: gamma });
    }
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::InvalidParameter { name: "xi", value: xi });
    }
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidParameter { name: "n", value: n });
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter { name: "C", value: c });
    }
    crate::math::check_p(p)?;
    let raw = c * pow(p, 4.0) / (gamma * gamma) * ln(n / (gamma * xi));
    Ok((ceil(raw).max(1.0)) as usize)
}

/// Target dimension `d'`, clamped to `[1, d]`.
pub fn jl_dimension(p: f64, gamma: f64, xi: f64, n: f64, c: f64, d: usize) -> Result<usize> {
    Ok(jl_dimension_unclamped(p, gamma, xi, n, c)?.clamp(1, d.max(1)))
}

/// A family of random instances on which projected solution costs are compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JlInstanceFamily {
    /// Ambient dimension.
    pub d: usize,
    /// Atoms per measure.
    pub n: usize,
    /// Measures per instance.
    pub k: usize,
    /// Barycenter atoms of the reference solution.
    pub m: usize,
    pub p: f64,
}

impl Default for JlInstanceFamily {
    fn default() -> Self {
        Self { d: 100, n: 32, k: 2, m: 4, p: 2.0 }
    }
}

/// Ratio `cost(Π S) / cost(S)` for one random instance.
///
/// The instance has `k` measures of `n` atoms drawn uniformly from the
/// radius-1/2 ball in `ℝ^d`; `S` is the optimal-transport solution onto `m`
/// atoms subsampled from the data.
pub fn jl_cost_ratio(family: &JlInstanceFamily, d_prime: usize, seed: u64) -> Result<f64> {
    let mut rng = child_rng(seed, 0);
    let measures = (0..family.k)
        .map(|_| crate::synth::uniform_ball(family.n, family.d, 0.5, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::new(measures)?;
    let candidate = subsample_init(&data, family.m, derive_seed(seed, 1))?;
    let solution = solution_weights(&candidate, &data, family.p, &OtMethod::exact_uncapped())?;
    let projection = sample_projection(family.d, d_prime, derive_seed(seed, 2))?;
    let base = cost_of_solution(&data, &solution, family.p)?;
    let projected = cost_of_projected_solution(&data, &solution, &projection, family.p)?;
    Ok(projected / base)
}

/// Fraction of `trials` ratios inside `[1/(1+γ), 1+γ]` at the dimension that
/// constant `c` prescribes (with `ξ` as the failure probability).
pub fn jl_pass_rate(family: &JlInstanceFamily, gamma: f64, xi: f64, c: f64, trials: usize, seed: u64) -> Result<f64> {
    let d_prime = jl_dimension(family.p, gamma, xi, family.n as f64, c, family.d)?;
    let mut pass = 0;
    for t in 0..trials {
        let r = jl_cost_ratio(family, d_prime, derive_seed(seed, t as u64))?;
        if r >= 1.0 / (1.0 + gamma) && r <= 1.0 + gamma {
            pass += 1;
        }
    }
    Ok(pass as f64 / trials.max(1) as f64)
}

/// Smallest constant among `candidates` (tried in increasing order) whose
/// pass rate reaches `target`.
pub fn calibrate_jl_constant(
    family: &JlInstanceFamily,
    gamma: f64,
    xi: f64,
    candidates: &[f64],
    trials: usize,
    target: f64,
    seed: u64,
) -> Result<Option<f64>> {
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    for c in sorted {
        if jl_pass_rate(family, gamma, xi, c, trials, seed)? >= target {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_formula() {
        // C = 1, p = 1, γ = 1, ξ = 1/e, n = e gives ⌈ln(e²)⌉ = 2.
        let e = core::f64::consts::E;
        assert_eq!(jl_dimension_unclamped(1.0, 1.0, 1.0 / e, e, 1.0).unwrap(), 2);
        assert_eq!(jl_dimension(2.0, 0.1, 0.1, 1000.0, 1.0, 5).unwrap(), 5);
        assert_eq!(jl_dimension(1.0, 0.9, 0.5, 1.0, 1e-6, 5).unwrap(), 1);
        assert!(jl_dimension(2.0, 0.0, 0.1, 10.0, 1.0, 5).is_err());
    }

    #[test]
    fn identity_projection_is_exact() {
        let mu = DiscreteMeasure::from_points(&[[0.1, 0.2, 0.3], [0.0, -0.1, 0.2]]).unwrap();
        assert_eq!(Projection::identity(3).project_measure(&mu).unwrap(), mu);
    }

    #[test]
    fn entries_have_variance_one_over_d_prime() {
        let p = sample_projection(200, 50, 3).unwrap();
        let n = p.matrix().len() as f64;
        let mean: f64 = p.matrix().iter().sum::<f64>() / n;
        let var: f64 = p.matrix().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var * 50.0 - 1.0).abs() < 0.05, "{var}");
    }
}
